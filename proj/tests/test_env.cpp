#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cvxq/env/system.hpp"
#include "cvxq/env/transforms.hpp"
#include "cvxq/oracles/value_iteration.hpp"
#include "support/finite_models.hpp"

using namespace cvxq;
using env::FiniteSystem;
using env::MountainCarSystem;

TEST_CASE("mountain car: velocity-first update from the origin") {
  MountainCarSystem mc;
  Eigen::VectorXd x(2);
  x << 0.0, 0.0;
  const auto nx = mc.step(x, Eigen::VectorXd::Constant(1, 1.0));
  // v' = 0.001 - 0.0025 cos(0) = -0.0015, z' = -0.0015
  CHECK(nx[1] == doctest::Approx(-0.0015).epsilon(1e-14));
  CHECK(nx[0] == doctest::Approx(-0.0015).epsilon(1e-14));
}

TEST_CASE("mountain car: goal state is absorbing with zero cost") {
  MountainCarSystem mc;
  Eigen::VectorXd goal(2);
  goal << 0.5, 0.0;
  for (double u : {-1.0, 1.0}) {
    const auto nx = mc.step(goal, Eigen::VectorXd::Constant(1, u));
    CHECK(nx == goal);
    CHECK(mc.cost(goal, Eigen::VectorXd::Constant(1, u)) == 0.0);
  }
}

TEST_CASE("mountain car: wall clip resets velocity and projection stays in the box") {
  MountainCarSystem mc;
  Eigen::VectorXd x(2);
  x << -1.1995, -0.06;
  const auto nx = mc.step(x, Eigen::VectorXd::Constant(1, -1.0));
  CHECK(nx[0] == doctest::Approx(-1.2));
  CHECK(nx[1] == 0.0);

  // long greedy-toward-wall run never leaves the declared box
  Eigen::VectorXd s(2);
  s << -0.5, 0.0;
  for (int k = 0; k < 2000; ++k) {
    s = mc.step(s, Eigen::VectorXd::Constant(1, k % 7 < 3 ? -1.0 : 1.0));
    CHECK(s[0] >= mc.params().z_min - 1e-15);
    CHECK(s[0] <= mc.params().z_goal + 1e-15);
    CHECK(std::abs(s[1]) <= mc.params().v_bar + 1e-15);
  }
}

TEST_CASE("mountain car: inadmissible input is rejected with a diagnostic") {
  MountainCarSystem mc;
  Eigen::VectorXd x(2);
  x << 0.0, 0.0;
  CHECK_THROWS_AS(mc.step(x, Eigen::VectorXd::Constant(1, 0.5)), Error);
}

TEST_CASE("equilibrium is a fixed point for every system") {
  auto chain = testor::chain_system(4);
  CHECK(chain->step(chain->equilibrium_state(), chain->equilibrium_input()) ==
        chain->equilibrium_state());
  env::LqrSystem lqr(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Ones(2, 1),
                     Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1));
  CHECK(lqr.step(lqr.equilibrium_state(), lqr.equilibrium_input()) == lqr.equilibrium_state());
}

TEST_CASE("finite system validates its tables") {
  // successor out of range
  CHECK_THROWS_AS(FiniteSystem(2, 1, {0, 5}, {0.0, 1.0}, 0, 0), Error);
  // equilibrium not a fixed point
  CHECK_THROWS_AS(FiniteSystem(2, 1, {1, 0}, {0.0, 1.0}, 0, 0), Error);
  // nonzero equilibrium cost
  CHECK_THROWS_AS(FiniteSystem(2, 1, {0, 1}, {1.0, 0.0}, 0, 0), Error);
}

TEST_CASE("spp transform: target routes to the graveyard and charges terminal cost") {
  auto chain = testor::chain_system(5);
  std::set<Index> target = {2};
  VectorXd j0 = VectorXd::Constant(5, 3.5);
  auto spp = env::to_total_cost_spp(*chain, target, j0);
  const auto& sys = *spp.system;

  // from the target, any input goes to the graveyard at terminal cost
  for (Index a = 0; a < sys.num_inputs(); ++a) {
    CHECK(sys.next_at(2, a) == spp.graveyard);
    CHECK(sys.cost_at(2, a) == 3.5);
    CHECK(sys.next_at(spp.graveyard, a) == spp.graveyard);
    CHECK(sys.cost_at(spp.graveyard, a) == 0.0);
  }
}

TEST_CASE("spp transform: target = everything makes the value the terminal cost") {
  auto chain = testor::chain_system(3);
  std::set<Index> target = {0, 1, 2};
  VectorXd j0(3);
  j0 << 7.0, 8.0, 9.0;
  auto spp = env::to_total_cost_spp(*chain, target, j0);
  auto vi = oracles::value_iteration(*spp.system);
  CHECK(vi.J[0] == doctest::Approx(7.0));
  CHECK(vi.J[1] == doctest::Approx(8.0));
  CHECK(vi.J[2] == doctest::Approx(9.0));
}

TEST_CASE("spp transform: rollout cost matches the discounted objective") {
  auto chain = testor::chain_system(6);
  std::set<Index> target = {0};
  VectorXd j0 = VectorXd::Constant(6, 2.0);
  auto spp = env::to_total_cost_spp(*chain, target, j0);
  const double gamma = 0.9;

  // simulate the transformed plant from state 4 under the "step left" input
  Index s = 4;
  double total = 0.0, discount = 1.0;
  Index s_aug = 4;
  for (int k = 0; k < 50; ++k) {
    total += discount * spp.system->cost_at(s_aug, 0);
    s_aug = spp.system->next_at(s_aug, 0);
    discount *= gamma;
  }
  // directly: 4 unit steps to reach the target, then the terminal cost
  double expected = 0.0;
  discount = 1.0;
  for (int k = 0; k < 4; ++k) {
    expected += discount * chain->cost_at(s, 0);
    s = chain->next_at(s, 0);
    discount *= gamma;
  }
  expected += discount * j0[0];
  CHECK(total == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("finite-horizon transform: boundary conditions and brute force") {
  auto chain = testor::chain_system(3);
  const Index K = 2;
  auto fh = env::to_total_cost_finite_horizon(*chain, K);
  auto vi = oracles::value_iteration(*fh.system);

  // at the horizon the value is the one-step minimal cost
  for (Index s = 0; s < 3; ++s) {
    double cbar = kInf;
    for (Index a = 0; a < chain->num_inputs(); ++a) cbar = std::min(cbar, chain->cost_at(s, a));
    CHECK(vi.J[fh.index_of(s, K)] == doctest::Approx(cbar));
    // beyond the horizon all costs vanish
    CHECK(vi.J[fh.index_of(s, K + 1)] == doctest::Approx(0.0));
  }

  // clock-0 value matches brute-force enumeration over K+1 inputs
  for (Index s = 0; s < 3; ++s) {
    double best = kInf;
    const Index A = chain->num_inputs();
    for (Index a0 = 0; a0 < A; ++a0)
      for (Index a1 = 0; a1 < A; ++a1)
        for (Index a2 = 0; a2 < A; ++a2) {
          Index x = s;
          double c = chain->cost_at(x, a0);
          x = chain->next_at(x, a0);
          c += chain->cost_at(x, a1);
          x = chain->next_at(x, a1);
          c += chain->cost_at(x, a2);
          best = std::min(best, c);
        }
    CHECK(vi.J[fh.index_of(s, 0)] == doctest::Approx(best));
  }
}

TEST_CASE("discount descriptor validates its range") {
  CHECK_THROWS_AS(env::apply_discount(0.0), Error);
  CHECK_THROWS_AS(env::apply_discount(1.5), Error);
  CHECK(env::apply_discount(1.0).gamma == 1.0);
  CHECK(env::apply_discount(0.9).gamma == 0.9);
}

TEST_CASE("discounted value on a 2-state system matches the geometric series") {
  // state 1 pays cost 1 and stays; state 0 absorbs at zero cost
  auto sys = std::make_shared<FiniteSystem>(2, 1, std::vector<Index>{0, 1},
                                            std::vector<double>{0.0, 1.0}, 0, 0);
  const double gamma = 0.9;
  auto vi = oracles::value_iteration(*sys, 1e-13, gamma);
  CHECK(vi.J[1] == doctest::Approx(1.0 / (1.0 - gamma)).epsilon(1e-9));
  CHECK(vi.J[0] == doctest::Approx(0.0));
}
