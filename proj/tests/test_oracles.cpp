#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cvxq/oracles/certificate.hpp"
#include "cvxq/oracles/lqr.hpp"
#include "cvxq/oracles/mc_grid.hpp"
#include "cvxq/oracles/value_iteration.hpp"
#include "support/finite_models.hpp"

using namespace cvxq;
using env::LqrSystem;

namespace {

LqrSystem scalar_lqr() {
  return LqrSystem(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1),
                   Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
}

}  // namespace

TEST_CASE("value iteration: zero costs give zero values") {
  env::FiniteSystem sys(3, 1, {1, 2, 2}, {0.0, 0.0, 0.0}, 2, 0);
  auto vi = oracles::value_iteration(sys);
  CHECK(vi.J.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("value iteration: 3-state chain has J = (0, 1, 2)") {
  auto chain = testor::chain_system(3);
  auto vi = oracles::value_iteration(*chain);
  CHECK(vi.J[0] == doctest::Approx(0.0));
  CHECK(vi.J[1] == doctest::Approx(1.0));
  CHECK(vi.J[2] == doctest::Approx(2.0));
  CHECK(vi.residual <= 1e-10);
  CHECK(vi.policy[1] == 0);
  CHECK(vi.policy[2] == 0);
}

TEST_CASE("value iteration: unreachable goal is detected") {
  // state 1 loops on itself at positive cost under every action
  env::FiniteSystem sys(2, 1, {0, 1}, {0.0, 1.0}, 0, 0);
  CHECK_THROWS_AS(oracles::value_iteration(sys), Error);
}

TEST_CASE("riccati: scalar golden-ratio fixed point and hand iterates") {
  auto lqr = scalar_lqr();
  // hand iterates from M0 = 0: 1, 1.5, 1.6
  MatrixXd M = MatrixXd::Zero(1, 1);
  auto step = [&](const MatrixXd& Mk) {
    return lqr.S() + lqr.F().transpose() * Mk * lqr.F() -
           lqr.F().transpose() * Mk * lqr.G() *
               (lqr.R() + lqr.G().transpose() * Mk * lqr.G()).inverse() *
               lqr.G().transpose() * Mk * lqr.F();
  };
  M = step(M);
  CHECK(M(0, 0) == doctest::Approx(1.0));
  M = step(M);
  CHECK(M(0, 0) == doctest::Approx(1.5));
  M = step(M);
  CHECK(M(0, 0) == doctest::Approx(1.6));

  const MatrixXd Mstar = oracles::riccati_solve(lqr);
  CHECK(Mstar(0, 0) == doctest::Approx(0.5 * (1.0 + std::sqrt(5.0))).epsilon(1e-10));

  // ARE residual
  const MatrixXd res = step(Mstar) - Mstar;
  CHECK(res.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("riccati: F = 0 gives M = S") {
  LqrSystem lqr(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Ones(2, 1),
                4.0 * Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1));
  const MatrixXd M = oracles::riccati_solve(lqr);
  CHECK((M - lqr.S()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("riccati: unstabilizable system is reported") {
  // x+ = 2x with no control authority
  LqrSystem lqr(2.0 * Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1),
                Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
  CHECK_THROWS_AS(oracles::riccati_solve(lqr), Error);
}

TEST_CASE("q matrices: zero M gives the cost blocks; golden case; symmetry") {
  auto lqr = scalar_lqr();
  auto [MJ0, MQ0] = oracles::lqr_q_matrices(MatrixXd::Zero(1, 1), lqr);
  CHECK(MQ0(0, 0) == 1.0);
  CHECK(MQ0(1, 1) == 1.0);
  CHECK(MQ0(0, 1) == 0.0);

  const double golden = 0.5 * (1.0 + std::sqrt(5.0));
  auto [MJ, MQ] = oracles::lqr_q_matrices(MatrixXd::Constant(1, 1, golden), lqr);
  CHECK(MQ(0, 0) == doctest::Approx(1.0 + golden));
  CHECK(MQ(0, 1) == doctest::Approx(golden));
  CHECK(MQ(1, 0) == doctest::Approx(golden));
  CHECK(MQ(1, 1) == doctest::Approx(1.0 + golden));
  CHECK((MQ - MQ.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(MJ(0, 0) == doctest::Approx(golden));
  CHECK(MJ(1, 1) == 0.0);
}

TEST_CASE("gridded matrix program: scalar system matches the golden ratio") {
  auto lqr = scalar_lqr();
  const MatrixXd grid = oracles::sphere_directions(2, 512);
  const MatrixXd Mhat = oracles::lqr_sdp_gridded(lqr, grid, 1e-9);
  CHECK(Mhat(0, 0) == doctest::Approx(0.5 * (1.0 + std::sqrt(5.0))).epsilon(1e-4));

  // the solution is feasible for every sampled direction
  auto [MJ, MQ] = oracles::lqr_q_matrices(Mhat, lqr);
  for (Index i = 0; i < grid.cols(); ++i) {
    const VectorXd z = grid.col(i);
    CHECK(z.dot((MQ - MJ) * z) >= -1e-8);
  }
}

TEST_CASE("gridded matrix program: densifying shrinks the trace gap monotonely") {
  auto lqr = scalar_lqr();
  const double exact = 0.5 * (1.0 + std::sqrt(5.0));
  double prev_gap = kInf;
  for (Index count : {64, 256, 1024}) {
    const MatrixXd Mhat = oracles::lqr_sdp_gridded(lqr, oracles::sphere_directions(2, count));
    const double gap = Mhat.trace() - exact;
    CHECK(gap >= -1e-7);  // sampled relaxation upper-bounds the true optimum
    CHECK(gap <= prev_gap + 1e-9);
    prev_gap = gap;
  }
}

TEST_CASE("gridded matrix program: missing input directions leave it unbounded") {
  auto lqr = scalar_lqr();
  MatrixXd grid(2, 8);
  for (Index i = 0; i < 8; ++i) {
    grid(0, i) = (i % 2 == 0) ? 1.0 : -1.0;  // x directions only
    grid(1, i) = 0.0;
  }
  CHECK_THROWS_AS(oracles::lqr_sdp_gridded(lqr, grid), Error);
}

TEST_CASE("trace objective equals the value at the standard basis vectors") {
  std::mt19937 rng(4);
  std::normal_distribution<double> g;
  MatrixXd F(2, 2), G(2, 1);
  F << 0.5, 0.1, -0.2, 0.7;
  G << 1.0, 0.5;
  LqrSystem lqr(F, G, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1));
  const MatrixXd M = oracles::riccati_solve(lqr);
  double sum = 0.0;
  for (Index i = 0; i < 2; ++i) sum += VectorXd::Unit(2, i).dot(M * VectorXd::Unit(2, i));
  CHECK(sum == doctest::Approx(M.trace()).epsilon(1e-12));
}

TEST_CASE("dplp certificate: optimal pair is feasible and tight") {
  std::mt19937 rng(6);
  auto sys = testor::random_system(7, 2, rng);
  auto vi = oracles::value_iteration(*sys);
  auto rep = oracles::dplp_certificate(*sys, vi.J, vi.Q);
  CHECK(rep.feasible);
  CHECK(rep.dominated);
  CHECK(std::abs(rep.max_excess) <= 1e-9);
}

TEST_CASE("dplp certificate: uniformly lowered values stay feasible but dominated") {
  auto chain = testor::chain_system(5);
  auto vi = oracles::value_iteration(*chain);
  VectorXd J = vi.J;
  MatrixXd Q = vi.Q;
  for (Index s = 0; s < 5; ++s) {
    if (s == chain->eq_state_index()) continue;
    J[s] -= 1.0;
    for (Index a = 0; a < 2; ++a) Q(s, a) -= 1.0;
  }
  auto rep = oracles::dplp_certificate(*chain, J, Q);
  CHECK(rep.feasible);
  CHECK(rep.dominated);
  // strictly below the optimum away from the equilibrium
  CHECK(J[3] == doctest::Approx(vi.J[3] - 1.0));
}

TEST_CASE("dplp certificate: Q below J is flagged infeasible") {
  auto chain = testor::chain_system(4);
  auto vi = oracles::value_iteration(*chain);
  MatrixXd Q = vi.Q;
  Q(2, 1) = vi.J[2] - 0.5;
  auto rep = oracles::dplp_certificate(*chain, vi.J, Q);
  CHECK(!rep.feasible);
  CHECK(rep.worst_lower > 0.4);
}

TEST_CASE("dplp certificate: tightened lower bound with rho") {
  auto chain = testor::chain_system(4);
  auto vi = oracles::value_iteration(*chain);
  // the optimal pair satisfies Q = c + J(F), so it passes any rho in [0, 1]
  auto rep = oracles::dplp_certificate(*chain, vi.J, vi.Q, 1e-9, 0.5);
  CHECK(rep.feasible);
  // shaving Q below (1 - rho) c + J(F) violates the tightened constraint
  MatrixXd Q = vi.Q;
  Q(3, 0) -= 0.9;
  auto rep2 = oracles::dplp_certificate(*chain, vi.J, Q, 1e-9, 0.5);
  CHECK(!rep2.feasible);
  CHECK(rep2.worst_tightened > 0.0);
}

TEST_CASE("mountain car reference grid solves to a sane value surface") {
  env::MountainCarSystem mc;
  oracles::McGrid grid(mc, 0.041, 0.001);  // the reference resolution
  auto vi = oracles::value_iteration(grid.system(), 1e-9);
  CHECK(vi.residual <= 1e-9);
  // goal region is free; far-left states need many steps
  VectorXd near_goal(2), far(2);
  near_goal << 0.48, 0.06;
  far << -0.5, 0.0;
  CHECK(grid.value_at(near_goal, vi.J) <= 10.0);
  CHECK(grid.value_at(far, vi.J) >= 30.0);
  CHECK(grid.value_at(mc.equilibrium_state(), vi.J) == 0.0);
}
