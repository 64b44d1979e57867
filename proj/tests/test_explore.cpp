#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <set>

#include "cvxq/env/system.hpp"
#include "cvxq/explore/rollout.hpp"
#include "support/finite_models.hpp"

using namespace cvxq;
using explore::ProbeSignal;
using explore::Trajectory;

TEST_CASE("probe: bounded by the amplitude sum and reproducible") {
  auto probe = ProbeSignal::standard(0.9);
  const double bound = probe.bound();
  CHECK(bound == doctest::Approx(0.9));
  auto probe2 = ProbeSignal::standard(0.9);
  for (Index k = 0; k < 5000; ++k) {
    CHECK(std::abs(probe.value(k)[0]) <= bound + 1e-15);
    CHECK(probe.value(k) == probe2.value(k));
  }
}

TEST_CASE("probe: markov cursor agrees with the closed form for sinusoids") {
  auto probe = ProbeSignal::sinusoids({0.1, 0.37}, {1.0, 0.5}, {0.2, 0.9});
  auto cur = probe.cursor();
  for (Index k = 0; k < 200; ++k) {
    CHECK(cur.current() == probe.value(k));
    cur.advance();
  }
}

TEST_CASE("equilibrium-pinned rollout has zero costs") {
  auto chain = testor::chain_system(5);
  auto traj = explore::rollout(*chain, explore::constant_policy(chain->equilibrium_input()),
                               ProbeSignal::standard(), chain->equilibrium_state(), 100);
  CHECK(traj.size() == 100);
  CHECK(traj.costs().maxCoeff() == 0.0);
  for (Index k = 0; k < traj.size(); ++k)
    CHECK(traj[k].xnext == chain->equilibrium_state());
}

TEST_CASE("mountain car relay rollout reaches the goal") {
  env::MountainCarSystem mc;
  VectorXd x0(2);
  x0 << -0.5, 0.0;
  auto traj = explore::rollout(mc, explore::relay_policy(), ProbeSignal::standard(0.01), x0,
                               10000);
  bool reached = false;
  for (Index k = 0; k < traj.size() && !reached; ++k)
    reached = traj[k].xnext[0] >= mc.params().z_goal - 1e-12;
  CHECK(reached);
  CHECK(traj.replays(mc));
}

TEST_CASE("cycling probe visits every state-action pair of a recurrent model") {
  auto ring = testor::ring_system(5);
  auto traj = explore::rollout(*ring, explore::cycling_policy(ring->num_inputs()),
                               ProbeSignal::counter(), env::FiniteSystem::state_vector(0),
                               5 * 2 * 16);
  std::set<std::pair<Index, Index>> seen;
  for (Index k = 0; k < traj.size(); ++k) {
    seen.insert({env::FiniteSystem::state_index(traj[k].x),
                 env::FiniteSystem::input_index(traj[k].u)});
  }
  // reachability bound: every pair within |X||U| * mixing steps
  CHECK(seen.size() == 5 * 2);
}

TEST_CASE("rollout aborts on an inadmissible policy output") {
  auto chain = testor::chain_system(3);
  auto bad = [](const VectorXd&, const VectorXd&) { return VectorXd::Constant(1, 9.0); };
  CHECK_THROWS_AS(
      explore::rollout(*chain, bad, ProbeSignal::standard(), chain->equilibrium_state(), 5),
      Error);
}

TEST_CASE("ergodic averages: constants, sinusoid bound, pinned costs") {
  auto chain = testor::chain_system(3);
  auto traj = explore::rollout(*chain, explore::constant_policy(chain->equilibrium_input()),
                               ProbeSignal::standard(), chain->equilibrium_state(), 400);

  CHECK(explore::ergodic_average_scalar(traj, [](const explore::Sample&) { return 1.0; }) ==
        doctest::Approx(1.0));
  CHECK(explore::ergodic_average_scalar(traj, [](const explore::Sample& s) { return s.c; }) ==
        doctest::Approx(0.0));

  // geometric-sum bound for a pure sinusoid: |(1/N) sum sin(w k)| <= 2/(N |1 - e^{iw}|)
  const double w = 2.0 * std::numbers::pi * std::sqrt(2.0) / 50.0;
  for (Index n : {100, 1000, 10000}) {
    double acc = 0.0;
    for (Index k = 0; k < n; ++k) acc += std::sin(w * double(k));
    const double bound = 2.0 / (double(n) * std::abs(1.0 - std::polar(1.0, w)));
    CHECK(std::abs(acc / double(n)) <= bound + 1e-12);
  }
}

TEST_CASE("ergodic averages over doubled windows are Cauchy") {
  env::MountainCarSystem mc;
  VectorXd x0(2);
  x0 << -0.5, 0.0;
  auto traj = explore::rollout(mc, explore::relay_policy(), ProbeSignal::standard(0.02), x0,
                               20000);
  auto window_avg = [&](Index n) {
    double acc = 0.0;
    for (Index k = 0; k < n; ++k) acc += traj[k].x[0];
    return acc / double(n);
  };
  const double a1 = window_avg(10000);
  const double a2 = window_avg(20000);
  CHECK(std::abs(a1 - a2) <= 0.05);  // O(1/N) with a generous constant
}

TEST_CASE("multi-start rollouts keep per-tuple replayability") {
  env::MountainCarSystem mc;
  VectorXd a(2), b(2);
  a << -0.5, 0.0;
  b << -1.0, 0.02;
  auto traj = explore::rollout_multi(mc, explore::relay_policy(), ProbeSignal::standard(0.01),
                                     {a, b}, 500);
  CHECK(traj.size() == 1000);
  CHECK(traj.replays(mc));
}

TEST_CASE("reproducibility: identical setup gives bit-identical trajectories") {
  env::MountainCarSystem mc;
  VectorXd x0(2);
  x0 << -0.4, 0.01;
  auto t1 = explore::rollout(mc, explore::relay_policy(), ProbeSignal::standard(0.05), x0, 3000);
  auto t2 = explore::rollout(mc, explore::relay_policy(), ProbeSignal::standard(0.05), x0, 3000);
  CHECK(t1.states() == t2.states());
  CHECK(t1.inputs() == t2.inputs());
  CHECK(t1.costs() == t2.costs());
  CHECK(t1.next_states() == t2.next_states());
}
