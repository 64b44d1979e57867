#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "cvxq/explore/probe.hpp"
#include "cvxq/explore/trajectory.hpp"

namespace cvxq::explore {

/// State feedback with perturbation: u(k) = phi(x(k), xi(k)).
using ExplorationPolicy = std::function<VectorXd(const VectorXd& x, const VectorXd& xi)>;

inline ExplorationPolicy constant_policy(VectorXd u) {
  return [u = std::move(u)](const VectorXd&, const VectorXd&) { return u; };
}

/// Relay feedback for two-input plants: u = sign(x[coord] + xi[0]), with ties
/// resolved to +1. The Mountain Car default pumps energy in the direction of
/// travel, perturbed by the probe.
inline ExplorationPolicy relay_policy(Index coord = 1) {
  return [coord](const VectorXd& x, const VectorXd& xi) {
    return VectorXd::Constant(1, (x[coord] + xi[0] >= 0.0) ? 1.0 : -1.0);
  };
}

/// Cycles through a finite input list as the (counter) probe advances.
inline ExplorationPolicy cycling_policy(Index num_inputs) {
  return [num_inputs](const VectorXd&, const VectorXd& xi) {
    const auto k = static_cast<long long>(std::llround(xi[0]));
    return VectorXd::Constant(1, double(k % num_inputs));
  };
}

/// Experimental: follows `greedy` except on a deterministic probe stripe of
/// width eps, where `base` explores instead. Stability of parameter-dependent
/// exploration is unsettled; prefer the plain policies for training runs.
inline ExplorationPolicy epsilon_greedy_policy(ExplorationPolicy greedy, ExplorationPolicy base,
                                               double eps, double probe_bound) {
  require(eps >= 0.0 && eps <= 1.0, "epsilon_greedy_policy: eps in [0,1]");
  return [=](const VectorXd& x, const VectorXd& xi) {
    const double level = 0.5 * (1.0 + xi[0] / std::max(probe_bound, 1e-12));
    return (level < eps) ? base(x, xi) : greedy(x, xi);
  };
}

/// Runs the closed loop for n steps from x0; the probe advances once per
/// step. Aborts with the offending index if the policy emits an inadmissible
/// input. The result replays through the plant by construction.
inline Trajectory rollout(const env::ControlSystem& sys, const ExplorationPolicy& policy,
                          const ProbeSignal& probe, const VectorXd& x0, Index n,
                          ProbeSignal::Cursor* cursor_io = nullptr) {
  require(n >= 1, "rollout: need at least one step");
  Trajectory traj(sys.state_dim(), sys.input_dim(), n);
  ProbeSignal::Cursor local = probe.cursor();
  ProbeSignal::Cursor& cur = cursor_io ? *cursor_io : local;
  VectorXd x = x0;
  for (Index k = 0; k < n; ++k) {
    const VectorXd u = policy(x, cur.current());
    if (!sys.admissible_inputs(x).contains(u)) {
      std::ostringstream os;
      os << "rollout: policy emitted inadmissible input at step " << k;
      throw Error(os.str());
    }
    const double c = sys.cost(x, u);
    const VectorXd xn = sys.dynamics(x, u);
    traj.push(x, u, c, xn);
    x = xn;
    cur.advance();
  }
  return traj;
}

/// Concatenated rollouts from several starts; the probe phase continues
/// across segments. Tuples remain individually replayable, while x+ of a
/// segment boundary need not chain into the next segment's x.
inline Trajectory rollout_multi(const env::ControlSystem& sys, const ExplorationPolicy& policy,
                                const ProbeSignal& probe, const std::vector<VectorXd>& starts,
                                Index n_each) {
  require(!starts.empty(), "rollout_multi: need at least one start");
  ProbeSignal::Cursor cur = probe.cursor();
  Trajectory all(sys.state_dim(), sys.input_dim(), 0);
  bool first = true;
  for (const auto& x0 : starts) {
    Trajectory seg = rollout(sys, policy, probe, x0, n_each, &cur);
    if (first) {
      all = std::move(seg);
      first = false;
    } else {
      all.append(seg);
    }
  }
  return all;
}

}  // namespace cvxq::explore
