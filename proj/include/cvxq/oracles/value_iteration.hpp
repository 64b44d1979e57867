#pragma once

#include <vector>

#include "cvxq/env/system.hpp"

namespace cvxq::oracles {

struct ValueIterationResult {
  VectorXd J;
  MatrixXd Q;  // num_states x num_inputs
  std::vector<Index> policy;
  Index iterations = 0;
  double residual = 0.0;

  /// sup-norm Bellman residual of (J, Q) under the model
  double bellman_residual(const env::FiniteSystem& sys, double gamma = 1.0) const {
    double r = 0.0;
    for (Index s = 0; s < sys.num_states(); ++s) {
      double best = kInf;
      for (Index a = 0; a < sys.num_inputs(); ++a) {
        const double qa = sys.cost_at(s, a) + gamma * J[sys.next_at(s, a)];
        best = std::min(best, qa);
        r = std::max(r, std::abs(Q(s, a) - qa));
      }
      r = std::max(r, std::abs(J[s] - best));
    }
    return r;
  }
};

/// Sup-norm-converged dynamic programming on a finite model. Total cost when
/// gamma = 1; divergence (an unreachable goal) is reported once values grow
/// past any bounded solution.
inline ValueIterationResult value_iteration(const env::FiniteSystem& sys, double tol = 1e-12,
                                            double gamma = 1.0, Index max_iter = 1000000) {
  require(gamma > 0.0 && gamma <= 1.0, "value_iteration: gamma in (0, 1]");
  const Index S = sys.num_states(), A = sys.num_inputs();
  double cmax = 0.0;
  for (Index s = 0; s < S; ++s)
    for (Index a = 0; a < A; ++a) cmax = std::max(cmax, sys.cost_at(s, a));
  // deterministic total cost: an optimal path revisits no state, so any
  // bounded value satisfies J <= S * cmax; discounting gives cmax/(1-gamma)
  const double growth_cap =
      (gamma < 1.0) ? cmax / (1.0 - gamma) + 1.0 : double(S) * cmax + 1.0;

  VectorXd J = VectorXd::Zero(S), Jn(S);
  Index it = 0;
  double diff = kInf;
  for (; it < max_iter; ++it) {
    for (Index s = 0; s < S; ++s) {
      double best = kInf;
      for (Index a = 0; a < A; ++a)
        best = std::min(best, sys.cost_at(s, a) + gamma * J[sys.next_at(s, a)]);
      Jn[s] = best;
    }
    diff = (Jn - J).lpNorm<Eigen::Infinity>();
    J = Jn;
    if (diff <= tol) break;
    if (J.maxCoeff() > growth_cap)
      throw Error("value_iteration: values diverge; some state cannot reach zero-cost absorption");
  }
  if (diff > tol) throw Error("value_iteration: iteration cap reached before convergence");

  ValueIterationResult out;
  out.J = J;
  out.Q.resize(S, A);
  out.policy.resize(static_cast<size_t>(S));
  for (Index s = 0; s < S; ++s) {
    Index best_a = 0;
    double best = kInf;
    for (Index a = 0; a < A; ++a) {
      const double qa = sys.cost_at(s, a) + gamma * J[sys.next_at(s, a)];
      out.Q(s, a) = qa;
      if (qa < best) {
        best = qa;
        best_a = a;
      }
    }
    out.policy[static_cast<size_t>(s)] = best_a;
  }
  out.iterations = it + 1;
  out.residual = out.bellman_residual(sys, gamma);
  return out;
}

}  // namespace cvxq::oracles
