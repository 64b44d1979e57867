#pragma once

#include <queue>
#include <random>
#include <vector>

#include "cvxq/types.hpp"

namespace cvxq::mdpx {

/// Finite controlled Markov chain with the normalized average-cost
/// Q-equation
///   Q(x,u) = c(x,u) + P_u minQ (x) - delta <nu, Q>,
/// whose unique solution pins eta = delta <nu, Q> to the optimal average
/// cost. nu defaults to a point mass at (0, 0).
struct Mdp {
  Index S = 0, A = 0;
  std::vector<MatrixXd> P;  // one S x S row-stochastic matrix per input
  MatrixXd cost;            // S x A
  MatrixXd nu;              // S x A pmf
  double delta = 1.0;

  static Mdp make(Index S, Index A) {
    Mdp m;
    m.S = S;
    m.A = A;
    m.P.assign(static_cast<size_t>(A), MatrixXd::Zero(S, S));
    m.cost = MatrixXd::Zero(S, A);
    m.nu = MatrixXd::Zero(S, A);
    m.nu(0, 0) = 1.0;
    return m;
  }

  void validate() const {
    require(static_cast<Index>(P.size()) == A, "Mdp: one transition matrix per input");
    for (const auto& Pa : P) {
      require(Pa.rows() == S && Pa.cols() == S, "Mdp: transition matrix shape");
      for (Index s = 0; s < S; ++s) {
        require(std::abs(Pa.row(s).sum() - 1.0) <= 1e-12, "Mdp: transition rows must sum to 1");
        require(Pa.row(s).minCoeff() >= 0.0, "Mdp: negative transition probability");
      }
    }
    require(cost.rows() == S && cost.cols() == A, "Mdp: cost table shape");
    require(std::abs(nu.sum() - 1.0) <= 1e-12 && nu.minCoeff() >= 0.0, "Mdp: nu must be a pmf");
    require(delta > 0.0, "Mdp: delta must be positive");
  }

  bool deterministic() const {
    for (const auto& Pa : P)
      for (Index s = 0; s < S; ++s)
        if (Pa.row(s).maxCoeff() < 1.0 - 1e-12) return false;
    return true;
  }

  double nu_dot(const MatrixXd& Q) const { return (nu.array() * Q.array()).sum(); }

  /// E[h(X+) | x, u]
  double predict(const VectorXd& h, Index s, Index a) const {
    return P[static_cast<size_t>(a)].row(s).dot(h);
  }

  /// union-graph reachability: every state must reach every other under some
  /// input sequence
  bool communicating() const {
    for (Index s0 = 0; s0 < S; ++s0) {
      std::vector<bool> seen(static_cast<size_t>(S), false);
      std::queue<Index> bfs;
      bfs.push(s0);
      seen[static_cast<size_t>(s0)] = true;
      while (!bfs.empty()) {
        const Index s = bfs.front();
        bfs.pop();
        for (const auto& Pa : P)
          for (Index t = 0; t < S; ++t)
            if (Pa(s, t) > 0.0 && !seen[static_cast<size_t>(t)]) {
              seen[static_cast<size_t>(t)] = true;
              bfs.push(t);
            }
      }
      for (bool b : seen)
        if (!b) return false;
    }
    return true;
  }
};

/// Stationary law of a stationary (deterministic) policy, by damped power
/// iteration; the damping handles periodic chains.
inline VectorXd stationary_distribution(const Mdp& mdp, const std::vector<Index>& policy,
                                        double tol = 1e-12, Index max_iter = 1000000) {
  MatrixXd Pp(mdp.S, mdp.S);
  for (Index s = 0; s < mdp.S; ++s)
    Pp.row(s) = mdp.P[static_cast<size_t>(policy[static_cast<size_t>(s)])].row(s);
  VectorXd pi = VectorXd::Constant(mdp.S, 1.0 / double(mdp.S));
  for (Index it = 0; it < max_iter; ++it) {
    VectorXd next = 0.5 * pi + 0.5 * (Pp.transpose() * pi);
    next /= next.sum();
    const double diff = (next - pi).lpNorm<Eigen::Infinity>();
    pi = next;
    if (diff <= tol) return pi;
  }
  throw Error("stationary_distribution: power iteration did not converge (non-ergodic chain)");
}

struct AvgCostSolution {
  MatrixXd Q;  // S x A
  VectorXd h;  // relative value, h(x) = min_u Q(x,u)
  double eta = 0.0;
  Index iterations = 0;
  double residual = 0.0;
  std::vector<Index> policy;
};

/// residual of the normalized Q-equation at a candidate table
inline double avg_cost_residual(const Mdp& mdp, const MatrixXd& Q) {
  const VectorXd qmin = Q.rowwise().minCoeff();
  double r = 0.0;
  for (Index s = 0; s < mdp.S; ++s)
    for (Index a = 0; a < mdp.A; ++a)
      r = std::max(r, std::abs(Q(s, a) - (mdp.cost(s, a) + mdp.predict(qmin, s, a) -
                                          mdp.delta * mdp.nu_dot(Q))));
  return r;
}

/// Damped fixed-point iteration on the normalized Q-equation.
inline AvgCostSolution avg_cost_q_oracle(const Mdp& mdp, double tol = 1e-12,
                                         Index max_iter = 1000000) {
  mdp.validate();
  require(mdp.communicating(), "avg_cost_q_oracle: chain fails the reachability check");
  MatrixXd Q = MatrixXd::Zero(mdp.S, mdp.A);
  double beta = 0.5;
  Index it = 0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    for (; it < max_iter; ++it) {
      const VectorXd qmin = Q.rowwise().minCoeff();
      const double shift = mdp.delta * mdp.nu_dot(Q);
      MatrixXd T(mdp.S, mdp.A);
      for (Index s = 0; s < mdp.S; ++s)
        for (Index a = 0; a < mdp.A; ++a)
          T(s, a) = mdp.cost(s, a) + mdp.predict(qmin, s, a) - shift;
      const double diff = (T - Q).cwiseAbs().maxCoeff();
      Q = (1.0 - beta) * Q + beta * T;
      if (diff <= tol) break;
    }
    if (avg_cost_residual(mdp, Q) <= 10.0 * tol) break;
    beta = 0.2;  // heavier damping on a retry
  }
  AvgCostSolution out;
  out.Q = Q;
  out.h = Q.rowwise().minCoeff();
  out.eta = mdp.delta * mdp.nu_dot(Q);
  out.iterations = it;
  out.residual = avg_cost_residual(mdp, Q);
  require(out.residual <= 100.0 * tol, "avg_cost_q_oracle: no convergence within the cap");
  out.policy.resize(static_cast<size_t>(mdp.S));
  for (Index s = 0; s < mdp.S; ++s) {
    Index best = 0;
    for (Index a = 1; a < mdp.A; ++a)
      if (Q(s, a) < Q(s, best)) best = a;
    out.policy[static_cast<size_t>(s)] = best;
  }
  return out;
}

/// One observed transition of a sampled chain.
struct ChainSample {
  Index s, a, s_next;
  double c;
};
using Chain = std::vector<ChainSample>;

/// Deterministic-seed sampling under a cycling exploration input.
inline Chain sample_chain(const Mdp& mdp, Index s0, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Chain chain;
  chain.reserve(static_cast<size_t>(n));
  Index s = s0;
  for (Index k = 0; k < n; ++k) {
    const Index a = k % mdp.A;
    const double r = unif(rng);
    double acc = 0.0;
    Index t = mdp.S - 1;
    for (Index j = 0; j < mdp.S; ++j) {
      acc += mdp.P[static_cast<size_t>(a)](s, j);
      if (r <= acc) {
        t = j;
        break;
      }
    }
    chain.push_back({s, a, t, mdp.cost(s, a)});
    s = t;
  }
  return chain;
}

/// Exhaustive synthetic batch: every pair once per repeat with the model's
/// exact successor distribution available for the estimators.
inline Chain enumerate_pairs(const Mdp& mdp, Index repeats, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Chain chain;
  for (Index r = 0; r < repeats; ++r)
    for (Index s = 0; s < mdp.S; ++s)
      for (Index a = 0; a < mdp.A; ++a) {
        const double u = unif(rng);
        double acc = 0.0;
        Index t = mdp.S - 1;
        for (Index j = 0; j < mdp.S; ++j) {
          acc += mdp.P[static_cast<size_t>(a)](s, j);
          if (u <= acc) {
            t = j;
            break;
          }
        }
        chain.push_back({s, a, t, mdp.cost(s, a)});
      }
  return chain;
}

}  // namespace cvxq::mdpx
