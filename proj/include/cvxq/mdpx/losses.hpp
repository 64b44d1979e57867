#pragma once

#include "cvxq/algos/drivers.hpp"
#include "cvxq/approx/architecture.hpp"
#include "cvxq/env/system.hpp"
#include "cvxq/mdpx/cond_exp.hpp"

namespace cvxq::mdpx {

/// Steady-state averages of the two average-cost losses and the conditional
/// variance tying them together:
///   E_var(theta) = E_be(theta) + sigma2(theta).
struct NoisyLossDecomposition {
  double be = 0.0;       // loss with the conditional expectation inside
  double be_var = 0.0;   // loss with the sampled successor inside
  double sigma2 = 0.0;   // conditional variance of h(X+)
  double identity_residual = 0.0;
};

inline NoisyLossDecomposition noisy_loss_decomposition(const Mdp& mdp,
                                                       const std::vector<Index>& policy,
                                                       const approx::Architecture& arch,
                                                       const VectorXd& theta) {
  mdp.validate();
  const VectorXd pi = stationary_distribution(mdp, policy);

  VectorXd h(mdp.S);
  for (Index s = 0; s < mdp.S; ++s)
    h[s] = theta.dot(arch.psiJ(env::FiniteSystem::state_vector(s)));
  MatrixXd Q(mdp.S, mdp.A);
  for (Index s = 0; s < mdp.S; ++s)
    for (Index a = 0; a < mdp.A; ++a)
      Q(s, a) = theta.dot(
          arch.psi(env::FiniteSystem::state_vector(s), env::FiniteSystem::input_vector(a)));
  const double shift = mdp.delta * mdp.nu_dot(Q);

  NoisyLossDecomposition out;
  for (Index s = 0; s < mdp.S; ++s) {
    const double w = pi[s];
    if (w <= 0.0) continue;
    const Index a = policy[static_cast<size_t>(s)];
    const double ph = mdp.predict(h, s, a);
    const double base = -Q(s, a) - shift + mdp.cost(s, a);
    out.be += w * (base + ph) * (base + ph);
    for (Index t = 0; t < mdp.S; ++t) {
      const double p = mdp.P[static_cast<size_t>(a)](s, t);
      if (p <= 0.0) continue;
      out.be_var += w * p * (base + h[t]) * (base + h[t]);
      out.sigma2 += w * p * (h[t] - ph) * (h[t] - ph);
    }
  }
  out.identity_residual = std::abs(out.be_var - out.be - out.sigma2);
  return out;
}

/// Quadratic window data for the normalized average-cost temporal
/// difference
///   D(theta) = -Q^theta(x,u) - delta <nu, Q^theta> + c + h-hat(x,u; theta),
/// with h-hat the configured conditional-expectation estimate of
/// h^theta(X+). Linear in theta for every estimator mode, so the batch
/// machinery is the deterministic one with modified feature differences.
inline losses::BatchLossData assemble_mdp_batch(const approx::Architecture& arch,
                                                const Chain& chain, Index begin, Index end,
                                                const Mdp& mdp,
                                                const CondExpEstimator& estimator,
                                                const losses::MuMeasure& mu, bool with_zeta,
                                                bool eta_objective = false) {
  require(begin >= 0 && end <= static_cast<Index>(chain.size()) && end > begin,
          "assemble_mdp_batch: bad window");
  const Index d = arch.dim();
  const double r = double(end - begin);

  // <nu, Q^theta> = theta . g_nu
  VectorXd g_nu = VectorXd::Zero(d);
  for (Index s = 0; s < mdp.S; ++s)
    for (Index a = 0; a < mdp.A; ++a)
      if (mdp.nu(s, a) > 0.0)
        g_nu += mdp.nu(s, a) *
                arch.psi(env::FiniteSystem::state_vector(s), env::FiniteSystem::input_vector(a));

  // per-feature conditional expectation of psiJ(X+) given (s, a)
  auto predicted_features = [&](Index s, Index a, Index s_next) {
    if (estimator.mode() == CondExpEstimator::Mode::kPretendDeterministic)
      return VectorXd(arch.psiJ(env::FiniteSystem::state_vector(s_next)));
    VectorXd out(d);
    for (Index i = 0; i < d; ++i) {
      out[i] = estimator(
          [&](Index t) {
            return arch.psiJ(env::FiniteSystem::state_vector(t))[i];
          },
          s, a);
    }
    return out;
  };

  losses::BatchLossData data;
  data.d = d;
  data.r = r;
  data.P = MatrixXd::Zero(d, d);
  data.q = VectorXd::Zero(d);
  const Index zdim = with_zeta ? mdp.S * mdp.A : 0;
  data.Z = MatrixXd::Zero(zdim, d);
  data.b_z = VectorXd::Zero(zdim);
  data.Zp = MatrixXd::Zero(0, d);
  data.plus_rows = MatrixXd::Zero(end - begin, d);

  for (Index k = begin; k < end; ++k) {
    const auto& smp = chain[static_cast<size_t>(k)];
    const VectorXd psix = arch.psi(env::FiniteSystem::state_vector(smp.s),
                                   env::FiniteSystem::input_vector(smp.a));
    const VectorXd pred = predicted_features(smp.s, smp.a, smp.s_next);
    const VectorXd upsilon = psix + mdp.delta * g_nu - pred;
    data.P.selfadjointView<Eigen::Lower>().rankUpdate(upsilon, 1.0 / r);
    data.q -= (smp.c / r) * upsilon;
    data.k0 += smp.c * smp.c / r;
    if (with_zeta) {
      const Index g = smp.s * mdp.A + smp.a;
      data.Z.row(g) += (1.0 / r) * upsilon.transpose();
      data.b_z[g] += smp.c / r;
    }
    const VectorXd psih = arch.psiJ(env::FiniteSystem::state_vector(smp.s));
    data.plus_rows.row(k - begin) = (psih - psix).transpose();
  }
  data.P = data.P.selfadjointView<Eigen::Lower>();
  // Under the eta objective the program maximizes delta <nu, Q^theta>: the
  // normalized average cost itself. Every feasible pair satisfies
  // delta <nu, Q> <= eta(phi) for all stationary policies, so the optimum is
  // the optimal average cost, attained by the oracle pair; with an
  // irreducible optimal chain the maximizer is that pair exactly.
  data.mu_vec = eta_objective ? VectorXd(mdp.delta * g_nu) : mu.feature_vector(arch);
  return data;
}

/// Batch iteration on the average-cost loss; constraint handling matches the
/// deterministic driver (advantage cone plus optional hard Galerkin rows).
inline algos::RunResult run_bcql_mdp(const Mdp& mdp, const Chain& chain,
                                     const approx::Architecture& arch,
                                     const CondExpEstimator& estimator,
                                     const losses::MuMeasure& mu, const algos::AlgoConfig& cfg,
                                     const VectorXd& theta0, bool eta_objective = false) {
  mdp.validate();
  const Index n = static_cast<Index>(chain.size());
  const auto windows = losses::equal_windows(n, cfg.batches);
  const bool with_zeta = cfg.constraint_mode != algos::ConstraintMode::kPenalty;
  std::vector<losses::BatchLossData> data;
  data.reserve(windows.size());
  for (const auto& w : windows)
    data.push_back(assemble_mdp_batch(arch, chain, w.begin, w.end, mdp, estimator, mu, with_zeta,
                                      eta_objective));
  return algos::run_bcql_data(data, arch.constraints(), cfg, theta0);
}

}  // namespace cvxq::mdpx
