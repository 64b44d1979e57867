#pragma once

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "cvxq/losses/losses.hpp"
#include "cvxq/qp/solver.hpp"

namespace cvxq::qp {

/// Regularized minimization of a quadratic loss E(theta) = theta'P theta +
/// 2 q'theta + k0:
///
///   theta+ = argmin { E(theta) + (1/(2 alpha)) |theta - theta_n|_W^2 }
///
/// whose first-order condition is the fixed point
/// theta+ = theta_n - alpha W^{-1} grad E(theta+), i.e.
/// (W/alpha + 2P) theta+ = W theta_n / alpha - 2q. An infinite alpha turns
/// the regularizer off and returns the minimum-norm minimizer of E.
inline VectorXd prox_step(const MatrixXd& P, const VectorXd& q, const VectorXd& theta_n,
                          double alpha, const MatrixXd& W) {
  const Index d = q.size();
  require(P.rows() == d && P.cols() == d, "prox_step: P shape");
  require(W.rows() == d && W.cols() == d, "prox_step: W shape");
  require(alpha > 0.0, "prox_step: alpha must be positive");
  if (!std::isfinite(alpha)) {
    return Eigen::CompleteOrthogonalDecomposition<MatrixXd>(2.0 * P).solve(-2.0 * q);
  }
  Eigen::LLT<MatrixXd> wllt(W);
  require(wllt.info() == Eigen::Success, "prox_step: W must be positive definite");
  const MatrixXd K = W / alpha + 2.0 * P;
  Eigen::LDLT<MatrixXd> ldlt(K);
  require(ldlt.info() == Eigen::Success, "prox_step: system factorization failed");
  return ldlt.solve(W * theta_n / alpha - 2.0 * q);
}

/// Constrained variant: same objective inside box bounds, through the solver.
inline VectorXd prox_step(const MatrixXd& P, const VectorXd& q, const VectorXd& theta_n,
                          double alpha, const MatrixXd& W, const VectorXd& lo,
                          const VectorXd& hi, const SolverSettingsd& settings = {}) {
  require(std::isfinite(alpha) && alpha > 0.0, "prox_step: alpha must be positive and finite");
  Programd prob;
  prob.set_objective(2.0 * P + W / alpha, 2.0 * q - W * theta_n / alpha);
  prob.lo = lo;
  prob.hi = hi;
  auto sol = solve(prob, settings);
  require(sol.optimal(), "prox_step: constrained solve failed");
  return sol.x;
}

/// Matrix-gain tracking step W+ = W + beta (A - W); beta follows the slower
/// schedule beta_n = alpha_n^eta with 1/2 < eta < 1.
inline MatrixXd zap_gain_update(const MatrixXd& W, const MatrixXd& A, double beta) {
  require(beta > 0.0 && beta <= 1.0, "zap_gain_update: beta in (0, 1]");
  require(W.rows() == A.rows() && W.cols() == A.cols(), "zap_gain_update: shape mismatch");
  return W + beta * (A - W);
}

struct PdStepOptions {
  double kappa_be = 1.0;
  double alpha = 1.0;
  double dual_alpha = 1.0;
  VectorXd lambda_max;  // per-component cap
  Index cone_d_J = 0;   // trailing coordinates constrained non-negative
  MatrixXd W;           // empty = identity
  SolverSettingsd solver;
};

/// One saddle-point iteration on fixed batch data for
///   max_{0 <= lambda <= lambda_max} min_{theta in cone}
///     -<mu, J^theta> + kappa E_n(theta) - lambda' z_n(theta)
///     + (1/(2 alpha)) |theta - theta_n|_W^2 .
/// The theta update solves the cone-constrained quadratic program; lambda
/// takes a projected gradient step evaluated at the new theta.
inline std::pair<VectorXd, VectorXd> primal_dual_step(const losses::BatchLossData& data,
                                                      const VectorXd& theta_n,
                                                      const VectorXd& lambda_n,
                                                      const PdStepOptions& opts,
                                                      Solutiond* warm_io = nullptr) {
  const Index d = data.d;
  require(theta_n.size() == d, "primal_dual_step: theta dimension");
  require(lambda_n.size() == data.Z.rows(), "primal_dual_step: lambda dimension");
  require(opts.alpha > 0.0, "primal_dual_step: alpha must be positive");
  const MatrixXd W = opts.W.size() ? opts.W : MatrixXd(MatrixXd::Identity(d, d));

  Programd prob;
  prob.set_objective(2.0 * opts.kappa_be * data.P + W / opts.alpha,
                     2.0 * opts.kappa_be * data.q - data.mu_vec + data.Z.transpose() * lambda_n -
                         W * theta_n / opts.alpha);
  if (opts.cone_d_J < d) {
    prob.lo = VectorXd::Constant(d, -kInf);
    prob.lo.tail(d - opts.cone_d_J).setZero();
    prob.hi = VectorXd::Constant(d, kInf);
  }
  Solutiond sol;
  if (warm_io && warm_io->x.size() == d) {
    // canonical dual rows of this program: one per boxed (cone) coordinate
    VectorXd warm_y;
    if (opts.cone_d_J < d && warm_io->y_box.size() == d)
      warm_y = warm_io->y_box.tail(d - opts.cone_d_J);
    sol = solve(prob, opts.solver, &warm_io->x, warm_y.size() ? &warm_y : nullptr);
  } else {
    sol = solve(prob, opts.solver);
  }
  require(sol.optimal(), "primal_dual_step: theta solve failed");
  if (warm_io) *warm_io = sol;

  VectorXd z = data.z(sol.x);
  VectorXd lambda = lambda_n - opts.dual_alpha * z;
  for (Index i = 0; i < lambda.size(); ++i) {
    const double cap = opts.lambda_max.size() ? opts.lambda_max[i] : kInf;
    lambda[i] = std::clamp(lambda[i], 0.0, cap);
  }
  return {sol.x, lambda};
}

}  // namespace cvxq::qp
