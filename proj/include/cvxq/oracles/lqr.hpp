#pragma once

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

#include "cvxq/env/system.hpp"
#include "cvxq/qp/solver.hpp"
#include "cvxq/symmetric.hpp"

namespace cvxq::oracles {

/// Fixed point of the Riccati recursion
///   M <- S + F'MF - F'MG (R + G'MG)^{-1} G'MF,   M_0 = 0.
/// Non-convergence reports a stabilizability/detectability violation.
inline MatrixXd riccati_solve(const env::LqrSystem& lqr, double tol = 1e-12,
                              Index max_iter = 200000) {
  const MatrixXd &F = lqr.F(), &G = lqr.G(), &S = lqr.S(), &R = lqr.R();
  MatrixXd M = MatrixXd::Zero(F.rows(), F.rows());
  for (Index it = 0; it < max_iter; ++it) {
    const MatrixXd GtM = G.transpose() * M;
    const MatrixXd inner = R + GtM * G;
    Eigen::LLT<MatrixXd> llt(inner);
    require(llt.info() == Eigen::Success, "riccati_solve: R + G'MG not positive definite");
    const MatrixXd Mn =
        S + F.transpose() * M * F - F.transpose() * M * G * llt.solve(GtM * F);
    const double diff = (Mn - M).cwiseAbs().maxCoeff();
    M = 0.5 * (Mn + Mn.transpose());
    if (diff <= tol) return M;
    if (M.cwiseAbs().maxCoeff() > 1e12)
      throw Error("riccati_solve: iterates diverge; (F,G) stabilizable / (F,H) detectable fails");
  }
  throw Error("riccati_solve: no convergence within the iteration cap");
}

/// Block matrices of the quadratic pair: M_J embeds M in the state corner,
/// M^Q = M^c + [F G]' M [F G] with M^c = blkdiag(S, R).
inline std::pair<MatrixXd, MatrixXd> lqr_q_matrices(const MatrixXd& M,
                                                    const env::LqrSystem& lqr) {
  const Index n = lqr.state_dim(), m = lqr.input_dim();
  require(M.rows() == n && M.cols() == n, "lqr_q_matrices: M must be n x n");
  MatrixXd MJ = MatrixXd::Zero(n + m, n + m);
  MJ.topLeftCorner(n, n) = 0.5 * (M + M.transpose());
  MatrixXd FG(n, n + m);
  FG << lqr.F(), lqr.G();
  MatrixXd MQ = MatrixXd::Zero(n + m, n + m);
  MQ.topLeftCorner(n, n) = lqr.S();
  MQ.bottomRightCorner(m, m) = lqr.R();
  MQ += FG.transpose() * MJ.topLeftCorner(n, n) * FG;
  return {MJ, 0.5 * (MQ + MQ.transpose())};
}

/// Deterministic low-discrepancy directions on the unit sphere. dim 2 walks
/// equal angles with an irrational offset; dim 3 uses the Fibonacci lattice;
/// higher dimensions map a Halton sequence through Box-Muller.
inline MatrixXd sphere_directions(Index dim, Index count) {
  require(dim >= 1 && count >= 1, "sphere_directions: bad arguments");
  MatrixXd Z(dim, count);
  if (dim == 1) {
    for (Index i = 0; i < count; ++i) Z(0, i) = (i % 2 == 0) ? 1.0 : -1.0;
    return Z;
  }
  if (dim == 2) {
    const double offset = 0.5 * (std::sqrt(5.0) - 1.0);
    for (Index i = 0; i < count; ++i) {
      const double phi = std::numbers::pi * (double(i) / double(count) + offset / double(count));
      Z(0, i) = std::cos(phi);
      Z(1, i) = std::sin(phi);
    }
    return Z;
  }
  if (dim == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (Index i = 0; i < count; ++i) {
      const double y = 1.0 - 2.0 * (double(i) + 0.5) / double(count);
      const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
      const double phi = golden * double(i);
      Z(0, i) = r * std::cos(phi);
      Z(1, i) = y;
      Z(2, i) = r * std::sin(phi);
    }
    return Z;
  }
  auto halton = [](Index idx, Index base) {
    double f = 1.0, r = 0.0;
    for (Index k = idx + 1; k > 0; k /= base) {
      f /= double(base);
      r += f * double(k % base);
    }
    return r;
  };
  const Index primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (Index i = 0; i < count; ++i) {
    VectorXd g(dim);
    for (Index j = 0; j < dim; j += 2) {
      const double u1 = std::max(halton(i, primes[j % 12]), 1e-12);
      const double u2 = halton(i, primes[(j + 1) % 12]);
      const double r = std::sqrt(-2.0 * std::log(u1));
      g[j] = r * std::cos(2.0 * std::numbers::pi * u2);
      if (j + 1 < dim) g[j + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
    }
    Z.col(i) = g.normalized();
  }
  return Z;
}

/// Trace-maximizing quadratic value matrix subject to the sampled matrix
/// inequality z'(M^Q(M) - M^J(M))z >= 0 over the given directions. The
/// constraints are linear in the symmetric coordinates of M, so the program
/// is an LP handled by the QP engine. A grid that misses enough directions
/// leaves the program unbounded, which is reported for the caller to densify.
inline MatrixXd lqr_sdp_gridded(const env::LqrSystem& lqr, const MatrixXd& z_grid,
                                double tol = 1e-9) {
  const Index n = lqr.state_dim(), m = lqr.input_dim();
  require(z_grid.rows() == n + m, "lqr_sdp_gridded: directions must have length n + m");
  const Index cnt = z_grid.cols();
  const Index dsym = sym_dim(n);
  MatrixXd FG(n, n + m);
  FG << lqr.F(), lqr.G();

  qp::Programd prob;
  prob.P.resize(dsym, dsym);  // LP: zero quadratic term
  VectorXd q = VectorXd::Zero(dsym);
  {
    Index k = 0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i; j < n; ++j, ++k)
        if (i == j) q[k] = -1.0;  // maximize trace(M)
  }
  prob.q = q;

  MatrixXd A(cnt, dsym);
  VectorXd b(cnt);
  for (Index c = 0; c < cnt; ++c) {
    const VectorXd z = z_grid.col(c);
    const VectorXd x = z.head(n);
    const VectorXd u = z.tail(m);
    const VectorXd w = FG * z;
    // z'(M^Q - M^J)z = w'Mw - x'Mx + x'Sx + u'Ru >= 0
    const VectorXd g = quad_features(w) - quad_features(x);
    A.row(c) = -g.transpose();
    b[c] = x.dot(lqr.S() * x) + u.dot(lqr.R() * u);
  }
  prob.A_in = A.sparseView();
  prob.b_in = b;

  qp::SolverSettingsd settings;
  settings.tol = tol;
  settings.max_iter = 200000;
  auto sol = qp::solve(prob, settings);
  if (sol.status == qp::Status::kDualInfeasible)
    throw Error("lqr_sdp_gridded: program unbounded; direction grid too sparse");
  require(sol.optimal(), "lqr_sdp_gridded: solver failed: " +
                             std::string(qp::to_string(sol.status)));
  return vech_to_sym(sol.x, n);
}

}  // namespace cvxq::oracles
