#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <vector>

#include "cvxq/qp/program.hpp"

namespace cvxq::qp {

template <typename Scalar>
struct SolverSettings {
  Scalar tol = Scalar(1e-8);  // stationarity and feasibility target
  int max_iter = 50000;
  Scalar rho = Scalar(0.1);
  Scalar sigma = Scalar(1e-6);
  Scalar alpha = Scalar(1.6);  // over-relaxation
  bool adaptive_rho = true;
  bool polish = true;
  int check_interval = 25;
  Scalar eps_infeas = Scalar(1e-10);
  bool check_psd = true;
};

using SolverSettingsd = SolverSettings<double>;

namespace detail {

// Canonical form used internally:  min 1/2 x'Px + q'x  s.t.  l <= Cx <= u,
// with C stacking the equality block (l = u), the inequality block
// (l = -inf) and one identity row per boxed coordinate.
template <typename Scalar>
struct Canonical {
  SparseMatrixX<Scalar> C;
  VectorX<Scalar> l, u;
  Index n_eq = 0, n_in = 0, n_box = 0;
  std::vector<Index> box_rows;  // coordinate index per box row
};

template <typename Scalar>
Canonical<Scalar> canonicalize(const Program<Scalar>& prob) {
  constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
  const Index d = prob.dim();
  Canonical<Scalar> c;
  c.n_eq = prob.num_eq();
  c.n_in = prob.num_in();
  if (prob.lo.size() > 0 || prob.hi.size() > 0) {
    for (Index j = 0; j < d; ++j) {
      const Scalar lj = prob.lo.size() ? prob.lo[j] : -inf;
      const Scalar hj = prob.hi.size() ? prob.hi[j] : inf;
      if (std::isfinite(lj) || std::isfinite(hj)) c.box_rows.push_back(j);
    }
  }
  c.n_box = static_cast<Index>(c.box_rows.size());
  const Index m = c.n_eq + c.n_in + c.n_box;
  c.l.resize(m);
  c.u.resize(m);
  std::vector<Eigen::Triplet<Scalar>> trips;
  trips.reserve(static_cast<size_t>(prob.A_eq.nonZeros() + prob.A_in.nonZeros()) +
                c.box_rows.size());
  for (Index k = 0; k < prob.A_eq.outerSize(); ++k)
    for (typename SparseMatrixX<Scalar>::InnerIterator it(prob.A_eq, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (Index k = 0; k < prob.A_in.outerSize(); ++k)
    for (typename SparseMatrixX<Scalar>::InnerIterator it(prob.A_in, k); it; ++it)
      trips.emplace_back(c.n_eq + it.row(), it.col(), it.value());
  for (Index i = 0; i < c.n_box; ++i)
    trips.emplace_back(c.n_eq + c.n_in + i, c.box_rows[static_cast<size_t>(i)], Scalar(1));
  c.C.resize(m, d);
  c.C.setFromTriplets(trips.begin(), trips.end());

  c.l.head(c.n_eq) = prob.b_eq;
  c.u.head(c.n_eq) = prob.b_eq;
  c.l.segment(c.n_eq, c.n_in).setConstant(-inf);
  c.u.segment(c.n_eq, c.n_in) = prob.b_in;
  for (Index i = 0; i < c.n_box; ++i) {
    const Index j = c.box_rows[static_cast<size_t>(i)];
    c.l[c.n_eq + c.n_in + i] = prob.lo.size() ? prob.lo[j] : -inf;
    c.u[c.n_eq + c.n_in + i] = prob.hi.size() ? prob.hi[j] : inf;
  }
  return c;
}

// Modified Ruiz equilibration of [P C'; C 0] plus cost normalization.
template <typename Scalar>
struct Scaling {
  VectorX<Scalar> D;  // variable scaling
  VectorX<Scalar> E;  // constraint scaling
  Scalar cost = Scalar(1);
};

template <typename Scalar>
Scaling<Scalar> ruiz_equilibrate(SparseMatrixX<Scalar>& P, VectorX<Scalar>& q,
                                 SparseMatrixX<Scalar>& C, VectorX<Scalar>& l,
                                 VectorX<Scalar>& u, int iters = 10) {
  const Index d = q.size();
  const Index m = C.rows();
  Scaling<Scalar> s;
  s.D = VectorX<Scalar>::Ones(d);
  s.E = VectorX<Scalar>::Ones(m);
  auto safe_inv_sqrt = [](Scalar v) {
    return (v < Scalar(1e-12)) ? Scalar(1) : Scalar(1) / std::sqrt(v);
  };
  for (int it = 0; it < iters; ++it) {
    VectorX<Scalar> col_norm = VectorX<Scalar>::Zero(d);
    for (Index k = 0; k < P.outerSize(); ++k)
      for (typename SparseMatrixX<Scalar>::InnerIterator i(P, k); i; ++i)
        col_norm[i.col()] = std::max(col_norm[i.col()], std::abs(i.value()));
    VectorX<Scalar> row_norm = VectorX<Scalar>::Zero(m);
    for (Index k = 0; k < C.outerSize(); ++k)
      for (typename SparseMatrixX<Scalar>::InnerIterator i(C, k); i; ++i) {
        col_norm[i.col()] = std::max(col_norm[i.col()], std::abs(i.value()));
        row_norm[i.row()] = std::max(row_norm[i.row()], std::abs(i.value()));
      }
    VectorX<Scalar> dd(d), ee(m);
    for (Index j = 0; j < d; ++j) dd[j] = safe_inv_sqrt(col_norm[j]);
    for (Index i = 0; i < m; ++i) ee[i] = safe_inv_sqrt(row_norm[i]);
    P = dd.asDiagonal() * P * dd.asDiagonal();
    q = dd.cwiseProduct(q);
    C = ee.asDiagonal() * C * dd.asDiagonal();
    for (Index i = 0; i < m; ++i) {
      if (std::isfinite(l[i])) l[i] *= ee[i];
      if (std::isfinite(u[i])) u[i] *= ee[i];
    }
    s.D = s.D.cwiseProduct(dd);
    s.E = s.E.cwiseProduct(ee);

    // cost normalization
    Scalar pcol_mean = Scalar(0);
    if (P.nonZeros() > 0) {
      VectorX<Scalar> pc = VectorX<Scalar>::Zero(d);
      for (Index k = 0; k < P.outerSize(); ++k)
        for (typename SparseMatrixX<Scalar>::InnerIterator i(P, k); i; ++i)
          pc[i.col()] = std::max(pc[i.col()], std::abs(i.value()));
      pcol_mean = pc.mean();
    }
    const Scalar qn = q.size() ? q.template lpNorm<Eigen::Infinity>() : Scalar(0);
    const Scalar gamma = Scalar(1) / std::max({pcol_mean, qn, Scalar(1e-8)});
    if (std::abs(gamma - Scalar(1)) > Scalar(1e-3)) {
      P *= gamma;
      q *= gamma;
      s.cost *= gamma;
    }
  }
  return s;
}

}  // namespace detail

/// Solves the program with an over-relaxed operator-splitting iteration and
/// an optional active-set polish pass. Deterministic for fixed inputs.
template <typename Scalar>
Solution<Scalar> solve(const Program<Scalar>& prob,
                       const SolverSettings<Scalar>& settings = {},
                       const VectorX<Scalar>* warm_x = nullptr,
                       const VectorX<Scalar>* warm_y = nullptr) {
  constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
  prob.validate();
  const Index d = prob.dim();

  if (settings.check_psd && d > 0 && prob.P.nonZeros() > 0) {
    // eigenvalue floor check; dense path for small problems, LDLT otherwise
    if (d <= 600) {
      MatrixX<Scalar> Pd = MatrixX<Scalar>(prob.P);
      require((Pd - Pd.transpose()).cwiseAbs().maxCoeff() <=
                  Scalar(1e-8) * std::max(Scalar(1), Pd.cwiseAbs().maxCoeff()),
              "qp: P is not symmetric");
      Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(Pd, Eigen::EigenvaluesOnly);
      const Scalar floor = -Scalar(1e-7) * std::max(Scalar(1), es.eigenvalues().cwiseAbs().maxCoeff());
      require(es.eigenvalues().minCoeff() >= floor, "qp: P violates the PSD eigenvalue floor");
    } else {
      SparseMatrixX<Scalar> Pj = prob.P;
      for (Index j = 0; j < d; ++j) Pj.coeffRef(j, j) += Scalar(1e-10);
      Eigen::SimplicialLDLT<SparseMatrixX<Scalar>> ldlt(Pj);
      if (ldlt.info() == Eigen::Success) {
        require(ldlt.vectorD().minCoeff() >= -Scalar(1e-7),
                "qp: P violates the PSD eigenvalue floor");
      }
    }
  }

  auto canon = detail::canonicalize(prob);
  const Index m = canon.C.rows();

  SparseMatrixX<Scalar> P = prob.P;
  VectorX<Scalar> q = prob.q;
  SparseMatrixX<Scalar> C = canon.C;
  VectorX<Scalar> l = canon.l, u = canon.u;
  auto scaling = detail::ruiz_equilibrate(P, q, C, l, u);
  const SparseMatrixX<Scalar> Ct = C.transpose();

  // per-row step: stiffer on equality rows
  Scalar rho = settings.rho;
  auto rho_vec = [&](Scalar r) {
    VectorX<Scalar> R = VectorX<Scalar>::Constant(m, r);
    for (Index i = 0; i < m; ++i) {
      if (l[i] == u[i]) R[i] = r * Scalar(1e3);
      else if (!std::isfinite(l[i]) && !std::isfinite(u[i])) R[i] = r * Scalar(1e-6);
    }
    return R;
  };
  VectorX<Scalar> R = rho_vec(rho);

  Eigen::SimplicialLDLT<SparseMatrixX<Scalar>> kkt;
  auto factorize = [&]() {
    SparseMatrixX<Scalar> K = P;
    SparseMatrixX<Scalar> CtRC = Ct * R.asDiagonal() * C;
    K += CtRC;
    for (Index j = 0; j < d; ++j) K.coeffRef(j, j) += settings.sigma;
    kkt.compute(K);
    require(kkt.info() == Eigen::Success, "qp: KKT factorization failed");
  };
  factorize();

  VectorX<Scalar> x = VectorX<Scalar>::Zero(d);
  VectorX<Scalar> y = VectorX<Scalar>::Zero(m);
  if (warm_x && warm_x->size() == d) x = scaling.D.cwiseInverse().cwiseProduct(*warm_x);
  if (warm_y && warm_y->size() == m)
    y = scaling.E.cwiseInverse().cwiseProduct(*warm_y) * scaling.cost;
  VectorX<Scalar> z = (m > 0) ? VectorX<Scalar>((C * x).cwiseMax(l).cwiseMin(u))
                              : VectorX<Scalar>();

  Solution<Scalar> sol;
  sol.status = Status::kMaxIter;

  auto unscale_into = [&](Solution<Scalar>& out, const VectorX<Scalar>& xs,
                          const VectorX<Scalar>& ys) {
    out.x = scaling.D.cwiseProduct(xs);
    VectorX<Scalar> yu(m);
    for (Index i = 0; i < m; ++i) yu[i] = ys[i] * scaling.E[i] / scaling.cost;
    out.y_eq = yu.head(canon.n_eq);
    out.y_in = yu.segment(canon.n_eq, canon.n_in);
    out.y_box = VectorX<Scalar>::Zero(d);
    for (Index i = 0; i < canon.n_box; ++i)
      out.y_box[canon.box_rows[static_cast<size_t>(i)]] = yu[canon.n_eq + canon.n_in + i];
    out.kkt = kkt_residuals(prob, out.x, out.y_eq, out.y_in, out.y_box);
    const VectorX<Scalar> Pxu = prob.P.template selfadjointView<Eigen::Lower>() * out.x;
    out.kkt_scale = std::max({Pxu.size() ? Pxu.template lpNorm<Eigen::Infinity>() : Scalar(0),
                              prob.q.size() ? prob.q.template lpNorm<Eigen::Infinity>() : Scalar(0),
                              Scalar(1)});
    out.objective = Scalar(0.5) * out.x.dot(Pxu) + prob.q.dot(out.x);
  };
  // a stiff objective cannot meet an absolute residual target in floating
  // point; accept relative to the stationarity scale
  auto meets_tol = [&](const Solution<Scalar>& cand) {
    return cand.kkt.max() <= settings.tol * std::max(Scalar(1), cand.kkt_scale);
  };

  // Active-set polish: equality-constrain the rows the duals mark active and
  // solve the reduced KKT system with regularization + iterative refinement.
  // The threshold prunes noise duals relative to the largest one.
  auto polish_at = [&](const VectorX<Scalar>& xs, const VectorX<Scalar>& ys,
                       Solution<Scalar>& out, Scalar thresh) -> bool {
    const Scalar ynorm = (m > 0) ? ys.template lpNorm<Eigen::Infinity>() : Scalar(0);
    const Scalar cut = thresh * std::max(ynorm, Scalar(1e-30));
    std::vector<Index> act;
    std::vector<int> side;  // -1 lower, +1 upper, 0 equality
    for (Index i = 0; i < m; ++i) {
      if (l[i] == u[i]) {
        act.push_back(i);
        side.push_back(0);
      } else if (ys[i] < -cut && std::isfinite(l[i])) {
        act.push_back(i);
        side.push_back(-1);
      } else if (ys[i] > cut && std::isfinite(u[i])) {
        act.push_back(i);
        side.push_back(1);
      }
    }
    const Index na = static_cast<Index>(act.size());
    const Scalar delta = Scalar(1e-9);
    std::vector<Eigen::Triplet<Scalar>> trips;
    trips.reserve(static_cast<size_t>(P.nonZeros() + C.nonZeros()) * 2 +
                  static_cast<size_t>(d + na));
    for (Index k = 0; k < P.outerSize(); ++k)
      for (typename SparseMatrixX<Scalar>::InnerIterator it(P, k); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (Index j = 0; j < d; ++j) trips.emplace_back(j, j, delta);
    // gather rows of C by iterating columns once
    std::vector<std::vector<std::pair<Index, Scalar>>> rows(static_cast<size_t>(m));
    for (Index k = 0; k < C.outerSize(); ++k)
      for (typename SparseMatrixX<Scalar>::InnerIterator it(C, k); it; ++it)
        rows[static_cast<size_t>(it.row())].emplace_back(it.col(), it.value());
    for (Index a = 0; a < na; ++a) {
      const Index i = act[static_cast<size_t>(a)];
      for (const auto& [col, val] : rows[static_cast<size_t>(i)]) {
        trips.emplace_back(d + a, col, val);
        trips.emplace_back(col, d + a, val);
      }
      trips.emplace_back(d + a, d + a, -delta);
    }
    SparseMatrixX<Scalar> K(d + na, d + na);
    K.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<SparseMatrixX<Scalar>> fac(K);
    if (fac.info() != Eigen::Success) return false;

    VectorX<Scalar> rhs(d + na);
    rhs.head(d) = -q;
    for (Index a = 0; a < na; ++a) {
      const Index i = act[static_cast<size_t>(a)];
      rhs[d + a] = (side[static_cast<size_t>(a)] <= 0 && std::isfinite(l[i])) ? l[i] : u[i];
      if (side[static_cast<size_t>(a)] == 1) rhs[d + a] = u[i];
      if (side[static_cast<size_t>(a)] == -1) rhs[d + a] = l[i];
    }
    VectorX<Scalar> sol_kkt = fac.solve(rhs);
    // refinement against the unregularized system
    for (int ref = 0; ref < 3; ++ref) {
      VectorX<Scalar> resid(d + na);
      VectorX<Scalar> xs2 = sol_kkt.head(d);
      VectorX<Scalar> nu = sol_kkt.tail(na);
      VectorX<Scalar> Px = P.template selfadjointView<Eigen::Lower>() * xs2;
      VectorX<Scalar> Ctnu = VectorX<Scalar>::Zero(d);
      for (Index a = 0; a < na; ++a)
        for (const auto& [col, val] : rows[static_cast<size_t>(act[static_cast<size_t>(a)])])
          Ctnu[col] += val * nu[a];
      resid.head(d) = rhs.head(d) - (Px + Ctnu);
      for (Index a = 0; a < na; ++a) {
        Scalar cx = Scalar(0);
        for (const auto& [col, val] : rows[static_cast<size_t>(act[static_cast<size_t>(a)])])
          cx += val * xs2[col];
        resid[d + a] = rhs[d + a] - cx;
      }
      sol_kkt += fac.solve(resid);
    }
    VectorX<Scalar> xp = sol_kkt.head(d);
    VectorX<Scalar> yp = VectorX<Scalar>::Zero(m);
    bool sign_ok = true;
    for (Index a = 0; a < na; ++a) {
      const Index i = act[static_cast<size_t>(a)];
      yp[i] = sol_kkt[d + a];
      if (side[static_cast<size_t>(a)] == 1 && yp[i] < -settings.tol) sign_ok = false;
      if (side[static_cast<size_t>(a)] == -1 && yp[i] > settings.tol) sign_ok = false;
    }
    if (!sign_ok) return false;
    Solution<Scalar> cand;
    unscale_into(cand, xp, yp);
    if (cand.kkt.max() <= out.kkt.max() || meets_tol(cand)) {
      cand.status = out.status;
      cand.iterations = out.iterations;
      out = cand;
      return meets_tol(cand);
    }
    return false;
  };

  auto try_polish = [&](const VectorX<Scalar>& xs, const VectorX<Scalar>& ys,
                        Solution<Scalar>& out) -> bool {
    for (const Scalar thresh : {Scalar(1e-8), Scalar(1e-4), Scalar(1e-2), Scalar(0.3)}) {
      if (polish_at(xs, ys, out, thresh)) return true;
    }
    return false;
  };

  VectorX<Scalar> x_prev = x, y_prev = y;
  int last_polish_attempt = -1000000;
  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;

    VectorX<Scalar> rhs = settings.sigma * x - q;
    if (m > 0) rhs += Ct * (R.cwiseProduct(z) - y);
    VectorX<Scalar> x_tilde = kkt.solve(rhs);
    VectorX<Scalar> x_next = settings.alpha * x_tilde + (Scalar(1) - settings.alpha) * x;
    if (m > 0) {
      VectorX<Scalar> z_tilde = C * x_tilde;
      VectorX<Scalar> z_hat = settings.alpha * z_tilde + (Scalar(1) - settings.alpha) * z;
      VectorX<Scalar> z_next = (z_hat + y.cwiseQuotient(R)).cwiseMax(l).cwiseMin(u);
      y = y + R.cwiseProduct(z_hat - z_next);
      z = z_next;
    }
    x = x_next;

    if (iter % settings.check_interval != 0 && iter != settings.max_iter) continue;

    // residuals in the scaled space, with relative scale factors
    VectorX<Scalar> Px = P.template selfadjointView<Eigen::Lower>() * x;
    VectorX<Scalar> Cx = (m > 0) ? VectorX<Scalar>(C * x) : VectorX<Scalar>();
    VectorX<Scalar> Cty = (m > 0) ? VectorX<Scalar>(Ct * y) : VectorX<Scalar>::Zero(d);
    const Scalar rp = (m > 0) ? (Cx - z).template lpNorm<Eigen::Infinity>() : Scalar(0);
    const Scalar rd = (Px + q + Cty).template lpNorm<Eigen::Infinity>();
    const Scalar sp = std::max({m > 0 ? Cx.template lpNorm<Eigen::Infinity>() : Scalar(0),
                                m > 0 ? z.template lpNorm<Eigen::Infinity>() : Scalar(0),
                                Scalar(1)});
    const Scalar sd = std::max({Px.template lpNorm<Eigen::Infinity>(),
                                q.template lpNorm<Eigen::Infinity>(),
                                Cty.template lpNorm<Eigen::Infinity>(), Scalar(1)});

    const bool near = rp <= Scalar(1e-3) * sp && rd <= Scalar(1e-3) * sd;
    const bool tight = rp <= settings.tol * sp * Scalar(0.1) && rd <= settings.tol * sd * Scalar(0.1);
    if (near || tight) {
      Solution<Scalar> cand;
      unscale_into(cand, x, y);
      cand.status = Status::kOptimal;
      cand.iterations = iter;
      if (meets_tol(cand)) {
        sol = cand;
        return sol;
      }
      if (settings.polish && iter - last_polish_attempt >= 200) {
        last_polish_attempt = iter;
        if (try_polish(x, y, cand)) {
          cand.status = Status::kOptimal;
          cand.iterations = iter;
          sol = cand;
          return sol;
        }
      }
      if (tight) {
        // accurate enough in scaled space yet the unscaled certificate missed
        // the target; keep iterating until max_iter
        sol = cand;
        sol.status = cand.kkt.max() <=
                             Scalar(10) * settings.tol * std::max(Scalar(1), cand.kkt_scale)
                         ? Status::kOptimal
                         : Status::kMaxIter;
        if (sol.status == Status::kOptimal) return sol;
      }
    }

    // infeasibility certificates
    if (m > 0) {
      VectorX<Scalar> dy = y - y_prev;
      const Scalar dyn = dy.template lpNorm<Eigen::Infinity>();
      if (dyn > settings.eps_infeas) {
        dy /= dyn;
        bool cert = (Ct * dy).template lpNorm<Eigen::Infinity>() <= Scalar(1e-6);
        Scalar support = Scalar(0);
        for (Index i = 0; i < m && cert; ++i) {
          if (dy[i] > Scalar(1e-10)) {
            if (!std::isfinite(u[i])) cert = false;
            else support += u[i] * dy[i];
          } else if (dy[i] < -Scalar(1e-10)) {
            if (!std::isfinite(l[i])) cert = false;
            else support += l[i] * dy[i];
          }
        }
        if (cert && support < -Scalar(1e-8)) {
          unscale_into(sol, x, y);
          sol.status = Status::kPrimalInfeasible;
          sol.iterations = iter;
          return sol;
        }
      }
      VectorX<Scalar> dx = x - x_prev;
      const Scalar dxn = dx.template lpNorm<Eigen::Infinity>();
      if (dxn > settings.eps_infeas) {
        dx /= dxn;
        bool cert = (P.template selfadjointView<Eigen::Lower>() * dx)
                            .template lpNorm<Eigen::Infinity>() <= Scalar(1e-6) &&
                    q.dot(dx) < -Scalar(1e-8);
        VectorX<Scalar> Cdx = C * dx;
        for (Index i = 0; i < m && cert; ++i) {
          if (std::isfinite(u[i]) && Cdx[i] > Scalar(1e-6)) cert = false;
          if (std::isfinite(l[i]) && Cdx[i] < -Scalar(1e-6)) cert = false;
        }
        if (cert) {
          unscale_into(sol, x, y);
          sol.status = Status::kDualInfeasible;
          sol.iterations = iter;
          return sol;
        }
      }
    }

    if (settings.adaptive_rho && m > 0) {
      const Scalar ratio = std::sqrt((rp / sp) / std::max(rd / sd, Scalar(1e-16)));
      if (ratio > Scalar(5) || ratio < Scalar(0.2)) {
        rho = std::clamp(rho * ratio, Scalar(1e-6), Scalar(1e6));
        R = rho_vec(rho);
        factorize();
      }
    }
  }

  Solution<Scalar> cand;
  unscale_into(cand, x, y);
  cand.iterations = settings.max_iter;
  cand.status = meets_tol(cand) ? Status::kOptimal : Status::kMaxIter;
  if (settings.polish && cand.status == Status::kMaxIter) {
    if (try_polish(x, y, cand)) cand.status = Status::kOptimal;
  }
  sol = cand;
  return sol;
}

template <typename Scalar>
Solution<Scalar> solve(const Program<Scalar>& prob, Scalar tol, int max_iter) {
  SolverSettings<Scalar> s;
  s.tol = tol;
  s.max_iter = max_iter;
  return solve(prob, s);
}

}  // namespace cvxq::qp
