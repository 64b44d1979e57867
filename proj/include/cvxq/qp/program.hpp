#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <string>

#include "cvxq/types.hpp"

namespace cvxq::qp {

enum class Status { kOptimal, kPrimalInfeasible, kDualInfeasible, kMaxIter };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kPrimalInfeasible: return "primal_infeasible";
    case Status::kDualInfeasible: return "dual_infeasible";
    case Status::kMaxIter: return "max_iter";
  }
  return "unknown";
}

/// Convex quadratic program
///
///   minimize   1/2 x'Px + q'x
///   subject to A_eq x  = b_eq
///              A_in x <= b_in
///              lo <= x <= hi        (box; empty vectors disable the block)
///
/// P must be symmetric positive semidefinite.
template <typename Scalar>
struct Program {
  SparseMatrixX<Scalar> P;
  VectorX<Scalar> q;

  SparseMatrixX<Scalar> A_eq;
  VectorX<Scalar> b_eq;
  SparseMatrixX<Scalar> A_in;
  VectorX<Scalar> b_in;

  VectorX<Scalar> lo;
  VectorX<Scalar> hi;

  Index dim() const { return q.size(); }
  Index num_eq() const { return b_eq.size(); }
  Index num_in() const { return b_in.size(); }

  void set_objective(const MatrixX<Scalar>& P_dense, const VectorX<Scalar>& q_in) {
    P = P_dense.sparseView();
    q = q_in;
  }

  void validate() const {
    const Index d = dim();
    require(P.rows() == d && P.cols() == d, "qp: P must be d x d");
    require(A_eq.rows() == b_eq.size(), "qp: A_eq/b_eq row mismatch");
    require(A_in.rows() == b_in.size(), "qp: A_in/b_in row mismatch");
    require(A_eq.rows() == 0 || A_eq.cols() == d, "qp: A_eq column mismatch");
    require(A_in.rows() == 0 || A_in.cols() == d, "qp: A_in column mismatch");
    require(lo.size() == 0 || lo.size() == d, "qp: lo size mismatch");
    require(hi.size() == 0 || hi.size() == d, "qp: hi size mismatch");
  }
};

using Programd = Program<double>;

/// Residuals of the first-order optimality system, all in the infinity norm.
template <typename Scalar>
struct KktResiduals {
  Scalar stationarity = Scalar(0);    // ||Px + q + A_eq'y_eq + A_in'y_in + y_box||
  Scalar primal = Scalar(0);          // worst constraint violation over all blocks
  Scalar complementarity = Scalar(0); // worst |dual * slack| over inequality rows
  Scalar dual_sign = Scalar(0);       // worst wrong-signed inequality/box dual

  Scalar max() const {
    return std::max({stationarity, primal, complementarity, dual_sign});
  }
};

template <typename Scalar>
struct Solution {
  VectorX<Scalar> x;
  VectorX<Scalar> y_eq;   // free sign
  VectorX<Scalar> y_in;   // >= 0 for A_in x <= b_in
  VectorX<Scalar> y_box;  // >= 0 at upper bound, <= 0 at lower bound
  Status status = Status::kMaxIter;
  KktResiduals<Scalar> kkt;
  Scalar kkt_scale = Scalar(1);  // magnitude of the stationarity terms
  int iterations = 0;
  Scalar objective = Scalar(0);

  bool optimal() const { return status == Status::kOptimal; }
};

using Solutiond = Solution<double>;

/// Evaluates the optimality residuals of a candidate primal/dual pair.
template <typename Scalar>
KktResiduals<Scalar> kkt_residuals(const Program<Scalar>& prob, const VectorX<Scalar>& x,
                                   const VectorX<Scalar>& y_eq, const VectorX<Scalar>& y_in,
                                   const VectorX<Scalar>& y_box) {
  KktResiduals<Scalar> r;
  VectorX<Scalar> grad = prob.P.template selfadjointView<Eigen::Lower>() * x + prob.q;
  if (prob.num_eq() > 0) grad += prob.A_eq.transpose() * y_eq;
  if (prob.num_in() > 0) grad += prob.A_in.transpose() * y_in;
  if (y_box.size() > 0) grad += y_box;
  r.stationarity = grad.size() ? grad.template lpNorm<Eigen::Infinity>() : Scalar(0);

  if (prob.num_eq() > 0) {
    VectorX<Scalar> v = prob.A_eq * x - prob.b_eq;
    r.primal = std::max(r.primal, v.template lpNorm<Eigen::Infinity>());
  }
  if (prob.num_in() > 0) {
    VectorX<Scalar> slack = prob.b_in - prob.A_in * x;
    for (Index i = 0; i < slack.size(); ++i) {
      r.primal = std::max(r.primal, -slack[i]);
      r.dual_sign = std::max(r.dual_sign, -y_in[i]);
      r.complementarity = std::max(r.complementarity, std::abs(y_in[i] * slack[i]));
    }
  }
  if (prob.lo.size() > 0 || prob.hi.size() > 0) {
    for (Index j = 0; j < x.size(); ++j) {
      const Scalar lj = prob.lo.size() ? prob.lo[j] : -std::numeric_limits<Scalar>::infinity();
      const Scalar hj = prob.hi.size() ? prob.hi[j] : std::numeric_limits<Scalar>::infinity();
      r.primal = std::max({r.primal, lj - x[j], x[j] - hj});
      const Scalar yb = y_box.size() ? y_box[j] : Scalar(0);
      if (yb > Scalar(0)) {
        if (std::isfinite(hj)) {
          r.complementarity = std::max(r.complementarity, std::abs(yb * (hj - x[j])));
        } else {
          r.dual_sign = std::max(r.dual_sign, yb);
        }
      } else if (yb < Scalar(0)) {
        if (std::isfinite(lj)) {
          r.complementarity = std::max(r.complementarity, std::abs(yb * (x[j] - lj)));
        } else {
          r.dual_sign = std::max(r.dual_sign, -yb);
        }
      }
    }
  }
  return r;
}

}  // namespace cvxq::qp
