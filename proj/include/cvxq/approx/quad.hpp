#pragma once

#include <Eigen/Cholesky>

#include <sstream>

#include "cvxq/approx/architecture.hpp"
#include "cvxq/symmetric.hpp"

namespace cvxq::approx {

/// Quadratic function class for linear plants: J(x) = x' M_J x on an optional
/// leading block, Q(x,u) = z' M^Q z on the trailing block with z = (x, u).
/// Coordinates are symmetric-matrix entries (upper triangle). The state
/// minimum has the closed form
///   min_u Q(x,u) = x' { M_F - N' M_G^{-1} N } x
/// and requires the input block M_G to be positive definite; the basis
/// refuses to extrapolate otherwise.
class QuadBasis : public Architecture {
 public:
  QuadBasis(Index state_dim, Index input_dim, bool include_J = false)
      : n_(state_dim), m_(input_dim), include_J_(include_J) {}

  Index state_dim() const { return n_; }
  Index input_dim() const { return m_; }
  Index j_block() const { return include_J_ ? sym_dim(n_) : 0; }
  Index q_block() const { return sym_dim(n_ + m_); }
  Index dim() const override { return j_block() + q_block(); }

  VectorXd psiJ(const VectorXd& x) const override {
    VectorXd v = VectorXd::Zero(dim());
    if (include_J_) v.head(j_block()) = quad_features(x);
    return v;
  }

  VectorXd psi(const VectorXd& x, const VectorXd& u) const override {
    VectorXd v = VectorXd::Zero(dim());
    VectorXd z(n_ + m_);
    z << x, u;
    v.tail(q_block()) = quad_features(z);
    return v;
  }

  MatrixXd q_matrix(const VectorXd& theta) const {
    require(theta.size() == dim(), "QuadBasis: parameter dimension mismatch");
    return vech_to_sym(theta.tail(q_block()), n_ + m_);
  }

  MatrixXd j_matrix(const VectorXd& theta) const {
    require(include_J_, "QuadBasis: no J block");
    return vech_to_sym(theta.head(j_block()), n_);
  }

  VectorXd encode(const MatrixXd& MQ) const {
    require(!include_J_, "QuadBasis: encode(MQ) needs include_J = false");
    return sym_to_vech(MQ);
  }
  VectorXd encode(const MatrixXd& MJ, const MatrixXd& MQ) const {
    require(include_J_, "QuadBasis: encode(MJ, MQ) needs include_J = true");
    VectorXd theta(dim());
    theta << sym_to_vech(MJ), sym_to_vech(MQ);
    return theta;
  }

  std::pair<VectorXd, double> min_q(const VectorXd& theta, const VectorXd& x,
                                    const env::InputSet& inputs) const override {
    if (inputs.is_finite()) return Architecture::min_q(theta, x, inputs);
    const MatrixXd MQ = q_matrix(theta);
    const MatrixXd MF = MQ.topLeftCorner(n_, n_);
    const MatrixXd Nt = MQ.topRightCorner(n_, m_);  // N'
    const MatrixXd MG = MQ.bottomRightCorner(m_, m_);
    Eigen::LLT<MatrixXd> llt(MG);
    if (llt.info() != Eigen::Success || MG.diagonal().minCoeff() <= 0.0) {
      throw Error("QuadBasis::min_q: input block of the Q matrix is not positive definite");
    }
    const VectorXd ustar = -llt.solve(Nt.transpose() * x);
    const double val = x.dot(MF * x) - x.dot(Nt * llt.solve(Nt.transpose() * x));
    return {ustar, val};
  }

  std::string id() const override {
    std::ostringstream os;
    os << "quad:n=" << n_ << ":m=" << m_ << ":J=" << (include_J_ ? 1 : 0);
    return os.str();
  }

 private:
  Index n_, m_;
  bool include_J_;
};

}  // namespace cvxq::approx
