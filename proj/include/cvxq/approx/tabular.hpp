#pragma once

#include <sstream>

#include "cvxq/approx/architecture.hpp"
#include "cvxq/env/system.hpp"

namespace cvxq::approx {

/// Advantage-split tabular basis for a finite model:
///   J^theta(x)   = theta' psiJ(x),   one indicator per non-equilibrium state
///   Q^theta(x,u) = J^theta(x) + A^theta(x,u), one indicator per (x,u) pair
/// With theta in the advantage cone the class satisfies Q >= J pointwise, and
/// the optimal pair is contained in the class exactly.
class TabularSplitBasis : public Architecture {
 public:
  explicit TabularSplitBasis(const env::FiniteSystem& sys)
      : S_(sys.num_states()), A_(sys.num_inputs()), eq_(sys.eq_state_index()) {}
  // eq_state = -1 keeps a feature on every state (relative value functions
  // normalized elsewhere, as in the average-cost setting)
  TabularSplitBasis(Index num_states, Index num_inputs, Index eq_state)
      : S_(num_states), A_(num_inputs), eq_(eq_state) {}

  Index d_J() const { return eq_ >= 0 ? S_ - 1 : S_; }
  Index dim() const override { return d_J() + S_ * A_; }

  // J-block slot of state s; the pinned equilibrium state carries no feature
  Index j_slot(Index s) const { return (eq_ >= 0 && s > eq_) ? s - 1 : s; }
  Index a_slot(Index s, Index a) const { return d_J() + s * A_ + a; }

  VectorXd psiJ(const VectorXd& x) const override {
    VectorXd v = VectorXd::Zero(dim());
    const Index s = env::FiniteSystem::state_index(x);
    if (s != eq_) v[j_slot(s)] = 1.0;
    return v;
  }

  VectorXd psi(const VectorXd& x, const VectorXd& u) const override {
    VectorXd v = psiJ(x);
    const Index s = env::FiniteSystem::state_index(x);
    const Index a = env::FiniteSystem::input_index(u);
    v[a_slot(s, a)] += 1.0;
    return v;
  }

  ConstraintSpec constraints() const override { return ConstraintSpec::advantage_cone(d_J()); }

  std::string id() const override {
    std::ostringstream os;
    os << "tabular_split:S=" << S_ << ":A=" << A_ << ":eq=" << eq_;
    return os.str();
  }

  /// Parameter vector reproducing given tables exactly (requires A >= 0
  /// off-equilibrium for cone feasibility, which holds for optimal pairs).
  VectorXd encode(const VectorXd& J, const MatrixXd& Q) const {
    require(J.size() == S_ && Q.rows() == S_ && Q.cols() == A_, "encode: table shapes");
    VectorXd theta = VectorXd::Zero(dim());
    for (Index s = 0; s < S_; ++s) {
      if (s != eq_) theta[j_slot(s)] = J[s];
      for (Index a = 0; a < A_; ++a) {
        const double j = (s == eq_) ? 0.0 : J[s];
        theta[a_slot(s, a)] = Q(s, a) - j;
      }
    }
    return theta;
  }

 private:
  Index S_, A_, eq_;
};

/// Plain per-pair tabular Q basis (no J block); psiJ vanishes identically.
/// The natural class for the Watkins-style and frozen-target baselines.
class TabularQBasis : public Architecture {
 public:
  explicit TabularQBasis(const env::FiniteSystem& sys)
      : S_(sys.num_states()), A_(sys.num_inputs()) {}
  TabularQBasis(Index num_states, Index num_inputs) : S_(num_states), A_(num_inputs) {}

  Index dim() const override { return S_ * A_; }

  VectorXd psiJ(const VectorXd&) const override { return VectorXd::Zero(dim()); }

  VectorXd psi(const VectorXd& x, const VectorXd& u) const override {
    VectorXd v = VectorXd::Zero(dim());
    v[env::FiniteSystem::state_index(x) * A_ + env::FiniteSystem::input_index(u)] = 1.0;
    return v;
  }

  std::string id() const override {
    std::ostringstream os;
    os << "tabular_q:S=" << S_ << ":A=" << A_;
    return os.str();
  }

  VectorXd encode(const MatrixXd& Q) const {
    require(Q.rows() == S_ && Q.cols() == A_, "encode: table shape");
    VectorXd theta(dim());
    for (Index s = 0; s < S_; ++s)
      for (Index a = 0; a < A_; ++a) theta[s * A_ + a] = Q(s, a);
    return theta;
  }

 private:
  Index S_, A_;
};

}  // namespace cvxq::approx
