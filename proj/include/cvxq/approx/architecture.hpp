#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include "cvxq/env/system.hpp"
#include "cvxq/types.hpp"

namespace cvxq::approx {

/// Feasible-parameter description. The advantage cone keeps the trailing
/// coordinates non-negative so that Q - J >= 0 pointwise; custom specs carry
/// a matrix Y with the polyhedral cone {Y theta <= 0}.
struct ConstraintSpec {
  enum class Kind { kNone, kAdvantageCone, kCustom };
  Kind kind = Kind::kNone;
  Index d_J = 0;  // advantage cone: theta_i >= 0 for i >= d_J
  MatrixXd Y;     // custom: Y theta <= 0

  static ConstraintSpec none() { return {}; }
  static ConstraintSpec advantage_cone(Index d_J) {
    ConstraintSpec s;
    s.kind = Kind::kAdvantageCone;
    s.d_J = d_J;
    return s;
  }
  static ConstraintSpec custom(MatrixXd Y) {
    ConstraintSpec s;
    s.kind = Kind::kCustom;
    s.Y = std::move(Y);
    return s;
  }
};

/// Linear function class J^theta(x) = theta' psiJ(x), Q^theta(x,u) =
/// theta' psi(x,u), normalized so that psiJ vanishes at the equilibrium.
class Architecture {
 public:
  virtual ~Architecture() = default;

  virtual Index dim() const = 0;
  virtual VectorXd psiJ(const VectorXd& x) const = 0;
  virtual VectorXd psi(const VectorXd& x, const VectorXd& u) const = 0;
  virtual ConstraintSpec constraints() const { return ConstraintSpec::none(); }

  /// Structural description; two architectures with equal ids evaluate
  /// parameter vectors identically.
  virtual std::string id() const = 0;

  /// min_u Q^theta(x, u) over the admissible inputs, with the argmin.
  /// Default: enumerate a finite input set, ties resolved to the lowest
  /// input index. Bases with a closed-form minimum override.
  virtual std::pair<VectorXd, double> min_q(const VectorXd& theta, const VectorXd& x,
                                            const env::InputSet& inputs) const {
    require(theta.size() == dim(), "min_q: parameter dimension mismatch");
    require(inputs.is_finite(), "min_q: need a finite input set for enumeration");
    const auto& us = inputs.inputs();
    require(!us.empty(), "min_q: empty input set");
    Index best = 0;
    double best_val = theta.dot(psi(x, us[0]));
    for (size_t i = 1; i < us.size(); ++i) {
      const double v = theta.dot(psi(x, us[i]));
      if (v < best_val) {
        best_val = v;
        best = static_cast<Index>(i);
      }
    }
    return {us[static_cast<size_t>(best)], best_val};
  }

  std::string hash() const;
};

inline double eval_J(const Architecture& arch, const VectorXd& theta, const VectorXd& x) {
  require(theta.size() == arch.dim(), "eval_J: parameter dimension mismatch");
  return theta.dot(arch.psiJ(x));
}

inline double eval_Q(const Architecture& arch, const VectorXd& theta, const VectorXd& x,
                     const VectorXd& u) {
  require(theta.size() == arch.dim(), "eval_Q: parameter dimension mismatch");
  return theta.dot(arch.psi(x, u));
}

inline std::pair<VectorXd, double> min_Q(const Architecture& arch, const VectorXd& theta,
                                         const VectorXd& x, const env::InputSet& inputs) {
  return arch.min_q(theta, x, inputs);
}

/// Greedy feedback u(x) = argmin_u Q^theta(x, u).
inline std::function<VectorXd(const VectorXd&)> greedy_policy(
    std::shared_ptr<const Architecture> arch, VectorXd theta,
    std::shared_ptr<const env::ControlSystem> sys) {
  return [arch = std::move(arch), theta = std::move(theta), sys = std::move(sys)](const VectorXd& x) {
    return arch->min_q(theta, x, sys->admissible_inputs(x)).first;
  };
}

// FNV-1a over the structural description.
inline std::string Architecture::hash() const {
  const std::string s = id();
  unsigned long long h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace cvxq::approx
