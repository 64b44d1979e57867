#pragma once

#include "cvxq/approx/architecture.hpp"
#include "cvxq/qp/solver.hpp"

namespace cvxq::approx {

/// Euclidean projection onto the architecture's feasible cone. The advantage
/// cone reduces to clamping the trailing coordinates at zero; a custom
/// polyhedral cone goes through the quadratic-program engine.
inline VectorXd project_constraints(const Architecture& arch, const VectorXd& theta) {
  require(theta.size() == arch.dim(), "project_constraints: parameter dimension mismatch");
  const ConstraintSpec spec = arch.constraints();
  switch (spec.kind) {
    case ConstraintSpec::Kind::kNone:
      return theta;
    case ConstraintSpec::Kind::kAdvantageCone: {
      VectorXd out = theta;
      for (Index i = spec.d_J; i < out.size(); ++i) out[i] = std::max(out[i], 0.0);
      return out;
    }
    case ConstraintSpec::Kind::kCustom: {
      qp::Programd prob;
      prob.set_objective(MatrixXd::Identity(theta.size(), theta.size()), -theta);
      prob.A_in = spec.Y.sparseView();
      prob.b_in = VectorXd::Zero(spec.Y.rows());
      auto sol = qp::solve(prob);
      require(sol.optimal(), "project_constraints: projection solve failed");
      return sol.x;
    }
  }
  return theta;
}

}  // namespace cvxq::approx
