#pragma once

#include <optional>

#include "cvxq/oracles/value_iteration.hpp"

namespace cvxq::oracles {

/// Feasibility / dominance report for a candidate pair (J, Q) against the
/// two-sided program constraints
///   Q(x,u) <= c(x,u) + gamma J(F(x,u)),   Q(x,u) >= J(x),   J(xe) = 0
/// plus the optional tightened lower bound
///   Q(x,u) >= (1 - rho) c(x,u) + gamma J(F(x,u)).
/// Any feasible pair is dominated by the optimal value: J <= J° pointwise.
struct DplpReport {
  bool feasible = false;
  double worst_upper = 0.0;      // max Q - (c + gamma J(F))
  double worst_lower = 0.0;      // max J - Q
  double worst_tightened = 0.0;  // max (1-rho) c + gamma J(F) - Q, when rho given
  double equilibrium_value = 0.0;
  bool dominated = false;
  double max_excess = 0.0;  // max J - J°
};

inline DplpReport dplp_certificate(const env::FiniteSystem& sys, const VectorXd& J,
                                   const MatrixXd& Q, double tol = 1e-9,
                                   std::optional<double> rho = std::nullopt,
                                   double gamma = 1.0) {
  const Index S = sys.num_states(), A = sys.num_inputs();
  require(J.size() == S && Q.rows() == S && Q.cols() == A, "dplp_certificate: table shapes");
  DplpReport rep;
  rep.worst_upper = -kInf;
  rep.worst_lower = -kInf;
  rep.worst_tightened = -kInf;
  for (Index s = 0; s < S; ++s) {
    for (Index a = 0; a < A; ++a) {
      const double cj = sys.cost_at(s, a) + gamma * J[sys.next_at(s, a)];
      rep.worst_upper = std::max(rep.worst_upper, Q(s, a) - cj);
      rep.worst_lower = std::max(rep.worst_lower, J[s] - Q(s, a));
      if (rho) {
        const double tightened = (1.0 - *rho) * sys.cost_at(s, a) + gamma * J[sys.next_at(s, a)];
        rep.worst_tightened = std::max(rep.worst_tightened, tightened - Q(s, a));
      }
    }
  }
  rep.equilibrium_value = std::abs(J[sys.eq_state_index()]);
  rep.feasible = rep.worst_upper <= tol && rep.worst_lower <= tol &&
                 rep.equilibrium_value <= tol &&
                 (!rho || rep.worst_tightened <= tol);

  const auto vi = value_iteration(sys, 1e-12, gamma);
  rep.max_excess = (J - vi.J).maxCoeff();
  rep.dominated = rep.max_excess <= tol;
  return rep;
}

}  // namespace cvxq::oracles
