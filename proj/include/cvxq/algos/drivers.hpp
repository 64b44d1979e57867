#pragma once

#include <string>
#include <vector>

#include "cvxq/approx/architecture.hpp"
#include "cvxq/explore/trajectory.hpp"
#include "cvxq/losses/losses.hpp"
#include "cvxq/qp/solver.hpp"

namespace cvxq::algos {

/// How the Galerkin rows enter the program.
enum class ConstraintMode {
  kPenalty,       // no hard rows; the positive-part penalty carries (14c)
  kGalerkinEq,    // z(theta) = 0 and z+(theta) <= Tol
  kGalerkinIneq,  // z(theta) >= -Tol (the hard-constraint mode)
};

struct AlgoConfig {
  double kappa_be = 1.0;
  double kappa_plus = 0.0;
  double tol_constraint = 0.0;
  double gamma = 1.0;

  Index batches = 20;
  Index epochs = 0;         // 0 = one pass over the batch windows
  double alpha1 = 1.0;      // step scale
  double step_power = 1.0;  // alpha_n = alpha1 / n^p; 0 freezes the step

  ConstraintMode constraint_mode = ConstraintMode::kPenalty;
  losses::PlusVariant plus_variant = losses::PlusVariant::kQ;
  bool use_cone = true;  // honor the architecture's parameter constraints

  double lambda_max = -1.0;  // primal-dual cap; negative = pilot heuristic
  // Dual step: alpha_n * dual_step_scale, or, when negative, the largest
  // stable constant for the window, 0.9 / (alpha_n |Z|_2^2).
  double dual_step_scale = 1.0;

  bool zap = false;  // matrix-gain preconditioning of the prox term
  double zap_eta = 0.85;

  bool augmented_lagrangian = false;  // experimental, default off
  double aug_rho = 1.0;

  qp::SolverSettingsd solver;
  bool record_theta = false;
};

/// Per-epoch trace of a run. Wall-clock entries are informational; every
/// numerical field is a deterministic function of (config, data).
struct RunRecord {
  std::vector<double> mu_term, be_term, plus_term, constraint_norm, step, theta_delta, wall_ms,
      objective;
  std::vector<VectorXd> thetas, lambdas;
  std::vector<std::string> notes;
  double lambda_min_diag = 0.0;  // strong-convexity diagnostic of the first window

  Index epochs() const { return static_cast<Index>(objective.size()); }
};

struct RunResult {
  VectorXd theta;
  VectorXd lambda;
  qp::Status status = qp::Status::kOptimal;
  RunRecord record;
};

/// One-shot linear program: maximize <mu, J^theta> subject to z(theta) = 0
/// and z+(theta) <= 0.
RunResult run_lpql(const explore::Trajectory& traj, const approx::Architecture& arch,
                   const losses::MuMeasure& mu, const losses::ZetaSpec& zeta,
                   const losses::ZetaSpec& zeta_plus, const AlgoConfig& cfg);

/// One-shot quadratic program: minimize -<mu,J> + kappa_be E + kappa_plus E+
/// under the configured constraint mode (hard Galerkin rows and/or the
/// architecture cone).
RunResult run_cql(const explore::Trajectory& traj, const approx::Architecture& arch,
                  const losses::MuMeasure& mu, const losses::ZetaSpec& zeta,
                  const losses::ZetaSpec& zeta_plus, const AlgoConfig& cfg,
                  const env::ControlSystem* sys = nullptr);

/// Batch iteration with proximal regularization (1/(2 alpha_n))|theta -
/// theta_n|^2 (optionally W-weighted via the matrix gain), cycling over the
/// batch windows. A zeta spec is only consulted when the constraint mode
/// asks for hard Galerkin rows inside each epoch.
RunResult run_bcql(const explore::Trajectory& traj, const approx::Architecture& arch,
                   const losses::MuMeasure& mu, const AlgoConfig& cfg, const VectorXd& theta0,
                   const losses::ZetaSpec* zeta = nullptr,
                   const env::ControlSystem* sys = nullptr);

/// Core batch iteration over prebuilt quadratic window data; the entry point
/// for losses assembled outside the deterministic total-cost setting.
RunResult run_bcql_data(const std::vector<losses::BatchLossData>& data,
                        const approx::ConstraintSpec& cone, const AlgoConfig& cfg,
                        const VectorXd& theta0);

/// Primal-dual batch iteration for the inequality-constrained program; the
/// dual ascends on the batch Galerkin rows under a componentwise cap.
RunResult run_pd_bcql(const explore::Trajectory& traj, const approx::Architecture& arch,
                      const losses::MuMeasure& mu, const losses::ZetaSpec& zeta,
                      const AlgoConfig& cfg, const VectorXd& theta0);

/// Frozen-target baseline: each epoch minimizes the batch quadratic with the
/// previous parameter's state minimum as the target.
RunResult run_dqn(const explore::Trajectory& traj, const approx::Architecture& arch,
                  const env::ControlSystem& sys, const AlgoConfig& cfg, const VectorXd& theta0);

/// Ergodic average of D_{k+1}(theta) zeta_k with the classical temporal
/// difference; the fixed-point certificate for the frozen-target iteration.
VectorXd projected_bellman_residual(const explore::Trajectory& traj,
                                    const approx::Architecture& arch, const VectorXd& theta,
                                    const env::ControlSystem& sys,
                                    const losses::ZetaSpec& zeta = losses::ZetaSpec::psi(),
                                    double gamma = 1.0);

}  // namespace cvxq::algos
