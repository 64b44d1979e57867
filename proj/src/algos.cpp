#include "cvxq/algos/drivers.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "cvxq/approx/project.hpp"
#include "cvxq/qp/updates.hpp"

namespace cvxq::algos {

using approx::Architecture;
using approx::ConstraintSpec;
using explore::Sample;
using explore::Trajectory;
using losses::AssembleOptions;
using losses::BatchLossData;
using losses::BatchWindow;
using losses::MuMeasure;
using losses::PlusVariant;
using losses::ZetaSpec;

namespace {

double step_size(const AlgoConfig& cfg, Index n) {
  return cfg.alpha1 / std::pow(double(n), cfg.step_power);
}

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

/// Rows tying a slack to the positive part it dominates: each row i demands
/// rows_i . theta <= s_{owner_i}.
struct SlackBlock {
  MatrixXd rows;
  std::vector<Index> owner;
  Index num_slacks = 0;
};

SlackBlock plus_slacks_q(const BatchLossData& data) {
  SlackBlock b;
  b.rows = data.plus_rows;
  if (!data.plus_owner.empty()) {
    b.owner = data.plus_owner;
    b.num_slacks = data.plus_slack_count;
  } else {
    b.num_slacks = data.plus_rows.rows();
    b.owner.resize(static_cast<size_t>(b.num_slacks));
    for (Index i = 0; i < b.num_slacks; ++i) b.owner[static_cast<size_t>(i)] = i;
  }
  return b;
}

// Replaces the per-sample rows by one row per admissible input, sharing the
// sample's slack: the slack then dominates J - minQ.
void install_minq_rows(BatchLossData& data, const Architecture& arch, const Trajectory& traj,
                       const BatchWindow& window, const env::ControlSystem& sys) {
  std::vector<VectorXd> rows;
  std::vector<Index> owner;
  for (Index k = window.begin; k < window.end; ++k) {
    const Sample s = traj[k];
    const auto inputs = sys.admissible_inputs(s.x);
    require(inputs.is_finite(), "plus penalty (minQ variant): need finite input sets");
    const VectorXd psij = arch.psiJ(s.x);
    for (const auto& u : inputs.inputs()) {
      rows.push_back(psij - arch.psi(s.x, u));
      owner.push_back(k - window.begin);
    }
  }
  data.plus_rows.resize(static_cast<Index>(rows.size()), arch.dim());
  for (size_t i = 0; i < rows.size(); ++i) data.plus_rows.row(static_cast<Index>(i)) = rows[i];
  data.plus_owner = std::move(owner);
  data.plus_slack_count = window.length();
}

struct ProgramSpec {
  const BatchLossData* data = nullptr;
  const AlgoConfig* cfg = nullptr;
  ConstraintSpec cone;
  bool hard_rows = false;       // apply cfg->constraint_mode rows
  const SlackBlock* slacks = nullptr;
  const VectorXd* lambda = nullptr;      // primal-dual linearization
  const VectorXd* theta_prox = nullptr;  // proximal center
  double alpha = kInf;
  const MatrixXd* W = nullptr;
};

qp::Programd assemble_program(const ProgramSpec& spec) {
  const BatchLossData& data = *spec.data;
  const AlgoConfig& cfg = *spec.cfg;
  const Index d = data.d;
  const Index ns = spec.slacks ? spec.slacks->num_slacks : 0;
  const Index nv = d + ns;

  MatrixXd P = MatrixXd::Zero(nv, nv);
  VectorXd q = VectorXd::Zero(nv);
  P.topLeftCorner(d, d) = 2.0 * cfg.kappa_be * data.P;
  q.head(d) = 2.0 * cfg.kappa_be * data.q - data.mu_vec;
  if (spec.lambda) q.head(d) += data.Z.transpose() * (*spec.lambda);
  if (spec.theta_prox) {
    require(std::isfinite(spec.alpha) && spec.alpha > 0.0, "epoch program: bad step size");
    const MatrixXd& W = spec.W ? *spec.W : MatrixXd::Identity(d, d).eval();
    P.topLeftCorner(d, d) += W / spec.alpha;
    q.head(d) -= W * (*spec.theta_prox) / spec.alpha;
  }
  if (ns > 0)
    P.bottomRightCorner(ns, ns) =
        (2.0 * cfg.kappa_plus / data.r) * MatrixXd::Identity(ns, ns);

  qp::Programd prob;
  prob.set_objective(P, q);

  std::vector<Eigen::Triplet<double>> in_trips;
  std::vector<double> in_rhs;
  auto add_in_row = [&](const Eigen::RowVectorXd& row_theta, Index slack, double rhs) {
    const Index r = static_cast<Index>(in_rhs.size());
    for (Index j = 0; j < d; ++j)
      if (row_theta[j] != 0.0) in_trips.emplace_back(r, j, row_theta[j]);
    if (slack >= 0) in_trips.emplace_back(r, d + slack, -1.0);
    in_rhs.push_back(rhs);
  };

  if (spec.hard_rows) {
    if (cfg.constraint_mode == ConstraintMode::kGalerkinEq) {
      MatrixXd Ae = MatrixXd::Zero(data.Z.rows(), nv);
      Ae.leftCols(d) = data.Z;
      prob.A_eq = Ae.sparseView();
      prob.b_eq = data.b_z;
      for (Index i = 0; i < data.Zp.rows(); ++i)
        add_in_row(data.Zp.row(i), -1, cfg.tol_constraint);
    } else if (cfg.constraint_mode == ConstraintMode::kGalerkinIneq) {
      for (Index i = 0; i < data.Z.rows(); ++i)
        add_in_row(data.Z.row(i), -1, data.b_z[i] + cfg.tol_constraint);
    }
  }
  if (spec.slacks) {
    for (Index i = 0; i < spec.slacks->rows.rows(); ++i)
      add_in_row(spec.slacks->rows.row(i), spec.slacks->owner[static_cast<size_t>(i)], 0.0);
  }
  if (cfg.use_cone && spec.cone.kind == ConstraintSpec::Kind::kCustom) {
    for (Index i = 0; i < spec.cone.Y.rows(); ++i) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(d);
      row = spec.cone.Y.row(i);
      add_in_row(row, -1, 0.0);
    }
  }
  if (!in_rhs.empty()) {
    SparseMatrixXd A(static_cast<Index>(in_rhs.size()), nv);
    A.setFromTriplets(in_trips.begin(), in_trips.end());
    prob.A_in = A;
    prob.b_in = Eigen::Map<VectorXd>(in_rhs.data(), static_cast<Index>(in_rhs.size()));
  }

  const bool cone_box =
      cfg.use_cone && spec.cone.kind == ConstraintSpec::Kind::kAdvantageCone && spec.cone.d_J < d;
  if (cone_box || ns > 0) {
    prob.lo = VectorXd::Constant(nv, -kInf);
    prob.hi = VectorXd::Constant(nv, kInf);
    if (cone_box) prob.lo.segment(spec.cone.d_J, d - spec.cone.d_J).setZero();
    if (ns > 0) prob.lo.tail(ns).setZero();
  }
  return prob;
}

struct TermEval {
  double mu, be, plus, violation;
};

TermEval evaluate_terms(const BatchLossData& data, const AlgoConfig& cfg, const VectorXd& theta,
                        const Architecture& arch, const Trajectory& traj,
                        const BatchWindow& window, const env::ControlSystem* sys) {
  TermEval t{};
  t.mu = data.mu_vec.dot(theta);
  t.be = data.bellman(theta);
  t.plus = (cfg.kappa_plus > 0.0)
               ? losses::eval_plus_penalty(arch, theta, traj, window, cfg.plus_variant, sys)
               : 0.0;
  t.violation = 0.0;
  if (cfg.constraint_mode == ConstraintMode::kGalerkinEq && data.Z.rows() > 0) {
    t.violation = data.z(theta).lpNorm<Eigen::Infinity>();
    if (data.Zp.rows() > 0)
      t.violation = std::max(t.violation, (data.z_plus(theta).array() - cfg.tol_constraint)
                                              .maxCoeff());
  } else if (cfg.constraint_mode == ConstraintMode::kGalerkinIneq && data.Z.rows() > 0) {
    t.violation = std::max(0.0, (-data.z(theta).array() - cfg.tol_constraint).maxCoeff());
  }
  return t;
}

void push_record(RunRecord& rec, const TermEval& t, const AlgoConfig& cfg, double alpha,
                 double dtheta, double ms, const VectorXd* theta, const VectorXd* lambda) {
  rec.mu_term.push_back(t.mu);
  rec.be_term.push_back(t.be);
  rec.plus_term.push_back(t.plus);
  rec.constraint_norm.push_back(t.violation);
  rec.step.push_back(alpha);
  rec.theta_delta.push_back(dtheta);
  rec.wall_ms.push_back(ms);
  rec.objective.push_back(-t.mu + cfg.kappa_be * t.be + cfg.kappa_plus * t.plus);
  if (cfg.record_theta && theta) rec.thetas.push_back(*theta);
  if (cfg.record_theta && lambda) rec.lambdas.push_back(*lambda);
}

void diagnose_convexity(RunRecord& rec, const BatchLossData& data) {
  if (data.d > 1500) return;
  rec.lambda_min_diag = data.lambda_min();
  if (rec.lambda_min_diag < 1e-10 * std::max(1.0, data.P.trace())) {
    rec.notes.push_back(
        "warning: mean-square Bellman error is nearly degenerate (lambda_min(P) ~ 0); "
        "the consistency guarantee does not apply");
  }
}

RunResult one_shot(const Trajectory& traj, const Architecture& arch, const MuMeasure& mu,
                   const ZetaSpec& zeta, const ZetaSpec& zeta_plus, const AlgoConfig& cfg,
                   bool quadratic, const env::ControlSystem* sys) {
  const BatchWindow window = losses::full_window(traj);
  AssembleOptions opts;
  opts.gamma = cfg.gamma;
  opts.with_plus_rows = quadratic && cfg.kappa_plus > 0.0 && cfg.plus_variant == PlusVariant::kQ;
  BatchLossData data = losses::assemble_batch(arch, traj, window, mu, zeta, zeta_plus, opts);

  RunResult out;
  diagnose_convexity(out.record, data);

  AlgoConfig local = cfg;
  if (!quadratic) {
    local.kappa_be = 0.0;
    local.kappa_plus = 0.0;
    local.constraint_mode = ConstraintMode::kGalerkinEq;
  }

  SlackBlock slacks;
  ProgramSpec spec;
  spec.data = &data;
  spec.cfg = &local;
  spec.cone = arch.constraints();
  spec.hard_rows = local.constraint_mode != ConstraintMode::kPenalty;
  if (quadratic && local.kappa_plus > 0.0) {
    if (local.plus_variant == PlusVariant::kMinQ)
      install_minq_rows(data, arch, traj, window, *sys);
    slacks = plus_slacks_q(data);
    spec.slacks = &slacks;
  }

  const double t0 = now_ms();
  auto sol = qp::solve(assemble_program(spec), local.solver);
  out.status = sol.status;
  out.theta = sol.x.head(arch.dim());
  out.lambda = sol.y_in;
  const TermEval terms = evaluate_terms(data, local, out.theta, arch, traj, window, sys);
  push_record(out.record, terms, local, kInf, 0.0, now_ms() - t0, &out.theta, nullptr);
  if (!sol.optimal()) {
    std::ostringstream os;
    os << "solver status " << qp::to_string(sol.status) << ", kkt residual " << sol.kkt.max();
    out.record.notes.push_back(os.str());
  }
  return out;
}

}  // namespace

RunResult run_lpql(const Trajectory& traj, const Architecture& arch, const MuMeasure& mu,
                   const ZetaSpec& zeta, const ZetaSpec& zeta_plus, const AlgoConfig& cfg) {
  return one_shot(traj, arch, mu, zeta, zeta_plus, cfg, /*quadratic=*/false, nullptr);
}

RunResult run_cql(const Trajectory& traj, const Architecture& arch, const MuMeasure& mu,
                  const ZetaSpec& zeta, const ZetaSpec& zeta_plus, const AlgoConfig& cfg,
                  const env::ControlSystem* sys) {
  if (cfg.kappa_plus > 0.0 && cfg.plus_variant == PlusVariant::kMinQ)
    require(sys != nullptr, "run_cql: the minQ plus-variant needs the plant");
  return one_shot(traj, arch, mu, zeta, zeta_plus, cfg, /*quadratic=*/true, sys);
}

RunResult run_bcql(const Trajectory& traj, const Architecture& arch, const MuMeasure& mu,
                   const AlgoConfig& cfg, const VectorXd& theta0, const ZetaSpec* zeta,
                   const env::ControlSystem* sys) {
  require(theta0.size() == arch.dim(), "run_bcql: theta0 dimension mismatch");
  const bool hard_rows = cfg.constraint_mode != ConstraintMode::kPenalty;
  require(!hard_rows || zeta != nullptr, "run_bcql: hard Galerkin rows need a zeta spec");
  const bool minq_plus = cfg.kappa_plus > 0.0 && cfg.plus_variant == PlusVariant::kMinQ;
  require(!minq_plus || sys != nullptr, "run_bcql: the minQ plus-variant needs the plant");
  require(!(minq_plus && cfg.zap), "run_bcql: matrix gain supports the plain plus-variant only");
  const auto windows = losses::equal_windows(traj.size(), cfg.batches);
  AssembleOptions opts;
  opts.gamma = cfg.gamma;
  opts.with_plus_rows = (cfg.kappa_plus > 0.0 && cfg.plus_variant == PlusVariant::kQ) || cfg.zap;
  ZetaSpec no_zeta = ZetaSpec::grouped(nullptr, 0);

  std::vector<BatchLossData> data;
  data.reserve(windows.size());
  for (size_t i = 0; i < windows.size(); ++i) {
    data.push_back(
        losses::assemble_batch(arch, traj, windows[i], mu, zeta ? *zeta : no_zeta, no_zeta, opts));
    if (minq_plus) install_minq_rows(data.back(), arch, traj, windows[i], *sys);
  }
  return run_bcql_data(data, arch.constraints(), cfg, theta0);
}

RunResult run_bcql_data(const std::vector<BatchLossData>& data, const ConstraintSpec& cone,
                        const AlgoConfig& cfg, const VectorXd& theta0) {
  require(!data.empty(), "run_bcql_data: no batch windows");
  const Index d = data.front().d;
  require(theta0.size() == d, "run_bcql_data: theta0 dimension mismatch");
  const bool hard_rows = cfg.constraint_mode != ConstraintMode::kPenalty;
  const Index B = static_cast<Index>(data.size());

  RunResult out;
  diagnose_convexity(out.record, data.front());
  const Index epochs = cfg.epochs > 0 ? cfg.epochs : B;
  VectorXd theta = theta0;
  MatrixXd W;  // empty = identity

  for (Index n = 1; n <= epochs; ++n) {
    const double t0 = now_ms();
    const Index w = (n - 1) % B;
    const double alpha = step_size(cfg, n);

    if (cfg.zap) {
      // Hessian estimate of the epoch loss at the current iterate
      MatrixXd A = 2.0 * cfg.kappa_be * data[static_cast<size_t>(w)].P;
      if (cfg.kappa_plus > 0.0) {
        const auto& rows = data[static_cast<size_t>(w)].plus_rows;
        for (Index i = 0; i < rows.rows(); ++i) {
          if (rows.row(i).dot(theta) > 0.0)
            A += (2.0 * cfg.kappa_plus / data[static_cast<size_t>(w)].r) * rows.row(i).transpose() *
                 rows.row(i);
        }
      }
      const double beta = std::min(1.0, std::pow(alpha, cfg.zap_eta));
      W = (W.size() == 0) ? A : qp::zap_gain_update(W, A, beta);
    }

    SlackBlock slacks;
    ProgramSpec spec;
    spec.data = &data[static_cast<size_t>(w)];
    spec.cfg = &cfg;
    spec.cone = cone;
    spec.hard_rows = hard_rows;
    spec.theta_prox = &theta;
    spec.alpha = alpha;
    MatrixXd Wreg;
    if (cfg.zap && W.size() > 0) {
      Wreg = W + 1e-8 * MatrixXd::Identity(d, d);
      spec.W = &Wreg;
    }
    if (cfg.kappa_plus > 0.0) {
      slacks = plus_slacks_q(data[static_cast<size_t>(w)]);
      spec.slacks = &slacks;
    }

    auto sol = qp::solve(assemble_program(spec), cfg.solver);
    if (!sol.optimal()) {
      out.status = sol.status;
      out.record.notes.push_back("epoch solve failed; stopping early");
      break;
    }
    const VectorXd theta_next = sol.x.head(d);
    const double dtheta = (theta_next - theta).lpNorm<Eigen::Infinity>();
    theta = theta_next;
    TermEval t{};
    t.mu = data[static_cast<size_t>(w)].mu_vec.dot(theta);
    t.be = data[static_cast<size_t>(w)].bellman(theta);
    if (cfg.kappa_plus > 0.0 && data[static_cast<size_t>(w)].plus_rows.rows() > 0) {
      const VectorXd gaps = (data[static_cast<size_t>(w)].plus_rows * theta).cwiseMax(0.0);
      t.plus = gaps.squaredNorm() / data[static_cast<size_t>(w)].r;
    }
    if (hard_rows && data[static_cast<size_t>(w)].Z.rows() > 0) {
      const VectorXd z = data[static_cast<size_t>(w)].z(theta);
      t.violation = (cfg.constraint_mode == ConstraintMode::kGalerkinEq)
                        ? z.lpNorm<Eigen::Infinity>()
                        : std::max(0.0, (-z.array() - cfg.tol_constraint).maxCoeff());
    }
    push_record(out.record, t, cfg, alpha, dtheta, now_ms() - t0, &theta, nullptr);
  }
  out.theta = theta;
  return out;
}

RunResult run_pd_bcql(const Trajectory& traj, const Architecture& arch, const MuMeasure& mu,
                      const ZetaSpec& zeta, const AlgoConfig& cfg, const VectorXd& theta0) {
  require(theta0.size() == arch.dim(), "run_pd_bcql: theta0 dimension mismatch");
  const ConstraintSpec cone = arch.constraints();
  require(cone.kind == ConstraintSpec::Kind::kAdvantageCone,
          "run_pd_bcql: the architecture must expose the advantage cone");
  const auto windows = losses::equal_windows(traj.size(), cfg.batches);
  const Index B = static_cast<Index>(windows.size());
  AssembleOptions opts;
  opts.gamma = cfg.gamma;
  opts.with_plus_rows = false;
  ZetaSpec no_zeta = ZetaSpec::grouped(nullptr, 0);

  std::vector<BatchLossData> data;
  data.reserve(static_cast<size_t>(B));
  for (const auto& w : windows)
    data.push_back(losses::assemble_batch(arch, traj, w, mu, zeta, no_zeta, opts));
  const Index zdim = data.front().Z.rows();

  // Lipschitz constant of the dual gradient per window: the largest
  // eigenvalue of Z H^{-1} Z' with H the primal Hessian including the prox
  // weight; the dual step 0.9 / L keeps the ascent stable.
  std::vector<double> dual_lipschitz(static_cast<size_t>(B), 0.0);
  auto dual_curvature = [&](Index b, double alpha) {
    const MatrixXd& Z = data[static_cast<size_t>(b)].Z;
    const MatrixXd H = 2.0 * cfg.kappa_be * data[static_cast<size_t>(b)].P +
                       MatrixXd::Identity(arch.dim(), arch.dim()) / alpha;
    Eigen::LLT<MatrixXd> hllt(H);
    VectorXd v = VectorXd::Ones(Z.rows()).normalized();
    double lam = 0.0;
    for (int it = 0; it < 60; ++it) {
      VectorXd w = Z * hllt.solve(Z.transpose() * v);
      lam = w.norm();
      if (lam <= 0.0) break;
      v = w / lam;
    }
    return lam;
  };

  RunResult out;
  diagnose_convexity(out.record, data.front());

  // Componentwise dual cap, by configuration or from a pilot one-shot solve.
  VectorXd lambda_max;
  if (cfg.lambda_max >= 0.0) {
    lambda_max = VectorXd::Constant(zdim, cfg.lambda_max);
  } else {
    AlgoConfig pilot = cfg;
    pilot.constraint_mode = ConstraintMode::kGalerkinIneq;
    pilot.kappa_plus = 0.0;
    auto pilot_run = run_cql(traj, arch, mu, zeta, no_zeta, pilot);
    const double top =
        pilot_run.lambda.size() ? pilot_run.lambda.lpNorm<Eigen::Infinity>() : 0.0;
    lambda_max = VectorXd::Constant(zdim, 10.0 * std::max(top, 0.1));
    std::ostringstream os;
    os << "pilot dual cap: lambda_max = " << lambda_max[0];
    out.record.notes.push_back(os.str());
  }

  const Index epochs = cfg.epochs > 0 ? cfg.epochs : B;
  VectorXd theta = approx::project_constraints(arch, theta0);
  VectorXd lambda = VectorXd::Zero(zdim);
  qp::Solutiond warm;

  for (Index n = 1; n <= epochs; ++n) {
    const double t0 = now_ms();
    const Index w = (n - 1) % B;
    const double alpha = step_size(cfg, n);
    qp::PdStepOptions step;
    step.kappa_be = cfg.kappa_be;
    step.alpha = alpha;
    if (cfg.dual_step_scale >= 0.0) {
      step.dual_alpha = cfg.dual_step_scale * alpha;
    } else {
      if (dual_lipschitz[static_cast<size_t>(w)] == 0.0 || cfg.step_power != 0.0)
        dual_lipschitz[static_cast<size_t>(w)] = dual_curvature(w, alpha);
      step.dual_alpha = 0.9 / std::max(dual_lipschitz[static_cast<size_t>(w)], 1e-12);
    }
    step.lambda_max = lambda_max;
    step.cone_d_J = cone.d_J;
    step.solver = cfg.solver;
    auto [theta_next, lambda_next] =
        qp::primal_dual_step(data[static_cast<size_t>(w)], theta, lambda, step, &warm);
    const double dtheta = (theta_next - theta).lpNorm<Eigen::Infinity>();
    theta = theta_next;
    lambda = lambda_next;

    TermEval t{};
    t.mu = data[static_cast<size_t>(w)].mu_vec.dot(theta);
    t.be = data[static_cast<size_t>(w)].bellman(theta);
    t.plus = 0.0;
    t.violation =
        std::max(0.0, -data[static_cast<size_t>(w)].z(theta).minCoeff());
    push_record(out.record, t, cfg, alpha, dtheta, now_ms() - t0, &theta, &lambda);
  }
  out.theta = theta;
  out.lambda = lambda;
  return out;
}

RunResult run_dqn(const Trajectory& traj, const Architecture& arch, const env::ControlSystem& sys,
                  const AlgoConfig& cfg, const VectorXd& theta0) {
  require(theta0.size() == arch.dim(), "run_dqn: theta0 dimension mismatch");
  const Index d = arch.dim();
  const auto windows = losses::equal_windows(traj.size(), cfg.batches);
  const Index B = static_cast<Index>(windows.size());

  // Per-window feature rows and Gram matrices; the frozen target is the only
  // piece that changes across epochs.
  std::vector<MatrixXd> psi_rows(static_cast<size_t>(B));
  std::vector<MatrixXd> gram(static_cast<size_t>(B));
  for (Index b = 0; b < B; ++b) {
    const auto& w = windows[static_cast<size_t>(b)];
    MatrixXd rows(w.length(), d);
    for (Index k = w.begin; k < w.end; ++k) {
      const Sample s = traj[k];
      rows.row(k - w.begin) = arch.psi(s.x, s.u).transpose();
    }
    gram[static_cast<size_t>(b)] = rows.transpose() * rows;
    psi_rows[static_cast<size_t>(b)] = std::move(rows);
  }

  RunResult out;
  const Index epochs = cfg.epochs > 0 ? cfg.epochs : B;
  VectorXd theta = theta0;
  for (Index n = 1; n <= epochs; ++n) {
    const double t0 = now_ms();
    const Index b = (n - 1) % B;
    const auto& w = windows[static_cast<size_t>(b)];
    const double r = double(w.length());
    const double alpha = step_size(cfg, n);

    VectorXd targets(w.length());
    for (Index k = w.begin; k < w.end; ++k) {
      const Sample s = traj[k];
      const double qmin = arch.min_q(theta, s.xnext, sys.admissible_inputs(s.xnext)).second;
      targets[k - w.begin] = s.c + cfg.gamma * qmin;
    }
    const VectorXd rhs_data = psi_rows[static_cast<size_t>(b)].transpose() * targets;

    const double scale = 2.0 * cfg.kappa_be / r;
    MatrixXd K = scale * gram[static_cast<size_t>(b)];
    VectorXd rhs = scale * rhs_data;
    if (std::isfinite(alpha)) {
      K += (2.0 / alpha) * MatrixXd::Identity(d, d);
      rhs += (2.0 / alpha) * theta;
    }
    Eigen::LDLT<MatrixXd> ldlt(K);
    VectorXd theta_next = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !theta_next.allFinite() ||
        (K * theta_next - rhs).lpNorm<Eigen::Infinity>() >
            1e-8 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) {
      const double ridge = 1e-10 * std::max(1.0, K.trace() / double(d));
      K += ridge * MatrixXd::Identity(d, d);
      theta_next = K.ldlt().solve(rhs);
      out.record.notes.push_back("epoch " + std::to_string(n) +
                                 ": singular normal equations; ridge fallback applied");
    }

    const double dtheta = (theta_next - theta).lpNorm<Eigen::Infinity>();
    theta = theta_next;

    // frozen-target quadratic and its Galerkin residual at the new iterate
    const VectorXd res = targets - psi_rows[static_cast<size_t>(b)] * theta;
    TermEval t{};
    t.mu = 0.0;
    t.be = res.squaredNorm() / r;
    t.plus = 0.0;
    t.violation = (psi_rows[static_cast<size_t>(b)].transpose() * res / r)
                      .lpNorm<Eigen::Infinity>();
    push_record(out.record, t, cfg, alpha, dtheta, now_ms() - t0, &theta, nullptr);
  }
  out.theta = theta;
  return out;
}

VectorXd projected_bellman_residual(const Trajectory& traj, const Architecture& arch,
                                    const VectorXd& theta, const env::ControlSystem& sys,
                                    const ZetaSpec& zeta, double gamma) {
  require(traj.size() > 0, "projected_bellman_residual: empty trajectory");
  const Index dim = zeta.dim(arch.dim());
  VectorXd acc = VectorXd::Zero(dim);
  for (Index k = 0; k < traj.size(); ++k) {
    const Sample s = traj[k];
    const double td = losses::td_watkins(arch, theta, s, sys.admissible_inputs(s.xnext), gamma);
    switch (zeta.kind) {
      case ZetaSpec::Kind::kPsi:
        acc += td * arch.psi(s.x, s.u);
        break;
      case ZetaSpec::Kind::kGrouped: {
        const Index g = zeta.group(s);
        if (g >= 0) acc[g] += td;
        break;
      }
      case ZetaSpec::Kind::kCustom:
        acc += td * zeta.custom(s);
        break;
    }
  }
  return acc / double(traj.size());
}

}  // namespace cvxq::algos
