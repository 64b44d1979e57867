#pragma once

#include <Eigen/Eigenvalues>

#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cvxq/approx/architecture.hpp"
#include "cvxq/explore/trajectory.hpp"

namespace cvxq::losses {

/// Weighted point measure entering the objective through <mu, J^theta>.
struct MuMeasure {
  std::vector<VectorXd> points;
  VectorXd weights;

  static MuMeasure unit(std::vector<VectorXd> pts) {
    MuMeasure m;
    m.weights = VectorXd::Ones(static_cast<Index>(pts.size()));
    m.points = std::move(pts);
    return m;
  }
  static MuMeasure dirac(VectorXd x) { return unit({std::move(x)}); }
  static MuMeasure empty() { return {}; }

  void validate() const {
    require(static_cast<Index>(points.size()) == weights.size(), "MuMeasure: size mismatch");
    for (Index i = 0; i < weights.size(); ++i)
      require(weights[i] > 0.0, "MuMeasure: weights must be positive");
  }

  /// sum_i w_i psiJ(x_i), so that <mu, J^theta> = theta . feature_vector
  VectorXd feature_vector(const approx::Architecture& arch) const {
    VectorXd g = VectorXd::Zero(arch.dim());
    for (size_t i = 0; i < points.size(); ++i) g += weights[static_cast<Index>(i)] * arch.psiJ(points[i]);
    return g;
  }

  double value(const approx::Architecture& arch, const VectorXd& theta) const {
    return theta.dot(feature_vector(arch));
  }
};

/// Observed Bellman error of the over-parameterized pair:
///   -Q^theta(x,u) + c + gamma J^theta(x+).
inline double td_overparam(const approx::Architecture& arch, const VectorXd& theta,
                           const explore::Sample& s, double gamma = 1.0) {
  return -theta.dot(arch.psi(s.x, s.u)) + s.c + gamma * theta.dot(arch.psiJ(s.xnext));
}

/// Classical temporal difference with the state minimum at the next state:
///   -Q^theta(x,u) + c + gamma min_u' Q^theta(x+, u').
inline double td_watkins(const approx::Architecture& arch, const VectorXd& theta,
                         const explore::Sample& s, const env::InputSet& inputs_at_next,
                         double gamma = 1.0) {
  const double qmin = arch.min_q(theta, s.xnext, inputs_at_next).second;
  return -theta.dot(arch.psi(s.x, s.u)) + s.c + gamma * qmin;
}

/// Eligibility-vector specification for the Galerkin rows.
struct ZetaSpec {
  enum class Kind { kPsi, kGrouped, kCustom };
  Kind kind = Kind::kPsi;
  // kGrouped: one non-negative indicator coordinate per group
  std::function<Index(const explore::Sample&)> group;  // -1 skips the sample
  Index num_groups = 0;
  // kCustom
  std::function<VectorXd(const explore::Sample&)> custom;
  Index custom_dim = 0;
  bool nonneg = true;  // required when the rows feed inequality constraints

  static ZetaSpec psi() {
    ZetaSpec z;
    z.kind = Kind::kPsi;
    z.nonneg = false;
    return z;
  }
  static ZetaSpec grouped(std::function<Index(const explore::Sample&)> g, Index n) {
    ZetaSpec z;
    z.kind = Kind::kGrouped;
    z.group = std::move(g);
    z.num_groups = n;
    return z;
  }

  Index dim(Index arch_dim) const {
    switch (kind) {
      case Kind::kPsi: return arch_dim;
      case Kind::kGrouped: return num_groups;
      case Kind::kCustom: return custom_dim;
    }
    return 0;
  }
};

/// Indicator per (state, input) pair of a finite model.
inline ZetaSpec zeta_finite_pairs(const env::FiniteSystem& sys) {
  const Index A = sys.num_inputs();
  return ZetaSpec::grouped(
      [A](const explore::Sample& s) {
        return env::FiniteSystem::state_index(s.x) * A + env::FiniteSystem::input_index(s.u);
      },
      sys.num_states() * A);
}

/// Compact indicators over the cells a trajectory actually visits; cells are
/// defined by a raw key (for example bin index and input sign).
inline ZetaSpec zeta_visited_cells(const explore::Trajectory& traj,
                                   std::function<long long(const explore::Sample&)> raw_key) {
  auto table = std::make_shared<std::unordered_map<long long, Index>>();
  for (Index k = 0; k < traj.size(); ++k) {
    const long long key = raw_key(traj[k]);
    if (key >= 0 && !table->count(key)) table->emplace(key, static_cast<Index>(table->size()));
  }
  const Index n = static_cast<Index>(table->size());
  return ZetaSpec::grouped(
      [table, raw_key](const explore::Sample& s) -> Index {
        const auto it = table->find(raw_key(s));
        return it == table->end() ? Index(-1) : it->second;
      },
      n);
}

struct BatchWindow {
  Index begin = 0;
  Index end = 0;
  Index length() const { return end - begin; }
};

inline std::vector<BatchWindow> equal_windows(Index n, Index batches) {
  require(n >= 1 && batches >= 1, "equal_windows: bad arguments");
  batches = std::min(batches, n);
  std::vector<BatchWindow> w;
  w.reserve(static_cast<size_t>(batches));
  for (Index b = 0; b < batches; ++b) {
    const Index lo = b * n / batches;
    const Index hi = (b + 1) * n / batches;
    if (hi > lo) w.push_back({lo, hi});
  }
  return w;
}

inline BatchWindow full_window(const explore::Trajectory& traj) { return {0, traj.size()}; }

enum class PlusVariant { kQ, kMinQ };  // {J - Q}_+ or {J - minQ}_+

/// Exact quadratic representation of the batch mean-square Bellman error,
///     E_n(theta) = theta'P theta + 2 q'theta + k0,
/// together with the Galerkin rows z_n(theta) = b_z - Z theta, the advantage
/// rows z+_n(theta) = Zp theta, the objective vector <mu, psiJ>, and the raw
/// per-sample rows (psiJ(x) - psi(x,u))' backing the positive-part penalty.
struct BatchLossData {
  Index d = 0;
  double r = 0.0;  // window length; all sums are normalized by it
  MatrixXd P;
  VectorXd q;
  double k0 = 0.0;
  MatrixXd Z;
  VectorXd b_z;
  MatrixXd Zp;
  VectorXd mu_vec;
  MatrixXd plus_rows;  // (window length) x d, empty unless requested
  // minQ variant: one row per (sample, admissible input) with plus_owner
  // mapping rows to their sample's slack; empty owner = one row per sample
  std::vector<Index> plus_owner;
  Index plus_slack_count = 0;  // 0 = one slack per row
  double gamma = 1.0;

  double bellman(const VectorXd& theta) const {
    return theta.dot(P * theta) + 2.0 * q.dot(theta) + k0;
  }
  VectorXd z(const VectorXd& theta) const { return b_z - Z * theta; }
  VectorXd z_plus(const VectorXd& theta) const { return Zp * theta; }

  /// smallest eigenvalue of P; strong convexity of the mean-square error is
  /// a diagnostic, not an assumption we enforce
  double lambda_min() const {
    if (P.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(P, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
};

struct AssembleOptions {
  double gamma = 1.0;
  bool with_plus_rows = true;
};

inline BatchLossData assemble_batch(const approx::Architecture& arch,
                                    const explore::Trajectory& traj, const BatchWindow& window,
                                    const MuMeasure& mu, const ZetaSpec& zeta,
                                    const ZetaSpec& zeta_plus, AssembleOptions opts = {}) {
  require(window.begin >= 0 && window.end <= traj.size() && window.length() >= 1,
          "assemble_batch: window must lie inside the trajectory and be nonempty");
  mu.validate();
  const Index d = arch.dim();
  const double r = double(window.length());

  BatchLossData out;
  out.d = d;
  out.r = r;
  out.gamma = opts.gamma;
  out.P = MatrixXd::Zero(d, d);
  out.q = VectorXd::Zero(d);
  out.k0 = 0.0;
  const Index zdim = zeta.dim(d);
  out.Z = MatrixXd::Zero(zdim, d);
  out.b_z = VectorXd::Zero(zdim);
  const Index zpdim = zeta_plus.dim(d);
  out.Zp = MatrixXd::Zero(zpdim, d);
  if (opts.with_plus_rows) out.plus_rows = MatrixXd::Zero(window.length(), d);

  VectorXd upsilon(d), zrow(0);
  for (Index k = window.begin; k < window.end; ++k) {
    const explore::Sample s = traj[k];
    const VectorXd psix = arch.psi(s.x, s.u);
    const VectorXd psijn = arch.psiJ(s.xnext);
    upsilon = psix - opts.gamma * psijn;
    out.P.selfadjointView<Eigen::Lower>().rankUpdate(upsilon, 1.0 / r);
    out.q -= (s.c / r) * upsilon;
    out.k0 += s.c * s.c / r;

    switch (zeta.kind) {
      case ZetaSpec::Kind::kPsi:
        out.Z += (1.0 / r) * psix * upsilon.transpose();
        out.b_z += (s.c / r) * psix;
        break;
      case ZetaSpec::Kind::kGrouped: {
        const Index g = zeta.group ? zeta.group(s) : Index(-1);
        if (g >= 0) {
          out.Z.row(g) += (1.0 / r) * upsilon.transpose();
          out.b_z[g] += s.c / r;
        }
        break;
      }
      case ZetaSpec::Kind::kCustom: {
        zrow = zeta.custom(s);
        if (zeta.nonneg)
          require(zrow.minCoeff() >= 0.0, "assemble_batch: zeta must be non-negative");
        out.Z += (1.0 / r) * zrow * upsilon.transpose();
        out.b_z += (s.c / r) * zrow;
        break;
      }
    }

    const VectorXd psij = arch.psiJ(s.x);
    switch (zeta_plus.kind) {
      case ZetaSpec::Kind::kPsi:
        break;  // no advantage rows in eligibility form
      case ZetaSpec::Kind::kGrouped: {
        const Index g = zeta_plus.group ? zeta_plus.group(s) : Index(-1);
        if (g >= 0) out.Zp.row(g) += (1.0 / r) * (psij - psix).transpose();
        break;
      }
      case ZetaSpec::Kind::kCustom: {
        zrow = zeta_plus.custom(s);
        require(zrow.minCoeff() >= 0.0, "assemble_batch: zeta+ must be non-negative");
        out.Zp += (1.0 / r) * zrow * (psij - psix).transpose();
        break;
      }
    }

    if (opts.with_plus_rows) out.plus_rows.row(k - window.begin) = (psij - psix).transpose();
  }
  out.P = out.P.selfadjointView<Eigen::Lower>();
  out.mu_vec = mu.feature_vector(arch);
  return out;
}

inline BatchLossData assemble_batch(const approx::Architecture& arch,
                                    const explore::Trajectory& traj, const BatchWindow& window,
                                    const MuMeasure& mu, const ZetaSpec& zeta,
                                    AssembleOptions opts = {}) {
  ZetaSpec none = ZetaSpec::grouped(nullptr, 0);
  return assemble_batch(arch, traj, window, mu, zeta, none, opts);
}

/// Empirical positive-part penalty over a window. Variant kQ is
/// (1/r) sum {J(x) - Q(x,u)}_+^2; variant kMinQ replaces Q(x,u) with the
/// state minimum of Q at x and needs the plant for the admissible inputs.
inline double eval_plus_penalty(const approx::Architecture& arch, const VectorXd& theta,
                                const explore::Trajectory& traj, const BatchWindow& window,
                                PlusVariant variant, const env::ControlSystem* sys = nullptr) {
  require(window.length() >= 1, "eval_plus_penalty: empty window");
  double acc = 0.0;
  for (Index k = window.begin; k < window.end; ++k) {
    const explore::Sample s = traj[k];
    const double j = theta.dot(arch.psiJ(s.x));
    double qv;
    if (variant == PlusVariant::kQ) {
      qv = theta.dot(arch.psi(s.x, s.u));
    } else {
      require(sys != nullptr, "eval_plus_penalty: minQ variant needs the plant");
      qv = arch.min_q(theta, s.x, sys->admissible_inputs(s.x)).second;
    }
    const double gap = std::max(j - qv, 0.0);
    acc += gap * gap;
  }
  return acc / double(window.length());
}

}  // namespace cvxq::losses
