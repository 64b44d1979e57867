#pragma once

#include <Eigen/QR>

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cvxq/mdpx/mdp.hpp"

namespace cvxq::mdpx {

/// Strategies for the conditional expectation E[h(X+) | x, u] in the
/// average-cost losses. Direct needs the model; the empirical pmf maintains
/// per-pair successor histograms (the replay-buffer role); the Galerkin
/// estimator projects onto a finite function class of (x,u); pretending the
/// world is deterministic substitutes the observed successor per sample,
/// which for point evaluation coincides with the empirical mean.
class CondExpEstimator {
 public:
  enum class Mode { kDirect, kEmpiricalPmf, kGalerkin, kPretendDeterministic };
  using Feature = std::function<double(Index s, Index a)>;

  static CondExpEstimator direct(const Mdp& model) {
    CondExpEstimator e;
    e.mode_ = Mode::kDirect;
    e.model_ = &model;
    return e;
  }
  static CondExpEstimator empirical(const Chain& chain, Index S, Index A) {
    CondExpEstimator e;
    e.mode_ = Mode::kEmpiricalPmf;
    e.build_histograms(chain, S, A);
    return e;
  }
  static CondExpEstimator pretend(const Chain& chain, Index S, Index A) {
    CondExpEstimator e = empirical(chain, S, A);
    e.mode_ = Mode::kPretendDeterministic;
    return e;
  }
  static CondExpEstimator galerkin(const Chain& chain, std::vector<Feature> basis) {
    CondExpEstimator e;
    e.mode_ = Mode::kGalerkin;
    e.chain_ = &chain;
    e.basis_ = std::move(basis);
    return e;
  }

  Mode mode() const { return mode_; }
  const std::string& note() const { return note_; }

  /// E-hat[h(X+) | s, a]
  double operator()(const std::function<double(Index)>& h, Index s, Index a) const {
    switch (mode_) {
      case Mode::kDirect: {
        double acc = 0.0;
        for (Index t = 0; t < model_->S; ++t) {
          const double p = model_->P[static_cast<size_t>(a)](s, t);
          if (p > 0.0) acc += p * h(t);
        }
        return acc;
      }
      case Mode::kEmpiricalPmf:
      case Mode::kPretendDeterministic: {
        const auto& hist = hist_[static_cast<size_t>(s * A_ + a)];
        require(!hist.empty(), "cond_exp: pair never observed");
        double acc = 0.0;
        for (const auto& [t, cnt] : hist) acc += double(cnt) * h(t);
        return acc / double(counts_[static_cast<size_t>(s * A_ + a)]);
      }
      case Mode::kGalerkin: {
        const VectorXd alpha = fit_galerkin(h);
        double v = 0.0;
        for (size_t i = 0; i < basis_.size(); ++i) v += alpha[static_cast<Index>(i)] * basis_[i](s, a);
        return v;
      }
    }
    return 0.0;
  }

  /// Orthogonality residual at the fitted coefficients:
  /// max_i |E[(Z - h°(Y)) h_i(Y)]| over the sample.
  double orthogonality_residual(const std::function<double(Index)>& h) const {
    require(mode_ == Mode::kGalerkin, "orthogonality_residual: galerkin mode only");
    const VectorXd alpha = fit_galerkin(h);
    const Index dg = static_cast<Index>(basis_.size());
    VectorXd resid = VectorXd::Zero(dg);
    for (const auto& smp : *chain_) {
      double fit = 0.0;
      for (Index i = 0; i < dg; ++i) fit += alpha[i] * basis_[static_cast<size_t>(i)](smp.s, smp.a);
      const double err = h(smp.s_next) - fit;
      for (Index i = 0; i < dg; ++i) resid[i] += err * basis_[static_cast<size_t>(i)](smp.s, smp.a);
    }
    return (resid / double(chain_->size())).lpNorm<Eigen::Infinity>();
  }

  /// least-squares coefficients alpha solving A alpha = b with
  /// A_ij = E[h_i h_j], b_i = E[Z h_i], Z = h(X+)
  VectorXd fit_galerkin(const std::function<double(Index)>& h) const {
    const Index dg = static_cast<Index>(basis_.size());
    MatrixXd A = MatrixXd::Zero(dg, dg);
    VectorXd b = VectorXd::Zero(dg);
    VectorXd f(dg);
    for (const auto& smp : *chain_) {
      for (Index i = 0; i < dg; ++i) f[i] = basis_[static_cast<size_t>(i)](smp.s, smp.a);
      A.selfadjointView<Eigen::Lower>().rankUpdate(f, 1.0);
      b += h(smp.s_next) * f;
    }
    A = MatrixXd(A.selfadjointView<Eigen::Lower>()) / double(chain_->size());
    b /= double(chain_->size());
    Eigen::FullPivHouseholderQR<MatrixXd> qr(A);
    if (qr.rank() < dg) {
      note_ = "galerkin matrix is rank deficient; least-norm coefficients returned";
      return A.completeOrthogonalDecomposition().solve(b);
    }
    note_.clear();
    return qr.solve(b);
  }

 private:
  void build_histograms(const Chain& chain, Index S, Index A) {
    A_ = A;
    hist_.assign(static_cast<size_t>(S * A), {});
    counts_.assign(static_cast<size_t>(S * A), 0);
    for (const auto& smp : chain) {
      auto& h = hist_[static_cast<size_t>(smp.s * A + smp.a)];
      bool found = false;
      for (auto& [t, cnt] : h)
        if (t == smp.s_next) {
          ++cnt;
          found = true;
          break;
        }
      if (!found) h.emplace_back(smp.s_next, 1);
      ++counts_[static_cast<size_t>(smp.s * A + smp.a)];
    }
  }

  Mode mode_ = Mode::kDirect;
  const Mdp* model_ = nullptr;
  const Chain* chain_ = nullptr;
  std::vector<Feature> basis_;
  Index A_ = 0;
  std::vector<std::vector<std::pair<Index, long>>> hist_;
  std::vector<long> counts_;
  mutable std::string note_;
};

inline double cond_exp(const CondExpEstimator& est, const std::function<double(Index)>& h,
                       Index s, Index a) {
  return est(h, s, a);
}

}  // namespace cvxq::mdpx
