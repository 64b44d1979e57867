#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "cvxq/types.hpp"

namespace cvxq::explore {

/// Deterministic bounded exploration signal. Either a mixture of sinusoids
/// (with a closed-form value at any time index) or a general Markov map
/// xi(k+1) = H(xi(k)). Both evolve deterministically, so identical parameters
/// reproduce identical signals.
class ProbeSignal {
 public:
  static ProbeSignal sinusoids(std::vector<double> freqs, std::vector<double> amps,
                               std::vector<double> phases, Index dim = 1) {
    require(freqs.size() == amps.size() && freqs.size() == phases.size(),
            "ProbeSignal: frequency/amplitude/phase length mismatch");
    require(dim >= 1, "ProbeSignal: dimension must be positive");
    ProbeSignal p;
    p.kind_ = Kind::kSinusoidMixture;
    p.freqs_ = std::move(freqs);
    p.amps_ = std::move(amps);
    p.phases_ = std::move(phases);
    p.dim_ = dim;
    return p;
  }

  static ProbeSignal markov(std::function<VectorXd(const VectorXd&)> map, VectorXd xi0) {
    ProbeSignal p;
    p.kind_ = Kind::kMarkovMap;
    p.map_ = std::move(map);
    p.xi0_ = std::move(xi0);
    p.dim_ = p.xi0_.size();
    return p;
  }

  /// Stepping integer counter, useful for enumerating finite input sets.
  static ProbeSignal counter() {
    return markov([](const VectorXd& xi) { return VectorXd::Constant(1, xi[0] + 1.0); },
                  VectorXd::Zero(1));
  }

  /// Mixture of three sinusoids at frequencies 2*pi*sqrt{2,3,5}/50; the
  /// irrational frequency ratios keep the empirical averages convergent.
  static ProbeSignal standard(double amplitude = 1.0) {
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> freqs = {two_pi * std::sqrt(2.0) / 50.0, two_pi * std::sqrt(3.0) / 50.0,
                                 two_pi * std::sqrt(5.0) / 50.0};
    std::vector<double> amps(3, amplitude / 3.0);
    std::vector<double> phases = {0.0, 1.0, 2.0};
    return sinusoids(std::move(freqs), std::move(amps), std::move(phases));
  }

  bool is_sinusoid() const { return kind_ == Kind::kSinusoidMixture; }
  Index dim() const { return dim_; }

  /// sum of |amplitudes|; the signal never exceeds this in magnitude
  double bound() const {
    double b = 0.0;
    for (double a : amps_) b += std::abs(a);
    return b;
  }

  /// Closed-form value at time k (sinusoid mixtures only).
  VectorXd value(Index k) const {
    require(is_sinusoid(), "ProbeSignal::value: closed form requires a sinusoid mixture");
    VectorXd out = VectorXd::Zero(dim_);
    const double two_pi = 2.0 * std::numbers::pi;
    for (Index j = 0; j < dim_; ++j) {
      double v = 0.0;
      for (size_t i = 0; i < freqs_.size(); ++i)
        v += amps_[i] * std::sin(freqs_[i] * double(k) + phases_[i] + two_pi * double(j) / double(dim_));
      out[j] = v;
    }
    return out;
  }

  /// Stateful iteration support (used by rollouts for either kind).
  class Cursor {
   public:
    explicit Cursor(const ProbeSignal& p) : probe_(&p) {
      if (!p.is_sinusoid()) state_ = p.xi0_;
    }
    VectorXd current() const {
      return probe_->is_sinusoid() ? probe_->value(k_) : state_;
    }
    void advance() {
      if (!probe_->is_sinusoid()) state_ = probe_->map_(state_);
      ++k_;
    }
    Index time() const { return k_; }

   private:
    const ProbeSignal* probe_;
    Index k_ = 0;
    VectorXd state_;
  };

  Cursor cursor() const { return Cursor(*this); }

 private:
  enum class Kind { kSinusoidMixture, kMarkovMap };
  Kind kind_ = Kind::kSinusoidMixture;
  std::vector<double> freqs_, amps_, phases_;
  Index dim_ = 1;
  std::function<VectorXd(const VectorXd&)> map_;
  VectorXd xi0_;
};

}  // namespace cvxq::explore
