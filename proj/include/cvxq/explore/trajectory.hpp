#pragma once

#include <functional>

#include "cvxq/env/system.hpp"
#include "cvxq/types.hpp"

namespace cvxq::explore {

/// One observed transition.
struct Sample {
  Eigen::Ref<const VectorXd> x;
  Eigen::Ref<const VectorXd> u;
  double c;
  Eigen::Ref<const VectorXd> xnext;
};

/// Column-per-sample storage of (x, u, c, x+) tuples.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(Index state_dim, Index input_dim, Index capacity) {
    xs_.resize(state_dim, capacity);
    us_.resize(input_dim, capacity);
    cs_.resize(capacity);
    xnexts_.resize(state_dim, capacity);
  }

  Index size() const { return n_; }
  Index state_dim() const { return xs_.rows(); }
  Index input_dim() const { return us_.rows(); }

  void push(const VectorXd& x, const VectorXd& u, double c, const VectorXd& xnext) {
    require(n_ < cs_.size(), "Trajectory: capacity exceeded");
    xs_.col(n_) = x;
    us_.col(n_) = u;
    cs_[n_] = c;
    xnexts_.col(n_) = xnext;
    ++n_;
  }

  Sample operator[](Index k) const {
    return Sample{xs_.col(k), us_.col(k), cs_[k], xnexts_.col(k)};
  }

  const MatrixXd& states() const { return xs_; }
  const MatrixXd& inputs() const { return us_; }
  const VectorXd& costs() const { return cs_; }
  const MatrixXd& next_states() const { return xnexts_; }

  /// Every stored tuple must replay through the plant: x+ = F(x, u) and
  /// c = cost(x, u).
  bool replays(const env::ControlSystem& sys, double tol = 1e-12) const {
    for (Index k = 0; k < n_; ++k) {
      if ((sys.dynamics(xs_.col(k), us_.col(k)) - xnexts_.col(k)).lpNorm<Eigen::Infinity>() > tol)
        return false;
      if (std::abs(sys.cost(xs_.col(k), us_.col(k)) - cs_[k]) > tol) return false;
    }
    return true;
  }

  /// Concatenates another trajectory (multi-start data sets).
  void append(const Trajectory& other) {
    require(other.state_dim() == state_dim() && other.input_dim() == input_dim(),
            "Trajectory::append: dimension mismatch");
    const Index total = n_ + other.n_;
    MatrixXd xs(state_dim(), total), us(input_dim(), total), xn(state_dim(), total);
    VectorXd cs(total);
    xs << xs_.leftCols(n_), other.xs_.leftCols(other.n_);
    us << us_.leftCols(n_), other.us_.leftCols(other.n_);
    xn << xnexts_.leftCols(n_), other.xnexts_.leftCols(other.n_);
    cs << cs_.head(n_), other.cs_.head(other.n_);
    xs_ = std::move(xs);
    us_ = std::move(us);
    xnexts_ = std::move(xn);
    cs_ = std::move(cs);
    n_ = total;
  }

 private:
  MatrixXd xs_, us_, xnexts_;
  VectorXd cs_;
  Index n_ = 0;
};

/// (1/N) sum of g over the trajectory; the workhorse for every steady-state
/// expectation.
inline VectorXd ergodic_average(const Trajectory& traj,
                                const std::function<VectorXd(const Sample&)>& g) {
  require(traj.size() > 0, "ergodic_average: empty trajectory");
  VectorXd acc = g(traj[0]);
  for (Index k = 1; k < traj.size(); ++k) acc += g(traj[k]);
  return acc / double(traj.size());
}

inline double ergodic_average_scalar(const Trajectory& traj,
                                     const std::function<double(const Sample&)>& g) {
  require(traj.size() > 0, "ergodic_average: empty trajectory");
  double acc = 0.0;
  for (Index k = 0; k < traj.size(); ++k) acc += g(traj[k]);
  return acc / double(traj.size());
}

}  // namespace cvxq::explore
