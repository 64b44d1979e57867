#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "cvxq/env/system.hpp"
#include "cvxq/oracles/value_iteration.hpp"

namespace cvxq::oracles {

/// Snap-to-grid discretization of the Mountain Car: positions at multiples of
/// sz below the goal, velocities at multiples of sv, plus one absorbing goal
/// state. The reference value surface comes from value iteration on this
/// model.
class McGrid {
 public:
  McGrid(const env::MountainCarSystem& mc, double sz, double sv) : mc_(mc) {
    const auto& p = mc.params();
    for (Index k = static_cast<Index>(std::ceil(p.z_min / sz));; ++k) {
      const double z = double(k) * sz;
      if (z >= p.z_goal) break;
      zs_.push_back(z);
    }
    for (Index k = static_cast<Index>(std::ceil(-p.v_bar / sv));; ++k) {
      const double v = double(k) * sv;
      if (v > p.v_bar + 1e-12) break;
      vs_.push_back(v);
    }
    const Index nz = static_cast<Index>(zs_.size());
    const Index nv = static_cast<Index>(vs_.size());
    const Index S = nz * nv + 1;  // + absorbing goal
    const Index A = 2;
    goal_ = S - 1;
    std::vector<Index> next(static_cast<size_t>(S * A));
    std::vector<double> cost(static_cast<size_t>(S * A));
    for (Index iz = 0; iz < nz; ++iz) {
      for (Index iv = 0; iv < nv; ++iv) {
        const Index s = iz * nv + iv;
        VectorXd x(2);
        x << zs_[static_cast<size_t>(iz)], vs_[static_cast<size_t>(iv)];
        for (Index a = 0; a < A; ++a) {
          const VectorXd u = VectorXd::Constant(1, a == 0 ? -1.0 : 1.0);
          const VectorXd xn = mc.dynamics(x, u);
          next[static_cast<size_t>(s * A + a)] = snap(xn);
          cost[static_cast<size_t>(s * A + a)] = 1.0;
        }
      }
    }
    for (Index a = 0; a < A; ++a) {
      next[static_cast<size_t>(goal_ * A + a)] = goal_;
      cost[static_cast<size_t>(goal_ * A + a)] = 0.0;
    }
    system_ = std::make_shared<env::FiniteSystem>(S, A, std::move(next), std::move(cost), goal_,
                                                  Index{0});
  }

  const env::FiniteSystem& system() const { return *system_; }
  std::shared_ptr<env::FiniteSystem> system_ptr() const { return system_; }
  Index goal_index() const { return goal_; }
  Index num_z() const { return static_cast<Index>(zs_.size()); }
  Index num_v() const { return static_cast<Index>(vs_.size()); }

  /// nearest grid state for an arbitrary Mountain Car state
  Index snap(const VectorXd& x) const {
    if (x[0] >= mc_.params().z_goal - 1e-12) return goal_;
    return nearest(zs_, x[0]) * static_cast<Index>(vs_.size()) + nearest(vs_, x[1]);
  }

  VectorXd state_of(Index s) const {
    VectorXd x(2);
    if (s == goal_) {
      x << mc_.params().z_goal, 0.0;
      return x;
    }
    const Index nv = static_cast<Index>(vs_.size());
    x << zs_[static_cast<size_t>(s / nv)], vs_[static_cast<size_t>(s % nv)];
    return x;
  }

  /// reference value at an arbitrary state (nearest grid node)
  double value_at(const VectorXd& x, const VectorXd& J) const { return J[snap(x)]; }

 private:
  static Index nearest(const std::vector<double>& grid, double v) {
    Index best = 0;
    double bestd = std::abs(grid[0] - v);
    for (size_t i = 1; i < grid.size(); ++i) {
      const double d = std::abs(grid[i] - v);
      if (d < bestd) {
        bestd = d;
        best = static_cast<Index>(i);
      }
    }
    return best;
  }

  env::MountainCarSystem mc_;
  std::vector<double> zs_, vs_;
  std::shared_ptr<env::FiniteSystem> system_;
  Index goal_ = 0;
};

}  // namespace cvxq::oracles
