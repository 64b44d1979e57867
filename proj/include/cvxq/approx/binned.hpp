#pragma once

#include <cmath>
#include <sstream>

#include "cvxq/approx/architecture.hpp"
#include "cvxq/env/system.hpp"

namespace cvxq::approx {

/// Rectangular-bin basis for the Mountain Car with the shifted advantage
/// construction:
///
///   psiJ_i(x)      = 1{x in B_i},            bins tile {x : z < z_goal}
///   psiA_i(x, +1)  = psiJ_i(x + shift)
///   psiA_i(x, -1)  = psiJ_i(x - shift)
///
/// Edge bins extend past the state box, so shifted evaluations stay covered.
/// The shift breaks the same-bin degeneracy in which slowly moving samples
/// produce identically zero Bellman error.
///
/// Optional enrichment merges the four bins adjacent to z_goal nearest the
/// top velocity and repurposes three of their slots as quadratics spanning
/// {q : q(z_goal, v) = 0 for all v}, each non-negative on the state space:
///   f1 = (z_goal - z),  f2 = (z_goal - z)^2,  f3 = (z_goal - z)(v_bar - v).
class MountainCarBinnedBasis : public Architecture {
 public:
  struct Config {
    Index nz = 40;
    Index nv = 20;
    double z_min = -1.2;
    double z_goal = 0.5;
    double v_bar = 0.07;
    bool quadratic_enrichment = false;
    // zero components request the default shift: the center of the grid cell
    // on the positive side of the origin
    double shift_z = 0.0;
    double shift_v = 0.0;
  };

  MountainCarBinnedBasis() : MountainCarBinnedBasis(Config{}) {}
  explicit MountainCarBinnedBasis(Config cfg) : cfg_(cfg) {
    require(cfg_.nz >= 2 && cfg_.nv >= 2, "binned basis: need at least a 2x2 grid");
    if (cfg_.quadratic_enrichment) require(cfg_.nv >= 4, "binned basis: enrichment needs nv >= 4");
    dz_ = (cfg_.z_goal - cfg_.z_min) / double(cfg_.nz);
    dv_ = 2.0 * cfg_.v_bar / double(cfg_.nv);
    if (cfg_.shift_z == 0.0 && cfg_.shift_v == 0.0) {
      // center of the origin-anchored cell in the positive quadrant
      cfg_.shift_z = 0.5 * dz_;
      cfg_.shift_v = 0.5 * dv_;
    }
  }

  const Config& config() const { return cfg_; }
  Index d_J() const { return cfg_.nz * cfg_.nv; }
  Index dim() const override { return 3 * d_J(); }

  VectorXd shift() const {
    VectorXd s(2);
    s << cfg_.shift_z, cfg_.shift_v;
    return s;
  }

  VectorXd psiJ(const VectorXd& x) const override {
    VectorXd v = VectorXd::Zero(dim());
    write_features(x, 0, v);
    return v;
  }

  VectorXd psi(const VectorXd& x, const VectorXd& u) const override {
    VectorXd v = VectorXd::Zero(dim());
    write_features(x, 0, v);
    if (u[0] > 0.0) {
      VectorXd xp(2);
      xp << x[0] + cfg_.shift_z, x[1] + cfg_.shift_v;
      write_features(xp, d_J(), v);
    } else {
      VectorXd xm(2);
      xm << x[0] - cfg_.shift_z, x[1] - cfg_.shift_v;
      write_features(xm, 2 * d_J(), v);
    }
    return v;
  }

  ConstraintSpec constraints() const override { return ConstraintSpec::advantage_cone(d_J()); }

  std::string id() const override {
    std::ostringstream os;
    os << "mc_binned:nz=" << cfg_.nz << ":nv=" << cfg_.nv << ":zmin=" << cfg_.z_min
       << ":zgoal=" << cfg_.z_goal << ":vbar=" << cfg_.v_bar << ":shift=" << cfg_.shift_z << ","
       << cfg_.shift_v << ":quad=" << (cfg_.quadratic_enrichment ? 1 : 0);
    return os.str();
  }

  /// Bin index of a state (clamped into the grid); -1 past the goal line.
  Index bin_of(const VectorXd& x) const {
    if (x[0] >= cfg_.z_goal) return -1;
    return slot(clamp_iz(std::floor((x[0] - cfg_.z_min) / dz_)),
                clamp_iv(std::floor((x[1] + cfg_.v_bar) / dv_)));
  }

  VectorXd bin_center(Index b) const {
    const Index iz = b / cfg_.nv, iv = b % cfg_.nv;
    VectorXd c(2);
    c << cfg_.z_min + (double(iz) + 0.5) * dz_, -cfg_.v_bar + (double(iv) + 0.5) * dv_;
    return c;
  }

 private:
  Index clamp_iz(double i) const { return std::clamp(Index(i), Index(0), cfg_.nz - 1); }
  Index clamp_iv(double i) const { return std::clamp(Index(i), Index(0), cfg_.nv - 1); }
  Index slot(Index iz, Index iv) const { return iz * cfg_.nv + iv; }

  bool merged_slot(Index iz, Index iv) const {
    return cfg_.quadratic_enrichment && iz == cfg_.nz - 1 && iv >= cfg_.nv - 4;
  }

  void write_features(const VectorXd& x, Index offset, VectorXd& out) const {
    if (x[0] >= cfg_.z_goal) return;
    const Index iz = clamp_iz(std::floor((x[0] - cfg_.z_min) / dz_));
    const Index iv = clamp_iv(std::floor((x[1] + cfg_.v_bar) / dv_));
    if (merged_slot(iz, iv)) {
      out[offset + slot(cfg_.nz - 1, cfg_.nv - 4)] += 1.0;
    } else {
      out[offset + slot(iz, iv)] += 1.0;
    }
    if (cfg_.quadratic_enrichment) {
      const double z = std::clamp(x[0], cfg_.z_min, cfg_.z_goal);
      const double v = std::clamp(x[1], -cfg_.v_bar, cfg_.v_bar);
      const double g = cfg_.z_goal - z;
      out[offset + slot(cfg_.nz - 1, cfg_.nv - 3)] += g;
      out[offset + slot(cfg_.nz - 1, cfg_.nv - 2)] += g * g;
      out[offset + slot(cfg_.nz - 1, cfg_.nv - 1)] += g * (cfg_.v_bar - v);
    }
  }

  Config cfg_;
  double dz_, dv_;
};

}  // namespace cvxq::approx
