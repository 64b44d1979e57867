#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <utility>
#include <vector>

#include "cvxq/types.hpp"

namespace cvxq::env {

/// Admissible inputs at a state: an explicit finite list or a coordinate box.
class InputSet {
 public:
  static InputSet finite(std::vector<VectorXd> inputs) {
    InputSet s;
    s.finite_ = std::move(inputs);
    s.is_finite_ = true;
    return s;
  }
  static InputSet box(VectorXd lo, VectorXd hi) {
    InputSet s;
    s.lo_ = std::move(lo);
    s.hi_ = std::move(hi);
    s.is_finite_ = false;
    return s;
  }
  static InputSet unbounded(Index m) {
    return box(VectorXd::Constant(m, -kInf), VectorXd::Constant(m, kInf));
  }

  bool is_finite() const { return is_finite_; }
  const std::vector<VectorXd>& inputs() const { return finite_; }
  const VectorXd& lo() const { return lo_; }
  const VectorXd& hi() const { return hi_; }

  bool contains(const VectorXd& u, double tol = 1e-9) const {
    if (is_finite_) {
      for (const auto& v : finite_)
        if (v.size() == u.size() && (v - u).lpNorm<Eigen::Infinity>() <= tol) return true;
      return false;
    }
    if (u.size() != lo_.size()) return false;
    for (Index i = 0; i < u.size(); ++i)
      if (u[i] < lo_[i] - tol || u[i] > hi_[i] + tol) return false;
    return true;
  }

 private:
  bool is_finite_ = true;
  std::vector<VectorXd> finite_;
  VectorXd lo_, hi_;
};

/// Deterministic plant x(k+1) = F(x(k), u(k)) with a running cost that is
/// non-negative and vanishes at the equilibrium pair. Immutable after
/// construction; stepping is pure.
class ControlSystem {
 public:
  virtual ~ControlSystem() = default;

  virtual Index state_dim() const = 0;
  virtual Index input_dim() const = 0;
  virtual VectorXd dynamics(const VectorXd& x, const VectorXd& u) const = 0;
  virtual double cost(const VectorXd& x, const VectorXd& u) const = 0;
  virtual VectorXd equilibrium_state() const = 0;
  virtual VectorXd equilibrium_input() const = 0;
  virtual InputSet admissible_inputs(const VectorXd& x) const = 0;

  /// Validated transition; rejects inadmissible inputs with a diagnostic.
  VectorXd step(const VectorXd& x, const VectorXd& u) const {
    if (!admissible_inputs(x).contains(u)) {
      std::ostringstream os;
      os << "step: inadmissible input [" << u.transpose() << "] at state ["
         << x.transpose() << "]";
      throw Error(os.str());
    }
    return dynamics(x, u);
  }
};

/// Explicit transition/cost tables over finite state and input sets. States
/// and inputs are presented as 1-d vectors holding their indices.
class FiniteSystem : public ControlSystem {
 public:
  // next(s, a) and cost(s, a) indexed as s * num_inputs + a
  FiniteSystem(Index num_states, Index num_inputs, std::vector<Index> next,
               std::vector<double> cost, Index eq_state, Index eq_input)
      : S_(num_states),
        A_(num_inputs),
        next_(std::move(next)),
        cost_(std::move(cost)),
        eq_state_(eq_state),
        eq_input_(eq_input) {
    require(static_cast<Index>(next_.size()) == S_ * A_, "FiniteSystem: next table size");
    require(static_cast<Index>(cost_.size()) == S_ * A_, "FiniteSystem: cost table size");
    for (Index v : next_) require(v >= 0 && v < S_, "FiniteSystem: successor out of range");
    for (double c : cost_) require(c >= 0.0, "FiniteSystem: negative cost");
    require(next_at(eq_state_, eq_input_) == eq_state_,
            "FiniteSystem: equilibrium is not a fixed point");
    require(cost_at(eq_state_, eq_input_) == 0.0,
            "FiniteSystem: equilibrium cost must vanish");
  }

  Index num_states() const { return S_; }
  Index num_inputs() const { return A_; }
  Index next_at(Index s, Index a) const { return next_[static_cast<size_t>(s * A_ + a)]; }
  double cost_at(Index s, Index a) const { return cost_[static_cast<size_t>(s * A_ + a)]; }
  Index eq_state_index() const { return eq_state_; }
  Index eq_input_index() const { return eq_input_; }

  static Index state_index(const VectorXd& x) { return static_cast<Index>(std::lround(x[0])); }
  static VectorXd state_vector(Index s) { return VectorXd::Constant(1, double(s)); }
  static Index input_index(const VectorXd& u) { return static_cast<Index>(std::lround(u[0])); }
  static VectorXd input_vector(Index a) { return VectorXd::Constant(1, double(a)); }

  Index state_dim() const override { return 1; }
  Index input_dim() const override { return 1; }
  VectorXd dynamics(const VectorXd& x, const VectorXd& u) const override {
    return state_vector(next_at(state_index(x), input_index(u)));
  }
  double cost(const VectorXd& x, const VectorXd& u) const override {
    return cost_at(state_index(x), input_index(u));
  }
  VectorXd equilibrium_state() const override { return state_vector(eq_state_); }
  VectorXd equilibrium_input() const override { return input_vector(eq_input_); }
  InputSet admissible_inputs(const VectorXd&) const override {
    std::vector<VectorXd> us;
    us.reserve(static_cast<size_t>(A_));
    for (Index a = 0; a < A_; ++a) us.push_back(input_vector(a));
    return InputSet::finite(std::move(us));
  }

 private:
  Index S_, A_;
  std::vector<Index> next_;
  std::vector<double> cost_;
  Index eq_state_, eq_input_;
};

/// Linear plant x+ = Fx + Gu with quadratic cost x'Sx + u'Ru.
class LqrSystem : public ControlSystem {
 public:
  LqrSystem(MatrixXd F, MatrixXd G, MatrixXd S, MatrixXd R)
      : F_(std::move(F)), G_(std::move(G)), S_(std::move(S)), R_(std::move(R)) {
    require(F_.rows() == F_.cols(), "LqrSystem: F must be square");
    require(G_.rows() == F_.rows(), "LqrSystem: G row mismatch");
    require(S_.rows() == F_.rows() && S_.cols() == F_.rows(), "LqrSystem: S shape");
    require(R_.rows() == G_.cols() && R_.cols() == G_.cols(), "LqrSystem: R shape");
  }

  const MatrixXd& F() const { return F_; }
  const MatrixXd& G() const { return G_; }
  const MatrixXd& S() const { return S_; }
  const MatrixXd& R() const { return R_; }

  Index state_dim() const override { return F_.rows(); }
  Index input_dim() const override { return G_.cols(); }
  VectorXd dynamics(const VectorXd& x, const VectorXd& u) const override {
    return F_ * x + G_ * u;
  }
  double cost(const VectorXd& x, const VectorXd& u) const override {
    return x.dot(S_ * x) + u.dot(R_ * u);
  }
  VectorXd equilibrium_state() const override { return VectorXd::Zero(state_dim()); }
  VectorXd equilibrium_input() const override { return VectorXd::Zero(input_dim()); }
  InputSet admissible_inputs(const VectorXd&) const override {
    return InputSet::unbounded(input_dim());
  }

 private:
  MatrixXd F_, G_, S_, R_;
};

/// Mountain Car with throttle inputs {-1, +1}, unit cost off the parked goal
/// state (z_goal, 0), and interval projection of position and velocity.
class MountainCarSystem : public ControlSystem {
 public:
  struct Params {
    double z_min = -1.2;
    double z_goal = 0.5;
    double v_bar = 0.07;
    double throttle_gain = 1e-3;
    double gravity_gain = 2.5e-3;
    // update order: velocity first, then position with the new velocity
    bool velocity_first = true;
  };

  MountainCarSystem() : MountainCarSystem(Params{}) {}
  explicit MountainCarSystem(Params p) : p_(p) {}
  const Params& params() const { return p_; }

  Index state_dim() const override { return 2; }
  Index input_dim() const override { return 1; }

  bool at_goal(const VectorXd& x) const { return x[0] >= p_.z_goal - 1e-12; }

  VectorXd dynamics(const VectorXd& x, const VectorXd& u) const override {
    VectorXd nx(2);
    if (at_goal(x)) {  // the car parks on reaching the goal
      nx << p_.z_goal, 0.0;
      return nx;
    }
    const double z = x[0], v = x[1];
    double vn, zn;
    const double accel = p_.throttle_gain * u[0] - p_.gravity_gain * std::cos(3.0 * z);
    if (p_.velocity_first) {
      vn = std::clamp(v + accel, -p_.v_bar, p_.v_bar);
      zn = z + vn;
    } else {
      zn = z + v;
      vn = std::clamp(v + accel, -p_.v_bar, p_.v_bar);
    }
    if (zn <= p_.z_min) {  // velocity resets when the car hits the wall
      zn = p_.z_min;
      vn = 0.0;
    }
    if (zn >= p_.z_goal) {  // parked
      zn = p_.z_goal;
      vn = 0.0;
    }
    nx << zn, vn;
    return nx;
  }

  double cost(const VectorXd& x, const VectorXd&) const override {
    return at_goal(x) ? 0.0 : 1.0;
  }

  VectorXd equilibrium_state() const override {
    VectorXd x(2);
    x << p_.z_goal, 0.0;
    return x;
  }
  VectorXd equilibrium_input() const override { return VectorXd::Constant(1, 1.0); }
  InputSet admissible_inputs(const VectorXd&) const override {
    return InputSet::finite({VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0)});
  }

  VectorXd state_lo() const {
    VectorXd v(2);
    v << p_.z_min, -p_.v_bar;
    return v;
  }
  VectorXd state_hi() const {
    VectorXd v(2);
    v << p_.z_goal, p_.v_bar;
    return v;
  }

 private:
  Params p_;
};

}  // namespace cvxq::env
