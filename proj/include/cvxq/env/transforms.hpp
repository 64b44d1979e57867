#pragma once

#include <functional>
#include <memory>
#include <set>

#include "cvxq/env/system.hpp"

namespace cvxq::env {

/// Optimization-criterion descriptor. gamma = 1 recovers total cost; every
/// downstream loss uses Q(x,u) = c(x,u) + gamma * J(F(x,u)).
struct Criterion {
  double gamma = 1.0;
};

inline Criterion apply_discount(double gamma) {
  require(gamma > 0.0 && gamma <= 1.0, "apply_discount: gamma must lie in (0, 1]");
  return Criterion{gamma};
}

/// Shortest-path reduction for a finite model: reaching the target set routes
/// the state to an absorbing zero-cost graveyard, and the terminal cost is
/// charged on the step out of the target set. The graveyard takes index S.
struct SppFiniteResult {
  std::shared_ptr<FiniteSystem> system;
  Index graveyard;  // state index of the absorbing state
};

inline SppFiniteResult to_total_cost_spp(const FiniteSystem& sys, const std::set<Index>& target,
                                         const VectorXd& terminal_cost) {
  require(!target.empty(), "to_total_cost_spp: target set must be nonempty");
  require(terminal_cost.size() == sys.num_states(), "to_total_cost_spp: terminal cost size");
  const Index S = sys.num_states(), A = sys.num_inputs();
  const Index grave = S;
  std::vector<Index> next(static_cast<size_t>((S + 1) * A));
  std::vector<double> cost(static_cast<size_t>((S + 1) * A));
  for (Index s = 0; s < S; ++s) {
    const bool in_target = target.count(s) > 0;
    for (Index a = 0; a < A; ++a) {
      next[static_cast<size_t>(s * A + a)] = in_target ? grave : sys.next_at(s, a);
      cost[static_cast<size_t>(s * A + a)] = in_target ? terminal_cost[s] : sys.cost_at(s, a);
    }
  }
  for (Index a = 0; a < A; ++a) {
    next[static_cast<size_t>(grave * A + a)] = grave;
    cost[static_cast<size_t>(grave * A + a)] = 0.0;
  }
  return {std::make_shared<FiniteSystem>(S + 1, A, std::move(next), std::move(cost), grave,
                                         Index{0}),
          grave};
}

/// Generic shortest-path reduction: the state gains a trailing 0/1 coordinate
/// marking the graveyard.
class GraveyardSystem : public ControlSystem {
 public:
  GraveyardSystem(std::shared_ptr<const ControlSystem> base,
                  std::function<bool(const VectorXd&)> in_target,
                  std::function<double(const VectorXd&)> terminal_cost)
      : base_(std::move(base)),
        in_target_(std::move(in_target)),
        terminal_cost_(std::move(terminal_cost)) {}

  Index state_dim() const override { return base_->state_dim() + 1; }
  Index input_dim() const override { return base_->input_dim(); }

  VectorXd lift(const VectorXd& x) const {
    VectorXd v(x.size() + 1);
    v << x, 0.0;
    return v;
  }
  bool is_graveyard(const VectorXd& x) const { return x[x.size() - 1] > 0.5; }

  VectorXd dynamics(const VectorXd& x, const VectorXd& u) const override {
    const VectorXd core = x.head(x.size() - 1);
    VectorXd v(x.size());
    if (is_graveyard(x) || in_target_(core)) {
      v << base_->equilibrium_state(), 1.0;
      return v;
    }
    v << base_->dynamics(core, u), 0.0;
    return v;
  }
  double cost(const VectorXd& x, const VectorXd& u) const override {
    if (is_graveyard(x)) return 0.0;
    const VectorXd core = x.head(x.size() - 1);
    return in_target_(core) ? terminal_cost_(core) : base_->cost(core, u);
  }
  VectorXd equilibrium_state() const override {
    VectorXd v(state_dim());
    v << base_->equilibrium_state(), 1.0;
    return v;
  }
  VectorXd equilibrium_input() const override { return base_->equilibrium_input(); }
  InputSet admissible_inputs(const VectorXd& x) const override {
    return base_->admissible_inputs(x.head(x.size() - 1));
  }

 private:
  std::shared_ptr<const ControlSystem> base_;
  std::function<bool(const VectorXd&)> in_target_;
  std::function<double(const VectorXd&)> terminal_cost_;
};

/// Finite-horizon reduction for a finite model: the state is enlarged with a
/// clock that saturates at horizon + 1, beyond which all costs vanish. The
/// enlarged index is s * (horizon + 2) + clock.
struct FiniteHorizonResult {
  std::shared_ptr<FiniteSystem> system;
  Index horizon;
  Index clock_values;  // horizon + 2

  Index index_of(Index s, Index clock) const { return s * clock_values + clock; }
};

inline FiniteHorizonResult to_total_cost_finite_horizon(const FiniteSystem& sys, Index horizon) {
  require(horizon >= 0, "to_total_cost_finite_horizon: horizon must be non-negative");
  const Index S = sys.num_states(), A = sys.num_inputs();
  const Index H = horizon + 2;  // clock runs 0..horizon+1, saturating
  std::vector<Index> next(static_cast<size_t>(S * H * A));
  std::vector<double> cost(static_cast<size_t>(S * H * A));
  for (Index s = 0; s < S; ++s) {
    for (Index h = 0; h < H; ++h) {
      for (Index a = 0; a < A; ++a) {
        const Index hn = std::min<Index>(h + 1, horizon + 1);
        next[static_cast<size_t>((s * H + h) * A + a)] = sys.next_at(s, a) * H + hn;
        cost[static_cast<size_t>((s * H + h) * A + a)] =
            (h <= horizon) ? sys.cost_at(s, a) : 0.0;
      }
    }
  }
  const Index eq = sys.eq_state_index() * H + (horizon + 1);
  auto out = std::make_shared<FiniteSystem>(S * H, A, std::move(next), std::move(cost), eq,
                                            sys.eq_input_index());
  return {out, horizon, H};
}

/// Generic finite-horizon wrapper: trailing state coordinate is the clock.
class FiniteHorizonSystem : public ControlSystem {
 public:
  FiniteHorizonSystem(std::shared_ptr<const ControlSystem> base, Index horizon)
      : base_(std::move(base)), horizon_(horizon) {
    require(horizon_ >= 0, "FiniteHorizonSystem: horizon must be non-negative");
  }

  Index state_dim() const override { return base_->state_dim() + 1; }
  Index input_dim() const override { return base_->input_dim(); }

  VectorXd lift(const VectorXd& x, Index clock = 0) const {
    VectorXd v(x.size() + 1);
    v << x, double(clock);
    return v;
  }

  VectorXd dynamics(const VectorXd& x, const VectorXd& u) const override {
    const VectorXd core = x.head(x.size() - 1);
    const double clock = std::min(x[x.size() - 1] + 1.0, double(horizon_ + 1));
    VectorXd v(x.size());
    v << base_->dynamics(core, u), clock;
    return v;
  }
  double cost(const VectorXd& x, const VectorXd& u) const override {
    if (x[x.size() - 1] > double(horizon_)) return 0.0;
    return base_->cost(x.head(x.size() - 1), u);
  }
  VectorXd equilibrium_state() const override {
    VectorXd v(state_dim());
    v << base_->equilibrium_state(), double(horizon_ + 1);
    return v;
  }
  VectorXd equilibrium_input() const override { return base_->equilibrium_input(); }
  InputSet admissible_inputs(const VectorXd& x) const override {
    return base_->admissible_inputs(x.head(x.size() - 1));
  }

 private:
  std::shared_ptr<const ControlSystem> base_;
  Index horizon_;
};

}  // namespace cvxq::env
