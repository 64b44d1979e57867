#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cvxq/approx/tabular.hpp"
#include "cvxq/mdpx/losses.hpp"

using namespace cvxq;
using mdpx::AvgCostSolution;
using mdpx::Chain;
using mdpx::CondExpEstimator;
using mdpx::Mdp;

namespace {

// single state, two inputs with costs c0, c1
Mdp single_state(double c0, double c1) {
  Mdp m = Mdp::make(1, 2);
  m.P[0](0, 0) = 1.0;
  m.P[1](0, 0) = 1.0;
  m.cost(0, 0) = c0;
  m.cost(0, 1) = c1;
  return m;
}

// two states toggling deterministically; costs depend on (state, input)
Mdp toggle(double scale = 1.0) {
  Mdp m = Mdp::make(2, 2);
  // input 0: toggle; input 1: stay
  m.P[0](0, 1) = 1.0;
  m.P[0](1, 0) = 1.0;
  m.P[1](0, 0) = 1.0;
  m.P[1](1, 1) = 1.0;
  m.cost << 1.0, 3.0, 2.0, 0.5;
  m.cost *= scale;
  return m;
}

// random communicating chain
Mdp random_mdp(Index S, Index A, std::mt19937& rng) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  Mdp m = Mdp::make(S, A);
  for (Index a = 0; a < A; ++a) {
    for (Index s = 0; s < S; ++s) {
      VectorXd row(S);
      for (Index t = 0; t < S; ++t) row[t] = unif(rng);
      m.P[static_cast<size_t>(a)].row(s) = row.transpose() / row.sum();
    }
  }
  for (Index s = 0; s < S; ++s)
    for (Index a = 0; a < A; ++a) m.cost(s, a) = unif(rng);
  return m;
}

// brute-force optimal average cost over all stationary deterministic policies
double brute_force_eta(const Mdp& mdp) {
  double best = kInf;
  std::vector<Index> policy(static_cast<size_t>(mdp.S), 0);
  const Index total = static_cast<Index>(std::pow(double(mdp.A), double(mdp.S)));
  for (Index code = 0; code < total; ++code) {
    Index c = code;
    for (Index s = 0; s < mdp.S; ++s) {
      policy[static_cast<size_t>(s)] = c % mdp.A;
      c /= mdp.A;
    }
    const VectorXd pi = mdpx::stationary_distribution(mdp, policy);
    double eta = 0.0;
    for (Index s = 0; s < mdp.S; ++s) eta += pi[s] * mdp.cost(s, policy[static_cast<size_t>(s)]);
    best = std::min(best, eta);
  }
  return best;
}

}  // namespace

TEST_CASE("single-state chain: eta is the smallest cost, residual tiny") {
  auto m = single_state(2.0, 0.7);
  auto sol = mdpx::avg_cost_q_oracle(m);
  CHECK(sol.eta == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(sol.residual <= 1e-10);
  // hand fixed point: Q(u) = c(u) - c(u0) + eta / delta with nu at (0, u0)
  CHECK(sol.Q(0, 0) == doctest::Approx(2.0 - 2.0 + 0.7).epsilon(1e-9));
  CHECK(sol.Q(0, 1) == doctest::Approx(0.7 - 2.0 + 0.7).epsilon(1e-9));
}

TEST_CASE("doubling costs doubles eta and keeps the argmin policy") {
  auto m1 = toggle(1.0);
  auto m2 = toggle(2.0);
  auto s1 = mdpx::avg_cost_q_oracle(m1);
  auto s2 = mdpx::avg_cost_q_oracle(m2);
  CHECK(s2.eta == doctest::Approx(2.0 * s1.eta).epsilon(1e-9));
  CHECK(s1.policy == s2.policy);
}

TEST_CASE("toggle chain matches brute-force policy enumeration") {
  auto m = toggle();
  auto sol = mdpx::avg_cost_q_oracle(m);
  CHECK(sol.eta == doctest::Approx(brute_force_eta(m)).epsilon(1e-9));
  CHECK(sol.residual <= 1e-10);
}

TEST_CASE("random chains: oracle eta matches enumeration, residual at tolerance") {
  std::mt19937 rng(5);
  for (int t = 0; t < 5; ++t) {
    auto m = random_mdp(3, 2, rng);
    auto sol = mdpx::avg_cost_q_oracle(m);
    CHECK(sol.eta == doctest::Approx(brute_force_eta(m)).epsilon(1e-8));
    CHECK(sol.residual <= 1e-10);
  }
}

TEST_CASE("reachability precondition is enforced") {
  Mdp m = Mdp::make(2, 1);
  m.P[0](0, 0) = 1.0;  // two isolated self-loops
  m.P[0](1, 1) = 1.0;
  m.cost(0, 0) = 0.0;
  m.cost(1, 0) = 1.0;
  CHECK_THROWS_AS(mdpx::avg_cost_q_oracle(m), Error);
}

TEST_CASE("conditional expectation: constants pass through every mode") {
  auto m = toggle();
  auto chain = mdpx::enumerate_pairs(m, 50, 3);
  auto constant = [](Index) { return 4.2; };
  CHECK(mdpx::cond_exp(CondExpEstimator::direct(m), constant, 0, 0) == doctest::Approx(4.2));
  CHECK(mdpx::cond_exp(CondExpEstimator::empirical(chain, 2, 2), constant, 1, 1) ==
        doctest::Approx(4.2));
  CHECK(mdpx::cond_exp(CondExpEstimator::pretend(chain, 2, 2), constant, 0, 1) ==
        doctest::Approx(4.2));
  auto galerkin = CondExpEstimator::galerkin(chain, {[](Index, Index) { return 1.0; }});
  CHECK(mdpx::cond_exp(galerkin, constant, 0, 0) == doctest::Approx(4.2));
}

TEST_CASE("conditional expectation: direct mode is exact on deterministic chains") {
  auto m = toggle();
  auto h = [](Index s) { return s == 0 ? 2.0 : -1.0; };
  // input 0 toggles: from state 0 the successor is 1
  CHECK(mdpx::cond_exp(CondExpEstimator::direct(m), h, 0, 0) == doctest::Approx(-1.0));
  CHECK(mdpx::cond_exp(CondExpEstimator::direct(m), h, 0, 1) == doctest::Approx(2.0));
}

TEST_CASE("galerkin with the constant feature returns the sample mean") {
  std::mt19937 rng(6);
  auto m = random_mdp(3, 2, rng);
  auto chain = mdpx::sample_chain(m, 0, 500, 11);
  auto h = [](Index s) { return double(s * s); };
  auto est = CondExpEstimator::galerkin(chain, {[](Index, Index) { return 1.0; }});
  double mean = 0.0;
  for (const auto& smp : chain) mean += h(smp.s_next);
  mean /= double(chain.size());
  CHECK(mdpx::cond_exp(est, h, 1, 0) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("galerkin orthogonality certificate holds at the fit") {
  std::mt19937 rng(7);
  auto m = random_mdp(4, 2, rng);
  auto chain = mdpx::sample_chain(m, 0, 2000, 13);
  std::vector<CondExpEstimator::Feature> basis = {
      [](Index, Index) { return 1.0; },
      [](Index s, Index) { return double(s); },
      [](Index, Index a) { return double(a); },
  };
  auto est = CondExpEstimator::galerkin(chain, basis);
  auto h = [](Index s) { return std::sin(double(s)) + 0.3 * double(s); };
  CHECK(est.orthogonality_residual(h) <= 1e-10);
}

TEST_CASE("rank-deficient galerkin matrix falls back to least norm with a note") {
  auto m = toggle();
  auto chain = mdpx::enumerate_pairs(m, 5, 3);
  std::vector<CondExpEstimator::Feature> basis = {
      [](Index, Index) { return 1.0; },
      [](Index, Index) { return 2.0; },  // linearly dependent
  };
  auto est = CondExpEstimator::galerkin(chain, basis);
  auto h = [](Index s) { return double(s); };
  (void)mdpx::cond_exp(est, h, 0, 0);
  CHECK(!est.note().empty());
}

TEST_CASE("variance identity: zero on deterministic chains") {
  auto m = toggle();
  approx::TabularSplitBasis basis(2, 2, -1);
  std::mt19937 rng(8);
  std::normal_distribution<double> g;
  VectorXd theta = VectorXd::NullaryExpr(basis.dim(), [&](Index) { return g(rng); });
  auto dec = mdpx::noisy_loss_decomposition(m, {0, 0}, basis, theta);
  CHECK(dec.sigma2 <= 1e-14);
  CHECK(dec.identity_residual <= 1e-12);
  CHECK(dec.be == doctest::Approx(dec.be_var).epsilon(1e-12));
}

TEST_CASE("variance identity on a symmetric random walk with indicator h") {
  // two states, both inputs behave identically: jump to the other state with
  // probability 1/2
  Mdp m = Mdp::make(2, 2);
  for (Index a = 0; a < 2; ++a) {
    m.P[static_cast<size_t>(a)] << 0.5, 0.5, 0.5, 0.5;
  }
  m.cost << 1.0, 1.0, 1.0, 1.0;
  approx::TabularSplitBasis basis(2, 2, -1);
  // h = indicator of state 0 via the h-block; advantage block zero
  VectorXd theta = VectorXd::Zero(basis.dim());
  theta[basis.j_slot(0)] = 1.0;
  auto dec = mdpx::noisy_loss_decomposition(m, {0, 1}, basis, theta);
  // h(X+) is Bernoulli(1/2): conditional variance 1/4 regardless of state
  CHECK(dec.sigma2 == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(dec.identity_residual <= 1e-10);

  // scaling h by c scales the variance by c^2
  auto dec3 = mdpx::noisy_loss_decomposition(m, {0, 1}, basis, 3.0 * theta);
  CHECK(dec3.sigma2 == doctest::Approx(9.0 * dec.sigma2).epsilon(1e-12));
}

TEST_CASE("bcql on a deterministic chain recovers the oracle tables") {
  // two permutation actions; the cheap full cycle is optimal, so the optimal
  // chain is irreducible and the eta-maximizing program pins the exact pair
  Mdp m = Mdp::make(3, 2);
  m.P[0](0, 1) = 1.0;
  m.P[0](1, 2) = 1.0;
  m.P[0](2, 0) = 1.0;
  m.P[1](0, 2) = 1.0;
  m.P[1](1, 0) = 1.0;
  m.P[1](2, 1) = 1.0;
  m.cost << 0.1, 1.5, 0.2, 2.0, 0.3, 1.1;
  auto oracle = mdpx::avg_cost_q_oracle(m);

  approx::TabularSplitBasis basis(3, 2, -1);
  auto chain = mdpx::enumerate_pairs(m, 4, 17);
  std::vector<VectorXd> pts;
  for (Index s = 0; s < 3; ++s) pts.push_back(env::FiniteSystem::state_vector(s));
  auto mu = losses::MuMeasure::unit(pts);

  algos::AlgoConfig cfg;
  cfg.kappa_be = 1.0;
  cfg.batches = 2;
  cfg.epochs = 3000;
  cfg.alpha1 = 1.0;
  cfg.step_power = 0.0;
  cfg.dual_step_scale = -1.0;
  cfg.constraint_mode = algos::ConstraintMode::kGalerkinEq;
  cfg.solver.tol = 1e-11;

  auto est = CondExpEstimator::direct(m);
  auto res = mdpx::run_bcql_mdp(m, chain, basis, est, mu, cfg, VectorXd::Zero(basis.dim()),
                                /*eta_objective=*/true);
  REQUIRE(res.status == qp::Status::kOptimal);

  MatrixXd Q(3, 2);
  for (Index s = 0; s < 3; ++s)
    for (Index a = 0; a < 2; ++a)
      Q(s, a) = res.theta.dot(
          basis.psi(env::FiniteSystem::state_vector(s), env::FiniteSystem::input_vector(a)));
  CHECK((Q - oracle.Q).cwiseAbs().maxCoeff() <= 1e-6);
  // the normalization recovers the optimal average cost
  CHECK(m.delta * m.nu_dot(Q) == doctest::Approx(oracle.eta).epsilon(1e-7));

  // pretend-deterministic mode gives identical iterates on a deterministic chain
  auto res2 = mdpx::run_bcql_mdp(m, chain, basis, CondExpEstimator::pretend(chain, 3, 2), mu,
                                 cfg, VectorXd::Zero(basis.dim()), /*eta_objective=*/true);
  CHECK((res.theta - res2.theta).lpNorm<Eigen::Infinity>() <= 1e-12);
}
