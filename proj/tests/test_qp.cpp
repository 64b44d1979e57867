#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cvxq/qp/solver.hpp"
#include "support/test_oracles.hpp"

using namespace cvxq;
using cvxq::qp::Program;
using cvxq::qp::Status;

namespace {

qp::Programd box_program(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  qp::Programd prob;
  prob.set_objective(P, q);
  prob.lo = lo;
  prob.hi = hi;
  return prob;
}

}  // namespace

TEST_CASE("scalar bound: min 1/2 x^2 s.t. x >= 1") {
  qp::Programd prob;
  prob.set_objective(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1));
  prob.A_in.resize(1, 1);
  prob.A_in.insert(0, 0) = -1.0;  // -x <= -1
  prob.A_in.makeCompressed();
  prob.b_in = Eigen::VectorXd::Constant(1, -1.0);
  auto sol = qp::solve(prob);
  REQUIRE(sol.optimal());
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.y_in[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.kkt.max() <= 1e-8);
}

TEST_CASE("scalar bound: min (x-2)^2 s.t. x <= 1") {
  qp::Programd prob;
  prob.set_objective(2.0 * Eigen::MatrixXd::Identity(1, 1),
                     Eigen::VectorXd::Constant(1, -4.0));
  prob.hi = Eigen::VectorXd::Constant(1, 1.0);
  auto sol = qp::solve(prob);
  REQUIRE(sol.optimal());
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.y_box[0] > 0.0);  // active upper bound
}

TEST_CASE("equality constraint: min 1/2|x|^2 s.t. sum x = 1") {
  const int n = 5;
  qp::Programd prob;
  prob.set_objective(Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n));
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, n);
  prob.A_eq = ones.sparseView();
  prob.b_eq = Eigen::VectorXd::Ones(1);
  auto sol = qp::solve(prob);
  REQUIRE(sol.optimal());
  for (int i = 0; i < n; ++i) CHECK(sol.x[i] == doctest::Approx(0.2).epsilon(1e-7));
  CHECK(sol.kkt.max() <= 1e-8);
}

TEST_CASE("random box QPs agree with the projected-gradient oracle") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 8; ++trial) {
    auto inst = testor::random_box_qp(10, rng);
    auto prob = box_program(inst.P, inst.q, inst.lo, inst.hi);
    auto sol = qp::solve(prob);
    REQUIRE(sol.optimal());
    Eigen::VectorXd ref = testor::projected_gradient_qp(inst.P, inst.q, inst.lo, inst.hi);
    CHECK((sol.x - ref).lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(sol.kkt.max() <= 1e-8);
  }
}

TEST_CASE("pure LP picks the right vertex") {
  qp::Programd prob;
  prob.P.resize(2, 2);
  prob.q = Eigen::VectorXd(2);
  prob.q << -1.0, -2.0;
  prob.lo = Eigen::VectorXd::Zero(2);
  prob.hi = Eigen::VectorXd::Ones(2);
  auto sol = qp::solve(prob);
  REQUIRE(sol.optimal());
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("infeasible program is certified") {
  qp::Programd prob;
  prob.set_objective(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1));
  prob.A_in.resize(2, 1);
  prob.A_in.insert(0, 0) = 1.0;   // x <= 0
  prob.A_in.insert(1, 0) = -1.0;  // -x <= -1, i.e. x >= 1
  prob.A_in.makeCompressed();
  prob.b_in = Eigen::VectorXd(2);
  prob.b_in << 0.0, -1.0;
  auto sol = qp::solve(prob);
  CHECK(sol.status == Status::kPrimalInfeasible);
}

TEST_CASE("unbounded LP is certified dual infeasible") {
  qp::Programd prob;
  prob.P.resize(1, 1);
  prob.q = Eigen::VectorXd::Constant(1, -1.0);
  prob.lo = Eigen::VectorXd::Zero(1);
  prob.hi = Eigen::VectorXd::Constant(1, kInf);
  auto sol = qp::solve(prob);
  CHECK(sol.status == Status::kDualInfeasible);
}

TEST_CASE("determinism: identical inputs give identical iterates") {
  std::mt19937 rng(21);
  auto inst = testor::random_box_qp(8, rng);
  auto prob = box_program(inst.P, inst.q, inst.lo, inst.hi);
  auto a = qp::solve(prob);
  auto b = qp::solve(prob);
  REQUIRE(a.optimal());
  CHECK(a.x == b.x);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("positive scaling of (P,q) scales duals and fixes the minimizer") {
  std::mt19937 rng(3);
  auto inst = testor::random_box_qp(6, rng);
  auto prob = box_program(inst.P, inst.q, inst.lo, inst.hi);
  auto base = qp::solve(prob);
  auto scaled_prob = box_program(5.0 * inst.P, 5.0 * inst.q, inst.lo, inst.hi);
  auto scaled = qp::solve(scaled_prob);
  REQUIRE(base.optimal());
  REQUIRE(scaled.optimal());
  CHECK((base.x - scaled.x).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK((5.0 * base.y_box - scaled.y_box).lpNorm<Eigen::Infinity>() <= 1e-5);
}

TEST_CASE("non-symmetric objective is rejected") {
  qp::Programd prob;
  Eigen::MatrixXd P(2, 2);
  P << 1.0, 0.5, -0.5, 1.0;
  prob.set_objective(P, Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(qp::solve(prob), Error);
}

TEST_CASE("indefinite objective fails the PSD floor check") {
  qp::Programd prob;
  Eigen::MatrixXd P(2, 2);
  P << 1.0, 0.0, 0.0, -1.0;
  prob.set_objective(P, Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(qp::solve(prob), Error);
}
