/*
 Copyright 2026 The cslq Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

using namespace cslq;
using namespace cslq::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("vacuous constraint converges in one iteration") {
  const ScenarioTree tree = ScenarioTree::build(1.0, 3);
  const int n = 2, m = 2;
  detail::Rng rng(1);
  const MatrixXd q = rng.uniform_matrix(n, n);
  const ProblemData data = make_constant_data(
      tree, rng.uniform_matrix(n, n), rng.uniform_matrix(n, m),
      rng.uniform_matrix(n, n), rng.uniform_matrix(n, m),
      q * q.transpose() + MatrixXd::Identity(n, n), MatrixXd::Identity(m, m),
      MatrixXd::Zero(n, n), MatrixXd::Zero(1, n), VectorXd::Zero(1),
      rng.uniform_vector(n));

  ALMConfig cfg;
  cfg.rho = 1.0;
  const ALMReport rep = alm_solve(tree, data, cfg);
  CHECK(rep.verdict == AlmVerdict::converged);
  REQUIRE(rep.iterations.size() == 1);
  CHECK(rep.iterations[0].k == 1);
  CHECK(rep.iterations[0].residual_norm == 0.0);
  // lambda never moves
  for (int id : tree.leaves())
    CHECK(rep.final_multiplier[static_cast<size_t>(id)].cwiseAbs().maxCoeff() == 0.0);
  // and the control is the unconstrained LQ optimum
  const DenseProblem dp = assemble_dense(tree, data);
  const DenseSubproblem free_min =
      dense_subproblem_min(tree, data, dp, zero_multiplier(tree, data), 0.0);
  CHECK((dp.flatten_control(tree, rep.final_control) - free_min.control).norm() <
        1e-9 * (1.0 + free_min.control.norm()));
}

TEST_CASE("feasible optimal start exits immediately") {
  // b is retargeted to the unconstrained optimum's own terminal values, so
  // lambda = 0 is the optimal multiplier and u0 = unconstrained optimum is
  // feasible and stationary: the solver accepts it at iteration 0.
  const ScenarioTree tree = ScenarioTree::build(1.0, 3);
  Instance inst = random_certified(42);
  const ScenarioTree& t = inst.tree;
  ProblemData data = inst.data;
  const DenseProblem dp0 = assemble_dense(t, data);
  const DenseSubproblem free_min =
      dense_subproblem_min(t, data, dp0, zero_multiplier(t, data), 0.0);
  const NodeVectors ustar = dp0.unflatten_control(t, data.control_dim, free_min.control);
  const NodeVectors Xstar = simulate_forward(t, data, data.x0, ustar);
  for (int id : t.leaves()) {
    const size_t i = static_cast<size_t>(id);
    data.b[i] = data.M[i] * Xstar[i];
  }
  ALMConfig cfg;
  cfg.u0 = ustar;
  const ALMReport rep = alm_solve(t, data, cfg);
  CHECK(rep.verdict == AlmVerdict::converged);
  REQUIRE(rep.iterations.size() == 1);
  CHECK(rep.iterations[0].k == 0);
  CHECK(rep.iterations[0].residual_norm <= 1e-8);
}

TEST_CASE("converges to the KKT oracle with monotone multiplier distances") {
  for (std::uint64_t seed : {3ULL, 11ULL, 19ULL}) {
    const Instance inst = random_certified(seed);
    const ScenarioTree& tree = inst.tree;
    const ProblemData& data = inst.data;
    const DenseProblem dp = assemble_dense(tree, data);
    const KktSolution kkt = kkt_solve(tree, data, dp);
    const double delta = uniform_convexity_delta(tree, data);

    ALMConfig cfg = alm_config(inst);
    cfg.oracle_control = kkt.control;
    cfg.oracle_multiplier = kkt.multiplier;
    const ALMReport rep = alm_solve(tree, data, cfg);
    REQUIRE(rep.verdict == AlmVerdict::converged);
    CHECK(static_cast<int>(rep.iterations.size()) <= 500);

    const double ubar_norm = l2_norm(tree, kkt.control);
    CHECK(control_distance(tree, rep.final_control, kkt.control) <=
          1e-6 * (1.0 + ubar_norm));

    // multiplier distance is nonincreasing and each drop dominates the
    // uniform-convexity term 2 r^k (delta_hat / 2) |u^{k+1} - ubar|^2
    for (size_t j = 1; j < rep.iterations.size(); ++j) {
      const double prev = *rep.iterations[j - 1].multiplier_distance_sq;
      const double cur = *rep.iterations[j].multiplier_distance_sq;
      CHECK(cur <= prev + 1e-12);
      const double drop = prev - cur;
      const double v2 = *rep.iterations[j].control_distance_sq;
      CHECK(drop >= 2.0 * rep.iterations[j].step * (delta / 2.0) * v2 - 1e-9);
    }

    // strong duality at the limit
    const auto& last = rep.iterations.back();
    REQUIRE(last.duality_gap.has_value());
    CHECK(*last.duality_gap <= 1e-6 * (1.0 + std::abs(kkt.cost_value)));
  }
}

TEST_CASE("first-order residual") {
  const Instance inst = random_certified(7);
  const ScenarioTree& tree = inst.tree;
  const ProblemData& data = inst.data;
  detail::Rng rng(2);

  SUBCASE("vanishes at the subproblem optimum") {
    const NodeVectors lam = random_multiplier(tree, data, rng);
    for (double rho : {0.0, 0.5, 3.0}) {
      const FeedbackSolution sol = solve_subproblem(tree, data, lam, rho);
      CHECK(first_order_residual(tree, data, sol.control, lam, rho) <= 1e-9);
    }
  }

  SUBCASE("vanishes at the oracle pair together with feasibility") {
    const KktSolution kkt = kkt_solve(tree, data);
    CHECK(kkt.feasibility <= 1e-9);
    for (double rho : {0.5, 2.0, 10.0})
      CHECK(first_order_residual(tree, data, kkt.control, kkt.multiplier, rho) <= 1e-9);
  }

  SUBCASE("grows linearly under perturbations") {
    const NodeVectors lam = random_multiplier(tree, data, rng);
    const double rho = 1.0;
    const FeedbackSolution sol = solve_subproblem(tree, data, lam, rho);
    const NodeVectors dir = random_control(tree, data, rng);
    double res_small = 0.0, res_large = 0.0;
    for (double eps : {1e-3, 1e-2}) {
      NodeVectors u(static_cast<size_t>(tree.node_count()));
      for (int k = 0; k < tree.steps(); ++k)
        for (int id : tree.level(k)) {
          const size_t i = static_cast<size_t>(id);
          u[i] = sol.control[i] + eps * dir[i];
        }
      (eps == 1e-3 ? res_small : res_large) =
          first_order_residual(tree, data, u, lam, rho);
    }
    CHECK(res_large / res_small == doctest::Approx(10.0).epsilon(0.01));
  }
}

TEST_CASE("saddle point check") {
  const Instance inst = random_certified(13);
  const ScenarioTree& tree = inst.tree;
  const ProblemData& data = inst.data;
  const KktSolution kkt = kkt_solve(tree, data);

  SUBCASE("oracle pair is a saddle at every rho") {
    SaddleReport r1 = saddle_point_check(tree, data, kkt.control, kkt.multiplier, 1.0, 32);
    SaddleReport r10 = saddle_point_check(tree, data, kkt.control, kkt.multiplier, 10.0, 32);
    CHECK(r1.is_saddle);
    CHECK(r10.is_saddle);
    CHECK(r1.is_saddle == r10.is_saddle);
  }

  SUBCASE("perturbed multiplier with its re-solved control is infeasible") {
    detail::Rng rng(3);
    NodeVectors lam(static_cast<size_t>(tree.node_count()));
    for (int id : tree.leaves()) {
      const size_t i = static_cast<size_t>(id);
      lam[i] = kkt.multiplier[i] + rng.uniform_vector(data.constraint_dim);
    }
    const FeedbackSolution sol = solve_subproblem(tree, data, lam, 1.0);
    const SaddleReport rep = saddle_point_check(tree, data, sol.control, lam, 1.0, 16);
    CHECK_FALSE(rep.is_saddle);
    CHECK_FALSE(rep.feasible);
  }

  SUBCASE("perturbed control fails the stationarity leg") {
    detail::Rng rng(4);
    NodeVectors u(static_cast<size_t>(tree.node_count()));
    for (int k = 0; k < tree.steps(); ++k)
      for (int id : tree.level(k)) {
        const size_t i = static_cast<size_t>(id);
        u[i] = kkt.control[i] + 0.1 * rng.uniform_vector(data.control_dim);
      }
    const SaddleReport rep = saddle_point_check(tree, data, u, kkt.multiplier, 1.0, 16);
    CHECK_FALSE(rep.is_saddle);
    CHECK(rep.stationarity > 1e-8);
  }
}

TEST_CASE("step sizes outside (0, 2 rho] are rejected") {
  const Instance inst = random_certified(5);
  ALMConfig cfg;
  cfg.rho = 2.0;
  cfg.step_sizes = {6.0};  // 3 * rho
  CHECK_THROWS_AS(alm_solve(inst.tree, inst.data, cfg), Error);
  cfg.step_sizes = {-1.0};
  CHECK_THROWS_AS(alm_solve(inst.tree, inst.data, cfg), Error);
  cfg.step_sizes = {2.0, 4.0, 1.0};  // each entry validated
  CHECK_NOTHROW(alm_solve(inst.tree, inst.data, cfg));
}

TEST_CASE("subproblem failure aborts with diagnostics") {
  const ScenarioTree tree = ScenarioTree::build(1.0, 2);
  const MatrixXd zero = MatrixXd::Zero(1, 1);
  const ProblemData data = make_constant_data(
      tree, MatrixXd::Ones(1, 1), zero, zero, zero, MatrixXd::Ones(1, 1), zero,
      MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), VectorXd::Zero(1), VectorXd::Ones(1));
  ALMConfig cfg;
  cfg.rho = 1.0;
  const ALMReport rep = alm_solve(tree, data, cfg);
  CHECK(rep.verdict == AlmVerdict::aborted);
  CHECK(rep.abort_reason.find("not uniformly convex") != std::string::npos);
}

TEST_CASE("varying admissible step schedules still converge") {
  const Instance inst = random_certified(23);
  const KktSolution kkt = kkt_solve(inst.tree, inst.data);
  ALMConfig cfg = alm_config(inst);
  const double rho = 20.0;
  cfg.rho = rho;
  cfg.step_sizes = {0.5 * rho, rho, 1.5 * rho, 2.0 * rho};  // last repeats
  cfg.oracle_control = kkt.control;
  cfg.oracle_multiplier = kkt.multiplier;
  const ALMReport rep = alm_solve(inst.tree, inst.data, cfg);
  REQUIRE(rep.verdict == AlmVerdict::converged);
  CHECK(control_distance(inst.tree, rep.final_control, kkt.control) <=
        1e-6 * (1.0 + l2_norm(inst.tree, kkt.control)));
  for (size_t j = 1; j < rep.iterations.size(); ++j)
    CHECK(*rep.iterations[j].multiplier_distance_sq <=
          *rep.iterations[j - 1].multiplier_distance_sq + 1e-12);
}
