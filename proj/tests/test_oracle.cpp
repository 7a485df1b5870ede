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

namespace {

ProblemData norm_optimal_instance(const ScenarioTree& tree, int n, int m, int l,
                                  std::uint64_t seed) {
  detail::Rng rng(seed);
  return make_constant_data(
      tree, rng.uniform_matrix(n, n), rng.uniform_matrix(n, m),
      rng.uniform_matrix(n, n), rng.uniform_matrix(n, m), MatrixXd::Zero(n, n),
      MatrixXd::Identity(m, m), MatrixXd::Zero(n, n), rng.uniform_matrix(l, n),
      rng.uniform_vector(l), rng.uniform_vector(n));
}

}  // namespace

TEST_CASE("assembly basics") {
  SUBCASE("zero M gives the zero constraint map") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 2);
    detail::Rng rng(1);
    const ProblemData data = make_constant_data(
        tree, rng.uniform_matrix(2, 2), rng.uniform_matrix(2, 2),
        rng.uniform_matrix(2, 2), rng.uniform_matrix(2, 2), MatrixXd::Identity(2, 2),
        MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), MatrixXd::Zero(1, 2),
        VectorXd::Zero(1), rng.uniform_vector(2));
    const DenseProblem dp = assemble_dense(tree, data);
    CHECK(dp.gamma.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("pure energy cost gives the weighted identity Hessian") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 3);
    detail::Rng rng(2);
    const ProblemData data = norm_optimal_instance(tree, 2, 2, 1, 3);
    const DenseProblem dp = assemble_dense(tree, data);
    CHECK((dp.hessian - MatrixXd(dp.control_weight.asDiagonal())).cwiseAbs().maxCoeff() ==
          0.0);
  }

  SUBCASE("Hessian matches central finite differences of the simulated cost") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 2);
    const Instance inst = random_certified(4, {2, 2, 1, 2, 0.01});
    const ProblemData& data = inst.data;
    const DenseProblem dp = assemble_dense(inst.tree, data);
    auto J = [&](const Eigen::VectorXd& z) {
      const NodeVectors u = dp.unflatten_control(inst.tree, data.control_dim, z);
      const NodeVectors X = simulate_forward(inst.tree, data, data.x0, u);
      return cost(inst.tree, data, X, u);
    };
    const double eps = 1e-3;
    for (int i = 0; i < dp.control_dim; ++i)
      for (int j = 0; j < dp.control_dim; ++j) {
        Eigen::VectorXd zpp = Eigen::VectorXd::Zero(dp.control_dim);
        Eigen::VectorXd zpm = zpp, zmp = zpp, zmm = zpp;
        zpp(i) += eps; zpp(j) += eps;
        zpm(i) += eps; zpm(j) -= eps;
        zmp(i) -= eps; zmp(j) += eps;
        zmm(i) -= eps; zmm(j) -= eps;
        const double fd = (J(zpp) - J(zpm) - J(zmp) + J(zmm)) / (4.0 * eps * eps);
        CHECK(std::abs(dp.hessian(i, j) - fd) < 1e-6);
      }
  }

  SUBCASE("size guard refuses oversized instances") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 16);
    const int n = 1, m = 4;
    const MatrixXd z1 = MatrixXd::Zero(n, n), zm = MatrixXd::Zero(n, m);
    const ProblemData data = make_constant_data(
        tree, z1, zm, z1, zm, z1, MatrixXd::Identity(m, m), z1, MatrixXd::Ones(1, n),
        VectorXd::Zero(1), VectorXd::Zero(n));
    CHECK_THROWS_AS(assemble_dense(tree, data), Error);
  }
}

TEST_CASE("kkt solve") {
  SUBCASE("norm-optimal case agrees with min_norm_control") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 3);
    const ProblemData data = norm_optimal_instance(tree, 2, 2, 1, 5);
    const DenseProblem dp = assemble_dense(tree, data);
    const SurjectivityCertificate cert = surjectivity_certificate(tree, data, dp);
    REQUIRE(cert.surjective);
    const KktSolution kkt = kkt_solve(tree, data, dp);
    CHECK(kkt.kkt_residual <= 1e-10 * (1.0 + dp.rhs.norm() + dp.linear.norm()));
    const MinNormSolution mn = min_norm_control(tree, data, data.x0, data.b);
    CHECK(control_distance(tree, kkt.control, mn.control) < 1e-8);
    CHECK(multiplier_distance(tree, kkt.multiplier, mn.multiplier) < 1e-8);
  }

  SUBCASE("random certified instance passes the saddle check") {
    const Instance inst = random_certified(6);
    const KktSolution kkt = kkt_solve(inst.tree, inst.data);
    CHECK(kkt.feasibility <= 1e-9);
    const SaddleReport sp =
        saddle_point_check(inst.tree, inst.data, kkt.control, kkt.multiplier, 1.0, 32);
    CHECK(sp.is_saddle);
  }

  SUBCASE("degenerate full-state constraint at N=1 is refused by the gate") {
    // M = I_n with one step: 2n leaf constraints vs m <= 3 controls
    const ScenarioTree tree = ScenarioTree::build(1.0, 1);
    detail::Rng rng(7);
    const int n = 2, m = 2;
    const ProblemData data = make_constant_data(
        tree, rng.uniform_matrix(n, n), rng.uniform_matrix(n, m),
        rng.uniform_matrix(n, n), rng.uniform_matrix(n, m), MatrixXd::Identity(n, n),
        MatrixXd::Identity(m, m), MatrixXd::Zero(n, n), MatrixXd::Identity(n, n),
        rng.uniform_vector(n), rng.uniform_vector(n));
    const SurjectivityCertificate cert = surjectivity_certificate(tree, data);
    CHECK_FALSE(cert.surjective);
    CHECK_THROWS_AS(kkt_solve(tree, data), Error);
  }

  SUBCASE("oracle control beats random feasible controls") {
    const Instance inst = random_certified(8);
    const DenseProblem dp = assemble_dense(inst.tree, inst.data);
    const KktSolution kkt = kkt_solve(inst.tree, inst.data, dp);
    detail::Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::VectorXd zf = project_feasible(
          dp, dp.flatten_control(inst.tree, random_control(inst.tree, inst.data, rng)));
      const NodeVectors uf = dp.unflatten_control(inst.tree, inst.data.control_dim, zf);
      const NodeVectors Xf = simulate_forward(inst.tree, inst.data, inst.data.x0, uf);
      REQUIRE(residual_norm(inst.tree, inst.data, Xf) < 1e-9);
      CHECK(cost(inst.tree, inst.data, Xf, uf) >= kkt.cost_value - 1e-10);
    }
  }
}

TEST_CASE("duality gap") {
  const Instance inst = random_certified(10);
  const ScenarioTree& tree = inst.tree;
  const ProblemData& data = inst.data;
  const DenseProblem dp = assemble_dense(tree, data);
  const KktSolution kkt = kkt_solve(tree, data, dp);

  SUBCASE("zero at the oracle pair") {
    const GapReport rep = duality_gap(tree, data, kkt.control, kkt.multiplier);
    CHECK(rep.feasible);
    CHECK(std::abs(rep.gap) <= 1e-8 * (1.0 + std::abs(kkt.cost_value)));
  }

  SUBCASE("positive at non-optimal feasible controls") {
    detail::Rng rng(11);
    const Eigen::VectorXd zf = project_feasible(
        dp, dp.flatten_control(tree, random_control(tree, data, rng)));
    const NodeVectors uf = dp.unflatten_control(tree, data.control_dim, zf);
    const GapReport rep = duality_gap(tree, data, uf, kkt.multiplier);
    CHECK(rep.feasible);
    CHECK(rep.gap > 0.0);
  }

  SUBCASE("zero multiplier measures the distance to the unconstrained optimum") {
    const GapReport rep = duality_gap(tree, data, kkt.control, zero_multiplier(tree, data));
    const DenseSubproblem free_min =
        dense_subproblem_min(tree, data, dp, zero_multiplier(tree, data), 0.0);
    CHECK(rep.gap == doctest::Approx(kkt.cost_value - free_min.value).epsilon(1e-9));
    CHECK(rep.gap >= 0.0);
  }

  SUBCASE("weak duality on random multiplier/feasible pairs") {
    detail::Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
      const NodeVectors lam = random_multiplier(tree, data, rng, 3.0);
      const Eigen::VectorXd zf = project_feasible(
          dp, dp.flatten_control(tree, random_control(tree, data, rng)));
      const NodeVectors uf = dp.unflatten_control(tree, data.control_dim, zf);
      const GapReport rep = duality_gap(tree, data, uf, lam);
      CHECK(rep.gap >= -1e-10);
    }
  }
}

TEST_CASE("surjectivity certificate") {
  SUBCASE("zero map") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 2);
    detail::Rng rng(13);
    const ProblemData data = make_constant_data(
        tree, rng.uniform_matrix(2, 2), rng.uniform_matrix(2, 2),
        rng.uniform_matrix(2, 2), rng.uniform_matrix(2, 2), MatrixXd::Zero(2, 2),
        MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), MatrixXd::Zero(1, 2),
        VectorXd::Zero(1), rng.uniform_vector(2));
    const SurjectivityCertificate cert = surjectivity_certificate(tree, data);
    CHECK(cert.sigma_min == 0.0);
    CHECK_FALSE(cert.surjective);
  }

  SUBCASE("no control authority") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 2);
    detail::Rng rng(14);
    const int n = 2, m = 2;
    const ProblemData data = make_constant_data(
        tree, rng.uniform_matrix(n, n), MatrixXd::Zero(n, m), rng.uniform_matrix(n, n),
        MatrixXd::Zero(n, m), MatrixXd::Zero(n, n), MatrixXd::Identity(m, m),
        MatrixXd::Zero(n, n), rng.uniform_matrix(1, n), VectorXd::Zero(1),
        rng.uniform_vector(n));
    CHECK(surjectivity_certificate(tree, data).sigma_min <= 1e-12);
  }

  SUBCASE("scalar diffusion control cannot cover the leaves of any tree") {
    // n = m = l = 1 with D = 1, M = 1: the continuous-time problem with
    // B != 0 is surjective, but a binary tree has m (2^N - 1) scalar controls
    // against 2^N leaf constraints, so the discrete map never is. The
    // certificate measures the discrete problem and reports sigma_min = 0.
    for (int N : {1, 2, 3}) {
      const ScenarioTree tree = ScenarioTree::build(1.0, N);
      const MatrixXd one = MatrixXd::Ones(1, 1);
      const ProblemData data = make_constant_data(
          tree, 0.3 * one, one, 0.1 * one, one, MatrixXd::Zero(1, 1), one,
          MatrixXd::Zero(1, 1), one, VectorXd::Ones(1), VectorXd::Ones(1));
      const SurjectivityCertificate cert = surjectivity_certificate(tree, data);
      CHECK(cert.sigma_min <= 1e-12);
      CHECK_FALSE(cert.surjective);
      CHECK(cert.rows > cert.cols);
    }
  }

  SUBCASE("adjoint energy inequality with equality at the minimizer") {
    const Instance inst = random_certified(15);
    const ScenarioTree& tree = inst.tree;
    const ProblemData view = norm_optimal_view(tree, inst.data);
    const DenseProblem dp = assemble_dense(tree, inst.data);
    const SurjectivityCertificate cert = surjectivity_certificate(tree, inst.data, dp);
    REQUIRE(cert.surjective);

    const RiccatiSolution ric = riccati_backward(tree, view, 0.0);
    auto adjoint_energy = [&](const NodeVectors& lam) {
      const AdjointPair adj = adjoint_backward(tree, view, ric, lam, 0.0);
      NodeVectors coupling(static_cast<size_t>(tree.node_count()));
      for (int k = 0; k < tree.steps(); ++k)
        for (int id : tree.level(k))
          coupling[static_cast<size_t>(id)] =
              adj.coupling[static_cast<size_t>(id)] / tree.dt();
      return l2_inner(tree, coupling, coupling);
    };

    detail::Rng rng(16);
    for (int trial = 0; trial < 20; ++trial) {
      const NodeVectors lam = random_multiplier(tree, inst.data, rng, 2.0);
      CHECK(adjoint_energy(lam) >=
            cert.c_hat * leaf_inner(tree, lam, lam) - 1e-10);
    }
    const double at_min = adjoint_energy(cert.minimizing_multiplier);
    const double norm2 = leaf_inner(tree, cert.minimizing_multiplier,
                                    cert.minimizing_multiplier);
    CHECK(at_min == doctest::Approx(cert.c_hat * norm2).epsilon(1e-8));
  }

  SUBCASE("certificate verdict matches direct solvability sampling") {
    for (std::uint64_t seed : {17ULL, 18ULL}) {
      const Instance inst = random_certified(seed);
      const DenseProblem dp = assemble_dense(inst.tree, inst.data);
      const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(dp.gamma);
      detail::Rng rng(seed);
      for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd r = rng.uniform_vector(dp.leaf_dim);
        const Eigen::VectorXd u = cod.solve(r);
        CHECK((dp.gamma * u - r).norm() <= 1e-8 * (1.0 + r.norm()));
      }
    }
  }

  SUBCASE("surjectivity makes every b feasible") {
    const Instance inst = random_certified(19);
    detail::Rng rng(20);
    for (int trial = 0; trial < 10; ++trial) {
      ProblemData data = inst.data;
      for (int id : inst.tree.leaves())
        data.b[static_cast<size_t>(id)] = rng.uniform_vector(data.constraint_dim);
      const KktSolution kkt = kkt_solve(inst.tree, data);
      CHECK(kkt.feasibility <= 1e-9);
    }
  }
}

TEST_CASE("min norm control") {
  SUBCASE("already attained target needs no control") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 3);
    const ProblemData data = norm_optimal_instance(tree, 2, 2, 1, 21);
    const NodeVectors X0 =
        simulate_forward(tree, data, data.x0, zero_control(tree, data));
    NodeVectors target(static_cast<size_t>(tree.node_count()));
    for (int id : tree.leaves()) {
      const size_t i = static_cast<size_t>(id);
      target[i] = data.M[i] * X0[i];
    }
    const MinNormSolution mn = min_norm_control(tree, data, data.x0, target);
    CHECK(mn.norm <= 1e-10);
    for (int id : tree.leaves())
      CHECK(mn.multiplier[static_cast<size_t>(id)].cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("hand-solved one-step instance") {
    // n = 1, N = 1, T = 1, A = C = 0, B = [1 0], D = [0 1], M = 1, x0 = 0.3,
    // target 1.0 on both leaves. Transitions: S+- = B dt +- D sqrt(dt), so
    // Gamma = [[1, 1], [1, -1]], beta = (0.7, 0.7). Minimizing (1/2)u^T u
    // (weights are identities here) gives u = (0.7, 0) and the dual normal
    // equations -(1/2) Gamma Gamma^T lambda = beta give lambda = (-0.7, -0.7).
    const ScenarioTree tree = ScenarioTree::build(1.0, 1);
    const MatrixXd A = MatrixXd::Zero(1, 1), C = MatrixXd::Zero(1, 1);
    const MatrixXd B = (MatrixXd(1, 2) << 1.0, 0.0).finished();
    const MatrixXd D = (MatrixXd(1, 2) << 0.0, 1.0).finished();
    const ProblemData data = make_constant_data(
        tree, A, B, C, D, MatrixXd::Zero(1, 1), MatrixXd::Identity(2, 2),
        MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1), VectorXd::Constant(1, 1.0),
        VectorXd::Constant(1, 0.3));
    NodeVectors target(static_cast<size_t>(tree.node_count()));
    for (int id : tree.leaves()) target[static_cast<size_t>(id)] = VectorXd::Constant(1, 1.0);
    const MinNormSolution mn = min_norm_control(tree, data, data.x0, target);
    CHECK(mn.target_error <= 1e-12);
    CHECK(mn.control[0](0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(mn.control[0](1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    for (int id : tree.leaves())
      CHECK(mn.multiplier[static_cast<size_t>(id)](0) ==
            doctest::Approx(-0.7).epsilon(1e-12));
  }

  SUBCASE("matches kkt_solve on the norm-optimal specialization") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 3);
    const ProblemData data = norm_optimal_instance(tree, 2, 3, 1, 22);
    REQUIRE(surjectivity_certificate(tree, data).surjective);
    const KktSolution kkt = kkt_solve(tree, data);
    const MinNormSolution mn = min_norm_control(tree, data, data.x0, data.b);
    CHECK(control_distance(tree, kkt.control, mn.control) <= 1e-9 * (1.0 + mn.norm));
    CHECK(mn.target_error <= 1e-9);
  }

  SUBCASE("kernel perturbations never decrease the norm") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 3);
    const ProblemData data = norm_optimal_instance(tree, 2, 3, 1, 23);
    const DenseProblem dp = assemble_dense(tree, data);
    const MinNormSolution mn = min_norm_control(tree, data, data.x0, data.b);
    const MatrixXd kernel = gamma_kernel(dp);
    REQUIRE(kernel.cols() > 0);
    const Eigen::VectorXd z = dp.flatten_control(tree, mn.control);
    detail::Rng rng(24);
    const Eigen::VectorXd wu = dp.control_weight;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd coeffs = rng.uniform_vector(static_cast<int>(kernel.cols()));
      const Eigen::VectorXd perturbed = z + kernel * coeffs;
      CHECK(perturbed.dot(wu.asDiagonal() * perturbed) >=
            z.dot(wu.asDiagonal() * z) - 1e-12);
    }
  }

  SUBCASE("refuses non-surjective instances") {
    const ScenarioTree tree = ScenarioTree::build(1.0, 1);
    const MatrixXd one = MatrixXd::Ones(1, 1);
    const ProblemData data = make_constant_data(
        tree, MatrixXd::Zero(1, 1), one, MatrixXd::Zero(1, 1), one,
        MatrixXd::Zero(1, 1), one, MatrixXd::Zero(1, 1), one, VectorXd::Zero(1),
        VectorXd::Zero(1));
    NodeVectors target(static_cast<size_t>(tree.node_count()));
    for (int id : tree.leaves())
      target[static_cast<size_t>(id)] = VectorXd::Constant(1, 1.0);
    CHECK_THROWS_AS(min_norm_control(tree, data, data.x0, target), Error);
  }
}
