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
#pragma once

#include "cslq/model.hpp"

namespace cslq {

/// Flat-coordinate ground truth for the tree problem.
///
/// Coordinate convention (also echoed in CLI reports): flattened vectors are
/// plain per-node values in breadth-first node order; probability weights are
/// NEVER baked into Gamma or the flat vectors. They enter only through the
/// diagonal weight matrices
///   W_u = diag(prob * dt)  on controls   (control_weight),
///   W_l = diag(prob)       on leaf space (leaf_weight),
/// so that  l2_inner(u, v) = u^T W_u v  and  E<a, b> = a^T W_l b.
/// The weighted adjoint of Gamma is then Gamma* = W_u^{-1} Gamma^T W_l.
struct DenseProblem {
  Eigen::MatrixXd hessian;  // H: J(u) = (1/2) u^T H u + g^T u + c0 (weights inside H)
  Eigen::VectorXd linear;   // g
  double constant = 0.0;    // c0
  Eigen::MatrixXd gamma;    // Gamma: u |-> M X^{0,u}(T), stacked per leaf
  Eigen::VectorXd rhs;      // beta = b - M X^{x,0}(T), stacked per leaf
  Eigen::VectorXd control_weight;  // W_u diagonal
  Eigen::VectorXd leaf_weight;     // W_l diagonal

  std::vector<int> control_offset;  // flat offset per node id (-1 at leaves)
  std::vector<int> leaf_offset;     // flat offset per node id (-1 off leaves)
  int control_dim = 0;              // m * (number of non-leaf nodes)
  int leaf_dim = 0;                 // l * (number of leaves)

  Eigen::VectorXd flatten_control(const ScenarioTree& tree, const NodeVectors& u) const;
  NodeVectors unflatten_control(const ScenarioTree& tree, int m,
                                const Eigen::VectorXd& z) const;
  Eigen::VectorXd flatten_leaf(const ScenarioTree& tree, const NodeVectors& a) const;
  NodeVectors unflatten_leaf(const ScenarioTree& tree, int l,
                             const Eigen::VectorXd& z) const;
};

/// Assembles the dense problem; self-checks the quadratic form against
/// cost()/constraint_residual() on 5 deterministic pseudo-random controls and
/// throws on disagreement. Refuses instances with more than 200000 flattened
/// control variables.
DenseProblem assemble_dense(const ScenarioTree& tree, const ProblemData& data);

/// Smallest singular value of the weighted adjoint W_u^{-1/2} Gamma^T W_l^{1/2}
/// (the sharp constant in the observability inequality
/// l2_inner(Gamma* lambda, Gamma* lambda) >= c_hat * E|lambda|^2).
struct SurjectivityCertificate {
  double sigma_min = 0.0;
  double c_hat = 0.0;       // sigma_min^2
  bool surjective = false;  // sigma_min > tol
  int rows = 0;             // leaf_dim  (rows of Gamma)
  int cols = 0;             // control_dim
  /// lambda realizing the minimum, node-indexed on leaves (unit E|.|^2 norm).
  NodeVectors minimizing_multiplier;
};
SurjectivityCertificate surjectivity_certificate(const ScenarioTree& tree,
                                                 const ProblemData& data,
                                                 double tol = 1e-10);
SurjectivityCertificate surjectivity_certificate(const ScenarioTree& tree,
                                                 const ProblemData& data,
                                                 const DenseProblem& dense,
                                                 double tol = 1e-10);

/// Direct solve of the saddle system
///   [ H        Gamma^T W_l ] [u]   [  -g     ]
///   [ W_l Gamma    0       ] [y] = [ W_l beta ]
/// by an LU factorization with one step of iterative refinement.
struct KktSolution {
  NodeVectors control;      // ubar
  NodeVectors multiplier;   // lambdabar
  double kkt_residual = 0.0;  // ||KKT*sol - rhs|| / (1 + ||rhs||)
  double feasibility = 0.0;   // residual_norm of the returned control
  double cost_value = 0.0;    // J(ubar)
};
KktSolution kkt_solve(const ScenarioTree& tree, const ProblemData& data);
KktSolution kkt_solve(const ScenarioTree& tree, const ProblemData& data,
                      const DenseProblem& dense);

/// gap = cost(u) - d(lambda); nonnegative for feasible u (weak duality).
struct GapReport {
  double gap = 0.0;
  double cost_value = 0.0;
  double dual = 0.0;
  bool feasible = false;
  double feasibility_residual = 0.0;
};
GapReport duality_gap(const ScenarioTree& tree, const ProblemData& data,
                      const NodeVectors& u, const NodeVectors& lambda,
                      double feasibility_tol = 1e-6);

/// Minimum-energy control steering M X(T) to the per-leaf target:
/// solves the dual normal equations
///   (W_l Gamma W_u^{-1} Gamma^T W_l) lambda = -W_l (target - M X^{x,0}(T))
/// and forms u = -(B^T phibar + D^T psi) from the plain adjoint recursion
/// (rho = 0, zero Riccati on the norm-optimal view), so the returned control
/// is produced by the recursion route, not by the dense pseudoinverse.
struct MinNormSolution {
  NodeVectors control;
  NodeVectors multiplier;
  double target_error = 0.0;  // max per-leaf |M X(T) - target|_inf
  double norm = 0.0;          // l2_norm of the control
};
MinNormSolution min_norm_control(const ScenarioTree& tree, const ProblemData& data,
                                 const Eigen::VectorXd& x0, const NodeVectors& target);

}  // namespace cslq
