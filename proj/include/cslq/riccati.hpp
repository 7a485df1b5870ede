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

/// Backward value-matrix recursion for min_u L_rho(u, lambda), obtained by
/// exact dynamic programming on the tree (not by time-stepping the
/// continuous Riccati equation). With E_v the conditional expectation over
/// the children of v and the transitions T_c, S_c of model.hpp:
///
///   P_leaf = G + rho M^T M
///   K_v = R dt + E_v[S^T P_child S]          (control Hessian, sym. pos. def.)
///   L_v = E_v[S^T P_child T]                 (cross gain)
///   P_v = Q dt + E_v[T^T P_child T] - L_v^T K_v^{-1} L_v,  symmetrized.
///
/// The quadratic value function (1/2) x^T P_v x is exact for the subtree
/// problem at v; rho = 0 recovers the plain value recursion.
struct RiccatiSolution {
  NodeMatrices P;  // all nodes; leaves hold G + rho M^T M
  NodeMatrices K;  // non-leaf
  NodeMatrices L;  // non-leaf
  double rho = 0.0;
  double min_gain_eigenvalue = 0.0;  // min over nodes of lambda_min(K_v), recorded
  int min_gain_node = -1;
  double max_feedback_norm = 0.0;    // max over nodes of ||K_v^{-1} L_v||_2

  /// Solve K_v y = rhs via the cached Cholesky factor.
  Eigen::MatrixXd gain_solve(int node, const Eigen::MatrixXd& rhs) const;
  Eigen::VectorXd gain_solve(int node, const Eigen::VectorXd& rhs) const;

 private:
  friend RiccatiSolution riccati_backward(const ScenarioTree&, const ProblemData&, double);
  std::vector<Eigen::LLT<Eigen::MatrixXd>> K_llt_;
};

RiccatiSolution riccati_backward(const ScenarioTree& tree, const ProblemData& data,
                                 double rho);

/// Affine part of the value function for min_u L_rho(u, lambda):
///
///   V_v(x) = (1/2) x^T P_v x + phi_v^T x + offset_v.
///
/// phi solves the backward recursion that discretizes the adjoint BSDE:
///
///   phi_leaf = M^T lambda - rho M^T b
///   h_v      = E_v[S^T phi_child]                    (coupling, = (B^T phibar + D^T psi) dt)
///   phi_v    = E_v[T^T phi_child] - L_v^T K_v^{-1} h_v
///   offset_v = E_v[offset_child] - (1/2) h_v^T K_v^{-1} h_v
///   offset_leaf = (rho/2)|b|^2 - <lambda, b>.
///
/// psi is the martingale component, stored per child edge:
/// psi_c = (phi_c - E_v[phi_child]) / dW_c. On the binary tree the
/// representation phi_c = E_v[phi] + psi_c dW_c is exact and
/// E_v[dW phi_child] = psi dt, so h_v = (B^T E_v[phi_child] + D^T psi) dt.
struct AdjointPair {
  NodeVectors phi;       // all nodes
  NodeVectors psi;       // nodes at depth >= 1 (value on the edge from parent)
  NodeVectors coupling;  // non-leaf: h_v above
  std::vector<double> offset;  // all nodes
  double rho = 0.0;
};

AdjointPair adjoint_backward(const ScenarioTree& tree, const ProblemData& data,
                             const RiccatiSolution& ric, const NodeVectors& lambda,
                             double rho);

/// Forward pass of the affine feedback law
///   u_v = -K_v^{-1} (L_v X_v + h_v),
/// the unique minimizer of u |-> L_rho(u, lambda). The returned state is the
/// trajectory of the returned control.
struct FeedbackSolution {
  NodeVectors control;
  NodeVectors state;
};
FeedbackSolution feedback_control(const ScenarioTree& tree, const ProblemData& data,
                                  const RiccatiSolution& ric, const AdjointPair& adj);

/// riccati_backward + adjoint_backward + feedback_control.
FeedbackSolution solve_subproblem(const ScenarioTree& tree, const ProblemData& data,
                                  const NodeVectors& lambda, double rho);

/// Dual functional d(lambda) = inf_u L(u, lambda), via the rho = 0 recursion.
/// Returns the closed form
///   (1/2)<P_0 x0, x0> + <phi_0, x0> - E<b, lambda>
///     - (1/2) sum_{non-leaf} p_v h_v^T K_v^{-1} h_v
/// after cross-checking it against the direct evaluation L(u*, lambda) at the
/// feedback minimizer; disagreement beyond 1e-10*(1+|d|) throws (bug trap).
double dual_value(const ScenarioTree& tree, const ProblemData& data,
                  const NodeVectors& lambda);

}  // namespace cslq
