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

#include "cslq/tree.hpp"

namespace cslq {

/// Problem coefficients, node-indexed so that both deterministic and
/// adapted random coefficients are represented uniformly. A,B,C,D,Q,R live
/// on non-leaf nodes; G, M, b live on leaves. A deterministic instance
/// simply repeats the same matrix across a level.
struct ProblemData {
  int state_dim = 0;       // n
  int control_dim = 0;     // m
  int constraint_dim = 0;  // l  (l <= n)

  NodeMatrices A, C;  // n x n, non-leaf nodes
  NodeMatrices B, D;  // n x m, non-leaf nodes
  NodeMatrices Q;     // n x n symmetric, non-leaf nodes
  NodeMatrices R;     // m x m symmetric, non-leaf nodes
  NodeMatrices G;     // n x n symmetric, leaves
  NodeMatrices M;     // l x n, leaves
  NodeVectors b;      // l, leaves
  Eigen::VectorXd x0; // n
};

/// Level-constant instance from plain matrices (b replicated per leaf).
ProblemData make_constant_data(const ScenarioTree& tree,
                               const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                               const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                               const Eigen::MatrixXd& G, const Eigen::MatrixXd& M,
                               const Eigen::VectorXd& b, const Eigen::VectorXd& x0);

/// Validates dimensions and symmetrizes Q, R, G in place ((X + X^T)/2).
/// Returns the largest asymmetry found; callers may warn above 1e-9.
double normalize_data(const ScenarioTree& tree, ProblemData& data);

/// The norm-optimal view of an instance: same dynamics and constraint,
/// Q = 0, G = 0, R = I. Cost becomes (1/2) E int |u|^2 dt.
ProblemData norm_optimal_view(const ScenarioTree& tree, const ProblemData& data);

/// Copy of the instance with G replaced by G + rho M^T M per leaf.
ProblemData with_terminal_penalty(const ScenarioTree& tree, const ProblemData& data,
                                  double rho);

/// One-step transition to a child node:
///   X_child = T_c X + S_c u,  T_c = I + A dt + C dW_c,  S_c = B dt + D dW_c.
/// This Euler-Maruyama map is exact for the tree problem; everything
/// downstream (cost, Riccati recursion, adjoints, dense oracle) is built on it.
struct Transition {
  Eigen::MatrixXd T;  // n x n
  Eigen::MatrixXd S;  // n x m
};
Transition transition(const ScenarioTree& tree, const ProblemData& data, int child);

/// Forward simulation from x0 under control u; linear in (x0, u) jointly.
NodeVectors simulate_forward(const ScenarioTree& tree, const ProblemData& data,
                             const Eigen::VectorXd& x0, const NodeVectors& u);

/// J = (1/2) sum_{non-leaf} p dt (<QX,X> + <Ru,u>) + (1/2) sum_{leaf} p <GX,X>.
double cost(const ScenarioTree& tree, const ProblemData& data,
            const NodeVectors& X, const NodeVectors& u);

/// Per-leaf M X(T) - b.
NodeVectors constraint_residual(const ScenarioTree& tree, const ProblemData& data,
                                const NodeVectors& X);

/// sqrt(E |M X(T) - b|^2).
double residual_norm(const ScenarioTree& tree, const ProblemData& data,
                     const NodeVectors& X);

/// L(u, lambda) = J(u) + E<lambda, M X(T) - b>.
double lagrangian(const ScenarioTree& tree, const ProblemData& data,
                  const NodeVectors& u, const NodeVectors& lambda);

/// L_rho(u, lambda) = L(u, lambda) + (rho/2) E|M X(T) - b|^2, rho > 0.
double augmented_lagrangian(const ScenarioTree& tree, const ProblemData& data,
                            const NodeVectors& u, const NodeVectors& lambda,
                            double rho);

/// Certified uniform-convexity modulus: the smallest eigenvalue of
/// W^{-1/2} H0 W^{-1/2}, where H0 is the Hessian of the homogeneous cost
/// J0 over flattened controls and W = diag(prob*dt). delta_hat > 0 certifies
/// the discrete uniform convexity assumption; the largest constant delta with
/// J0(v) >= delta E int |v|^2 dt is delta_hat / 2 (J0 carries the 1/2 factor).
double uniform_convexity_delta(const ScenarioTree& tree, const ProblemData& data);

/// Zero-valued processes with the instance's shapes.
NodeVectors zero_control(const ScenarioTree& tree, const ProblemData& data);
NodeVectors zero_multiplier(const ScenarioTree& tree, const ProblemData& data);

}  // namespace cslq
