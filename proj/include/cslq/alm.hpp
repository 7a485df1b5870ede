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

#include <optional>

#include "cslq/model.hpp"

namespace cslq {

/// Augmented Lagrangian iteration parameters. Step sizes r^k must satisfy
/// 0 < r^k <= 2 rho (the convergence window); violations are rejected at
/// resolve time, not merely warned.
struct ALMConfig {
  /// Penalty parameter; unset picks 10 * (1 + max leaf ||G||_2).
  std::optional<double> rho;
  /// Step sizes r^k; empty means constant r^k = rho, otherwise the last
  /// entry repeats once the list is exhausted.
  std::vector<double> step_sizes;
  /// Initial multiplier / control; empty means zero.
  NodeVectors lambda0;
  NodeVectors u0;
  double tol_residual = 1e-8;      // on sqrt(E|M X(T) - b|^2)
  double tol_control = 1e-9;       // on successive-iterate l2 distance
  double tol_stationarity = 1e-9;  // feasible-start early exit
  int max_iter = 500;
  /// Track d(lambda^k) and the duality gap per iteration (one extra rho = 0
  /// backward pass each); unset enables it for trees with at most 8 steps.
  std::optional<bool> dual_values;
  /// Optional ground truth; when present the report carries per-iteration
  /// distances to it.
  NodeVectors oracle_control;
  NodeVectors oracle_multiplier;
  /// Keep every iterate's control in the report (diagnostics at desk scale).
  bool keep_iterates = false;
};

struct AlmIteration {
  int k = 0;
  double residual_norm = 0.0;
  double control_change = 0.0;  // NaN at k <= 1 (no previous iterate)
  double primal_value = 0.0;    // J(u^k)
  double first_order_residual = 0.0;
  double step = 0.0;            // r^k used on this iteration's update
  std::optional<double> dual_value;
  std::optional<double> duality_gap;
  std::optional<double> multiplier_distance_sq;  // E|lambda^k - lambda_bar|^2
  std::optional<double> control_distance_sq;     // l2^2 distance to oracle u
};

enum class AlmVerdict { converged, max_iter, aborted };
const char* to_string(AlmVerdict v);

struct ALMReport {
  std::vector<AlmIteration> iterations;
  AlmVerdict verdict = AlmVerdict::aborted;
  std::string abort_reason;
  NodeVectors final_control;
  NodeVectors final_multiplier;
  NodeVectors final_state;
  double rho = 0.0;  // resolved penalty
  double final_residual = 0.0;
  double final_cost = 0.0;
  double max_feedback_norm = 0.0;  // max ||K^{-1}L|| seen across subproblems
  /// u^{k} per record, filled when ALMConfig::keep_iterates; aligned with
  /// iterations (record i holds the control whose residual is recorded there).
  std::vector<NodeVectors> control_iterates;
};

/// Algorithm: u^{k+1} = argmin_u L_rho(u, lambda^k) by the backward
/// recursions, lambda^{k+1} = lambda^k + r^k (M X^{x,u^{k+1}}(T) - b) per
/// leaf. Stops when residual_norm <= tol_residual and (from the second
/// iterate on) control_change <= tol_control.
ALMReport alm_solve(const ScenarioTree& tree, const ProblemData& data,
                    const ALMConfig& config);

/// Stationarity residual of u |-> L_rho(u, lambda): the l2 norm over
/// non-leaf nodes of  R u - (1/dt) E_v[S^T p_child], where p solves the
/// costate recursion (no Riccati gains, running source Q X):
///   p_leaf = -(G + rho M^T M) X(T) - M^T lambda + rho M^T b
///   p_v    = E_v[T^T p_child] - dt Q X_v.
/// With pbar = E_v[p_child] and q the per-edge martingale component,
/// (1/dt) E_v[S^T p_child] = B^T pbar + D^T q, the discrete stationarity map.
/// Zero exactly at the subproblem minimizer.
double first_order_residual(const ScenarioTree& tree, const ProblemData& data,
                            const NodeVectors& u, const NodeVectors& lambda,
                            double rho);

struct SaddleReport {
  bool is_saddle = false;
  double worst_violation = 0.0;
  bool feasible = false;
  double feasibility_residual = 0.0;
  double stationarity = 0.0;
  double min_direction_margin = 0.0;  // min over samples of L_rho(u+v) - L_rho(u)
};

/// Checks the saddle-point characterization at (u, lambda) for L_rho:
/// (a) feasibility of u, (b) L_rho(u + v, lambda) >= L_rho(u, lambda) - 1e-10
/// for n_samples random directions v, (c) first_order_residual <= tol.
SaddleReport saddle_point_check(const ScenarioTree& tree, const ProblemData& data,
                                const NodeVectors& u, const NodeVectors& lambda,
                                double rho, int n_samples, std::uint64_t seed = 0,
                                double tol = 1e-8);

}  // namespace cslq
