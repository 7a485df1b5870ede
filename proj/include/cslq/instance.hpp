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
#include <string>

#include <json.hpp>

#include "cslq/alm.hpp"
#include "cslq/model.hpp"

namespace cslq {

/// Raised on malformed or inconsistent configuration documents.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

struct SolverOptions {
  std::optional<double> rho;        // default 10 * (1 + max leaf ||G||)
  std::vector<double> step_sizes;   // default constant rho
  double tol_residual = 1e-8;
  double tol_control = 1e-9;
  int max_iter = 500;
  std::optional<bool> dual_values;
};

/// Constant coefficient matrices when the config provided them as such
/// (required by the deterministic rank checks).
struct ConstantCoefficients {
  Eigen::MatrixXd A, B, C, D, M;
};

struct Instance {
  ScenarioTree tree;
  ProblemData data;
  SolverOptions solver;
  std::uint64_t seed = 0;
  std::string hash;              // FNV-1a64 of the canonical config text
  nlohmann::json config;         // canonical echo of the parsed document
  std::optional<ConstantCoefficients> constants;
};

/// Parses and validates a config document:
/// {
///   "dims": {"n":., "m":., "l":.},
///   "grid": {"T":., "N":., "branching":2},
///   "coefficients": {"A": [[..]] | {"per_level":[[[..]],..]}, "B":., "C":., "D":., "Q":., "R":.},
///   "terminal": {"G": [[..]] | {"per_leaf":[..]}, "M":., "b": [..] | {"per_leaf":[..]}},
///   "x0": [..],
///   "solver": {"rho":., "r":. | "r_schedule":[..], "tol_residual":., "tol_control":.,
///              "max_iter":., "dual_values": bool},   // optional
///   "seed": 0                                        // optional
/// }
Instance load_instance(const nlohmann::json& config);
Instance load_instance_file(const std::string& path);

ALMConfig alm_config(const Instance& inst);

struct GeneratorBounds {
  int max_state_dim = 4;    // n
  int max_control_dim = 3;  // m (>= 2; one control can never cover the leaves)
  int max_constraint_dim = 2;
  int max_steps = 5;
  /// Conditioning floor on the certificate: instances with sigma_min below
  /// this converge too slowly for the default-rho iteration budget.
  double sigma_floor = 0.05;
};

/// Deterministic random certified instance: coefficients entry-wise uniform
/// in [-1,1], Q = qq^T + 1e-3 I, R = rr^T + I, G = gg^T (so the convexity
/// certificate holds by construction), per-leaf random b, M redrawn until the
/// tree certificate is surjective with sigma_min above the floor. Returns the
/// config document; feed it to load_instance.
nlohmann::json random_instance_config(std::uint64_t seed,
                                      const GeneratorBounds& bounds = {});

/// FNV-1a 64 of the canonical (sorted-key) dump.
std::string hash_json(const nlohmann::json& j);

// --- serialization helpers (node-id-ordered arrays) ---
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
nlohmann::json control_to_json(const ScenarioTree& tree, const NodeVectors& u);
nlohmann::json leaf_process_to_json(const ScenarioTree& tree, const NodeVectors& a);
nlohmann::json alm_report_to_json(const ALMReport& rep);

/// Per-iteration table as CSV with columns k,residual,gap,control_change,lambda_dist.
std::string alm_iterations_csv(const ALMReport& rep);

}  // namespace cslq
