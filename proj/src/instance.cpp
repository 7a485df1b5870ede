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
#include "cslq/instance.hpp"

#include <fstream>
#include <sstream>

#include "cslq/dense.hpp"

namespace cslq {

using nlohmann::json;

namespace {

Eigen::MatrixXd parse_matrix(const json& j, int rows, int cols, const std::string& name) {
  if (!j.is_array() || j.size() != static_cast<size_t>(rows))
    throw ConfigError(name + ": expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || row.size() != static_cast<size_t>(cols))
      throw ConfigError(name + ": expected " + std::to_string(cols) + " columns");
    for (int c = 0; c < cols; ++c) {
      if (!row[static_cast<size_t>(c)].is_number())
        throw ConfigError(name + ": non-numeric entry");
      m(r, c) = row[static_cast<size_t>(c)].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd parse_vector(const json& j, int size, const std::string& name) {
  if (!j.is_array() || j.size() != static_cast<size_t>(size))
    throw ConfigError(name + ": expected a vector of length " + std::to_string(size));
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) {
    if (!j[static_cast<size_t>(i)].is_number())
      throw ConfigError(name + ": non-numeric entry");
    v(i) = j[static_cast<size_t>(i)].get<double>();
  }
  return v;
}

// Coefficient processes accept a constant matrix or {"per_level": [...]}.
// Returns per-level matrices и whether a constant was given.
std::pair<std::vector<Eigen::MatrixXd>, bool> parse_coefficient(
    const json& j, int rows, int cols, int steps, const std::string& name) {
  std::vector<Eigen::MatrixXd> out;
  if (j.is_object()) {
    if (!j.contains("per_level"))
      throw ConfigError(name + ": object form must hold \"per_level\"");
    const json& arr = j.at("per_level");
    if (!arr.is_array() || arr.size() != static_cast<size_t>(steps))
      throw ConfigError(name + ": per_level must list " + std::to_string(steps) +
                        " matrices");
    for (int k = 0; k < steps; ++k)
      out.push_back(parse_matrix(arr[static_cast<size_t>(k)], rows, cols,
                                 name + "[" + std::to_string(k) + "]"));
    return {out, false};
  }
  out.assign(static_cast<size_t>(steps), parse_matrix(j, rows, cols, name));
  return {out, true};
}

// Terminal data accept a constant or {"per_leaf": [...]} in leaf id order.
template <class Parse>
auto parse_terminal(const json& j, int leaves, const std::string& name, Parse parse)
    -> std::pair<std::vector<decltype(parse(j))>, bool> {
  std::vector<decltype(parse(j))> out;
  if (j.is_object()) {
    if (!j.contains("per_leaf"))
      throw ConfigError(name + ": object form must hold \"per_leaf\"");
    const json& arr = j.at("per_leaf");
    if (!arr.is_array() || arr.size() != static_cast<size_t>(leaves))
      throw ConfigError(name + ": per_leaf must list " + std::to_string(leaves) +
                        " entries");
    for (const json& e : arr) out.push_back(parse(e));
    return {out, false};
  }
  out.assign(static_cast<size_t>(leaves), parse(j));
  return {out, true};
}

}  // namespace

std::string hash_json(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

Instance load_instance(const json& config) {
  for (const char* key : {"dims", "grid", "coefficients", "terminal", "x0"})
    if (!config.contains(key))
      throw ConfigError(std::string("config missing \"") + key + "\"");

  const json& dims = config.at("dims");
  const int n = dims.value("n", 0), m = dims.value("m", 0), l = dims.value("l", 0);
  if (n < 1 || m < 1 || l < 1) throw ConfigError("dims must be positive");
  if (l > n) throw ConfigError("dims: l must not exceed n");

  const json& grid = config.at("grid");
  const double T = grid.value("T", 0.0);
  const int N = grid.value("N", 0);
  const int branching = grid.value("branching", 2);
  Instance inst{ScenarioTree::build(T, N, branching), {}, {}, 0, "", config, {}};
  const ScenarioTree& tree = inst.tree;

  const json& co = config.at("coefficients");
  for (const char* key : {"A", "B", "C", "D", "Q", "R"})
    if (!co.contains(key))
      throw ConfigError(std::string("coefficients missing \"") + key + "\"");
  const auto [A, cA] = parse_coefficient(co.at("A"), n, n, N, "A");
  const auto [B, cB] = parse_coefficient(co.at("B"), n, m, N, "B");
  const auto [C, cC] = parse_coefficient(co.at("C"), n, n, N, "C");
  const auto [D, cD] = parse_coefficient(co.at("D"), n, m, N, "D");
  const auto [Q, cQ] = parse_coefficient(co.at("Q"), n, n, N, "Q");
  const auto [R, cR] = parse_coefficient(co.at("R"), m, m, N, "R");

  const json& term = config.at("terminal");
  for (const char* key : {"G", "M", "b"})
    if (!term.contains(key))
      throw ConfigError(std::string("terminal missing \"") + key + "\"");
  const auto [G, cG] = parse_terminal(
      term.at("G"), tree.leaf_count(), "G",
      [&](const json& e) { return parse_matrix(e, n, n, "G"); });
  const auto [M, cM] = parse_terminal(
      term.at("M"), tree.leaf_count(), "M",
      [&](const json& e) { return parse_matrix(e, l, n, "M"); });
  const auto [b, cb] = parse_terminal(
      term.at("b"), tree.leaf_count(), "b",
      [&](const json& e) { return parse_vector(e, l, "b"); });

  ProblemData& data = inst.data;
  data.state_dim = n;
  data.control_dim = m;
  data.constraint_dim = l;
  const size_t total = static_cast<size_t>(tree.node_count());
  data.A.resize(total); data.B.resize(total); data.C.resize(total);
  data.D.resize(total); data.Q.resize(total); data.R.resize(total);
  data.G.resize(total); data.M.resize(total); data.b.resize(total);
  for (int k = 0; k < N; ++k)
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      data.A[i] = A[static_cast<size_t>(k)];
      data.B[i] = B[static_cast<size_t>(k)];
      data.C[i] = C[static_cast<size_t>(k)];
      data.D[i] = D[static_cast<size_t>(k)];
      data.Q[i] = Q[static_cast<size_t>(k)];
      data.R[i] = R[static_cast<size_t>(k)];
    }
  int leaf_pos = 0;
  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    data.G[i] = G[static_cast<size_t>(leaf_pos)];
    data.M[i] = M[static_cast<size_t>(leaf_pos)];
    data.b[i] = b[static_cast<size_t>(leaf_pos)];
    ++leaf_pos;
  }
  data.x0 = parse_vector(config.at("x0"), n, "x0");

  try {
    normalize_data(tree, data);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  if (cA && cB && cC && cD && cM)
    inst.constants = ConstantCoefficients{A[0], B[0], C[0], D[0], M[0]};

  if (config.contains("solver")) {
    const json& so = config.at("solver");
    SolverOptions& opt = inst.solver;
    if (so.contains("rho")) opt.rho = so.at("rho").get<double>();
    if (so.contains("r")) opt.step_sizes = {so.at("r").get<double>()};
    if (so.contains("r_schedule"))
      opt.step_sizes = so.at("r_schedule").get<std::vector<double>>();
    opt.tol_residual = so.value("tol_residual", opt.tol_residual);
    opt.tol_control = so.value("tol_control", opt.tol_control);
    opt.max_iter = so.value("max_iter", opt.max_iter);
    if (so.contains("dual_values")) opt.dual_values = so.at("dual_values").get<bool>();
    if (opt.max_iter < 1) throw ConfigError("solver.max_iter must be >= 1");
    // Validate the step window now so a bad schedule is a load error.
    double rho;
    if (opt.rho) {
      rho = *opt.rho;
      if (!(rho > 0.0)) throw ConfigError("solver.rho must be positive");
    } else {
      double gmax = 0.0;
      for (int id : tree.leaves()) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(data.G[static_cast<size_t>(id)]);
        if (svd.singularValues().size() > 0)
          gmax = std::max(gmax, svd.singularValues()(0));
      }
      rho = 10.0 * (1.0 + gmax);
    }
    for (double s : opt.step_sizes)
      if (!(s > 0.0) || s > 2.0 * rho)
        throw ConfigError("solver: step size " + std::to_string(s) +
                          " outside the admissible window (0, 2*rho] with rho = " +
                          std::to_string(rho));
  }

  inst.seed = config.value("seed", 0ULL);
  inst.hash = hash_json(config);
  return inst;
}

Instance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return load_instance(j);
}

ALMConfig alm_config(const Instance& inst) {
  ALMConfig cfg;
  cfg.rho = inst.solver.rho;
  cfg.step_sizes = inst.solver.step_sizes;
  cfg.tol_residual = inst.solver.tol_residual;
  cfg.tol_control = inst.solver.tol_control;
  cfg.max_iter = inst.solver.max_iter;
  cfg.dual_values = inst.solver.dual_values;
  return cfg;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json control_to_json(const ScenarioTree& tree, const NodeVectors& u) {
  json out = json::array();
  for (int k = 0; k < tree.steps(); ++k)
    for (int id : tree.level(k)) {
      json entry;
      entry["node"] = id;
      entry["value"] = vector_to_json(u[static_cast<size_t>(id)]);
      out.push_back(std::move(entry));
    }
  return out;
}

json leaf_process_to_json(const ScenarioTree& tree, const NodeVectors& a) {
  json out = json::array();
  for (int id : tree.leaves()) {
    json entry;
    entry["node"] = id;
    entry["value"] = vector_to_json(a[static_cast<size_t>(id)]);
    out.push_back(std::move(entry));
  }
  return out;
}

json alm_report_to_json(const ALMReport& rep) {
  json out;
  out["verdict"] = to_string(rep.verdict);
  if (!rep.abort_reason.empty()) out["abort_reason"] = rep.abort_reason;
  out["rho"] = rep.rho;
  out["iterations"] = rep.iterations.size();
  out["final_residual_norm"] = rep.final_residual;
  out["final_cost"] = rep.final_cost;
  out["max_feedback_gain_norm"] = rep.max_feedback_norm;
  json table = json::array();
  for (const AlmIteration& it : rep.iterations) {
    json row;
    row["k"] = it.k;
    row["residual_norm"] = it.residual_norm;
    if (std::isfinite(it.control_change)) row["control_change"] = it.control_change;
    row["primal_value"] = it.primal_value;
    row["first_order_residual"] = it.first_order_residual;
    row["step"] = it.step;
    if (it.dual_value) row["dual_value"] = *it.dual_value;
    if (it.duality_gap) row["duality_gap"] = *it.duality_gap;
    if (it.multiplier_distance_sq)
      row["multiplier_distance_sq"] = *it.multiplier_distance_sq;
    if (it.control_distance_sq) row["control_distance_sq"] = *it.control_distance_sq;
    table.push_back(std::move(row));
  }
  out["iteration_table"] = std::move(table);
  return out;
}

std::string alm_iterations_csv(const ALMReport& rep) {
  std::ostringstream os;
  os.precision(17);
  os << "k,residual,gap,control_change,lambda_dist\n";
  for (const AlmIteration& it : rep.iterations) {
    os << it.k << ',' << it.residual_norm << ',';
    if (it.duality_gap) os << *it.duality_gap;
    os << ',';
    if (std::isfinite(it.control_change)) os << it.control_change;
    os << ',';
    if (it.multiplier_distance_sq) os << std::sqrt(*it.multiplier_distance_sq);
    os << '\n';
  }
  return os.str();
}

json random_instance_config(std::uint64_t seed, const GeneratorBounds& bounds) {
  detail::Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0xc0de5ULL);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int n = 1 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(bounds.max_state_dim)));
    const int m = 2 + static_cast<int>(rng.integer(
                          static_cast<std::uint64_t>(bounds.max_control_dim - 1)));
    const int l = 1 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(
                          std::min(bounds.max_constraint_dim, n))));
    const int N = 1 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(bounds.max_steps)));
    // the tree has m*(2^N - 1) scalar controls against l*2^N leaf constraints
    if (static_cast<long>(m) * ((1L << N) - 1) < static_cast<long>(l) * (1L << N))
      continue;

    const Eigen::MatrixXd A = rng.uniform_matrix(n, n);
    const Eigen::MatrixXd B = rng.uniform_matrix(n, m);
    const Eigen::MatrixXd C = rng.uniform_matrix(n, n);
    const Eigen::MatrixXd D = rng.uniform_matrix(n, m);
    const Eigen::MatrixXd q = rng.uniform_matrix(n, n);
    const Eigen::MatrixXd Q = q * q.transpose() + 1e-3 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd r = rng.uniform_matrix(m, m);
    const Eigen::MatrixXd R = r * r.transpose() + Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd g = rng.uniform_matrix(n, n);
    const Eigen::MatrixXd G = g * g.transpose();
    const Eigen::MatrixXd M = rng.uniform_matrix(l, n);
    const Eigen::VectorXd x0 = rng.uniform_vector(n);

    const ScenarioTree tree = ScenarioTree::build(1.0, N);
    json per_leaf_b = json::array();
    for (int i = 0; i < tree.leaf_count(); ++i)
      per_leaf_b.push_back(vector_to_json(rng.uniform_vector(l)));

    json cfg;
    cfg["dims"] = {{"n", n}, {"m", m}, {"l", l}};
    cfg["grid"] = {{"T", 1.0}, {"N", N}, {"branching", 2}};
    cfg["coefficients"] = {{"A", matrix_to_json(A)}, {"B", matrix_to_json(B)},
                           {"C", matrix_to_json(C)}, {"D", matrix_to_json(D)},
                           {"Q", matrix_to_json(Q)}, {"R", matrix_to_json(R)}};
    cfg["terminal"] = {{"G", matrix_to_json(G)},
                       {"M", matrix_to_json(M)},
                       {"b", {{"per_leaf", per_leaf_b}}}};
    cfg["x0"] = vector_to_json(x0);
    cfg["seed"] = seed;

    const Instance inst = load_instance(cfg);
    const SurjectivityCertificate cert = surjectivity_certificate(inst.tree, inst.data);
    if (!cert.surjective || cert.sigma_min < bounds.sigma_floor) continue;
    return cfg;
  }
  throw Error("random_instance_config: no certified instance found for seed " +
              std::to_string(seed));
}

}  // namespace cslq
