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
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cslq/alm.hpp"
#include "cslq/controllability.hpp"
#include "cslq/dense.hpp"
#include "cslq/instance.hpp"
#include "cslq/riccati.hpp"

namespace {

using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";

// exit codes: 0 success, 1 config error, 2 certification/size guard,
// 3 non-convergence
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitCertification = 2;
constexpr int kExitNoConvergence = 3;

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  bool csv = false;
  bool force = false;
  std::optional<std::uint64_t> seed;
  bool check_surjectivity = false;
  bool check_rank = false;
  bool check_convexity = false;
};

json base_report(const cslq::Instance& inst, const std::string& command) {
  json rep;
  rep["tool"] = {{"name", "cslq"}, {"version", kToolVersion}};
  rep["command"] = command;
  rep["instance_hash"] = inst.hash;
  rep["instance"] = {
      {"n", inst.data.state_dim},
      {"m", inst.data.control_dim},
      {"l", inst.data.constraint_dim},
      {"N", inst.tree.steps()},
      {"T", inst.tree.grid().horizon},
      {"branching", inst.tree.branching()},
      {"nodes", inst.tree.node_count()},
      {"flat_controls", inst.data.control_dim * inst.tree.non_leaf_count()},
      {"flat_constraints", inst.data.constraint_dim * inst.tree.leaf_count()},
      {"seed", inst.seed},
  };
  rep["coordinate_convention"] =
      "flat vectors are plain node values in breadth-first order; probability "
      "weights enter only through diag(prob*dt) on controls and diag(prob) on "
      "leaves";
  return rep;
}

void write_report(const json& rep, const Options& opt, const std::string& command) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  const std::string stem = fs::path(opt.config_path).stem().string();
  const fs::path path = fs::path(opt.out_dir) / (stem + "." + command + ".json");
  std::ofstream out(path);
  out << rep.dump(2) << '\n';
  std::cout << "report: " << path.string() << '\n';
}

void write_csv(const cslq::ALMReport& alm, const Options& opt) {
  namespace fs = std::filesystem;
  const std::string stem = fs::path(opt.config_path).stem().string();
  const fs::path path = fs::path(opt.out_dir) / (stem + ".iterations.csv");
  std::ofstream out(path);
  out << cslq::alm_iterations_csv(alm);
  std::cout << "iteration table: " << path.string() << '\n';
}

bool constraint_is_vacuous(const cslq::Instance& inst) {
  for (int id : inst.tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    if (inst.data.M[i].cwiseAbs().maxCoeff() > 0.0) return false;
    if (inst.data.b[i].size() > 0 && inst.data.b[i].cwiseAbs().maxCoeff() > 0.0)
      return false;
  }
  return true;
}

/// Runs the convexity and surjectivity certification gates. Returns the
/// checks section; throws cslq::Error to signal exit code 2.
json certify(const cslq::Instance& inst) {
  json checks;
  const double delta = cslq::uniform_convexity_delta(inst.tree, inst.data);
  checks["uniform_convexity_delta"] = delta;
  if (delta <= 1e-10)
    throw cslq::Error("certification failed: uniform convexity delta_hat = " +
                      std::to_string(delta));
  if (constraint_is_vacuous(inst)) {
    checks["surjectivity_certificate"] = {{"vacuous_constraint", true}};
    return checks;
  }
  const cslq::SurjectivityCertificate cert =
      cslq::surjectivity_certificate(inst.tree, inst.data);
  checks["surjectivity_certificate"] = {{"sigma_min", cert.sigma_min},
                                        {"c_hat", cert.c_hat},
                                        {"surjective", cert.surjective},
                                        {"rows", cert.rows},
                                        {"cols", cert.cols}};
  if (!cert.surjective)
    throw cslq::Error("certification failed: constraint map not surjective "
                      "(sigma_min = " + std::to_string(cert.sigma_min) + ")");
  return checks;
}

int cmd_solve(const cslq::Instance& inst, const Options& opt) {
  json rep = base_report(inst, "solve");
  if (!opt.force) {
    rep["checks"] = certify(inst);
  } else {
    rep["checks"] = {{"skipped", true}};
  }

  cslq::ALMConfig cfg = cslq::alm_config(inst);
  const cslq::ALMReport alm = cslq::alm_solve(inst.tree, inst.data, cfg);
  rep["alm_solve"] = cslq::alm_report_to_json(alm);
  if (alm.verdict != cslq::AlmVerdict::aborted) {
    const cslq::GapReport gap = cslq::duality_gap(inst.tree, inst.data,
                                                  alm.final_control,
                                                  alm.final_multiplier);
    rep["duality_gap"] = {{"gap", gap.gap},
                          {"cost", gap.cost_value},
                          {"dual_value", gap.dual},
                          {"feasible", gap.feasible},
                          {"feasibility_residual", gap.feasibility_residual}};
    std::cout << "J(u) = " << gap.cost_value << "  residual = " << alm.final_residual
              << "  gap = " << gap.gap << "  iterations = " << alm.iterations.size()
              << '\n';
  } else {
    std::cout << "aborted: " << alm.abort_reason << '\n';
  }
  write_report(rep, opt, "solve");
  if (opt.csv) write_csv(alm, opt);
  return alm.verdict == cslq::AlmVerdict::converged ? kExitOk : kExitNoConvergence;
}

int cmd_oracle(const cslq::Instance& inst, const Options& opt) {
  json rep = base_report(inst, "oracle");
  if (!opt.force) {
    rep["checks"] = certify(inst);
  } else {
    rep["checks"] = {{"skipped", true}};
  }

  const cslq::KktSolution kkt = cslq::kkt_solve(inst.tree, inst.data);
  const double dual = cslq::dual_value(inst.tree, inst.data, kkt.multiplier);
  rep["kkt_solve"] = {{"kkt_residual", kkt.kkt_residual},
                      {"feasibility", kkt.feasibility},
                      {"cost", kkt.cost_value},
                      {"control", cslq::control_to_json(inst.tree, kkt.control)},
                      {"multiplier", cslq::leaf_process_to_json(inst.tree, kkt.multiplier)}};
  rep["dual_value"] = dual;
  rep["duality_gap"] = {{"gap", kkt.cost_value - dual}};
  std::cout << "J(u*) = " << kkt.cost_value << "  d(lambda*) = " << dual
            << "  gap = " << kkt.cost_value - dual
            << "  kkt residual = " << kkt.kkt_residual << '\n';
  write_report(rep, opt, "oracle");
  return kExitOk;
}

int cmd_check(const cslq::Instance& inst, const Options& opt) {
  json rep = base_report(inst, "check");
  const bool all = !opt.check_surjectivity && !opt.check_rank && !opt.check_convexity;
  json checks;
  if (all || opt.check_convexity)
    checks["uniform_convexity_delta"] =
        cslq::uniform_convexity_delta(inst.tree, inst.data);
  if (all || opt.check_surjectivity) {
    const cslq::SurjectivityCertificate cert =
        cslq::surjectivity_certificate(inst.tree, inst.data);
    checks["surjectivity_certificate"] = {{"sigma_min", cert.sigma_min},
                                          {"c_hat", cert.c_hat},
                                          {"surjective", cert.surjective},
                                          {"rows", cert.rows},
                                          {"cols", cert.cols}};
  }
  if (all || opt.check_rank) {
    if (!inst.constants)
      throw cslq::ConfigError(
          "rank checks need constant coefficient matrices (A, B, C, D, M)");
    const auto& cc = *inst.constants;
    const cslq::MdRankResult md = cslq::check_md_rank(cc.M, cc.D);
    const cslq::RankVerdict verdict =
        cslq::surjectivity_verdict(cc.A, cc.B, cc.C, cc.D, cc.M);
    checks["surjectivity_verdict"] = {{"md_rank", md.rank},
                                      {"md_ok", verdict.md_ok},
                                      {"word_rank", verdict.word_rank},
                                      {"span_history", verdict.span_history},
                                      {"sufficient", verdict.sufficient},
                                      {"note", verdict.note}};
    std::cout << "rank verdict: " << verdict.note << '\n';
  }
  rep["checks"] = std::move(checks);
  write_report(rep, opt, "check");
  return kExitOk;
}

int cmd_compare(const cslq::Instance& inst, const Options& opt) {
  json rep = base_report(inst, "compare");
  if (!opt.force) {
    rep["checks"] = certify(inst);
  } else {
    rep["checks"] = {{"skipped", true}};
  }

  const cslq::KktSolution kkt = cslq::kkt_solve(inst.tree, inst.data);
  const double dual_at_oracle = cslq::dual_value(inst.tree, inst.data, kkt.multiplier);

  cslq::ALMConfig cfg = cslq::alm_config(inst);
  cfg.oracle_control = kkt.control;
  cfg.oracle_multiplier = kkt.multiplier;
  const cslq::ALMReport alm = cslq::alm_solve(inst.tree, inst.data, cfg);

  rep["kkt_solve"] = {{"kkt_residual", kkt.kkt_residual},
                      {"feasibility", kkt.feasibility},
                      {"cost", kkt.cost_value},
                      {"dual_value", dual_at_oracle}};
  rep["alm_solve"] = cslq::alm_report_to_json(alm);

  if (alm.verdict == cslq::AlmVerdict::aborted) {
    std::cout << "aborted: " << alm.abort_reason << '\n';
    write_report(rep, opt, "compare");
    return kExitNoConvergence;
  }

  const auto& last = alm.iterations.back();
  const double u_dist =
      last.control_distance_sq ? std::sqrt(*last.control_distance_sq) : -1.0;
  const double lam_dist =
      last.multiplier_distance_sq ? std::sqrt(*last.multiplier_distance_sq) : -1.0;
  const cslq::GapReport gap = cslq::duality_gap(inst.tree, inst.data,
                                                alm.final_control,
                                                alm.final_multiplier);
  rep["compare"] = {{"control_distance", u_dist},
                    {"multiplier_distance", lam_dist},
                    {"alm_gap", gap.gap},
                    {"oracle_gap", kkt.cost_value - dual_at_oracle},
                    {"iterations", alm.iterations.size()}};
  std::cout << "|u_alm - u_kkt| = " << u_dist << "  |lambda_alm - lambda_kkt| = "
            << lam_dist << "  gap = " << gap.gap
            << "  iterations = " << alm.iterations.size() << '\n';
  write_report(rep, opt, "compare");
  if (opt.csv) write_csv(alm, opt);
  return alm.verdict == cslq::AlmVerdict::converged ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cslq: constrained stochastic LQ solver on scenario trees"};
  app.require_subcommand(1);

  Options opt;
  std::string command;
  for (const char* name : {"solve", "oracle", "check", "compare"}) {
    CLI::App* sub = app.add_subcommand(
        name, std::string(name) + " the instance described by a config file");
    sub->add_option("config", opt.config_path, "instance config (JSON)")
        ->required();
    sub->add_option("--out", opt.out_dir, "output directory for reports");
    sub->add_flag("--csv", opt.csv, "also write the per-iteration CSV table");
    sub->add_flag("--force", opt.force, "skip the certification gate");
    sub->add_option("--seed", opt.seed, "override the config seed");
    if (std::string(name) == "check") {
      sub->add_flag("--surjectivity", opt.check_surjectivity,
                    "tree surjectivity certificate only");
      sub->add_flag("--rank", opt.check_rank, "deterministic rank tests only");
      sub->add_flag("--convexity", opt.check_convexity,
                    "uniform convexity probe only");
    }
    sub->callback([&command, name]() { command = name; });
  }

  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  int code = kExitOk;
  try {
    cslq::Instance inst = cslq::load_instance_file(opt.config_path);
    if (opt.seed) {
      inst.config["seed"] = *opt.seed;
      inst.seed = *opt.seed;
      inst.hash = cslq::hash_json(inst.config);
    }
    if (command == "solve") code = cmd_solve(inst, opt);
    else if (command == "oracle") code = cmd_oracle(inst, opt);
    else if (command == "check") code = cmd_check(inst, opt);
    else code = cmd_compare(inst, opt);
  } catch (const cslq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    code = kExitConfig;
  } catch (const cslq::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = kExitCertification;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = kExitConfig;
  }
  const auto t1 = std::chrono::steady_clock::now();
  std::cerr << "elapsed "
            << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
            << " ms\n";
  return code;
}
