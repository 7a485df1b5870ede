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
#include "cslq/alm.hpp"

#include <cmath>
#include <limits>

#include "cslq/riccati.hpp"

namespace cslq {

const char* to_string(AlmVerdict v) {
  switch (v) {
    case AlmVerdict::converged: return "converged";
    case AlmVerdict::max_iter: return "max_iter";
    case AlmVerdict::aborted: return "aborted";
  }
  return "unknown";
}

namespace {

double default_rho(const ScenarioTree& tree, const ProblemData& data) {
  double gnorm = 0.0;
  for (int id : tree.leaves()) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(data.G[static_cast<size_t>(id)]);
    if (svd.singularValues().size() > 0)
      gnorm = std::max(gnorm, svd.singularValues()(0));
  }
  return 10.0 * (1.0 + gnorm);
}

struct Resolved {
  double rho;
  std::vector<double> steps;  // nonempty
  NodeVectors lambda0, u0;
  bool dual_values;
};

Resolved resolve(const ScenarioTree& tree, const ProblemData& data,
                 const ALMConfig& cfg) {
  Resolved r;
  r.rho = cfg.rho.value_or(default_rho(tree, data));
  if (!(r.rho > 0.0)) throw Error("alm: rho must be positive");
  r.steps = cfg.step_sizes.empty() ? std::vector<double>{r.rho} : cfg.step_sizes;
  for (double s : r.steps)
    if (!(s > 0.0) || s > 2.0 * r.rho)
      throw Error("alm: step size " + std::to_string(s) +
                  " outside the admissible window (0, 2*rho] with rho = " +
                  std::to_string(r.rho));
  r.lambda0 = cfg.lambda0.empty() ? zero_multiplier(tree, data) : cfg.lambda0;
  r.u0 = cfg.u0.empty() ? zero_control(tree, data) : cfg.u0;
  r.dual_values = cfg.dual_values.value_or(tree.steps() <= 8);
  return r;
}

}  // namespace

ALMReport alm_solve(const ScenarioTree& tree, const ProblemData& data,
                    const ALMConfig& config) {
  const Resolved cfg = resolve(tree, data, config);
  const bool have_oracle_u = !config.oracle_control.empty();
  const bool have_oracle_lam = !config.oracle_multiplier.empty();

  ALMReport rep;
  rep.rho = cfg.rho;

  auto fill_oracle_fields = [&](AlmIteration& it, const NodeVectors& u,
                                const NodeVectors& lam) {
    if (have_oracle_lam) {
      NodeVectors d(static_cast<size_t>(tree.node_count()));
      for (int id : tree.leaves())
        d[static_cast<size_t>(id)] = lam[static_cast<size_t>(id)] -
                                     config.oracle_multiplier[static_cast<size_t>(id)];
      it.multiplier_distance_sq = leaf_inner(tree, d, d);
    }
    if (have_oracle_u) {
      NodeVectors d(static_cast<size_t>(tree.node_count()));
      for (int k = 0; k < tree.steps(); ++k)
        for (int id : tree.level(k))
          d[static_cast<size_t>(id)] = u[static_cast<size_t>(id)] -
                                       config.oracle_control[static_cast<size_t>(id)];
      it.control_distance_sq = l2_inner(tree, d, d);
    }
  };

  NodeVectors lambda = cfg.lambda0;

  // Feasible-start early exit: a feasible and stationary initial control is
  // already the saddle control for lambda0.
  {
    const NodeVectors X0 = simulate_forward(tree, data, data.x0, cfg.u0);
    const double r0 = residual_norm(tree, data, X0);
    if (r0 <= config.tol_residual) {
      const double s0 = first_order_residual(tree, data, cfg.u0, lambda, cfg.rho);
      if (s0 <= config.tol_stationarity) {
        AlmIteration it;
        it.k = 0;
        it.residual_norm = r0;
        it.control_change = std::numeric_limits<double>::quiet_NaN();
        it.primal_value = cost(tree, data, X0, cfg.u0);
        it.first_order_residual = s0;
        it.step = 0.0;
        fill_oracle_fields(it, cfg.u0, lambda);
        rep.iterations.push_back(it);
        if (config.keep_iterates) rep.control_iterates.push_back(cfg.u0);
        rep.verdict = AlmVerdict::converged;
        rep.final_control = cfg.u0;
        rep.final_multiplier = lambda;
        rep.final_state = X0;
        rep.final_residual = r0;
        rep.final_cost = it.primal_value;
        return rep;
      }
    }
  }

  NodeVectors u_prev;
  for (int k = 1; k <= config.max_iter; ++k) {
    FeedbackSolution sub;
    try {
      const RiccatiSolution ric = riccati_backward(tree, data, cfg.rho);
      rep.max_feedback_norm = std::max(rep.max_feedback_norm, ric.max_feedback_norm);
      const AdjointPair adj = adjoint_backward(tree, data, ric, lambda, cfg.rho);
      sub = feedback_control(tree, data, ric, adj);
    } catch (const Error& e) {
      rep.verdict = AlmVerdict::aborted;
      rep.abort_reason = e.what();
      return rep;
    }

    const NodeVectors res = constraint_residual(tree, data, sub.state);
    const double rn = leaf_norm(tree, res);
    if (!std::isfinite(rn)) {
      rep.verdict = AlmVerdict::aborted;
      rep.abort_reason = "non-finite constraint residual at iteration " + std::to_string(k);
      return rep;
    }

    AlmIteration it;
    it.k = k;
    it.residual_norm = rn;
    it.primal_value = cost(tree, data, sub.state, sub.control);
    it.first_order_residual = first_order_residual(tree, data, sub.control, lambda, cfg.rho);
    const double r_k = cfg.steps[static_cast<size_t>(
        std::min<size_t>(static_cast<size_t>(k - 1), cfg.steps.size() - 1))];
    it.step = r_k;
    if (!u_prev.empty()) {
      NodeVectors d(static_cast<size_t>(tree.node_count()));
      for (int lev = 0; lev < tree.steps(); ++lev)
        for (int id : tree.level(lev))
          d[static_cast<size_t>(id)] =
              sub.control[static_cast<size_t>(id)] - u_prev[static_cast<size_t>(id)];
      it.control_change = l2_norm(tree, d);
    } else {
      it.control_change = std::numeric_limits<double>::quiet_NaN();
    }
    if (cfg.dual_values) {
      it.dual_value = dual_value(tree, data, lambda);
      it.duality_gap = it.primal_value - *it.dual_value;
    }
    fill_oracle_fields(it, sub.control, lambda);
    rep.iterations.push_back(it);

    const bool res_ok = rn <= config.tol_residual;
    const bool ctl_ok = u_prev.empty() || it.control_change <= config.tol_control;
    if (res_ok && ctl_ok) {
      rep.verdict = AlmVerdict::converged;
      rep.final_control = sub.control;
      rep.final_multiplier = lambda;
      rep.final_state = sub.state;
      rep.final_residual = rn;
      rep.final_cost = it.primal_value;
      return rep;
    }

    for (int id : tree.leaves())
      lambda[static_cast<size_t>(id)] += r_k * res[static_cast<size_t>(id)];
    u_prev = sub.control;

    if (k == config.max_iter) {
      rep.verdict = AlmVerdict::max_iter;
      rep.final_control = sub.control;
      rep.final_multiplier = lambda;
      rep.final_state = sub.state;
      rep.final_residual = rn;
      rep.final_cost = it.primal_value;
    }
  }
  return rep;
}

double first_order_residual(const ScenarioTree& tree, const ProblemData& data,
                            const NodeVectors& u, const NodeVectors& lambda,
                            double rho) {
  const NodeVectors X = simulate_forward(tree, data, data.x0, u);
  const double dt = tree.dt();
  NodeVectors p(static_cast<size_t>(tree.node_count()));
  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    p[i] = -(data.G[i] + rho * (data.M[i].transpose() * data.M[i])) * X[i] -
           data.M[i].transpose() * (lambda[i] - rho * data.b[i]);
  }
  double acc = 0.0;
  for (int k = tree.steps() - 1; k >= 0; --k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      Eigen::VectorXd sp = Eigen::VectorXd::Zero(data.control_dim);
      Eigen::VectorXd tp = Eigen::VectorXd::Zero(data.state_dim);
      for (int c : tree.node(id).children) {
        const double w = tree.node(c).prob / tree.node(id).prob;
        const Transition tr = transition(tree, data, c);
        sp += w * (tr.S.transpose() * p[static_cast<size_t>(c)]);
        tp += w * (tr.T.transpose() * p[static_cast<size_t>(c)]);
      }
      p[i] = tp - dt * (data.Q[i] * X[i]);
      const Eigen::VectorXd station = data.R[i] * u[i] - sp / dt;
      acc += tree.node(id).prob * dt * station.squaredNorm();
    }
  }
  return std::sqrt(acc);
}

SaddleReport saddle_point_check(const ScenarioTree& tree, const ProblemData& data,
                                const NodeVectors& u, const NodeVectors& lambda,
                                double rho, int n_samples, std::uint64_t seed,
                                double tol) {
  if (n_samples < 1) throw Error("saddle_point_check: n_samples must be >= 1");
  SaddleReport rep;
  const NodeVectors X = simulate_forward(tree, data, data.x0, u);
  rep.feasibility_residual = residual_norm(tree, data, X);
  rep.feasible = rep.feasibility_residual <= tol;
  rep.stationarity = first_order_residual(tree, data, u, lambda, rho);

  const double base = augmented_lagrangian(tree, data, u, lambda, rho);
  const double scale = 1.0 + l2_norm(tree, u);
  detail::Rng rng(seed + 0x5addULL);
  double min_margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    // random direction, magnitudes spread over decades so small perturbations
    // near the minimizer are probed too
    const double mag = scale * std::pow(10.0, rng.uniform(-4.0, 0.0));
    NodeVectors v(static_cast<size_t>(tree.node_count()));
    for (int k = 0; k < tree.steps(); ++k)
      for (int id : tree.level(k))
        v[static_cast<size_t>(id)] = u[static_cast<size_t>(id)] +
                                     mag * rng.normal_vector(data.control_dim);
    const double val = augmented_lagrangian(tree, data, v, lambda, rho);
    min_margin = std::min(min_margin, val - base);
  }
  rep.min_direction_margin = min_margin;

  double worst = 0.0;
  if (!rep.feasible) worst = std::max(worst, rep.feasibility_residual);
  if (rep.stationarity > tol) worst = std::max(worst, rep.stationarity);
  if (min_margin < -1e-10) worst = std::max(worst, -min_margin);
  rep.worst_violation = worst;
  rep.is_saddle = rep.feasible && rep.stationarity <= tol && min_margin >= -1e-10;
  return rep;
}

}  // namespace cslq
