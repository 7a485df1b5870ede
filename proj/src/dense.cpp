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
#include "cslq/dense.hpp"

#include <cmath>

#include "cslq/riccati.hpp"

namespace cslq {

Eigen::VectorXd DenseProblem::flatten_control(const ScenarioTree& tree,
                                              const NodeVectors& u) const {
  Eigen::VectorXd z(control_dim);
  for (int k = 0; k < tree.steps(); ++k)
    for (int id : tree.level(k))
      z.segment(control_offset[static_cast<size_t>(id)],
                u[static_cast<size_t>(id)].size()) = u[static_cast<size_t>(id)];
  return z;
}

NodeVectors DenseProblem::unflatten_control(const ScenarioTree& tree, int m,
                                            const Eigen::VectorXd& z) const {
  NodeVectors u(static_cast<size_t>(tree.node_count()));
  for (int k = 0; k < tree.steps(); ++k)
    for (int id : tree.level(k))
      u[static_cast<size_t>(id)] = z.segment(control_offset[static_cast<size_t>(id)], m);
  return u;
}

Eigen::VectorXd DenseProblem::flatten_leaf(const ScenarioTree& tree,
                                           const NodeVectors& a) const {
  Eigen::VectorXd z(leaf_dim);
  for (int id : tree.leaves())
    z.segment(leaf_offset[static_cast<size_t>(id)], a[static_cast<size_t>(id)].size()) =
        a[static_cast<size_t>(id)];
  return z;
}

NodeVectors DenseProblem::unflatten_leaf(const ScenarioTree& tree, int l,
                                         const Eigen::VectorXd& z) const {
  NodeVectors a(static_cast<size_t>(tree.node_count()));
  for (int id : tree.leaves())
    a[static_cast<size_t>(id)] = z.segment(leaf_offset[static_cast<size_t>(id)], l);
  return a;
}

DenseProblem assemble_dense(const ScenarioTree& tree, const ProblemData& data) {
  const int n = data.state_dim, m = data.control_dim, l = data.constraint_dim;
  const double dt = tree.dt();
  const long flat_controls = static_cast<long>(m) * tree.non_leaf_count();
  if (flat_controls > 200000)
    throw Error("assemble_dense: instance exceeds the 200000 flattened-control guard");

  DenseProblem dp;
  dp.control_dim = static_cast<int>(flat_controls);
  dp.leaf_dim = l * tree.leaf_count();
  dp.control_offset.assign(static_cast<size_t>(tree.node_count()), -1);
  dp.leaf_offset.assign(static_cast<size_t>(tree.node_count()), -1);
  {
    int off = 0;
    for (int k = 0; k < tree.steps(); ++k)
      for (int id : tree.level(k)) {
        dp.control_offset[static_cast<size_t>(id)] = off;
        off += m;
      }
    off = 0;
    for (int id : tree.leaves()) {
      dp.leaf_offset[static_cast<size_t>(id)] = off;
      off += l;
    }
  }

  // Per-node linear state maps: X_v = F_v x0 + G_v u_flat, propagated with
  // the same transitions that drive simulate_forward.
  NodeMatrices F(static_cast<size_t>(tree.node_count()));
  NodeMatrices Gm(static_cast<size_t>(tree.node_count()));
  F[0] = Eigen::MatrixXd::Identity(n, n);
  Gm[0] = Eigen::MatrixXd::Zero(n, dp.control_dim);
  for (int k = 0; k < tree.steps(); ++k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      const int uoff = dp.control_offset[i];
      for (int c : tree.node(id).children) {
        const size_t ci = static_cast<size_t>(c);
        const Transition tr = transition(tree, data, c);
        F[ci] = tr.T * F[i];
        Gm[ci] = tr.T * Gm[i];
        Gm[ci].middleCols(uoff, m) += tr.S;
      }
    }
  }

  dp.hessian = Eigen::MatrixXd::Zero(dp.control_dim, dp.control_dim);
  dp.linear = Eigen::VectorXd::Zero(dp.control_dim);
  dp.constant = 0.0;
  dp.control_weight = Eigen::VectorXd::Zero(dp.control_dim);
  dp.leaf_weight = Eigen::VectorXd::Zero(dp.leaf_dim);
  dp.gamma = Eigen::MatrixXd::Zero(dp.leaf_dim, dp.control_dim);
  dp.rhs = Eigen::VectorXd::Zero(dp.leaf_dim);

  for (int k = 0; k < tree.steps(); ++k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      const double w = tree.node(id).prob * dt;
      const int uoff = dp.control_offset[i];
      dp.control_weight.segment(uoff, m).setConstant(w);
      dp.hessian.block(uoff, uoff, m, m) += w * data.R[i];
      if (data.Q[i].cwiseAbs().maxCoeff() > 0.0) {
        const Eigen::VectorXd Fx = F[i] * data.x0;
        dp.hessian += w * (Gm[i].transpose() * data.Q[i] * Gm[i]);
        dp.linear += w * (Gm[i].transpose() * (data.Q[i] * Fx));
        dp.constant += 0.5 * w * Fx.dot(data.Q[i] * Fx);
      }
    }
  }
  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    const double w = tree.node(id).prob;
    const int loff = dp.leaf_offset[i];
    dp.leaf_weight.segment(loff, l).setConstant(w);
    const Eigen::VectorXd Fx = F[i] * data.x0;
    if (data.G[i].cwiseAbs().maxCoeff() > 0.0) {
      dp.hessian += w * (Gm[i].transpose() * data.G[i] * Gm[i]);
      dp.linear += w * (Gm[i].transpose() * (data.G[i] * Fx));
      dp.constant += 0.5 * w * Fx.dot(data.G[i] * Fx);
    }
    dp.gamma.middleRows(loff, l) = data.M[i] * Gm[i];
    dp.rhs.segment(loff, l) = data.b[i] - data.M[i] * Fx;
  }
  dp.hessian = 0.5 * (dp.hessian + dp.hessian.transpose()).eval();

  // Self-check: the flat quadratic form must reproduce cost() and
  // constraint_residual() on random controls.
  detail::Rng rng(0x5eedULL + static_cast<std::uint64_t>(dp.control_dim));
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd z = rng.uniform_vector(dp.control_dim);
    const NodeVectors u = dp.unflatten_control(tree, m, z);
    const NodeVectors X = simulate_forward(tree, data, data.x0, u);
    const double direct = cost(tree, data, X, u);
    const double viaflat = 0.5 * z.dot(dp.hessian * z) + dp.linear.dot(z) + dp.constant;
    if (std::abs(direct - viaflat) > 1e-12 * (1.0 + std::abs(direct)))
      throw Error("assemble_dense: Hessian self-check failed");
    const Eigen::VectorXd res_flat =
        dp.gamma * z - dp.rhs;  // = M X^{x,u}(T) - b stacked
    const NodeVectors res = constraint_residual(tree, data, X);
    const double rerr = (res_flat - dp.flatten_leaf(tree, res)).cwiseAbs().maxCoeff();
    if (rerr > 1e-12 * (1.0 + res_flat.cwiseAbs().maxCoeff()))
      throw Error("assemble_dense: constraint-map self-check failed");
  }
  return dp;
}

double uniform_convexity_delta(const ScenarioTree& tree, const ProblemData& data) {
  // J0 and J share the Hessian; assemble on the homogeneous problem (x0 = 0
  // only changes linear/constant parts, so reuse the full assembly).
  const DenseProblem dp = assemble_dense(tree, data);
  const Eigen::VectorXd winv_sqrt = dp.control_weight.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd Hw =
      winv_sqrt.asDiagonal() * dp.hessian * winv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (Hw + Hw.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

SurjectivityCertificate surjectivity_certificate(const ScenarioTree& tree,
                                                 const ProblemData& data, double tol) {
  return surjectivity_certificate(tree, data, assemble_dense(tree, data), tol);
}

SurjectivityCertificate surjectivity_certificate(const ScenarioTree& tree,
                                                 const ProblemData& data,
                                                 const DenseProblem& dense,
                                                 double tol) {
  SurjectivityCertificate cert;
  cert.rows = dense.leaf_dim;
  cert.cols = dense.control_dim;
  // Weighted adjoint in orthonormal coordinates: A* = W_u^{-1/2} Gamma^T W_l^{1/2}.
  const Eigen::VectorXd wu_inv_sqrt = dense.control_weight.cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd wl_sqrt = dense.leaf_weight.cwiseSqrt();
  const Eigen::MatrixXd Astar =
      wu_inv_sqrt.asDiagonal() * dense.gamma.transpose() * wl_sqrt.asDiagonal();
  if (Astar.rows() < Astar.cols()) {
    // more terminal constraints than flat controls: the adjoint has a kernel
    cert.sigma_min = 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Astar, Eigen::ComputeFullV);
    const Eigen::VectorXd v = svd.matrixV().col(Astar.cols() - 1);
    cert.minimizing_multiplier =
        dense.unflatten_leaf(tree, data.constraint_dim,
                             Eigen::VectorXd(v.cwiseQuotient(wl_sqrt)));
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Astar, Eigen::ComputeThinV);
    cert.sigma_min = svd.singularValues()(Astar.cols() - 1);
    const Eigen::VectorXd v = svd.matrixV().col(Astar.cols() - 1);
    cert.minimizing_multiplier =
        dense.unflatten_leaf(tree, data.constraint_dim,
                             Eigen::VectorXd(v.cwiseQuotient(wl_sqrt)));
  }
  cert.c_hat = cert.sigma_min * cert.sigma_min;
  cert.surjective = cert.sigma_min > tol;
  return cert;
}

KktSolution kkt_solve(const ScenarioTree& tree, const ProblemData& data) {
  return kkt_solve(tree, data, assemble_dense(tree, data));
}

KktSolution kkt_solve(const ScenarioTree& tree, const ProblemData& data,
                      const DenseProblem& dense) {
  const int nu = dense.control_dim, nl = dense.leaf_dim;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nu + nl, nu + nl);
  kkt.topLeftCorner(nu, nu) = dense.hessian;
  kkt.topRightCorner(nu, nl) = dense.gamma.transpose() * dense.leaf_weight.asDiagonal();
  kkt.bottomLeftCorner(nl, nu) = kkt.topRightCorner(nu, nl).transpose();
  Eigen::VectorXd rhs(nu + nl);
  rhs.head(nu) = -dense.linear;
  rhs.tail(nl) = dense.leaf_weight.asDiagonal() * dense.rhs;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
  Eigen::VectorXd sol = lu.solve(rhs);
  sol += lu.solve(rhs - kkt * sol);  // one refinement step
  const double resid = (kkt * sol - rhs).norm() / (1.0 + rhs.norm());
  if (!sol.allFinite() || resid > 1e-8) {
    // Diagnose which precondition failed before reporting the singular solve.
    const SurjectivityCertificate cert = surjectivity_certificate(tree, data, dense);
    const double delta = uniform_convexity_delta(tree, data);
    throw Error("kkt_solve: saddle system is singular (surjective=" +
                std::string(cert.surjective ? "true" : "false") +
                ", sigma_min=" + std::to_string(cert.sigma_min) +
                ", delta_hat=" + std::to_string(delta) + ")");
  }

  KktSolution out;
  out.kkt_residual = resid;
  out.control = dense.unflatten_control(tree, data.control_dim, sol.head(nu));
  out.multiplier = dense.unflatten_leaf(tree, data.constraint_dim, sol.tail(nl));
  const NodeVectors X = simulate_forward(tree, data, data.x0, out.control);
  out.feasibility = residual_norm(tree, data, X);
  out.cost_value = cost(tree, data, X, out.control);
  return out;
}

GapReport duality_gap(const ScenarioTree& tree, const ProblemData& data,
                      const NodeVectors& u, const NodeVectors& lambda,
                      double feasibility_tol) {
  GapReport rep;
  const NodeVectors X = simulate_forward(tree, data, data.x0, u);
  rep.cost_value = cost(tree, data, X, u);
  rep.feasibility_residual = residual_norm(tree, data, X);
  rep.feasible = rep.feasibility_residual <= feasibility_tol;
  rep.dual = dual_value(tree, data, lambda);
  rep.gap = rep.cost_value - rep.dual;
  return rep;
}

MinNormSolution min_norm_control(const ScenarioTree& tree, const ProblemData& data,
                                 const Eigen::VectorXd& x0, const NodeVectors& target) {
  ProblemData view = norm_optimal_view(tree, data);
  view.x0 = x0;
  for (int id : tree.leaves()) view.b[static_cast<size_t>(id)] = target[static_cast<size_t>(id)];

  const DenseProblem dp = assemble_dense(tree, view);
  const SurjectivityCertificate cert = surjectivity_certificate(tree, view, dp);
  if (!cert.surjective)
    throw Error("min_norm_control: constraint map is not surjective (sigma_min=" +
                std::to_string(cert.sigma_min) + ")");

  // Dual normal equations in weighted coordinates: S = A A^T with
  // A = W_l^{1/2} Gamma W_u^{-1/2}; S lam_t = -W_l^{1/2} beta.
  const Eigen::VectorXd wu_inv_sqrt = dp.control_weight.cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd wl_sqrt = dp.leaf_weight.cwiseSqrt();
  const Eigen::MatrixXd A =
      wl_sqrt.asDiagonal() * dp.gamma * wu_inv_sqrt.asDiagonal();
  const Eigen::MatrixXd S = A * A.transpose();
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw Error("min_norm_control: normal equations not positive definite");
  const Eigen::VectorXd weighted_rhs = -(wl_sqrt.asDiagonal() * dp.rhs);
  const Eigen::VectorXd lam_t = llt.solve(weighted_rhs);

  MinNormSolution out;
  out.multiplier = dp.unflatten_leaf(tree, data.constraint_dim,
                                     Eigen::VectorXd(lam_t.cwiseQuotient(wl_sqrt)));

  // Control via the recursion route: plain adjoint (zero Riccati on the
  // norm-optimal view), u = -(coupling / dt) = -(B^T phibar + D^T psi).
  const RiccatiSolution ric = riccati_backward(tree, view, 0.0);
  const AdjointPair adj = adjoint_backward(tree, view, ric, out.multiplier, 0.0);
  out.control.resize(static_cast<size_t>(tree.node_count()));
  const double dt = tree.dt();
  for (int k = 0; k < tree.steps(); ++k)
    for (int id : tree.level(k))
      out.control[static_cast<size_t>(id)] =
          -adj.coupling[static_cast<size_t>(id)] / dt;

  const NodeVectors X = simulate_forward(tree, view, x0, out.control);
  double err = 0.0;
  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    err = std::max(err, (view.M[i] * X[i] - target[i]).cwiseAbs().maxCoeff());
  }
  out.target_error = err;
  out.norm = l2_norm(tree, out.control);
  return out;
}

}  // namespace cslq
