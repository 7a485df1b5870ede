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
#include "cslq/riccati.hpp"

#include <cmath>
#include <limits>

namespace cslq {

Eigen::MatrixXd RiccatiSolution::gain_solve(int node, const Eigen::MatrixXd& rhs) const {
  return K_llt_[static_cast<size_t>(node)].solve(rhs);
}

Eigen::VectorXd RiccatiSolution::gain_solve(int node, const Eigen::VectorXd& rhs) const {
  return K_llt_[static_cast<size_t>(node)].solve(rhs);
}

RiccatiSolution riccati_backward(const ScenarioTree& tree, const ProblemData& data,
                                 double rho) {
  if (rho < 0.0) throw Error("riccati_backward: rho must be nonnegative");
  const int n = data.state_dim, m = data.control_dim;
  const double dt = tree.dt();
  const size_t total = static_cast<size_t>(tree.node_count());

  RiccatiSolution ric;
  ric.rho = rho;
  ric.P.resize(total);
  ric.K.resize(total);
  ric.L.resize(total);
  ric.K_llt_.resize(total);
  ric.min_gain_eigenvalue = std::numeric_limits<double>::infinity();

  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    ric.P[i] = data.G[i] + rho * (data.M[i].transpose() * data.M[i]);
  }

  for (int k = tree.steps() - 1; k >= 0; --k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      Eigen::MatrixXd K = dt * data.R[i];
      Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, n);
      Eigen::MatrixXd P = dt * data.Q[i];
      for (int c : tree.node(id).children) {
        const double w = tree.node(c).prob / tree.node(id).prob;
        const Transition tr = transition(tree, data, c);
        const Eigen::MatrixXd PS = ric.P[static_cast<size_t>(c)] * tr.S;
        const Eigen::MatrixXd PT = ric.P[static_cast<size_t>(c)] * tr.T;
        K += w * (tr.S.transpose() * PS);
        L += w * (tr.S.transpose() * PT);
        P += w * (tr.T.transpose() * PT);
      }
      K = 0.5 * (K + K.transpose()).eval();

      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
      const double kmin = es.eigenvalues().minCoeff();
      if (kmin < ric.min_gain_eigenvalue) {
        ric.min_gain_eigenvalue = kmin;
        ric.min_gain_node = id;
      }
      Eigen::LLT<Eigen::MatrixXd> llt(K);
      if (kmin <= 0.0 || llt.info() != Eigen::Success)
        throw Error("subproblem not uniformly convex at node " + std::to_string(id) +
                    " (min eigenvalue of K = " + std::to_string(kmin) + ")");

      const Eigen::MatrixXd KinvL = llt.solve(L);
      ric.max_feedback_norm =
          std::max(ric.max_feedback_norm, KinvL.jacobiSvd().singularValues()(0));
      P -= L.transpose() * KinvL;
      ric.P[i] = 0.5 * (P + P.transpose()).eval();
      ric.K[i] = K;
      ric.L[i] = L;
      ric.K_llt_[i] = std::move(llt);
    }
  }
  return ric;
}

AdjointPair adjoint_backward(const ScenarioTree& tree, const ProblemData& data,
                             const RiccatiSolution& ric, const NodeVectors& lambda,
                             double rho) {
  if (ric.rho != rho)
    throw Error("adjoint_backward: rho does not match the Riccati solution");
  const size_t total = static_cast<size_t>(tree.node_count());
  AdjointPair adj;
  adj.rho = rho;
  adj.phi.resize(total);
  adj.psi.resize(total);
  adj.coupling.resize(total);
  adj.offset.assign(total, 0.0);

  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    if (lambda[i].size() != data.constraint_dim)
      throw Error("adjoint_backward: multiplier dimension mismatch");
    adj.phi[i] = data.M[i].transpose() * (lambda[i] - rho * data.b[i]);
    adj.offset[i] = 0.5 * rho * data.b[i].squaredNorm() - lambda[i].dot(data.b[i]);
  }

  for (int k = tree.steps() - 1; k >= 0; --k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      Eigen::VectorXd h = Eigen::VectorXd::Zero(data.control_dim);
      Eigen::VectorXd tphi = Eigen::VectorXd::Zero(data.state_dim);
      Eigen::VectorXd phibar = Eigen::VectorXd::Zero(data.state_dim);
      double off = 0.0;
      for (int c : tree.node(id).children) {
        const double w = tree.node(c).prob / tree.node(id).prob;
        const size_t ci = static_cast<size_t>(c);
        const Transition tr = transition(tree, data, c);
        h += w * (tr.S.transpose() * adj.phi[ci]);
        tphi += w * (tr.T.transpose() * adj.phi[ci]);
        phibar += w * adj.phi[ci];
        off += w * adj.offset[ci];
      }
      const Eigen::VectorXd Kinv_h = ric.gain_solve(id, h);
      adj.phi[i] = tphi - ric.L[i].transpose() * Kinv_h;
      adj.offset[i] = off - 0.5 * h.dot(Kinv_h);
      adj.coupling[i] = h;
      for (int c : tree.node(id).children) {
        const size_t ci = static_cast<size_t>(c);
        adj.psi[ci] = (adj.phi[ci] - phibar) / tree.node(c).increment;
      }
    }
  }
  return adj;
}

FeedbackSolution feedback_control(const ScenarioTree& tree, const ProblemData& data,
                                  const RiccatiSolution& ric, const AdjointPair& adj) {
  if (ric.rho != adj.rho)
    throw Error("feedback_control: Riccati and adjoint rho mismatch");
  FeedbackSolution sol;
  sol.control.resize(static_cast<size_t>(tree.node_count()));
  sol.state.resize(static_cast<size_t>(tree.node_count()));
  sol.state[0] = data.x0;
  for (int k = 0; k < tree.steps(); ++k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      sol.control[i] = -ric.gain_solve(
          id, Eigen::VectorXd(ric.L[i] * sol.state[i] + adj.coupling[i]));
      for (int c : tree.node(id).children) {
        const Transition tr = transition(tree, data, c);
        sol.state[static_cast<size_t>(c)] = tr.T * sol.state[i] + tr.S * sol.control[i];
      }
    }
  }
  return sol;
}

FeedbackSolution solve_subproblem(const ScenarioTree& tree, const ProblemData& data,
                                  const NodeVectors& lambda, double rho) {
  const RiccatiSolution ric = riccati_backward(tree, data, rho);
  const AdjointPair adj = adjoint_backward(tree, data, ric, lambda, rho);
  return feedback_control(tree, data, ric, adj);
}

double dual_value(const ScenarioTree& tree, const ProblemData& data,
                  const NodeVectors& lambda) {
  const RiccatiSolution ric = riccati_backward(tree, data, 0.0);
  const AdjointPair adj = adjoint_backward(tree, data, ric, lambda, 0.0);
  const double closed =
      0.5 * data.x0.dot(ric.P[0] * data.x0) + adj.phi[0].dot(data.x0) + adj.offset[0];

  const FeedbackSolution sol = feedback_control(tree, data, ric, adj);
  const double direct = lagrangian(tree, data, sol.control, lambda);
  if (std::abs(closed - direct) > 1e-10 * (1.0 + std::abs(closed)))
    throw Error("dual_value: closed form and direct evaluation disagree (" +
                std::to_string(closed) + " vs " + std::to_string(direct) + ")");
  return closed;
}

}  // namespace cslq
