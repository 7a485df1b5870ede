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
#include "cslq/model.hpp"

#include <cmath>

namespace cslq {

namespace {

void expect_shape(const Eigen::MatrixXd& m, int rows, int cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols)
    throw Error(std::string("dimension mismatch in coefficient ") + name);
}

double symmetrize(Eigen::MatrixXd& m) {
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  m = 0.5 * (m + m.transpose()).eval();
  return asym;
}

}  // namespace

ProblemData make_constant_data(const ScenarioTree& tree,
                               const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                               const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                               const Eigen::MatrixXd& G, const Eigen::MatrixXd& M,
                               const Eigen::VectorXd& b, const Eigen::VectorXd& x0) {
  ProblemData data;
  data.state_dim = static_cast<int>(A.rows());
  data.control_dim = static_cast<int>(B.cols());
  data.constraint_dim = static_cast<int>(M.rows());
  const size_t total = static_cast<size_t>(tree.node_count());
  data.A.resize(total); data.B.resize(total); data.C.resize(total);
  data.D.resize(total); data.Q.resize(total); data.R.resize(total);
  data.G.resize(total); data.M.resize(total); data.b.resize(total);
  for (int k = 0; k < tree.steps(); ++k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      data.A[i] = A; data.B[i] = B; data.C[i] = C;
      data.D[i] = D; data.Q[i] = Q; data.R[i] = R;
    }
  }
  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    data.G[i] = G; data.M[i] = M; data.b[i] = b;
  }
  data.x0 = x0;
  normalize_data(tree, data);
  return data;
}

double normalize_data(const ScenarioTree& tree, ProblemData& data) {
  const int n = data.state_dim, m = data.control_dim, l = data.constraint_dim;
  if (n < 1 || m < 1 || l < 1) throw Error("dimensions must be positive");
  if (l > n) throw Error("constraint dimension exceeds state dimension");
  if (data.x0.size() != n) throw Error("x0 dimension mismatch");
  const size_t total = static_cast<size_t>(tree.node_count());
  for (auto* p : {&data.A, &data.B, &data.C, &data.D, &data.Q, &data.R,
                  &data.G, &data.M})
    if (p->size() != total) throw Error("coefficient process not node-indexed");
  if (data.b.size() != total) throw Error("b not node-indexed");

  double worst = 0.0;
  for (int k = 0; k < tree.steps(); ++k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      expect_shape(data.A[i], n, n, "A");
      expect_shape(data.C[i], n, n, "C");
      expect_shape(data.B[i], n, m, "B");
      expect_shape(data.D[i], n, m, "D");
      expect_shape(data.Q[i], n, n, "Q");
      expect_shape(data.R[i], m, m, "R");
      worst = std::max(worst, symmetrize(data.Q[i]));
      worst = std::max(worst, symmetrize(data.R[i]));
    }
  }
  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    expect_shape(data.G[i], n, n, "G");
    expect_shape(data.M[i], l, n, "M");
    if (data.b[i].size() != l) throw Error("b dimension mismatch");
    worst = std::max(worst, symmetrize(data.G[i]));
  }
  return worst;
}

ProblemData norm_optimal_view(const ScenarioTree& tree, const ProblemData& data) {
  ProblemData view = data;
  const Eigen::MatrixXd Zn = Eigen::MatrixXd::Zero(data.state_dim, data.state_dim);
  const Eigen::MatrixXd Im = Eigen::MatrixXd::Identity(data.control_dim, data.control_dim);
  for (int k = 0; k < tree.steps(); ++k) {
    for (int id : tree.level(k)) {
      view.Q[static_cast<size_t>(id)] = Zn;
      view.R[static_cast<size_t>(id)] = Im;
    }
  }
  for (int id : tree.leaves()) view.G[static_cast<size_t>(id)] = Zn;
  return view;
}

ProblemData with_terminal_penalty(const ScenarioTree& tree, const ProblemData& data,
                                  double rho) {
  ProblemData out = data;
  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    out.G[i] = data.G[i] + rho * (data.M[i].transpose() * data.M[i]);
  }
  return out;
}

Transition transition(const ScenarioTree& tree, const ProblemData& data, int child) {
  const TreeNode& ch = tree.node(child);
  if (ch.parent < 0) throw Error("transition: root has no incoming edge");
  const size_t p = static_cast<size_t>(ch.parent);
  const double dt = tree.dt();
  Transition tr;
  tr.T = Eigen::MatrixXd::Identity(data.state_dim, data.state_dim) +
         data.A[p] * dt + data.C[p] * ch.increment;
  tr.S = data.B[p] * dt + data.D[p] * ch.increment;
  return tr;
}

NodeVectors simulate_forward(const ScenarioTree& tree, const ProblemData& data,
                             const Eigen::VectorXd& x0, const NodeVectors& u) {
  if (x0.size() != data.state_dim) throw Error("simulate_forward: x0 dimension mismatch");
  if (u.size() != static_cast<size_t>(tree.node_count()))
    throw Error("simulate_forward: control not node-indexed");
  NodeVectors X(static_cast<size_t>(tree.node_count()));
  X[0] = x0;
  for (int k = 0; k < tree.steps(); ++k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      if (u[i].size() != data.control_dim)
        throw Error("simulate_forward: control dimension mismatch at node " +
                    std::to_string(id));
      for (int c : tree.node(id).children) {
        const Transition tr = transition(tree, data, c);
        X[static_cast<size_t>(c)] = tr.T * X[i] + tr.S * u[i];
      }
    }
  }
  return X;
}

double cost(const ScenarioTree& tree, const ProblemData& data,
            const NodeVectors& X, const NodeVectors& u) {
  const double dt = tree.dt();
  double acc = 0.0;
  for (int k = 0; k < tree.steps(); ++k) {
    for (int id : tree.level(k)) {
      const size_t i = static_cast<size_t>(id);
      if (X[i].size() != data.state_dim || u[i].size() != data.control_dim)
        throw Error("cost: dimension mismatch");
      acc += 0.5 * tree.node(id).prob * dt *
             (X[i].dot(data.Q[i] * X[i]) + u[i].dot(data.R[i] * u[i]));
    }
  }
  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    acc += 0.5 * tree.node(id).prob * X[i].dot(data.G[i] * X[i]);
  }
  return acc;
}

NodeVectors constraint_residual(const ScenarioTree& tree, const ProblemData& data,
                                const NodeVectors& X) {
  NodeVectors res(static_cast<size_t>(tree.node_count()));
  for (int id : tree.leaves()) {
    const size_t i = static_cast<size_t>(id);
    if (X[i].size() != data.state_dim) throw Error("constraint_residual: dimension mismatch");
    res[i] = data.M[i] * X[i] - data.b[i];
  }
  return res;
}

double residual_norm(const ScenarioTree& tree, const ProblemData& data,
                     const NodeVectors& X) {
  const NodeVectors res = constraint_residual(tree, data, X);
  return leaf_norm(tree, res);
}

double lagrangian(const ScenarioTree& tree, const ProblemData& data,
                  const NodeVectors& u, const NodeVectors& lambda) {
  const NodeVectors X = simulate_forward(tree, data, data.x0, u);
  const NodeVectors res = constraint_residual(tree, data, X);
  return cost(tree, data, X, u) + leaf_inner(tree, lambda, res);
}

double augmented_lagrangian(const ScenarioTree& tree, const ProblemData& data,
                            const NodeVectors& u, const NodeVectors& lambda,
                            double rho) {
  if (!(rho > 0.0)) throw Error("augmented_lagrangian: rho must be positive");
  const NodeVectors X = simulate_forward(tree, data, data.x0, u);
  const NodeVectors res = constraint_residual(tree, data, X);
  return cost(tree, data, X, u) + leaf_inner(tree, lambda, res) +
         0.5 * rho * leaf_inner(tree, res, res);
}

NodeVectors zero_control(const ScenarioTree& tree, const ProblemData& data) {
  NodeVectors u(static_cast<size_t>(tree.node_count()));
  for (int k = 0; k < tree.steps(); ++k)
    for (int id : tree.level(k))
      u[static_cast<size_t>(id)] = Eigen::VectorXd::Zero(data.control_dim);
  return u;
}

NodeVectors zero_multiplier(const ScenarioTree& tree, const ProblemData& data) {
  NodeVectors lam(static_cast<size_t>(tree.node_count()));
  for (int id : tree.leaves())
    lam[static_cast<size_t>(id)] = Eigen::VectorXd::Zero(data.constraint_dim);
  return lam;
}

}  // namespace cslq
