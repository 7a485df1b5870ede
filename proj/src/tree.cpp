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
#include "cslq/tree.hpp"

#include <cmath>

namespace cslq {

ScenarioTree ScenarioTree::build(double horizon, int steps, int branching) {
  if (!(horizon > 0.0)) throw Error("build_tree: horizon must be positive");
  if (steps < 1) throw Error("build_tree: steps must be >= 1");
  if (branching != 2)
    throw Error("build_tree: only branching = 2 is supported");

  ScenarioTree tree;
  tree.grid_ = TimeGrid{horizon, steps};
  tree.branching_ = branching;

  // Complete binary tree in breadth-first (heap) order: children of node v
  // are 2v+1 (increment +sqrt(dt)) and 2v+2 (increment -sqrt(dt)).
  const int total = (1 << (steps + 1)) - 1;
  tree.nodes_.resize(static_cast<size_t>(total));
  tree.levels_.resize(static_cast<size_t>(steps + 1));
  const double sq = std::sqrt(tree.grid_.dt());

  for (int v = 0; v < total; ++v) {
    TreeNode& nd = tree.nodes_[static_cast<size_t>(v)];
    nd.id = v;
    tree.levels_[static_cast<size_t>(nd.depth)].push_back(v);
    if (nd.depth == steps) continue;
    const int c1 = 2 * v + 1, c2 = 2 * v + 2;
    nd.children = {c1, c2};
    for (int c : nd.children) {
      TreeNode& ch = tree.nodes_[static_cast<size_t>(c)];
      ch.depth = nd.depth + 1;
      ch.parent = v;
      ch.increment = (c == c1) ? sq : -sq;
      ch.prob = nd.prob / 2.0;
    }
  }
  return tree;
}

namespace {

void check_pair(const ScenarioTree& tree, const NodeVectors& u, const NodeVectors& v,
                const char* who) {
  if (u.size() != static_cast<size_t>(tree.node_count()) ||
      v.size() != static_cast<size_t>(tree.node_count()))
    throw Error(std::string(who) + ": process not node-indexed");
}

}  // namespace

double l2_inner(const ScenarioTree& tree, const NodeVectors& u, const NodeVectors& v) {
  check_pair(tree, u, v, "l2_inner");
  const double dt = tree.dt();
  double acc = 0.0;
  for (int k = 0; k < tree.steps(); ++k) {
    for (int id : tree.level(k)) {
      const Eigen::VectorXd& a = u[static_cast<size_t>(id)];
      const Eigen::VectorXd& b = v[static_cast<size_t>(id)];
      if (a.size() == 0 || b.size() == 0)
        throw Error("l2_inner: process undefined on a non-leaf node");
      if (a.size() != b.size()) throw Error("l2_inner: shape mismatch");
      acc += tree.node(id).prob * dt * a.dot(b);
    }
  }
  return acc;
}

double l2_norm(const ScenarioTree& tree, const NodeVectors& u) {
  return std::sqrt(l2_inner(tree, u, u));
}

double leaf_inner(const ScenarioTree& tree, const NodeVectors& a, const NodeVectors& b) {
  check_pair(tree, a, b, "leaf_inner");
  double acc = 0.0;
  for (int id : tree.leaves()) {
    const Eigen::VectorXd& x = a[static_cast<size_t>(id)];
    const Eigen::VectorXd& y = b[static_cast<size_t>(id)];
    if (x.size() == 0 || y.size() == 0)
      throw Error("leaf_inner: process undefined on a leaf");
    if (x.size() != y.size()) throw Error("leaf_inner: shape mismatch");
    acc += tree.node(id).prob * x.dot(y);
  }
  return acc;
}

double leaf_norm(const ScenarioTree& tree, const NodeVectors& a) {
  return std::sqrt(leaf_inner(tree, a, a));
}

Eigen::VectorXd leaf_expectation(const ScenarioTree& tree, const NodeVectors& a) {
  if (a.size() != static_cast<size_t>(tree.node_count()))
    throw Error("leaf_expectation: process not node-indexed");
  const int first = tree.leaves().front();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(a[static_cast<size_t>(first)].size());
  for (int id : tree.leaves()) acc += tree.node(id).prob * a[static_cast<size_t>(id)];
  return acc;
}

}  // namespace cslq
