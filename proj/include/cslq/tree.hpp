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

#include "cslq/common.hpp"

namespace cslq {

struct TimeGrid {
  double horizon = 0.0;  // T
  int steps = 0;         // N
  // dt derived, never stored, so dt*N == T holds exactly
  double dt() const { return horizon / steps; }
};

struct TreeNode {
  int id = 0;
  int depth = 0;
  int parent = -1;                 // -1 at the root
  std::vector<int> children;       // empty at leaves
  double increment = 0.0;          // Wiener increment on the edge from parent
  double prob = 1.0;               // path probability
};

/// Finite binary model of the Brownian filtration. Level k holds the atoms of
/// F_{t_k}; edges carry moment-matched increments (+-sqrt(dt), prob 1/2 each).
/// Immutable after build(); node ids are breadth-first and deterministic.
class ScenarioTree {
 public:
  static ScenarioTree build(double horizon, int steps, int branching = 2);

  const TimeGrid& grid() const { return grid_; }
  double dt() const { return grid_.dt(); }
  int steps() const { return grid_.steps; }
  int branching() const { return branching_; }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  bool is_leaf(int id) const { return nodes_[static_cast<size_t>(id)].depth == grid_.steps; }

  const std::vector<int>& level(int depth) const { return levels_[static_cast<size_t>(depth)]; }
  const std::vector<int>& leaves() const { return levels_.back(); }
  int leaf_count() const { return static_cast<int>(leaves().size()); }
  int non_leaf_count() const { return node_count() - leaf_count(); }

 private:
  TimeGrid grid_;
  int branching_ = 2;
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<int>> levels_;
};

/// Discrete E[. | F_k]: y defined on level child_level, result on child_level-1.
/// Weights are child path probability over parent path probability.
template <class Value>
std::vector<Value> conditional_expectation(const ScenarioTree& tree,
                                           const std::vector<Value>& y,
                                           int child_level) {
  if (child_level < 1 || child_level > tree.steps())
    throw Error("conditional_expectation: level out of range");
  if (y.size() != static_cast<size_t>(tree.node_count()))
    throw Error("conditional_expectation: process not node-indexed");
  for (int id : tree.level(child_level))
    if (y[static_cast<size_t>(id)].size() == 0)
      throw Error("conditional_expectation: process undefined at level " +
                  std::to_string(child_level));
  std::vector<Value> out(static_cast<size_t>(tree.node_count()));
  for (int id : tree.level(child_level - 1)) {
    const TreeNode& nd = tree.node(id);
    Value acc = Value::Zero(y[static_cast<size_t>(nd.children[0])].rows(),
                            y[static_cast<size_t>(nd.children[0])].cols());
    for (int c : nd.children)
      acc += (tree.node(c).prob / nd.prob) * y[static_cast<size_t>(c)];
    out[static_cast<size_t>(id)] = acc;
  }
  return out;
}

/// Weighted L2 pairing of adapted processes on non-leaf nodes:
/// sum over non-leaf nodes of prob * dt * <u, v>. Discrete E int_0^T <u,v> dt.
double l2_inner(const ScenarioTree& tree, const NodeVectors& u, const NodeVectors& v);
double l2_norm(const ScenarioTree& tree, const NodeVectors& u);

/// Terminal pairing: sum over leaves of prob * <a, b>. Discrete E<a, b>.
double leaf_inner(const ScenarioTree& tree, const NodeVectors& a, const NodeVectors& b);
double leaf_norm(const ScenarioTree& tree, const NodeVectors& a);

/// Plain expectation of a leaf-indexed scalar or vector process.
Eigen::VectorXd leaf_expectation(const ScenarioTree& tree, const NodeVectors& a);

}  // namespace cslq
