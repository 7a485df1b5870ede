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

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cslq {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Node-indexed process: one value per tree node, empty (0x0 / size 0)
/// on nodes where the process is not defined.
using NodeVectors = std::vector<Eigen::VectorXd>;
using NodeMatrices = std::vector<Eigen::MatrixXd>;

namespace detail {

/// Deterministic RNG with a portable uniform mapping. std::mt19937_64 output
/// is specified by the standard; the float mapping here avoids the
/// implementation-defined std::uniform_real_distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// uniform in [0, 1)
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// standard normal (Box-Muller)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::MatrixXd uniform_matrix(int rows, int cols, double lo = -1.0, double hi = 1.0) {
    Eigen::MatrixXd out(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) out(i, j) = uniform(lo, hi);
    return out;
  }

  Eigen::VectorXd uniform_vector(int size, double lo = -1.0, double hi = 1.0) {
    Eigen::VectorXd out(size);
    for (int i = 0; i < size; ++i) out(i) = uniform(lo, hi);
    return out;
  }

  Eigen::VectorXd normal_vector(int size) {
    Eigen::VectorXd out(size);
    for (int i = 0; i < size; ++i) out(i) = normal();
    return out;
  }

  std::uint64_t integer(std::uint64_t n) { return engine_() % n; }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace detail
}  // namespace cslq
