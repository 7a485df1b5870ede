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

/// Rank tests for surjectivity of u |-> M X^{x,u}(T) with deterministic,
/// time-invariant coefficient matrices. These certify the continuous-time
/// map; see the tests for how they relate to the tree certificate.

struct MdRankResult {
  int rank = 0;
  bool ok = false;  // m >= l and rank(MD) == l
};
/// Necessary condition: rank via SVD with tolerance 1e-10 * sigma_max.
MdRankResult check_md_rank(const Eigen::MatrixXd& M, const Eigen::MatrixXd& D);

/// The substitution u = K1 (Mz; v) + K2 X that normalizes the constraint's
/// diffusion channel:
///   M D K1 = [I_l | 0],  M D K2 = -M C,
///   A1 = A + B K2,  A2 = B K1a M,  B1 = B K1b,
/// with K1 = [K1a | K1b] split l | (m - l); K1a is the pseudoinverse of MD,
/// K1b an orthonormal basis of ker(MD), and K2's kernel component is zero.
struct ReducedSystem {
  Eigen::MatrixXd K1;  // m x m
  Eigen::MatrixXd K2;  // m x n
  Eigen::MatrixXd A1;  // n x n
  Eigen::MatrixXd A2;  // n x n
  Eigen::MatrixXd B1;  // n x (m - l)
  int md_rank = 0;
};
ReducedSystem build_reduced_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                   const Eigen::MatrixXd& M);
/// Same with a caller-supplied kernel basis (columns spanning ker(MD));
/// the word rank must be invariant under this choice.
ReducedSystem build_reduced_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                   const Eigen::MatrixXd& M,
                                   const Eigen::MatrixXd& kernel_basis);

struct RankVerdict {
  bool md_ok = false;
  int word_rank = 0;
  std::vector<int> span_history;  // basis dimension per growth step
  bool sufficient = false;        // md_ok and word_rank == n
  std::string note;
};

/// Dimension of the smallest A1-, A2-invariant subspace containing the
/// columns of B1 (the span of all words in {A1, A2} applied to B1), computed
/// as a fixpoint: S_0 = colspan(B1), S_{j+1} = S_j + A1 S_j + A2 S_j.
/// Equivalent to the full word enumeration and stabilizes in at most n steps.
/// md_ok is not evaluated here and defaults to true.
RankVerdict word_rank(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2,
                      const Eigen::MatrixXd& B1, int n);

/// Combined verdict. sufficient = true certifies surjectivity of the
/// continuous-time map; the note distinguishes a failed necessary condition
/// (definitely not surjective) from a failed sufficient condition
/// (inconclusive).
RankVerdict surjectivity_verdict(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                 const Eigen::MatrixXd& M);

}  // namespace cslq
