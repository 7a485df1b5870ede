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
#include "cslq/controllability.hpp"

namespace cslq {

namespace {

// Columns of an orthonormal basis of the column span, SVD rank with
// tolerance 1e-10 * sigma_max.
Eigen::MatrixXd column_basis(const Eigen::MatrixXd& X) {
  if (X.cols() == 0 || X.rows() == 0) return Eigen::MatrixXd(X.rows(), 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return Eigen::MatrixXd(X.rows(), 0);
  int r = 0;
  while (r < s.size() && s(r) > 1e-10 * s(0)) ++r;
  return svd.matrixU().leftCols(r);
}

}  // namespace

MdRankResult check_md_rank(const Eigen::MatrixXd& M, const Eigen::MatrixXd& D) {
  const int l = static_cast<int>(M.rows());
  const int m = static_cast<int>(D.cols());
  if (M.cols() != D.rows()) throw Error("check_md_rank: M and D dimension mismatch");
  const Eigen::MatrixXd MD = M * D;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(MD);
  const auto& s = svd.singularValues();
  int rank = 0;
  if (s.size() > 0 && s(0) > 0.0)
    while (rank < s.size() && s(rank) > 1e-10 * s(0)) ++rank;
  return MdRankResult{rank, m >= l && rank == l};
}

ReducedSystem build_reduced_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                   const Eigen::MatrixXd& M) {
  const Eigen::MatrixXd MD = M * D;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(MD, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int rank = 0;
  if (s.size() > 0 && s(0) > 0.0)
    while (rank < s.size() && s(rank) > 1e-10 * s(0)) ++rank;
  // orthonormal kernel basis from the trailing right singular vectors
  const Eigen::MatrixXd kernel = svd.matrixV().rightCols(D.cols() - rank);
  return build_reduced_system(A, B, C, D, M, kernel);
}

ReducedSystem build_reduced_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                   const Eigen::MatrixXd& M,
                                   const Eigen::MatrixXd& kernel_basis) {
  const MdRankResult md = check_md_rank(M, D);
  const int l = static_cast<int>(M.rows());
  const int m = static_cast<int>(D.cols());
  if (!md.ok)
    throw Error("build_reduced_system: rank(MD) = " + std::to_string(md.rank) +
                " < " + std::to_string(l));
  if (kernel_basis.rows() != m || kernel_basis.cols() != m - l)
    throw Error("build_reduced_system: kernel basis must be m x (m-l)");

  const Eigen::MatrixXd MD = M * D;
  const Eigen::MatrixXd MD_pinv =
      MD.completeOrthogonalDecomposition().pseudoInverse();  // m x l

  ReducedSystem red;
  red.md_rank = md.rank;
  red.K1.resize(m, m);
  red.K1.leftCols(l) = MD_pinv;
  if (m > l) red.K1.rightCols(m - l) = kernel_basis;
  red.K2 = -MD_pinv * (M * C);
  red.A1 = A + B * red.K2;
  red.A2 = B * MD_pinv * M;
  red.B1 = (m > l) ? Eigen::MatrixXd(B * kernel_basis)
                   : Eigen::MatrixXd(B.rows(), 0);
  return red;
}

RankVerdict word_rank(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2,
                      const Eigen::MatrixXd& B1, int n) {
  RankVerdict v;
  v.md_ok = true;  // not evaluated by this operation
  Eigen::MatrixXd basis = column_basis(B1);
  v.span_history.push_back(static_cast<int>(basis.cols()));
  while (basis.cols() > 0) {
    Eigen::MatrixXd cand(basis.rows(), 3 * basis.cols());
    cand << basis, A1 * basis, A2 * basis;
    Eigen::MatrixXd grown = column_basis(cand);
    v.span_history.push_back(static_cast<int>(grown.cols()));
    if (grown.cols() == basis.cols()) break;
    basis = grown;
  }
  v.word_rank = static_cast<int>(basis.cols());
  v.sufficient = v.word_rank == n;
  v.note = v.sufficient ? "word span reaches full state dimension"
                        : "word span stalls below the state dimension";
  return v;
}

RankVerdict surjectivity_verdict(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                 const Eigen::MatrixXd& M) {
  const MdRankResult md = check_md_rank(M, D);
  if (!md.ok) {
    RankVerdict v;
    v.md_ok = false;
    v.word_rank = 0;
    v.sufficient = false;
    v.note = "necessary condition failed: rank(MD) = " + std::to_string(md.rank) +
             " < " + std::to_string(M.rows()) +
             " (or m < l); the continuous-time map is not surjective";
    return v;
  }
  const ReducedSystem red = build_reduced_system(A, B, C, D, M);
  RankVerdict v = word_rank(red.A1, red.A2, red.B1, static_cast<int>(A.rows()));
  v.md_ok = true;
  if (v.sufficient) {
    v.note = "rank(MD) = l and full word rank: surjective";
  } else {
    v.note = "rank(MD) = l but word rank " + std::to_string(v.word_rank) + " < " +
             std::to_string(A.rows()) +
             ": inconclusive (the rank condition is only sufficient)";
  }
  return v;
}

}  // namespace cslq
