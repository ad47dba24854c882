#include "perstd/numerics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace perstd {

namespace {

Vector singular_values(const Matrix& m) {
  if (!m.allFinite()) {
    throw std::runtime_error("SVD failed: matrix has non-finite entries");
  }
  if (m.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues();
}

Index count_above(const Vector& sv, double tol) {
  if (sv.size() == 0 || sv[0] <= 0.0) return 0;
  const double cut = tol * sv[0];
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cut) ++r;
  }
  return r;
}

// True if every `size`-subset of columns has full rank.
bool all_subsets_independent(const Matrix& m, Index size, double tol) {
  const Index n = m.cols();
  std::vector<Index> idx(size);
  for (Index i = 0; i < size; ++i) idx[i] = i;
  Matrix sub(m.rows(), size);
  while (true) {
    for (Index i = 0; i < size; ++i) sub.col(i) = m.col(idx[i]);
    if (count_above(singular_values(sub), tol) < size) return false;
    Index p = size - 1;
    while (p >= 0 && idx[p] == n - size + p) --p;
    if (p < 0) return true;
    ++idx[p];
    for (Index i = p + 1; i < size; ++i) idx[i] = idx[i - 1] + 1;
  }
}

}  // namespace

Matrix pinv(const Matrix& m, double tol) {
  if (!m.allFinite()) {
    throw std::runtime_error("SVD failed: matrix has non-finite entries");
  }
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Index r = count_above(sv, tol);
  if (r == 0) return Matrix::Zero(m.cols(), m.rows());
  return svd.matrixV().leftCols(r) *
         sv.head(r).cwiseInverse().asDiagonal() *
         svd.matrixU().leftCols(r).transpose();
}

Index numeric_rank(const Matrix& m, double tol) {
  return count_above(singular_values(m), tol);
}

bool has_zero_column(const Matrix& m, double tol) {
  for (Index j = 0; j < m.cols(); ++j) {
    if (m.col(j).norm() <= tol) return true;
  }
  return false;
}

Index kruskal_rank(const Matrix& m, double tol) {
  if (m.cols() > kKruskalMaxColumns) {
    throw std::invalid_argument(
        "kruskal_rank: " + std::to_string(m.cols()) +
        " columns exceeds the exhaustive limit of " +
        std::to_string(kKruskalMaxColumns));
  }
  const Index full = numeric_rank(m, tol);
  if (full == m.cols()) return full;
  // kr <= rank; find the first subset size that admits a dependent subset.
  for (Index size = 1; size <= full; ++size) {
    if (!all_subsets_independent(m, size, tol)) return size - 1;
  }
  return full;
}

SylvesterSolution solve_generalized_sylvester(const SylvesterSystem& s) {
  if (s.terms.empty()) {
    throw std::invalid_argument("generalized Sylvester system has no terms");
  }
  const Index r = s.terms.front().a.rows();
  const Index m = s.terms.front().b.rows();
  for (const auto& t : s.terms) {
    if (t.a.rows() != r || t.a.cols() != r || t.b.rows() != m ||
        t.b.cols() != m) {
      throw std::invalid_argument(
          "generalized Sylvester terms must be square with equal sizes");
    }
  }
  if (s.rhs.rows() != r || s.rhs.cols() != m) {
    throw std::invalid_argument("generalized Sylvester rhs is not conformal");
  }

  const Index n = r * m;
  Matrix op = Matrix::Zero(n, n);
  for (const auto& t : s.terms) {
    // Block (p, q) of b^T kron a is b(q, p) * a.
    for (Index q = 0; q < m; ++q)
      for (Index p = 0; p < m; ++p)
        op.block(p * r, q * r, r, r) += t.b(q, p) * t.a;
  }
  if (!op.allFinite() || !s.rhs.allFinite()) {
    throw std::runtime_error("generalized Sylvester system is not finite");
  }
  const Eigen::Map<const Vector> rhs(s.rhs.data(), n);

  SylvesterSolution out;
  // The ALS normal equations give a symmetric positive definite operator;
  // Cholesky is then cheaper and its pivots bound the conditioning directly.
  // Anything else goes through the LU path below.
  if (n > 0 && (op - op.transpose()).cwiseAbs().maxCoeff() <=
                   1e-12 * op.cwiseAbs().maxCoeff()) {
    const Eigen::LLT<Matrix> llt(op);
    if (llt.info() == Eigen::Success) {
      const Vector d = llt.matrixLLT().diagonal();
      const double ratio = d.minCoeff() / d.maxCoeff();
      if (ratio * ratio > 1e-13) {
        const Vector x = llt.solve(rhs);
        if (x.allFinite()) {
          out.x = Eigen::Map<const Matrix>(x.data(), r, m);
          return out;
        }
      }
    }
  }
  Eigen::PartialPivLU<Matrix> lu(op);
  // The rcond estimator breaks down on exactly zero pivots (it can report 1),
  // so the pivot ratio is checked as well.
  auto conditioning = [](const Eigen::PartialPivLU<Matrix>& f) {
    const Vector piv = f.matrixLU().diagonal().cwiseAbs();
    const double ratio = piv.maxCoeff() > 0.0 ? piv.minCoeff() / piv.maxCoeff() : 0.0;
    return std::min(ratio, f.rcond());
  };
  constexpr double kMinRcond = 1e-13;
  if (n > 0 && !(conditioning(lu) > kMinRcond)) {
    const double scale = std::max(op.trace() / static_cast<double>(n),
                                  std::numeric_limits<double>::min());
    out.damped = true;
    out.damping = 1e-10 * scale;
    op.diagonal().array() += out.damping;
    lu.compute(op);
    if (!(conditioning(lu) > std::numeric_limits<double>::epsilon())) {
      throw std::runtime_error(
          "generalized Sylvester system is singular even after damping");
    }
  }
  Vector x = lu.solve(rhs);
  if (!x.allFinite()) {
    throw std::runtime_error("generalized Sylvester solve produced NaN/Inf");
  }
  out.x = Eigen::Map<const Matrix>(x.data(), r, m);
  return out;
}

AssignmentResult assign_fixed_cardinality(const Matrix& scores, Index r) {
  const Index rows = scores.rows(), cols = scores.cols();
  if (r < 0 || r > std::min(rows, cols)) {
    throw std::invalid_argument("assignment cardinality " + std::to_string(r) +
                                " exceeds matrix dimensions " +
                                std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
  if (!scores.allFinite()) {
    throw std::invalid_argument("assignment scores must be finite");
  }

  // Residual network: source -> free rows, row -> col (gain z), matched
  // col -> its row (gain -z), free col -> sink. Each round augments along a
  // maximum-gain path found by Bellman-Ford; SSP keeps every intermediate
  // matching optimal for its size, so no positive cycles appear.
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<Index> row_match(rows, -1), col_match(cols, -1);
  std::vector<double> row_gain(rows), col_gain(cols);
  std::vector<Index> col_from(cols);  // row preceding each column on the path
  std::vector<Index> row_from(rows);  // column preceding each row (-1: source)

  for (Index round = 0; round < r; ++round) {
    std::fill(col_gain.begin(), col_gain.end(), kNone);
    for (Index i = 0; i < rows; ++i) {
      row_gain[i] = row_match[i] < 0 ? 0.0 : kNone;
      row_from[i] = -1;
    }
    for (Index pass = 0; pass <= rows + cols; ++pass) {
      bool changed = false;
      for (Index i = 0; i < rows; ++i) {
        if (row_gain[i] == kNone) continue;
        for (Index j = 0; j < cols; ++j) {
          if (row_match[i] == j) continue;
          const double g = row_gain[i] + scores(i, j);
          if (g > col_gain[j] + 1e-15) {
            col_gain[j] = g;
            col_from[j] = i;
            changed = true;
          }
        }
      }
      for (Index j = 0; j < cols; ++j) {
        const Index i = col_match[j];
        if (i < 0 || col_gain[j] == kNone) continue;
        const double g = col_gain[j] - scores(i, j);
        if (g > row_gain[i] + 1e-15) {
          row_gain[i] = g;
          row_from[i] = j;
          changed = true;
        }
      }
      if (!changed) break;
    }

    Index end = -1;
    for (Index j = 0; j < cols; ++j) {
      if (col_match[j] >= 0 || col_gain[j] == kNone) continue;
      if (end < 0 || col_gain[j] > col_gain[end]) end = j;
    }
    if (end < 0) {
      throw std::runtime_error("assignment: no augmenting path");
    }
    // Walk back, flipping matched/unmatched edges.
    Index j = end;
    while (true) {
      const Index i = col_from[j];
      const Index prev_col = row_from[i];
      row_match[i] = j;
      col_match[j] = i;
      if (prev_col < 0) break;
      j = prev_col;
    }
  }

  AssignmentResult out;
  for (Index i = 0; i < rows; ++i) {
    if (row_match[i] >= 0) {
      out.pairs.emplace_back(i, row_match[i]);
      out.objective += scores(i, row_match[i]);
    }
  }
  return out;
}

}  // namespace perstd
