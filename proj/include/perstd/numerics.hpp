#pragma once

#include <utility>
#include <vector>

#include "perstd/tensor.hpp"

namespace perstd {

// Singular values below kRankTol * sigma_max count as zero.
inline constexpr double kRankTol = 1e-10;

// Exhaustive Kruskal-rank evaluation is refused above this many columns.
inline constexpr Index kKruskalMaxColumns = 20;

// Moore-Penrose pseudoinverse via SVD. Throws std::runtime_error on
// non-finite input.
Matrix pinv(const Matrix& m, double tol = kRankTol);

Index numeric_rank(const Matrix& m, double tol = kRankTol);

// Largest r such that every r columns of m are linearly independent,
// by exhaustive subset enumeration. A zero column gives 0.
Index kruskal_rank(const Matrix& m, double tol = kRankTol);

bool has_zero_column(const Matrix& m, double tol = 0.0);

// sum_k a_k * X * b_k == rhs, with every a_k r x r and every b_k m x m.
struct SylvesterTerm {
  Matrix a;
  Matrix b;
};

struct SylvesterSystem {
  std::vector<SylvesterTerm> terms;
  Matrix rhs;
};

struct SylvesterSolution {
  Matrix x;
  // True when the Kronecker system was numerically singular and was solved
  // with a small Tikhonov shift instead.
  bool damped = false;
  double damping = 0.0;
};

// Solves (sum_k b_k^T kron a_k) vec(X) = vec(rhs) densely. A singular
// operator is retried once with shift 1e-10 * trace / dim; if that still
// fails std::runtime_error is thrown.
SylvesterSolution solve_generalized_sylvester(const SylvesterSystem& s);

struct AssignmentResult {
  // (row, col), sorted by row.
  std::vector<std::pair<Index, Index>> pairs;
  double objective = 0.0;
};

// Picks exactly r (row, col) pairs, no row or column used twice, maximizing
// the summed scores. Exact: successive longest augmenting paths on the
// bipartite flow network (min-cost flow with flow value r).
AssignmentResult assign_fixed_cardinality(const Matrix& scores, Index r);

}  // namespace perstd
