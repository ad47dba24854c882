#pragma once

// Brute-force references shared by the unit tests and the acceptance
// checks. Everything here is written out entry by entry on purpose, so it
// does not share code paths with the library it checks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "perstd/coupled_als.hpp"
#include "perstd/rng.hpp"
#include "perstd/tensor.hpp"

namespace perstd::testing {

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double s = std::max(a.norm(), b.norm());
  return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

inline double rel_diff(const Tensor3& a, const Tensor3& b) {
  return rel_diff(Matrix(a.values()), Matrix(b.values()));
}

// Entry (i, j, k) = sum_r a(i,r) b(j,r) c(k,r), by loops.
inline Tensor3 brute_cp(const Matrix& a, const Matrix& b, const Matrix& c) {
  Tensor3 t(a.rows(), b.rows(), c.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j)
      for (Index k = 0; k < c.rows(); ++k) {
        double s = 0.0;
        for (Index r = 0; r < a.cols(); ++r) s += a(i, r) * b(j, r) * c(k, r);
        t(i, j, k) = s;
      }
  return t;
}

// Kronecker product of two column vectors: (x kron y)[p * |y| + q] = x_p y_q.
inline Vector brute_kron(const Vector& x, const Vector& y) {
  Vector v(x.size() * y.size());
  for (Index p = 0; p < x.size(); ++p)
    for (Index q = 0; q < y.size(); ++q) v[p * y.size() + q] = x[p] * y[q];
  return v;
}

// Full Kronecker product of matrices, entry by entry.
inline Matrix brute_kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index p = 0; p < b.rows(); ++p)
        for (Index q = 0; q < b.cols(); ++q)
          k(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
  return k;
}

// t x1 b1 x2 b2 x3 b3 by the defining quadruple sum.
inline Tensor3 brute_multilinear(const Tensor3& t, const Matrix& b1,
                                 const Matrix& b2, const Matrix& b3) {
  const auto [n1, n2, n3] = t.dims();
  Tensor3 out(b1.rows(), b2.rows(), b3.rows());
  for (Index p = 0; p < b1.rows(); ++p)
    for (Index q = 0; q < b2.rows(); ++q)
      for (Index s = 0; s < b3.rows(); ++s) {
        double acc = 0.0;
        for (Index i = 0; i < n1; ++i)
          for (Index j = 0; j < n2; ++j)
            for (Index k = 0; k < n3; ++k)
              acc += t(i, j, k) * b1(p, i) * b2(q, j) * b3(s, k);
        out(p, q, s) = acc;
      }
  return out;
}

// The coupled objective evaluated one entry at a time.
inline double brute_objective(const AlsState& s, const std::vector<Tensor3>& y,
                              const MeasurementModel& meas,
                              const CouplingSpec& spec) {
  double f = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    std::array<Matrix, 3> xc;
    for (int j = 0; j < 3; ++j) {
      xc[j] = spec.coupled(static_cast<Index>(k), j) ? Matrix(meas[k][j] * s.c[j])
                                                     : s.xc[k][j];
    }
    const auto& xd = s.xd[k];
    const auto [n1, n2, n3] = y[k].dims();
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n2; ++j)
        for (Index l = 0; l < n3; ++l) {
          double m = 0.0;
          for (Index r = 0; r < xc[0].cols(); ++r)
            m += xc[0](i, r) * xc[1](j, r) * xc[2](l, r);
          for (Index r = 0; r < xd[0].cols(); ++r)
            m += xd[0](i, r) * xd[1](j, r) * xd[2](l, r);
          const double e = y[k](i, j, l) - m;
          f += e * e;
        }
  }
  return f;
}

// Best total score over every way of picking r (row, col) pairs with
// distinct rows and columns. Exponential; meant for matrices up to 6 x 6.
inline double brute_assignment(const Matrix& z, Index r) {
  const Index n = z.rows(), m = z.cols();
  double best = -1.0;
  std::vector<bool> used(m, false);
  // Rows are visited in order; each is either skipped or paired.
  std::function<void(Index, Index, double)> rec = [&](Index row, Index left,
                                                      double acc) {
    if (left == 0) {
      best = std::max(best, acc);
      return;
    }
    if (row == n || n - row < left) return;
    rec(row + 1, left, acc);
    for (Index c = 0; c < m; ++c) {
      if (used[c]) continue;
      used[c] = true;
      rec(row + 1, left - 1, acc + z(row, c));
      used[c] = false;
    }
  };
  rec(0, r, 0.0);
  return best;
}

// Rank from the Gram determinant sequence is fragile; use a full-pivot LU
// as an independent rank oracle instead of the SVD used by the library.
inline Index lu_rank(const Matrix& m, double tol = 1e-9) {
  Eigen::FullPivLU<Matrix> lu(m);
  lu.setThreshold(tol);
  return lu.rank();
}

// Lemma checks on random instances; both return true when the claimed
// bound holds. Shared by the unit tests and the acceptance binary.
struct LemmaOutcome {
  bool hypotheses_met = true;
  bool holds = true;
};

// [Q_1 X_1, ..., Q_K X_K] with Q_k fixed, X_k Gaussian with R_k columns,
// and a T' x T matrix E built so that E and every E Q_k have full row rank
// (verified, reported in hypotheses_met). Claim: Kruskal rank is at least
// min(T', sum_k R_k).
LemmaOutcome lemma_kruskal_instance(std::uint64_t seed);

// [Q X_1, X_2] with Q full column rank. Claim: rank equals
// min(N, min(M, R) + L).
LemmaOutcome lemma_rank_instance(std::uint64_t seed);

}  // namespace perstd::testing
