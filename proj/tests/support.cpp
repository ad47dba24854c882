#include "support.hpp"

#include <algorithm>

#include "perstd/numerics.hpp"

namespace perstd::testing {

namespace {

Index pick(Rng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

}  // namespace

LemmaOutcome lemma_kruskal_instance(std::uint64_t seed) {
  // The operators come from their own stream so they do not depend on the
  // random blocks.
  Rng ops(seed, 1), draws(seed, 2);
  const Index K = pick(ops, 2, 3);
  const Index T = pick(ops, 3, 8);
  std::vector<Matrix> q(K);
  std::vector<Index> cols(K);
  for (Index k = 0; k < K; ++k) {
    const Index s = pick(ops, 2, 6);
    cols[k] = pick(ops, 1, 4);
    q[k] = ops.uniform(T, s);
  }
  // Half of the instances make the first operator rank deficient, the way a
  // degradation matrix with fewer rows than columns would be.
  Index t_tilde = T;
  Matrix basis;
  if (ops.uniform() < 0.5) {
    const Index r = pick(ops, 1, std::min<Index>(T, q[0].cols()));
    basis = ops.uniform(T, r);
    q[0] = basis * ops.uniform(r, q[0].cols());
    t_tilde = r;
  }
  for (Index k = 0; k < K; ++k) t_tilde = std::min(t_tilde, q[k].cols());
  const Matrix e = basis.size() > 0
                       ? Matrix(ops.gaussian(t_tilde, basis.cols()) * basis.transpose())
                       : ops.gaussian(t_tilde, T);

  LemmaOutcome out;
  out.hypotheses_met = lu_rank(e) == t_tilde;
  for (Index k = 0; k < K; ++k) {
    out.hypotheses_met = out.hypotheses_met && lu_rank(e * q[k]) == t_tilde;
  }

  Index total = 0;
  for (Index k = 0; k < K; ++k) total += cols[k];
  Matrix w(T, total);
  Index at = 0;
  for (Index k = 0; k < K; ++k) {
    w.middleCols(at, cols[k]) = q[k] * draws.gaussian(q[k].cols(), cols[k]);
    at += cols[k];
  }
  out.holds = kruskal_rank(w) >= std::min(t_tilde, total);
  return out;
}

LemmaOutcome lemma_rank_instance(std::uint64_t seed) {
  Rng ops(seed, 3), draws(seed, 4);
  const Index n = pick(ops, 2, 10);
  const Index m = pick(ops, 1, n);
  const Index r = pick(ops, 1, 6);
  const Index l = pick(ops, 0, 5);
  const Matrix q = ops.uniform(n, m);

  LemmaOutcome out;
  out.hypotheses_met = lu_rank(q) == m;
  Matrix z(n, r + l);
  z.leftCols(r) = q * draws.gaussian(m, r);
  if (l > 0) z.rightCols(l) = draws.gaussian(n, l);
  out.holds = numeric_rank(z) == std::min(n, std::min(m, r) + l);
  return out;
}

}  // namespace perstd::testing
