#include "perstd/cpd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "perstd/numerics.hpp"
#include "perstd/rng.hpp"

namespace perstd {

namespace {

constexpr double kExactFit = 1e-13;
// Residual levels for the early exit in cpd_als.
constexpr double kNearExact = 1e-6;
constexpr double kSettled = 1e-11;

void validate(const Tensor3& t, const CpdOptions& opts) {
  if (opts.rank < 1) {
    throw std::invalid_argument("CPD rank must be >= 1, got " +
                                std::to_string(opts.rank));
  }
  if (opts.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (opts.max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  if (t.empty()) throw std::invalid_argument("cannot decompose empty tensor");
}

double residual_sq(const Tensor3& t, const CpdFactors& f) {
  return (t.values() - cp_reconstruct(f).values()).squaredNorm();
}

// Least-squares update of factor `mode` with the other two fixed.
void update_factor(const Tensor3& t, CpdFactors& f, int mode) {
  const std::array<const Matrix*, 3> ptrs{&f[0], &f[1], &f[2]};
  const Matrix rhs = mttkrp(t, ptrs, mode);  // R x n_mode
  const Matrix gram = mode == 1   ? khatri_rao_gram(f[2], f[1])
                      : mode == 2 ? khatri_rao_gram(f[2], f[0])
                                  : khatri_rao_gram(f[1], f[0]);
  f[mode - 1] = (pinv(gram) * rhs).transpose();
}

}  // namespace

void normalize_columns(CpdFactors& f) {
  for (Index r = 0; r < f.rank(); ++r) {
    for (int j = 0; j < 2; ++j) {
      const double n = f[j].col(r).norm();
      if (n > 0.0) {
        f[j].col(r) /= n;
        f[2].col(r) *= n;
      }
    }
  }
}

CpdResult cpd_als_from(const Tensor3& t, CpdFactors init,
                       const CpdOptions& opts) {
  validate(t, opts);
  if (init.rank() != opts.rank || init.dims() != t.dims()) {
    throw std::invalid_argument("CPD initial factors do not match tensor");
  }
  const double tnorm = t.norm();
  const double scale = tnorm > 0 ? tnorm : 1.0;
  CpdResult res;
  res.factors = std::move(init);
  normalize_columns(res.factors);
  double prev = std::sqrt(residual_sq(t, res.factors)) / scale;
  int misses = 0;
  for (int it = 0; it < opts.max_iters; ++it) {
    const CpdFactors before = res.factors;
    for (int mode = 1; mode <= 3; ++mode) update_factor(t, res.factors, mode);
    normalize_columns(res.factors);
    double r2 = residual_sq(t, res.factors);

    // Extrapolate along the last sweep's step; keep it only if it helps.
    if (opts.line_search && it >= 2) {
      const double step = std::pow(static_cast<double>(it + 1),
                                   1.0 / (3.0 + misses));
      CpdFactors trial = res.factors;
      for (int j = 0; j < 3; ++j) {
        trial[j] = before[j] + step * (res.factors[j] - before[j]);
      }
      normalize_columns(trial);
      const double trial_r2 = residual_sq(t, trial);
      if (trial_r2 < r2) {
        res.factors = std::move(trial);
        r2 = trial_r2;
      } else {
        ++misses;
      }
    }

    res.trace.push_back(r2);
    res.iterations = it + 1;
    const double err = std::sqrt(r2) / scale;
    if (!std::isfinite(err)) break;
    const bool small_change = std::abs(prev - err) <= opts.tol * prev;
    prev = err;
    if (err <= kExactFit || small_change) {
      res.converged = true;
      break;
    }
  }
  res.rel_error = prev;
  return res;
}

CpdResult cpd_lm_polish(const Tensor3& t, CpdFactors init, int max_iters,
                        double tol) {
  if (init.dims() != t.dims() || init.rank() < 1) {
    throw std::invalid_argument("CPD polish: factors do not match tensor");
  }
  const auto [n1, n2, n3] = t.dims();
  const Index R = init.rank();
  const Index oa = 0, ob = n1 * R, oc = (n1 + n2) * R;
  const Index np = (n1 + n2 + n3) * R;
  const double tnorm = t.norm();
  const double scale = tnorm > 0 ? tnorm : 1.0;

  CpdResult res;
  res.factors = std::move(init);
  normalize_columns(res.factors);
  double r2 = residual_sq(t, res.factors);
  double mu = -1.0;
  for (int it = 0; it < max_iters; ++it) {
    const Matrix& a = res.factors[0];
    const Matrix& b = res.factors[1];
    const Matrix& c = res.factors[2];
    const Matrix ga = a.transpose() * a, gb = b.transpose() * b,
                 gc = c.transpose() * c;

    // Gauss-Newton normal matrix J^T J, assembled block by block.
    Matrix h = Matrix::Zero(np, np);
    const Matrix haa = gb.cwiseProduct(gc), hbb = ga.cwiseProduct(gc),
                 hcc = ga.cwiseProduct(gb);
    for (Index r = 0; r < R; ++r) {
      for (Index q = 0; q < R; ++q) {
        for (Index i = 0; i < n1; ++i) h(oa + r * n1 + i, oa + q * n1 + i) = haa(r, q);
        for (Index j = 0; j < n2; ++j) h(ob + r * n2 + j, ob + q * n2 + j) = hbb(r, q);
        for (Index k = 0; k < n3; ++k) h(oc + r * n3 + k, oc + q * n3 + k) = hcc(r, q);
        for (Index i = 0; i < n1; ++i) {
          for (Index j = 0; j < n2; ++j) {
            const double v = b(j, r) * a(i, q) * gc(r, q);
            h(oa + r * n1 + i, ob + q * n2 + j) = v;
          }
          for (Index k = 0; k < n3; ++k) {
            h(oa + r * n1 + i, oc + q * n3 + k) = c(k, r) * a(i, q) * gb(r, q);
          }
        }
        for (Index j = 0; j < n2; ++j)
          for (Index k = 0; k < n3; ++k)
            h(ob + r * n2 + j, oc + q * n3 + k) = c(k, r) * b(j, q) * ga(r, q);
      }
    }
    h.triangularView<Eigen::StrictlyLower>() =
        h.triangularView<Eigen::StrictlyUpper>().transpose();

    // Gradient direction J^T (t - model).
    const Tensor3 resid = t - cp_reconstruct(res.factors);
    const std::array<const Matrix*, 3> ptrs{&a, &b, &c};
    Vector g(np);
    {
      const Matrix g1 = mttkrp(resid, ptrs, 1).transpose();
      const Matrix g2 = mttkrp(resid, ptrs, 2).transpose();
      const Matrix g3 = mttkrp(resid, ptrs, 3).transpose();
      g.segment(oa, n1 * R) = Eigen::Map<const Vector>(g1.data(), n1 * R);
      g.segment(ob, n2 * R) = Eigen::Map<const Vector>(g2.data(), n2 * R);
      g.segment(oc, n3 * R) = Eigen::Map<const Vector>(g3.data(), n3 * R);
    }
    if (mu < 0) mu = 1e-3 * h.diagonal().maxCoeff();

    bool accepted = false;
    for (int tries = 0; tries < 20 && !accepted; ++tries) {
      Matrix damped = h;
      damped.diagonal().array() += mu;
      const Vector step = damped.ldlt().solve(g);
      if (!step.allFinite()) {
        mu *= 10.0;
        continue;
      }
      CpdFactors trial = res.factors;
      trial[0] += Eigen::Map<const Matrix>(step.data() + oa, n1, R);
      trial[1] += Eigen::Map<const Matrix>(step.data() + ob, n2, R);
      trial[2] += Eigen::Map<const Matrix>(step.data() + oc, n3, R);
      const double trial_r2 = residual_sq(t, trial);
      if (trial_r2 < r2) {
        normalize_columns(trial);
        res.factors = std::move(trial);
        const double prev = std::sqrt(r2) / scale;
        r2 = trial_r2;
        mu = std::max(mu / 3.0, 1e-15);
        accepted = true;
        res.trace.push_back(r2);
        res.iterations = it + 1;
        const double err = std::sqrt(r2) / scale;
        if (err <= kExactFit || std::abs(prev - err) <= tol * prev) {
          res.converged = true;
        }
      } else {
        mu *= 4.0;
      }
    }
    if (!accepted) {
      res.converged = true;  // no descent left at machine precision
      break;
    }
    if (res.converged) break;
  }
  res.rel_error = std::sqrt(r2) / scale;
  return res;
}

CpdResult cpd_als(const Tensor3& t, const CpdOptions& opts) {
  validate(t, opts);
  std::vector<CpdResult> runs;
  for (int r = 0; r < opts.restarts; ++r) {
    Rng rng(opts.seed + static_cast<std::uint64_t>(r));
    CpdFactors init(rng.gaussian(t.dims()[0], opts.rank),
                    rng.gaussian(t.dims()[1], opts.rank),
                    rng.gaussian(t.dims()[2], opts.rank));
    CpdResult run = cpd_als_from(t, std::move(init), opts);
    run.best_restart = r;
    if (!std::isfinite(run.rel_error)) continue;
    // A restart that ALS brought close to zero residual is finished by LM
    // right away; once one fits exactly, the remaining restarts cannot win.
    if (opts.polish_iters > 0 && run.rel_error <= kNearExact) {
      CpdResult p = cpd_lm_polish(t, run.factors, opts.polish_iters, opts.tol);
      if (p.rel_error < run.rel_error) {
        run.factors = std::move(p.factors);
        run.rel_error = p.rel_error;
        run.iterations += p.iterations;
        run.converged = p.converged;
        run.trace.insert(run.trace.end(), p.trace.begin(), p.trace.end());
      }
      if (run.rel_error <= kSettled) return run;
    }
    runs.push_back(std::move(run));
  }
  if (runs.empty()) throw std::runtime_error("CPD: every restart diverged");
  // Stable sort keeps the lowest restart index first among equal errors.
  std::stable_sort(runs.begin(), runs.end(),
                   [](const CpdResult& x, const CpdResult& y) {
                     return x.rel_error < y.rel_error;
                   });

  if (opts.polish_iters > 0) {
    const int n = std::min<int>(opts.polish_candidates,
                                static_cast<int>(runs.size()));
    for (int i = 0; i < n; ++i) {
      CpdResult& run = runs[i];
      if (run.rel_error <= kExactFit) break;
      CpdResult p = cpd_lm_polish(t, run.factors, opts.polish_iters, opts.tol);
      if (p.rel_error < run.rel_error) {
        run.factors = std::move(p.factors);
        run.rel_error = p.rel_error;
        run.iterations += p.iterations;
        run.converged = p.converged;
        run.trace.insert(run.trace.end(), p.trace.begin(), p.trace.end());
      }
      if (run.rel_error <= kExactFit) break;
    }
    std::stable_sort(runs.begin(), runs.begin() + n,
                     [](const CpdResult& x, const CpdResult& y) {
                       return x.rel_error < y.rel_error;
                     });
  }
  return std::move(runs.front());
}

double factor_match_score(const CpdFactors& f, const CpdFactors& g) {
  if (f.rank() != g.rank() || f.dims() != g.dims()) {
    throw std::invalid_argument("factor_match_score: shape mismatch");
  }
  const Index r = f.rank();
  Matrix score = Matrix::Zero(r, r);
  Vector wf = Vector::Ones(r), wg = Vector::Ones(r);
  std::array<Matrix, 3> cf, cg;
  for (int j = 0; j < 3; ++j) {
    const Vector nf = f[j].colwise().norm();
    const Vector ng = g[j].colwise().norm();
    wf.array() *= nf.array();
    wg.array() *= ng.array();
    cf[j] = f[j] * nf.cwiseMax(std::numeric_limits<double>::min())
                       .cwiseInverse()
                       .asDiagonal();
    cg[j] = g[j] * ng.cwiseMax(std::numeric_limits<double>::min())
                       .cwiseInverse()
                       .asDiagonal();
  }
  const Matrix c0 = (cf[0].transpose() * cg[0]).cwiseAbs();
  const Matrix c1 = (cf[1].transpose() * cg[1]).cwiseAbs();
  const Matrix c2 = (cf[2].transpose() * cg[2]).cwiseAbs();
  for (Index a = 0; a < r; ++a) {
    for (Index b = 0; b < r; ++b) {
      const double hi = std::max(wf[a], wg[b]);
      const double penalty = hi > 0 ? 1.0 - std::abs(wf[a] - wg[b]) / hi : 1.0;
      score(a, b) = penalty * c0(a, b) * c1(a, b) * c2(a, b);
    }
  }
  return assign_fixed_cardinality(score, r).objective / static_cast<double>(r);
}

}  // namespace perstd
