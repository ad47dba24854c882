#include "perstd/coupled_als.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "perstd/cpd.hpp"
#include "perstd/rng.hpp"

namespace perstd {

namespace {

const char* const kBlockNames[8] = {"C1",  "Xc1", "C2", "Xc2",
                                    "C3",  "Xc3", "Xd", "extrapolation"};

struct Snapshot {
  FactorTriple c;
  std::vector<FactorTriple> xc, xd;
};

void normalize_distinct(FactorTriple& d) {
  if (d[0].cols() == 0) return;
  CpdFactors tmp(d[0], d[1], d[2]);
  normalize_columns(tmp);
  d = tmp.factors;
}

Tensor3 reconstruct(const FactorTriple& f) {
  return cp_reconstruct(f[0], f[1], f[2]);
}

// Coupled-side factors of dataset k with the constraint substituted.
FactorTriple effective_xc(const AlsState& s, const MeasurementModel& meas,
                          const CouplingSpec& spec, Index k) {
  FactorTriple f;
  for (int j = 0; j < 3; ++j) {
    f[j] = spec.coupled(k, j) ? Matrix(meas[k][j] * s.c[j]) : s.xc[k][j];
  }
  return f;
}

Matrix gram_except(const FactorTriple& f, int j) {
  const int a = j == 0 ? 1 : 0;
  const int b = j == 2 ? 1 : 2;
  return khatri_rao_gram(f[b], f[a]);
}

Matrix mttkrp_of(const Tensor3& t, const FactorTriple& f, int j) {
  return mttkrp(t, {&f[0], &f[1], &f[2]}, j + 1);
}

void check_state(const AlsState& s, const std::vector<Tensor3>& y,
                 const MeasurementModel& meas, Index R,
                 const std::vector<Index>* L) {
  meas.validate();
  const std::size_t K = meas.size();
  if (y.size() != K || s.xc.size() != K || s.xd.size() != K) {
    throw std::invalid_argument("state, data and measurements disagree on K");
  }
  if (L != nullptr && L->size() != K) {
    throw std::invalid_argument("L must have K entries");
  }
  const Dims m = meas.common_dims();
  for (int j = 0; j < 3; ++j) {
    if (s.c[j].rows() != m[j] || (R > 0 && s.c[j].cols() != R)) {
      throw std::invalid_argument("common factor " + std::to_string(j + 1) +
                                  " has the wrong shape");
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    const Dims n = meas.dataset_dims(k);
    if (y[k].dims() != n) {
      throw std::invalid_argument("Y_" + std::to_string(k + 1) +
                                  " does not match its operators");
    }
    for (int j = 0; j < 3; ++j) {
      if (s.xc[k][j].rows() != n[j] || s.xc[k][j].cols() != s.c[j].cols() ||
          s.xd[k][j].rows() != n[j] ||
          s.xd[k][j].cols() != s.xd[k][0].cols() ||
          (L != nullptr && s.xd[k][j].cols() != (*L)[k])) {
        throw std::invalid_argument("factors of dataset " +
                                    std::to_string(k + 1) +
                                    " have the wrong shape");
      }
    }
  }
}

}  // namespace

CouplingSpec CouplingSpec::full(Index K) {
  CouplingSpec s;
  for (auto& g : s.gamma) {
    for (Index k = 0; k < K; ++k) g.push_back(k);
  }
  return s;
}

bool CouplingSpec::coupled(Index k, int j) const {
  const auto& g = gamma[j];
  return std::find(g.begin(), g.end(), k) != g.end();
}

void CouplingSpec::validate(Index K) const {
  std::vector<bool> seen(K, false);
  for (int j = 0; j < 3; ++j) {
    std::vector<Index> sorted = gamma[j];
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument("coupling set " + std::to_string(j + 1) +
                                  " lists a dataset twice");
    }
    for (Index k : sorted) {
      if (k < 0 || k >= K) {
        throw std::invalid_argument("coupling set " + std::to_string(j + 1) +
                                    " has out-of-range dataset " +
                                    std::to_string(k + 1));
      }
      seen[k] = true;
    }
  }
  for (Index k = 0; k < K; ++k) {
    if (!seen[k]) {
      throw std::invalid_argument("dataset " + std::to_string(k + 1) +
                                  " is not coupled in any mode");
    }
  }
}

double objective(const AlsState& s, const std::vector<Tensor3>& y,
                 const MeasurementModel& meas, const CouplingSpec& spec) {
  check_state(s, y, meas, 0, nullptr);
  double f = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const Tensor3 model = reconstruct(effective_xc(s, meas, spec, k)) +
                          reconstruct(s.xd[k]);
    f += (y[k].values() - model.values()).squaredNorm();
  }
  return f;
}

SylvesterSystem common_factor_system(const AlsState& s,
                                     const std::vector<Tensor3>& y,
                                     const MeasurementModel& meas,
                                     const CouplingSpec& spec, int mode) {
  if (mode < 1 || mode > 3) throw std::invalid_argument("mode must be 1..3");
  check_state(s, y, meas, 0, nullptr);
  const int j = mode - 1;
  const Index R = s.c[j].cols();
  const Index M = s.c[j].rows();
  SylvesterSystem sys;
  sys.rhs = Matrix::Zero(R, M);
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (!spec.coupled(static_cast<Index>(k), j)) continue;
    const FactorTriple xc = effective_xc(s, meas, spec, k);
    const Tensor3 target = y[k] - reconstruct(s.xd[k]);
    const Matrix& p = meas[k][j];
    sys.terms.push_back({gram_except(xc, j), p.transpose() * p});
    sys.rhs += mttkrp_of(target, xc, j) * p;
  }
  return sys;
}

Matrix common_factor_gradient(const AlsState& s, const std::vector<Tensor3>& y,
                              const MeasurementModel& meas,
                              const CouplingSpec& spec, int mode) {
  const SylvesterSystem sys = common_factor_system(s, y, meas, spec, mode);
  const Matrix x = s.c[mode - 1].transpose();
  Matrix lhs = Matrix::Zero(sys.rhs.rows(), sys.rhs.cols());
  for (const auto& t : sys.terms) lhs += t.a * x * t.b;
  return 2.0 * (lhs - sys.rhs).transpose();
}

AlsState random_init(const MeasurementModel& meas, Index R,
                     const std::vector<Index>& L, const CouplingSpec& spec,
                     std::uint64_t seed) {
  meas.validate();
  const Index K = static_cast<Index>(meas.size());
  if (R < 1) throw std::invalid_argument("common rank R must be >= 1");
  if (static_cast<Index>(L.size()) != K) {
    throw std::invalid_argument("L must have K entries");
  }
  spec.validate(K);
  Rng rng(seed, 0xA15);
  AlsState s;
  const Dims m = meas.common_dims();
  for (int j = 0; j < 3; ++j) s.c[j] = rng.gaussian(m[j], R);
  for (Index k = 0; k < K; ++k) {
    const Dims n = meas.dataset_dims(k);
    FactorTriple xc, xd;
    for (int j = 0; j < 3; ++j) {
      xc[j] = spec.coupled(k, j) ? Matrix(meas[k][j] * s.c[j])
                                 : rng.gaussian(n[j], R);
      xd[j] = rng.gaussian(n[j], L[k]);
    }
    s.xc.push_back(std::move(xc));
    s.xd.push_back(std::move(xd));
  }
  return s;
}

AlsState semialg_init(const std::vector<Tensor3>& y,
                      const MeasurementModel& meas, Index R,
                      const std::vector<Index>& L, const CouplingSpec& spec,
                      const Witness& w, const CpdOptions& cpd) {
  spec.validate(static_cast<Index>(meas.size()));
  SemiAlgOptions so;
  so.cpd = cpd;
  so.distinct_cpd = true;
  const SemiAlgResult sa = semialg_decompose(y, meas, R, L, w, so);
  AlsState s;
  for (int j = 0; j < 3; ++j) s.c[j] = sa.common[j];
  for (std::size_t k = 0; k < meas.size(); ++k) {
    FactorTriple xc, xd;
    for (int j = 0; j < 3; ++j) {
      xc[j] = meas[k][j] * s.c[j];
      xd[j] = sa.distinct_factors[k][j];
    }
    s.xc.push_back(std::move(xc));
    s.xd.push_back(std::move(xd));
  }
  return s;
}

AlsResult coupled_als_fit(const std::vector<Tensor3>& y,
                          const MeasurementModel& meas, Index R,
                          const std::vector<Index>& L,
                          const CouplingSpec& spec, AlsState init,
                          const AlsOptions& opts) {
  const Index K = static_cast<Index>(meas.size());
  spec.validate(K);
  check_state(init, y, meas, R, &L);
  if (opts.max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  if (!(opts.tol >= 0.0)) throw std::invalid_argument("tol must be >= 0");

  AlsResult res;
  AlsState& s = res.state;
  s = std::move(init);
  s.objective_trace.clear();

  double data_energy = 0.0;
  for (const auto& t : y) data_energy += t.squared_norm();
  const double exact_fit = 1e-26 * data_energy;

  double f_prev = objective(s, y, meas, spec);
  double f_block = f_prev;
  auto after_block = [&](int block) {
    if (!opts.record_blocks && !opts.assert_monotone) return;
    const double f = objective(s, y, meas, spec);
    if (opts.record_blocks) res.block_trace.push_back(f);
    if (opts.assert_monotone &&
        f > f_block + opts.monotone_slack * std::max(f_block, 1e-300)) {
      throw std::logic_error(std::string("objective increased in block ") +
                             kBlockNames[block] + ": " +
                             std::to_string(f_block) + " -> " +
                             std::to_string(f));
    }
    f_block = f;
  };

  int misses = 0;
  for (int it = 0; it < opts.max_iters; ++it) {
    Snapshot before;
    if (opts.line_search) before = {s.c, s.xc, s.xd};
    for (int j = 0; j < 3; ++j) {
      const SylvesterSystem sys = common_factor_system(s, y, meas, spec, j + 1);
      if (!sys.terms.empty()) {
        const SylvesterSolution sol = solve_generalized_sylvester(sys);
        if (sol.damped) ++res.damped_solves;
        s.c[j] = sol.x.transpose();
      }
      after_block(2 * j);

      for (Index k = 0; k < K; ++k) {
        if (spec.coupled(k, j)) {
          s.xc[k][j] = meas[k][j] * s.c[j];
        } else {
          const FactorTriple xc = effective_xc(s, meas, spec, k);
          const Tensor3 target = y[k] - reconstruct(s.xd[k]);
          s.xc[k][j] =
              (pinv(gram_except(xc, j)) * mttkrp_of(target, xc, j)).transpose();
        }
      }
      after_block(2 * j + 1);
    }

    for (Index k = 0; k < K; ++k) {
      if (L[k] == 0) continue;
      const Tensor3 target =
          y[k] - reconstruct(effective_xc(s, meas, spec, k));
      FactorTriple& d = s.xd[k];
      for (int j = 0; j < 3; ++j) {
        d[j] = (pinv(gram_except(d, j)) * mttkrp_of(target, d, j)).transpose();
      }
      normalize_distinct(d);
    }
    after_block(6);

    double f = objective(s, y, meas, spec);
    if (opts.line_search && it >= 2) {
      // Jump further along this sweep's step; keep it only if it helps.
      const double step =
          std::pow(static_cast<double>(it + 1), 1.0 / (3.0 + misses));
      AlsState trial;
      trial.xc = s.xc;
      trial.xd = s.xd;
      for (int j = 0; j < 3; ++j) {
        trial.c[j] = before.c[j] + step * (s.c[j] - before.c[j]);
      }
      for (Index k = 0; k < K; ++k) {
        for (int j = 0; j < 3; ++j) {
          trial.xc[k][j] =
              spec.coupled(k, j)
                  ? Matrix(meas[k][j] * trial.c[j])
                  : Matrix(before.xc[k][j] +
                           step * (s.xc[k][j] - before.xc[k][j]));
          trial.xd[k][j] =
              before.xd[k][j] + step * (s.xd[k][j] - before.xd[k][j]);
        }
        normalize_distinct(trial.xd[k]);
      }
      const double f_trial = objective(trial, y, meas, spec);
      if (f_trial < f) {
        s.c = std::move(trial.c);
        s.xc = std::move(trial.xc);
        s.xd = std::move(trial.xd);
        f = f_trial;
      } else {
        ++misses;
      }
    }
    if (opts.line_search) after_block(7);

    s.objective_trace.push_back(f);
    res.iterations = it + 1;
    if (!std::isfinite(f)) break;
    const bool small = std::abs(f_prev - f) <= opts.tol * f_prev;
    f_prev = f;
    f_block = f;
    if (f <= exact_fit || small) {
      res.converged = true;
      break;
    }
  }
  // Keep the stored coupled factors consistent with the constraint.
  for (Index k = 0; k < K; ++k) {
    for (int j = 0; j < 3; ++j) {
      if (spec.coupled(k, j)) s.xc[k][j] = meas[k][j] * s.c[j];
    }
  }
  res.objective = f_prev;
  return res;
}

AlsResult coupled_als_multistart(const std::vector<Tensor3>& y,
                                 const MeasurementModel& meas, Index R,
                                 const std::vector<Index>& L,
                                 const CouplingSpec& spec,
                                 const MultistartOptions& opts) {
  if (opts.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (opts.init == AlsInit::semialg) {
    if (!opts.witness) {
      throw std::invalid_argument("semi-algebraic init needs a witness");
    }
    CpdOptions cpd = opts.cpd;
    cpd.restarts = opts.restarts;
    cpd.seed = opts.seed;
    AlsState init = semialg_init(y, meas, R, L, spec, *opts.witness, cpd);
    return coupled_als_fit(y, meas, R, L, spec, std::move(init), opts.als);
  }

  std::optional<AlsResult> best;
  for (int r = 0; r < opts.restarts; ++r) {
    AlsState init = random_init(meas, R, L, spec, derive_seed(opts.seed, r));
    AlsResult res =
        coupled_als_fit(y, meas, R, L, spec, std::move(init), opts.als);
    res.best_restart = r;
    if (!best || res.objective < best->objective) best = std::move(res);
  }
  return std::move(*best);
}

}  // namespace perstd
