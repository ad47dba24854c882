#include "perstd/experiments.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "perstd/rng.hpp"
#include "perstd/uniqueness.hpp"

namespace perstd {

namespace {

std::vector<TrialResult> run_trials(
    int runs, unsigned threads,
    const std::function<TrialResult(int)>& trial) {
  std::vector<TrialResult> out(runs);
  parallel_for(runs, threads, [&](int i) { out[i] = trial(i); });
  return out;
}

TrialResult from_fit(const CommonFit& fit, const Tensor3& truth) {
  TrialResult t;
  t.ok = fit.ok;
  t.error = fit.error;
  t.converged = fit.converged;
  if (fit.ok) t.nrmse = nrmse(fit.common, truth);
  return t;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::semialg:
      return "semialg";
    case Method::als_init1:
      return "als_init1";
    case Method::als_init2:
      return "als_init2";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "semialg") return Method::semialg;
  if (s == "als_init1" || s == "als-semialg") return Method::als_init1;
  if (s == "als_init2" || s == "als-random" || s == "als") {
    return Method::als_init2;
  }
  throw std::invalid_argument("unknown method '" + s + "'");
}

Summary summarize(const std::vector<TrialResult>& trials) {
  Summary s;
  std::vector<double> v;
  for (const auto& t : trials) {
    if (t.ok && std::isfinite(t.nrmse)) {
      v.push_back(t.nrmse);
    } else {
      ++s.failures;
    }
  }
  s.runs = static_cast<int>(v.size());
  if (v.empty()) {
    s.mean = s.stddev = std::nan("");
    return s;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

void parallel_for(int n, unsigned threads,
                  const std::function<void(int)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(n, 1)));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t instance_seed(std::uint64_t seed, int trial) {
  return derive_seed(seed, static_cast<std::uint64_t>(trial));
}

CommonFit fit_common(const SynthData& data, Index R,
                     const std::vector<Index>& L, Method method,
                     const SolverSettings& settings, std::uint64_t seed) {
  CommonFit fit;
  try {
    const auto K = static_cast<Index>(data.y.size());
    CpdOptions cpd;
    cpd.max_iters = settings.cpd_max_iters;
    cpd.tol = settings.cpd_tol;
    cpd.restarts = settings.restarts;
    cpd.seed = seed;
    cpd.polish_iters = settings.cpd_polish_iters;

    std::optional<Witness> witness;
    if (method != Method::als_init2) {
      const UniquenessReport rep =
          check_generic(ProblemDims::from_measurements(data.meas, R, L));
      if (!rep.witness) {
        throw std::runtime_error(
            "no witness: recoverability is not guaranteed for these ranks");
      }
      witness = rep.witness;
    }

    if (method == Method::semialg) {
      SemiAlgOptions so;
      so.cpd = cpd;
      const SemiAlgResult sa =
          semialg_decompose(data.y, data.meas, R, L, *witness, so);
      fit.common = cp_reconstruct(sa.common);
      fit.converged = true;
      for (const auto& [k, r] : sa.cpds) fit.converged &= r.converged;
    } else {
      MultistartOptions mo;
      mo.als.max_iters = settings.max_iters;
      mo.als.tol = settings.tol;
      mo.als.line_search = settings.line_search;
      mo.init = method == Method::als_init1 ? AlsInit::semialg : AlsInit::random;
      mo.restarts = settings.restarts;
      mo.seed = seed;
      mo.witness = witness;
      mo.cpd = cpd;
      const AlsResult res = coupled_als_multistart(
          data.y, data.meas, R, L, CouplingSpec::full(K), mo);
      fit.common = cp_reconstruct(res.state.c[0], res.state.c[1],
                                  res.state.c[2]);
      fit.converged = res.converged;
    }
    fit.ok = fit.common.all_finite();
    if (!fit.ok) fit.error = "non-finite estimate";
  } catch (const std::exception& e) {
    fit.ok = false;
    fit.error = e.what();
  }
  return fit;
}

std::vector<SnrRow> run_snr_sweep(const SynthConfig& base,
                                  const std::vector<double>& snrs,
                                  const std::vector<Method>& methods, int runs,
                                  std::uint64_t seed,
                                  const SolverSettings& settings) {
  std::vector<SnrRow> rows;
  for (double snr : snrs) {
    for (Method m : methods) {
      const auto trials = run_trials(runs, settings.threads, [&](int t) {
        SynthConfig cfg = base;
        cfg.snr_db = snr;
        cfg.seed = instance_seed(seed, t);
        const SynthData data = generate_synthetic(cfg);
        const CommonFit fit = fit_common(data, cfg.R, cfg.L, m, settings,
                                         derive_seed(cfg.seed, 77));
        return from_fit(fit, data.common);
      });
      rows.push_back({snr, m, summarize(trials)});
    }
  }
  return rows;
}

std::vector<AlphaRow> run_alpha_sweep(const SynthConfig& base,
                                      const std::vector<double>& alphas,
                                      int runs, std::uint64_t seed,
                                      const SolverSettings& settings) {
  std::vector<AlphaRow> rows;
  for (double alpha : alphas) {
    const auto trials = run_trials(runs, settings.threads, [&](int t) {
      SynthConfig cfg = base;
      cfg.alpha = alpha;
      cfg.seed = instance_seed(seed, t);
      const SynthData data = generate_synthetic(cfg);
      const CommonFit fit = fit_common(data, cfg.R, cfg.L, Method::als_init2,
                                       settings, derive_seed(cfg.seed, 77));
      TrialResult r;
      r.ok = fit.ok;
      r.error = fit.error;
      r.converged = fit.converged;
      if (fit.ok) {
        double sum = 0.0;
        for (const auto& ck : data.common_k) sum += nrmse(fit.common, ck);
        r.nrmse = sum / static_cast<double>(data.common_k.size());
      }
      return r;
    });
    rows.push_back({alpha, summarize(trials)});
  }
  return rows;
}

std::vector<RankCell> run_rank_grid(const SynthConfig& base,
                                    const std::vector<Index>& ranks_r,
                                    const std::vector<Index>& ranks_l,
                                    int runs, std::uint64_t seed,
                                    const SolverSettings& settings) {
  std::vector<RankCell> cells;
  for (Index r : ranks_r) {
    for (Index l : ranks_l) {
      const auto trials = run_trials(runs, settings.threads, [&](int t) {
        SynthConfig cfg = base;
        cfg.seed = instance_seed(seed, t);
        const SynthData data = generate_synthetic(cfg);
        const std::vector<Index> L(data.y.size(), l);
        const CommonFit fit = fit_common(data, r, L, Method::als_init2,
                                         settings, derive_seed(cfg.seed, 77));
        return from_fit(fit, data.common);
      });
      cells.push_back({r, l, summarize(trials)});
    }
  }
  return cells;
}

FusionData make_fusion_data(const FusionConfig& cfg_in, std::uint64_t seed) {
  FusionConfig cfg = cfg_in;
  if (cfg.image) {
    const Dims d = cfg.image->dims();
    cfg.height = d[0];
    cfg.width = d[1];
    cfg.bands = d[2];
  }
  if (cfg.height % cfg.decimation != 0 || cfg.width % cfg.decimation != 0) {
    throw std::invalid_argument("image size must be a multiple of decimation");
  }
  FusionData fd;
  Rng rng(seed, 11);
  CpdFactors f;
  if (cfg.image) {
    fd.image = *cfg.image;
  } else {
    // Nonnegative abundances and spectra, rescaled so that the mean ground
    // reflectance is 0.2, well below the cloud reflectance.
    f = CpdFactors(rng.uniform(cfg.height, cfg.image_rank),
                   rng.uniform(cfg.width, cfg.image_rank),
                   rng.uniform(cfg.bands, cfg.image_rank));
    const double mean = cp_reconstruct(f).values().mean();
    f[2] *= 0.2 / mean;
    fd.image = cp_reconstruct(f);
  }

  if (cfg.cloud_maps) {
    fd.cloud_hsi = (*cfg.cloud_maps)[0];
    fd.cloud_msi = (*cfg.cloud_maps)[1];
  } else {
    fd.cloud_hsi = generate_cloud_map(cfg.height, cfg.width, cfg.target_cc,
                                      derive_seed(seed, 1), cfg.cloud_radius,
                                      cfg.cloud_softness);
    fd.cloud_msi = generate_cloud_map(cfg.height, cfg.width, cfg.target_cc,
                                      derive_seed(seed, 2), cfg.cloud_radius,
                                      cfg.cloud_softness);
  }
  const Vector g = Vector::Constant(cfg.bands, cfg.cloud_reflectance);
  const std::vector<Tensor3> cloudy =
      apply_clouds(fd.image, {fd.cloud_hsi, fd.cloud_msi}, g);

  SynthData& d = fd.data;
  d.common_factors = f;
  d.common = fd.image;
  d.common_k = cloudy;
  const Matrix ph = box_decimation(cfg.height, cfg.decimation);
  const Matrix pw = box_decimation(cfg.width, cfg.decimation);
  d.meas.ops.push_back({ph, pw, Matrix::Identity(cfg.bands, cfg.bands)});
  d.meas.ops.push_back({Matrix::Identity(cfg.height, cfg.height),
                        Matrix::Identity(cfg.width, cfg.width),
                        band_average(cfg.bands, cfg.msi_bands)});
  for (std::size_t k = 0; k < 2; ++k) {
    const Tensor3 clean = apply_measurement(cloudy[k], d.meas[k]);
    d.distinct.push_back(clean - apply_measurement(fd.image, d.meas[k]));
    d.clean.push_back(clean);
    d.y.push_back(add_noise(clean, cfg.snr_db, derive_seed(seed, 3, k)));
  }
  return fd;
}

CommonFit fit_fusion(const SynthData& data, const FusionConfig& cfg, Index L,
                     const SolverSettings& settings, std::uint64_t seed) {
  CommonFit fit;
  try {
    const std::vector<Index> ls(data.y.size(), L);
    const UniquenessReport rep =
        check_generic(ProblemDims::from_measurements(data.meas, cfg.R, ls));
    if (!rep.witness) {
      throw std::runtime_error("no witness for the fusion ranks");
    }
    SemiAlgOptions so;
    so.cpd.max_iters = settings.cpd_max_iters;
    so.cpd.tol = settings.cpd_tol;
    so.cpd.restarts = settings.restarts;
    so.cpd.polish_iters = settings.cpd_polish_iters;
    so.cpd.seed = seed;
    const SemiAlgResult sa =
        semialg_decompose(data.y, data.meas, cfg.R, ls, *rep.witness, so);

    // The spectral factor from the HSI regression, then the distinct parts
    // from the residuals.
    const Index hsi = rep.witness->eta;
    AlsState init;
    init.c[0] = sa.common[0];
    init.c[1] = sa.common[1];
    init.c[2] = hybrid_regression_mode3(data.y[hsi], data.meas[hsi],
                                        init.c[0], init.c[1])
                    .c3;
    const Tensor3 c_hat = cp_reconstruct(init.c[0], init.c[1], init.c[2]);
    for (std::size_t k = 0; k < data.y.size(); ++k) {
      FactorTriple xc, xd;
      for (int j = 0; j < 3; ++j) xc[j] = data.meas[k][j] * init.c[j];
      const Tensor3 resid = data.y[k] - apply_measurement(c_hat, data.meas[k]);
      if (L > 0) {
        CpdOptions co = so.cpd;
        co.rank = L;
        co.seed = derive_seed(seed, 500 + k);
        xd = cpd_als(resid, co).factors.factors;
      } else {
        for (int j = 0; j < 3; ++j) xd[j] = Matrix(resid.dims()[j], 0);
      }
      init.xc.push_back(std::move(xc));
      init.xd.push_back(std::move(xd));
    }

    AlsOptions ao;
    ao.max_iters = cfg.als_iters;
    ao.tol = settings.tol;
    ao.line_search = settings.line_search;
    const AlsResult res =
        coupled_als_fit(data.y, data.meas, cfg.R, ls,
                        CouplingSpec::full(static_cast<Index>(data.y.size())),
                        std::move(init), ao);
    fit.common = cp_reconstruct(res.state.c[0], res.state.c[1], res.state.c[2]);
    fit.converged = res.converged;
    fit.ok = fit.common.all_finite();
    if (!fit.ok) fit.error = "non-finite estimate";
  } catch (const std::exception& e) {
    fit.ok = false;
    fit.error = e.what();
  }
  return fit;
}

std::vector<FusionRow> run_fusion(const FusionConfig& cfg, int runs,
                                  std::uint64_t seed,
                                  const SolverSettings& settings) {
  std::vector<FusionRow> rows(runs);
  parallel_for(runs, settings.threads, [&](int t) {
    const std::uint64_t s = instance_seed(seed, t);
    const FusionData fd = make_fusion_data(cfg, s);
    FusionRow& row = rows[t];
    row.run = t;
    const CloudMetrics m = cloud_metrics(fd.cloud_hsi, fd.cloud_msi);
    row.cc = m.cc;
    row.cp = m.cp;
    row.personalized = from_fit(
        fit_fusion(fd.data, cfg, cfg.L, settings, derive_seed(s, 77)), fd.image);
    row.baseline = from_fit(
        fit_fusion(fd.data, cfg, 0, settings, derive_seed(s, 77)), fd.image);
  });
  return rows;
}

}  // namespace perstd
