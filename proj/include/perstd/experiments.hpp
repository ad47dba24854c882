#pragma once

// Monte Carlo drivers behind the CLI commands. Every trial owns a seed
// derived from (seed, trial index), so results do not depend on the number
// of worker threads. Instances are shared across sweep points (the same
// trial index gives the same factors and noise pattern at every SNR, alpha
// or rank), which makes trends comparable point to point.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "perstd/coupled_als.hpp"
#include "perstd/datagen.hpp"

namespace perstd {

enum class Method { semialg, als_init1, als_init2 };

const char* method_name(Method m);
// Accepts "semialg", "als_init1" / "als-semialg", "als_init2" / "als-random".
Method parse_method(const std::string& s);

struct SolverSettings {
  int restarts = 50;
  int max_iters = 1000;
  double tol = 1e-9;
  bool line_search = true;
  // Iteration limit and tolerance of the CPDs inside the semi-algebraic
  // method.
  int cpd_max_iters = 1000;
  double cpd_tol = 1e-9;
  int cpd_polish_iters = 200;
  // 0 uses std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct TrialResult {
  bool ok = false;
  double nrmse = 0.0;
  bool converged = false;
  std::string error;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  int runs = 0;
  int failures = 0;
};

Summary summarize(const std::vector<TrialResult>& trials);

// Runs body(i) for i in [0, n) on a pool of worker threads; results are
// stored by index. Exceptions escaping body propagate after all workers stop.
void parallel_for(int n, unsigned threads, const std::function<void(int)>& body);

// Fits the common tensor of `data` with the given method and ranks.
// Exceptions from the solvers are returned as a failed TrialResult.
struct CommonFit {
  bool ok = false;
  Tensor3 common;
  bool converged = false;
  std::string error;
};
CommonFit fit_common(const SynthData& data, Index R,
                     const std::vector<Index>& L, Method method,
                     const SolverSettings& settings, std::uint64_t seed);

std::uint64_t instance_seed(std::uint64_t seed, int trial);

struct SnrRow {
  double snr_db;
  Method method;
  Summary summary;
};

// NRMSE of the recovered common tensor for each SNR and method.
std::vector<SnrRow> run_snr_sweep(const SynthConfig& base,
                                  const std::vector<double>& snrs,
                                  const std::vector<Method>& methods, int runs,
                                  std::uint64_t seed,
                                  const SolverSettings& settings);

struct AlphaRow {
  double alpha;
  Summary summary;
};

// Mean over datasets of |C_k(alpha) - C_hat| / |C_k(alpha)|, random-init ALS.
std::vector<AlphaRow> run_alpha_sweep(const SynthConfig& base,
                                      const std::vector<double>& alphas,
                                      int runs, std::uint64_t seed,
                                      const SolverSettings& settings);

struct RankCell {
  Index R;
  Index L;
  Summary summary;
};

// Data generated with base.R and base.L, decomposed with every (R, L) pair
// (same L for all datasets) by random-init ALS.
std::vector<RankCell> run_rank_grid(const SynthConfig& base,
                                    const std::vector<Index>& ranks_r,
                                    const std::vector<Index>& ranks_l,
                                    int runs, std::uint64_t seed,
                                    const SolverSettings& settings);

struct FusionConfig {
  Index height = 32;
  Index width = 32;
  Index bands = 16;
  // Rank of the synthetic high-resolution image.
  Index image_rank = 5;
  Index decimation = 4;
  Index msi_bands = 4;
  double target_cc = 0.05;
  double snr_db = 30.0;
  // Ranks used by the personalized decomposition; the baseline uses L = 0.
  Index R = 5;
  Index L = 2;
  // ALS iterations after the initialization; kept small on purpose, the
  // data only approximately follow the low-rank model.
  int als_iters = 50;
  double cloud_reflectance = 0.7;
  int cloud_radius = 3;
  double cloud_softness = 0.5;
  // A user-supplied image replaces the synthetic one (height, width and
  // bands are then taken from it); user-supplied maps replace the generated
  // clouds and target_cc is ignored.
  std::optional<Tensor3> image;
  std::optional<std::array<Matrix, 2>> cloud_maps;
};

struct FusionData {
  Tensor3 image;
  Matrix cloud_hsi;
  Matrix cloud_msi;
  SynthData data;  // data.y = {HSI, MSI}; data.common = image
};

// Low-rank nonnegative image, independent cloud maps for the two
// acquisitions, spatial box decimation for the HSI, band averaging for the
// MSI, white noise.
FusionData make_fusion_data(const FusionConfig& cfg, std::uint64_t seed);

// Semi-algebraic start with the common spectral factor replaced by the
// least-squares regression on the HSI, then cfg.als_iters ALS sweeps.
// Ranks are (cfg.R, L) for both images.
CommonFit fit_fusion(const SynthData& data, const FusionConfig& cfg, Index L,
                     const SolverSettings& settings, std::uint64_t seed);

struct FusionRow {
  int run = 0;
  double cc = 0.0;
  double cp = 0.0;
  TrialResult personalized;
  TrialResult baseline;
};

std::vector<FusionRow> run_fusion(const FusionConfig& cfg, int runs,
                                  std::uint64_t seed,
                                  const SolverSettings& settings);

}  // namespace perstd
