#pragma once

// Synthetic data, cloud contamination, degradation operators and metrics.

#include <cstdint>
#include <limits>
#include <vector>

#include "perstd/model.hpp"

namespace perstd {

enum class PDist { gaussian, uniform01 };

struct SynthConfig {
  Dims common{7, 11, 9};
  std::vector<Dims> datasets;
  Index R = 5;
  std::vector<Index> L;
  // +infinity means noiseless.
  double snr_db = std::numeric_limits<double>::infinity();
  PDist p_dist = PDist::uniform01;
  // Each dataset sees (1 - alpha) C + alpha E_k with E_k drawn like C.
  double alpha = 0.0;
  std::uint64_t seed = 0;

  Index K() const { return static_cast<Index>(datasets.size()); }
  // Throws std::invalid_argument.
  void validate() const;
  // The three-dataset configuration used throughout the experiments:
  // C is 7 x 11 x 9 with rank 5, all L_k = 5.
  static SynthConfig example4();
};

struct SynthData {
  CpdFactors common_factors;
  Tensor3 common;
  // Common tensor seen by each dataset; equals `common` when alpha == 0.
  std::vector<Tensor3> common_k;
  std::vector<CpdFactors> distinct_factors;
  // Distinct tensors D_k in the dataset space.
  std::vector<Tensor3> distinct;
  // P_k(C_k) + D_k before noise.
  std::vector<Tensor3> clean;
  std::vector<Tensor3> y;
  MeasurementModel meas;
};

// Bitwise deterministic in cfg.
SynthData generate_synthetic(const SynthConfig& cfg);

// White Gaussian noise scaled so that 10 log10(|x|^2 / |n|^2) equals snr_db
// exactly. Infinite SNR returns x unchanged.
Tensor3 add_noise(const Tensor3& x, double snr_db, std::uint64_t seed);

double realized_snr_db(const Tensor3& clean, const Tensor3& noisy);

// (1 - alpha) c + alpha e_k for k = 1..K with e_k an independent rank-`rank`
// tensor with standard Gaussian factors. Throws for alpha outside [0, 1].
std::vector<Tensor3> blend_common(const Tensor3& c, Index rank, Index K,
                                  double alpha, std::uint64_t seed);

// X[x, y, l] = C[x, y, l] (1 - S[x, y]) + g[l] S[x, y] for each map S.
// Throws if a map leaves [0, 1], if g is negative, or on shape mismatch.
std::vector<Tensor3> apply_clouds(const Tensor3& c,
                                  const std::vector<Matrix>& maps,
                                  const Vector& g);

struct CloudMetrics {
  double cc = 0.0;  // mean cover per pixel
  double cp = 0.0;  // fraction of pixels with cover above the threshold
};

inline constexpr double kCloudPresence = 0.15;

CloudMetrics cloud_metrics(const Matrix& s1, const Matrix& s2,
                           double threshold = kCloudPresence);

// Smoothed seeded Gaussian field passed through a soft threshold
// clamp((f - t) / softness, 0, 1); t is bisected so the mean cover equals
// target_cc. Not a physical cloud model.
Matrix generate_cloud_map(Index rows, Index cols, double target_cc,
                          std::uint64_t seed, int radius = 3,
                          double softness = 0.5);

// n/factor x n matrix averaging non-overlapping blocks of `factor` samples.
Matrix box_decimation(Index n, Index factor);

// bands_out x bands_in matrix averaging contiguous, nearly equal groups.
Matrix band_average(Index bands_in, Index bands_out);

// |estimate - truth|_F / |truth|_F. Throws for zero truth or shape mismatch.
double nrmse(const Tensor3& estimate, const Tensor3& truth);

}  // namespace perstd
