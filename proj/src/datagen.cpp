#include "perstd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "perstd/rng.hpp"

namespace perstd {

namespace {

// Stream ids keep the draws of different objects independent.
enum Stream : std::uint64_t {
  kCommon = 1,
  kDistinct = 2,
  kOperators = 3,
  kNoise = 4,
  kBlend = 5,
  kCloud = 6,
};

CpdFactors gaussian_factors(Rng& rng, const Dims& dims, Index rank) {
  Matrix a = rng.gaussian(dims[0], rank);
  Matrix b = rng.gaussian(dims[1], rank);
  Matrix c = rng.gaussian(dims[2], rank);
  return {std::move(a), std::move(b), std::move(c)};
}

// One pass of a centered moving average along rows or columns, with the
// window clipped at the borders.
Matrix box_pass(const Matrix& f, int radius, bool along_rows) {
  Matrix out(f.rows(), f.cols());
  const Index n = along_rows ? f.rows() : f.cols();
  for (Index i = 0; i < f.rows(); ++i) {
    for (Index j = 0; j < f.cols(); ++j) {
      const Index c = along_rows ? i : j;
      const Index lo = std::max<Index>(0, c - radius);
      const Index hi = std::min<Index>(n - 1, c + radius);
      double s = 0.0;
      for (Index t = lo; t <= hi; ++t) s += along_rows ? f(t, j) : f(i, t);
      out(i, j) = s / static_cast<double>(hi - lo + 1);
    }
  }
  return out;
}

Matrix soft_threshold(const Matrix& f, double t, double softness) {
  return ((f.array() - t) / softness).min(1.0).max(0.0).matrix();
}

}  // namespace

void SynthConfig::validate() const {
  if (datasets.empty()) throw std::invalid_argument("no datasets configured");
  if (L.size() != datasets.size()) {
    throw std::invalid_argument("L must have one entry per dataset");
  }
  if (R < 1) throw std::invalid_argument("R must be >= 1");
  for (Index m : common) {
    if (m < 1) throw std::invalid_argument("common dims must be >= 1");
  }
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    if (L[k] < 0) throw std::invalid_argument("L_k must be >= 0");
    for (Index n : datasets[k]) {
      if (n < 1) throw std::invalid_argument("dataset dims must be >= 1");
    }
  }
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("snr_db must be a number or +inf");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1]");
  }
}

SynthConfig SynthConfig::example4() {
  SynthConfig cfg;
  cfg.common = {7, 11, 9};
  cfg.datasets = {{10, 5, 7}, {5, 12, 7}, {5, 7, 10}};
  cfg.R = 5;
  cfg.L = {5, 5, 5};
  return cfg;
}

SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SynthData d;
  const Index K = cfg.K();

  Rng common_rng(cfg.seed, kCommon);
  d.common_factors = gaussian_factors(common_rng, cfg.common, cfg.R);
  d.common = cp_reconstruct(d.common_factors);

  Rng op_rng(cfg.seed, kOperators);
  for (Index k = 0; k < K; ++k) {
    MeasurementOps p;
    for (int j = 0; j < 3; ++j) {
      p[j] = cfg.p_dist == PDist::uniform01
                 ? op_rng.uniform(cfg.datasets[k][j], cfg.common[j])
                 : op_rng.gaussian(cfg.datasets[k][j], cfg.common[j]);
    }
    d.meas.ops.push_back(std::move(p));
  }

  if (cfg.alpha > 0.0) {
    d.common_k = blend_common(d.common, cfg.R, K, cfg.alpha,
                              derive_seed(cfg.seed, kBlend));
  } else {
    d.common_k.assign(K, d.common);
  }

  for (Index k = 0; k < K; ++k) {
    Rng rng(derive_seed(cfg.seed, kDistinct, k));
    d.distinct_factors.push_back(
        gaussian_factors(rng, cfg.datasets[k], cfg.L[k]));
    d.distinct.push_back(cp_reconstruct(d.distinct_factors.back()));
    d.clean.push_back(apply_measurement(d.common_k[k], d.meas[k]) +
                      d.distinct.back());
    d.y.push_back(add_noise(d.clean.back(), cfg.snr_db,
                            derive_seed(cfg.seed, kNoise, k)));
  }
  return d;
}

Tensor3 add_noise(const Tensor3& x, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return x;
  if (std::isnan(snr_db)) throw std::invalid_argument("snr_db is NaN");
  Rng rng(seed, kNoise);
  Tensor3 n = rng.gaussian(x.dims());
  const double target = x.squared_norm() / std::pow(10.0, snr_db / 10.0);
  const double have = n.squared_norm();
  if (have > 0.0) n *= std::sqrt(target / have);
  return x + n;
}

double realized_snr_db(const Tensor3& clean, const Tensor3& noisy) {
  const double noise = (noisy.values() - clean.values()).squaredNorm();
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(clean.squared_norm() / noise);
}

std::vector<Tensor3> blend_common(const Tensor3& c, Index rank, Index K,
                                  double alpha, std::uint64_t seed) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1], got " +
                                std::to_string(alpha));
  }
  if (rank < 1 || K < 0) throw std::invalid_argument("bad rank or K");
  std::vector<Tensor3> out;
  for (Index k = 0; k < K; ++k) {
    Rng rng(derive_seed(seed, k), kBlend);
    const Tensor3 e = cp_reconstruct(gaussian_factors(rng, c.dims(), rank));
    if (alpha == 0.0) {
      out.push_back(c);
    } else if (alpha == 1.0) {
      out.push_back(e);
    } else {
      out.push_back((1.0 - alpha) * c + alpha * e);
    }
  }
  return out;
}

std::vector<Tensor3> apply_clouds(const Tensor3& c,
                                  const std::vector<Matrix>& maps,
                                  const Vector& g) {
  const auto [nx, ny, nl] = c.dims();
  if (g.size() != nl) {
    throw std::invalid_argument("cloud spectrum has " +
                                std::to_string(g.size()) + " bands, image has " +
                                std::to_string(nl));
  }
  if ((g.array() < 0.0).any()) {
    throw std::invalid_argument("cloud spectrum must be nonnegative");
  }
  std::vector<Tensor3> out;
  for (const Matrix& s : maps) {
    if (s.rows() != nx || s.cols() != ny) {
      throw std::invalid_argument("cloud map shape does not match the image");
    }
    if (!s.allFinite() || (s.array() < 0.0).any() || (s.array() > 1.0).any()) {
      throw std::invalid_argument("cloud map entries must lie in [0, 1]");
    }
    Tensor3 x(c.dims());
    for (Index l = 0; l < nl; ++l)
      for (Index j = 0; j < ny; ++j)
        for (Index i = 0; i < nx; ++i)
          x(i, j, l) = c(i, j, l) * (1.0 - s(i, j)) + g[l] * s(i, j);
    out.push_back(std::move(x));
  }
  return out;
}

CloudMetrics cloud_metrics(const Matrix& s1, const Matrix& s2,
                           double threshold) {
  const double z = static_cast<double>(s1.size() + s2.size());
  CloudMetrics m;
  if (z == 0.0) return m;
  m.cc = (s1.sum() + s2.sum()) / z;
  m.cp = static_cast<double>((s1.array() > threshold).count() +
                             (s2.array() > threshold).count()) /
         z;
  return m;
}

Matrix generate_cloud_map(Index rows, Index cols, double target_cc,
                          std::uint64_t seed, int radius, double softness) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("empty cloud map");
  if (!(target_cc >= 0.0 && target_cc <= 1.0)) {
    throw std::invalid_argument("target cloud cover must lie in [0, 1]");
  }
  if (!(softness > 0.0) || radius < 0) {
    throw std::invalid_argument("bad smoothing parameters");
  }
  if (target_cc == 0.0) return Matrix::Zero(rows, cols);
  if (target_cc == 1.0) return Matrix::Ones(rows, cols);

  Rng rng(seed, kCloud);
  Matrix f = rng.gaussian(rows, cols);
  // Three box passes approximate a Gaussian blur.
  for (int pass = 0; pass < 3; ++pass) {
    f = box_pass(box_pass(f, radius, true), radius, false);
  }
  const double mean = f.mean();
  const double sd =
      std::sqrt((f.array() - mean).square().sum() / static_cast<double>(f.size()));
  f = ((f.array() - mean) / (sd > 0.0 ? sd : 1.0)).matrix();

  // Mean cover decreases monotonically in the threshold.
  double lo = f.minCoeff() - softness, hi = f.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (soft_threshold(f, mid, softness).mean() > target_cc) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return soft_threshold(f, 0.5 * (lo + hi), softness);
}

Matrix box_decimation(Index n, Index factor) {
  if (factor < 1 || n < factor || n % factor != 0) {
    throw std::invalid_argument("box_decimation: " + std::to_string(n) +
                                " is not a positive multiple of " +
                                std::to_string(factor));
  }
  Matrix p = Matrix::Zero(n / factor, n);
  for (Index r = 0; r < n / factor; ++r) {
    p.block(r, r * factor, 1, factor).setConstant(1.0 / factor);
  }
  return p;
}

Matrix band_average(Index bands_in, Index bands_out) {
  if (bands_out < 1 || bands_out > bands_in) {
    throw std::invalid_argument("band_average: need 1 <= out <= in");
  }
  Matrix p = Matrix::Zero(bands_out, bands_in);
  for (Index r = 0; r < bands_out; ++r) {
    const Index lo = r * bands_in / bands_out;
    const Index hi = (r + 1) * bands_in / bands_out;
    p.block(r, lo, 1, hi - lo).setConstant(1.0 / static_cast<double>(hi - lo));
  }
  return p;
}

double nrmse(const Tensor3& estimate, const Tensor3& truth) {
  if (estimate.dims() != truth.dims()) {
    throw std::invalid_argument("nrmse: shape mismatch");
  }
  const double t = truth.norm();
  if (!(t > 0.0)) throw std::invalid_argument("nrmse: truth has zero norm");
  return (estimate.values() - truth.values()).norm() / t;
}

}  // namespace perstd
