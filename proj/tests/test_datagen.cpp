#include <doctest.h>

#include <cmath>
#include <limits>

#include "perstd/datagen.hpp"
#include "perstd/rng.hpp"
#include "support.hpp"

using namespace perstd;
using perstd::testing::rel_diff;

TEST_SUITE("datagen") {

TEST_CASE("Example 4 shapes") {
  SynthConfig cfg = SynthConfig::example4();
  cfg.seed = 1;
  const SynthData d = generate_synthetic(cfg);
  REQUIRE(d.y.size() == 3);
  CHECK(d.y[0].dims() == Dims{10, 5, 7});
  CHECK(d.y[1].dims() == Dims{5, 12, 7});
  CHECK(d.y[2].dims() == Dims{5, 7, 10});
  CHECK(d.common.dims() == Dims{7, 11, 9});
  CHECK(d.common_factors.rank() == 5);
  for (const auto& f : d.distinct_factors) CHECK(f.rank() == 5);
  // Uniform operators on [0, 1].
  for (std::size_t k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      CHECK(d.meas[k][j].minCoeff() >= 0.0);
      CHECK(d.meas[k][j].maxCoeff() <= 1.0);
    }
}

TEST_CASE("noiseless data is the exact model") {
  SynthConfig cfg = SynthConfig::example4();
  cfg.seed = 2;
  const SynthData d = generate_synthetic(cfg);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(d.y[k] == d.clean[k]);
    const Tensor3 model = apply_measurement(d.common, d.meas[k]) + d.distinct[k];
    CHECK(rel_diff(d.y[k], model) < 1e-14);
    CHECK(rel_diff(d.distinct[k], cp_reconstruct(d.distinct_factors[k])) < 1e-14);
  }
}

TEST_CASE("realized SNR") {
  for (double snr : {10.0, 30.0, 60.0}) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      SynthConfig cfg = SynthConfig::example4();
      cfg.seed = s;
      cfg.snr_db = snr;
      const SynthData d = generate_synthetic(cfg);
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::abs(realized_snr_db(d.clean[k], d.y[k]) - snr) <= 0.5);
      }
    }
  }
  Rng rng(3);
  const Tensor3 x = rng.gaussian(Dims{4, 4, 4});
  CHECK(add_noise(x, std::numeric_limits<double>::infinity(), 1) == x);
  CHECK(realized_snr_db(x, add_noise(x, 17.0, 5)) == doctest::Approx(17.0).epsilon(1e-9));
}

TEST_CASE("generation is bitwise deterministic") {
  SynthConfig cfg = SynthConfig::example4();
  cfg.seed = 99;
  cfg.snr_db = 20;
  const SynthData a = generate_synthetic(cfg), b = generate_synthetic(cfg);
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.y[k] == b.y[k]);
  cfg.seed = 100;
  CHECK_FALSE(generate_synthetic(cfg).y[0] == a.y[0]);
}

TEST_CASE("Gaussian operators") {
  SynthConfig cfg = SynthConfig::example4();
  cfg.p_dist = PDist::gaussian;
  const SynthData d = generate_synthetic(cfg);
  CHECK(d.meas[0][0].minCoeff() < 0.0);
}

TEST_CASE("config validation") {
  SynthConfig cfg = SynthConfig::example4();
  cfg.L = {5, 5};
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
  cfg = SynthConfig::example4();
  cfg.R = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
  cfg = SynthConfig::example4();
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("blending the common tensor") {
  Rng rng(4);
  const Tensor3 c = cp_reconstruct(rng.gaussian(4, 2), rng.gaussian(5, 2), rng.gaussian(3, 2));
  const auto b0 = blend_common(c, 2, 3, 0.0, 7);
  for (const auto& t : b0) CHECK(t == c);

  // At alpha = 1 the result no longer depends on c.
  const auto b1 = blend_common(c, 2, 3, 1.0, 7);
  const auto b1_other = blend_common(2.0 * c, 2, 3, 1.0, 7);
  for (std::size_t k = 0; k < 3; ++k) CHECK(b1[k] == b1_other[k]);
  CHECK_FALSE(b1[0] == b1[1]);

  const auto half = blend_common(c, 2, 3, 0.5, 7);
  for (std::size_t k = 0; k < 3; ++k) {
    for (Index i = 0; i < c.size(); ++i) {
      CHECK(half[k].values()[i] ==
            doctest::Approx(0.5 * c.values()[i] + 0.5 * b1[k].values()[i]).epsilon(1e-14));
    }
  }

  double prev = -1.0;
  for (double a = 0.0; a <= 1.0 + 1e-12; a += 0.1) {
    const double e = nrmse(blend_common(c, 2, 3, std::min(a, 1.0), 7)[0], c);
    CHECK(e > prev);
    prev = e;
  }
  CHECK_THROWS_AS(blend_common(c, 2, 3, -0.1, 7), std::invalid_argument);
  CHECK_THROWS_AS(blend_common(c, 2, 3, 1.1, 7), std::invalid_argument);
}

TEST_CASE("clouds") {
  Tensor3 c(2, 2, 3);
  c.values().setConstant(1.0);
  const Vector g = Vector::Constant(3, 0.5);

  const auto clear = apply_clouds(c, {Matrix::Zero(2, 2)}, g);
  CHECK(clear[0] == c);

  const auto covered = apply_clouds(c, {Matrix::Ones(2, 2)}, g);
  for (double v : covered[0].data()) CHECK(v == 0.5);

  Matrix s = Matrix::Zero(2, 2);
  s(1, 0) = 0.3;
  const auto one = apply_clouds(c, {s, Matrix::Zero(2, 2)}, g);
  REQUIRE(one.size() == 2);
  for (Index l = 0; l < 3; ++l) {
    CHECK(one[0](1, 0, l) == doctest::Approx(0.85));
    CHECK(one[0](0, 0, l) == 1.0);
  }

  CHECK_THROWS_AS(apply_clouds(c, {Matrix::Constant(2, 2, 1.2)}, g), std::invalid_argument);
  CHECK_THROWS_AS(apply_clouds(c, {Matrix::Zero(2, 2)}, Vector::Constant(3, -1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_clouds(c, {Matrix::Zero(3, 2)}, g), std::invalid_argument);
}

TEST_CASE("cloud metrics") {
  const Matrix z = Matrix::Zero(4, 4), o = Matrix::Ones(4, 4);
  CHECK(cloud_metrics(z, z).cc == 0.0);
  CHECK(cloud_metrics(z, z).cp == 0.0);
  CHECK(cloud_metrics(o, o).cc == 1.0);
  CHECK(cloud_metrics(o, o).cp == 1.0);

  Matrix half = Matrix::Zero(4, 4);
  half.topRows(2).setConstant(0.2);
  const CloudMetrics m = cloud_metrics(half, half);
  CHECK(m.cc == doctest::Approx(0.1));
  CHECK(m.cp == doctest::Approx(0.5));
}

TEST_CASE("generated cloud maps hit their cover") {
  for (double target : {0.02, 0.05, 0.10, 0.3}) {
    const Matrix s = generate_cloud_map(32, 32, target, 5);
    CHECK(s.minCoeff() >= 0.0);
    CHECK(s.maxCoeff() <= 1.0);
    CHECK(s.mean() == doctest::Approx(target).epsilon(1e-3));
  }
  CHECK(generate_cloud_map(32, 32, 0.0, 5).maxCoeff() == 0.0);
  CHECK(generate_cloud_map(16, 16, 0.05, 3) == generate_cloud_map(16, 16, 0.05, 3));
}

TEST_CASE("degradation operators") {
  const Matrix d = box_decimation(8, 4);
  REQUIRE(d.rows() == 2);
  REQUIRE(d.cols() == 8);
  CHECK(d(0, 0) == 0.25);
  CHECK(d(0, 4) == 0.0);
  CHECK(d(1, 7) == 0.25);
  CHECK(rel_diff(Matrix(d.rowwise().sum()), Matrix(Vector::Ones(2))) == 0.0);

  const Matrix b = band_average(16, 4);
  REQUIRE(b.rows() == 4);
  REQUIRE(b.cols() == 16);
  for (Index r = 0; r < 4; ++r) CHECK(b.row(r).sum() == doctest::Approx(1.0));
  // Every band lands in exactly one group.
  for (Index c = 0; c < 16; ++c) CHECK((b.col(c).array() > 0).count() == 1);
  CHECK(band_average(10, 3).row(0).sum() == doctest::Approx(1.0));
}

TEST_CASE("NRMSE") {
  Rng rng(6);
  const Tensor3 t = rng.gaussian(Dims{3, 3, 3});
  CHECK(nrmse(t, t) == 0.0);
  CHECK(nrmse(Tensor3(t.dims()), t) == doctest::Approx(1.0));
  CHECK(nrmse(2.0 * t, t) == doctest::Approx(1.0));
  CHECK_THROWS_AS(nrmse(t, Tensor3(t.dims())), std::invalid_argument);
  CHECK_THROWS_AS(nrmse(t, Tensor3(3, 3, 2)), std::invalid_argument);
}

}  // TEST_SUITE
