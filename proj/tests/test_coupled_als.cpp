#include <doctest.h>

#include "perstd/coupled_als.hpp"
#include "perstd/datagen.hpp"
#include "support.hpp"

using namespace perstd;
using perstd::testing::rel_diff;

namespace {

SynthData small_problem(std::uint64_t seed, Index L, double snr_db) {
  SynthConfig cfg;
  cfg.common = {5, 6, 4};
  cfg.datasets = {{6, 4, 4}, {4, 7, 4}, {4, 5, 6}};
  cfg.R = 3;
  cfg.L = {L, L, L};
  cfg.snr_db = snr_db;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

// Ground truth as a state: coupled factors from C, distinct from D_k.
AlsState truth_state(const SynthData& d, const CouplingSpec& spec) {
  AlsState s;
  for (int j = 0; j < 3; ++j) s.c[j] = d.common_factors[j];
  for (std::size_t k = 0; k < d.y.size(); ++k) {
    FactorTriple xc, xd;
    for (int j = 0; j < 3; ++j) {
      xc[j] = d.meas[k][j] * d.common_factors[j];
      xd[j] = d.distinct_factors[k][j];
    }
    s.xc.push_back(xc);
    s.xd.push_back(xd);
  }
  (void)spec;
  return s;
}

// Mode 3 left uncoupled for the last dataset.
CouplingSpec partial_spec() {
  CouplingSpec spec;
  spec.gamma = {std::vector<Index>{0, 1, 2}, std::vector<Index>{0, 1, 2},
                std::vector<Index>{0, 1}};
  return spec;
}

}  // namespace

TEST_SUITE("coupled_als") {

TEST_CASE("objective matches the entrywise sum") {
  const SynthData d = small_problem(1, 2, 20);
  for (const CouplingSpec& spec : {CouplingSpec::full(3), partial_spec()}) {
    const AlsState s = random_init(d.meas, 3, {2, 2, 2}, spec, 11);
    const double f = objective(s, d.y, d.meas, spec);
    CHECK(f == doctest::Approx(testing::brute_objective(s, d.y, d.meas, spec)).epsilon(1e-10));
  }

  // Zero model: the objective is the total energy.
  AlsState zero = random_init(d.meas, 3, {2, 2, 2}, CouplingSpec::full(3), 1);
  for (auto& m : zero.c) m.setZero();
  for (auto& t : zero.xc) for (auto& m : t) m.setZero();
  for (auto& t : zero.xd) for (auto& m : t) m.setZero();
  double energy = 0.0;
  for (const auto& y : d.y) energy += y.squared_norm();
  CHECK(objective(zero, d.y, d.meas, CouplingSpec::full(3)) == doctest::Approx(energy));

  const SynthData clean = small_problem(1, 2, std::numeric_limits<double>::infinity());
  const CouplingSpec full = CouplingSpec::full(3);
  CHECK(objective(truth_state(clean, full), clean.y, clean.meas, full) <
        1e-20 * energy);
}

TEST_CASE("every block is non-increasing") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const SynthData d = small_problem(10 + s, 2, 15);
    for (bool ls : {false, true}) {
      for (const CouplingSpec& spec : {CouplingSpec::full(3), partial_spec()}) {
        AlsOptions o;
        o.max_iters = 40;
        o.record_blocks = true;
        o.assert_monotone = true;
        o.line_search = ls;
        AlsResult r;
        CHECK_NOTHROW(r = coupled_als_fit(d.y, d.meas, 3, {2, 2, 2}, spec,
                                          random_init(d.meas, 3, {2, 2, 2}, spec, s), o));
        for (std::size_t i = 1; i < r.block_trace.size(); ++i) {
          CHECK(r.block_trace[i] <= r.block_trace[i - 1] * (1 + 1e-9));
        }
        for (std::size_t i = 1; i < r.state.objective_trace.size(); ++i) {
          CHECK(r.state.objective_trace[i] <= r.state.objective_trace[i - 1] * (1 + 1e-9));
        }
        // Coupled factors satisfy the constraint exactly.
        for (Index k = 0; k < 3; ++k)
          for (int j = 0; j < 3; ++j)
            if (spec.coupled(k, j)) {
              CHECK(rel_diff(r.state.xc[k][j], Matrix(d.meas[k][j] * r.state.c[j])) < 1e-12);
            }
      }
    }
  }
}

TEST_CASE("block trace length") {
  const SynthData d = small_problem(3, 1, 20);
  AlsOptions o;
  o.max_iters = 4;
  o.tol = 0;
  o.record_blocks = true;
  o.line_search = false;
  const CouplingSpec spec = CouplingSpec::full(3);
  const AlsResult r =
      coupled_als_fit(d.y, d.meas, 3, {1, 1, 1}, spec, random_init(d.meas, 3, {1, 1, 1}, spec, 2), o);
  CHECK(r.iterations == 4);
  CHECK_FALSE(r.converged);
  CHECK(r.block_trace.size() == 4 * 7);
}

TEST_CASE("common-factor gradient against finite differences") {
  const SynthData d = small_problem(4, 2, 20);
  for (const CouplingSpec& spec : {CouplingSpec::full(3), partial_spec()}) {
    const AlsState s = random_init(d.meas, 3, {2, 2, 2}, spec, 5);
    for (int mode = 1; mode <= 3; ++mode) {
      const Matrix g = common_factor_gradient(s, d.y, d.meas, spec, mode);
      Matrix fd(g.rows(), g.cols());
      const double h = 1e-6;
      for (Index i = 0; i < g.rows(); ++i)
        for (Index r = 0; r < g.cols(); ++r) {
          AlsState p = s, m = s;
          p.c[mode - 1](i, r) += h;
          m.c[mode - 1](i, r) -= h;
          fd(i, r) = (testing::brute_objective(p, d.y, d.meas, spec) -
                      testing::brute_objective(m, d.y, d.meas, spec)) / (2 * h);
        }
      CHECK(rel_diff(g, fd) <= 1e-5);
    }
  }
}

TEST_CASE("common-factor system is solved by the true factor") {
  const SynthData d = small_problem(5, 2, std::numeric_limits<double>::infinity());
  const CouplingSpec spec = CouplingSpec::full(3);
  const AlsState s = truth_state(d, spec);
  for (int mode = 1; mode <= 3; ++mode) {
    CHECK(common_factor_gradient(s, d.y, d.meas, spec, mode).norm() < 1e-9);
  }
}

TEST_CASE("noiseless recovery") {
  const double inf = std::numeric_limits<double>::infinity();
  SUBCASE("no distinct terms") {
    const SynthData d = small_problem(6, 0, inf);
    MultistartOptions o;
    o.restarts = 5;
    o.seed = 3;
    o.als.max_iters = 3000;
    o.als.tol = 1e-14;
    const AlsResult r = coupled_als_multistart(d.y, d.meas, 3, {0, 0, 0}, CouplingSpec::full(3), o);
    CHECK(nrmse(cp_reconstruct(r.state.c[0], r.state.c[1], r.state.c[2]), d.common) <= 1e-6);
  }
  SUBCASE("semi-algebraic start on Example 4") {
    SynthConfig cfg = SynthConfig::example4();
    cfg.seed = 12;
    const SynthData d = generate_synthetic(cfg);
    MultistartOptions o;
    o.init = AlsInit::semialg;
    o.witness = Witness{1, {0, 1, 2}};
    o.restarts = 50;
    o.als.max_iters = 200;
    const AlsResult r = coupled_als_multistart(d.y, d.meas, 5, {5, 5, 5}, CouplingSpec::full(3), o);
    CHECK(nrmse(cp_reconstruct(r.state.c[0], r.state.c[1], r.state.c[2]), d.common) <= 1e-4);
  }
}

TEST_CASE("fits are bitwise reproducible") {
  const SynthData d = small_problem(7, 1, 10);
  MultistartOptions o;
  o.restarts = 3;
  o.seed = 9;
  o.als.max_iters = 50;
  const AlsResult a = coupled_als_multistart(d.y, d.meas, 3, {1, 1, 1}, CouplingSpec::full(3), o);
  const AlsResult b = coupled_als_multistart(d.y, d.meas, 3, {1, 1, 1}, CouplingSpec::full(3), o);
  CHECK(a.state.objective_trace == b.state.objective_trace);
  CHECK(a.best_restart == b.best_restart);
  for (int j = 0; j < 3; ++j) CHECK(a.state.c[j] == b.state.c[j]);
}

TEST_CASE("coupling validation") {
  CouplingSpec s;
  s.gamma = {std::vector<Index>{0, 3}, {}, {}};
  CHECK_THROWS_AS(s.validate(2), std::invalid_argument);
  s.gamma = {std::vector<Index>{0, 0}, {1}, {}};
  CHECK_THROWS_AS(s.validate(2), std::invalid_argument);
  s.gamma = {std::vector<Index>{0}, {0}, {0}};
  CHECK_THROWS_AS(s.validate(2), std::invalid_argument);  // dataset 2 uncoupled
  s.gamma = {std::vector<Index>{0}, {1}, {}};
  CHECK_NOTHROW(s.validate(2));
  CHECK(CouplingSpec::full(2).coupled(1, 2));

  const SynthData d = small_problem(8, 1, 20);
  MultistartOptions o;
  o.init = AlsInit::semialg;  // no witness given
  CHECK_THROWS_AS(coupled_als_multistart(d.y, d.meas, 3, {1, 1, 1}, CouplingSpec::full(3), o),
                  std::invalid_argument);
}

}  // TEST_SUITE
