#pragma once

// Semi-algebraic recovery of the common tensor from a certified witness.
//
// Outline: decompose Y_eta and Y_{xi_j} for one mode j with xi_j != eta,
// match their mode-j columns after mapping both into the column space of
// P_{eta,j}, keep the R best matches, fix the scaling against Y_eta, then
// derive the two remaining common factors the same way. Every recovered
// common factor ends up with the permutation and scaling of Y_eta's CPD, so
// the three can be combined directly.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perstd/cpd.hpp"
#include "perstd/model.hpp"

namespace perstd {

struct SemiAlgOptions {
  // Template for every internal CPD. rank is overridden per dataset.
  CpdOptions cpd;
  // Also fit a rank-L_k CPD to each residual Y_k - P_k(C).
  bool distinct_cpd = false;
};

struct SemiAlgResult {
  CpdFactors common;
  // Y_k - P_k(common); always filled.
  std::vector<Tensor3> distinct;
  // Rank-L_k CPDs of the residuals, only with SemiAlgOptions::distinct_cpd.
  std::vector<CpdFactors> distinct_factors;
  // Assignment objective per mode; empty for modes whose columns were reused
  // from an earlier assignment.
  std::array<std::optional<double>, 3> match_scores;
  // Diagonal of the scaling compensation per mode.
  std::array<Vector, 3> scalings;
  // The mode (1..3) used for the initial match.
  int pivot_mode = 0;
  std::vector<std::string> warnings;
  // The internal CPDs, keyed by dataset.
  std::map<Index, CpdResult> cpds;
};

// Datasets whose CPD the algorithm needs for this witness, ascending.
std::vector<Index> semialg_required_datasets(const Witness& w);

// Full pipeline. Throws std::invalid_argument if no xi_j differs from eta,
// if some P_{xi_j,j} is not left-invertible or if R exceeds a CPD width.
SemiAlgResult semialg_decompose(const std::vector<Tensor3>& y,
                                const MeasurementModel& meas, Index R,
                                const std::vector<Index>& L, const Witness& w,
                                const SemiAlgOptions& opts);

// Assembly only, from precomputed factor triples of rank R + L_k for every
// dataset listed by semialg_required_datasets.
SemiAlgResult semialg_assemble(const std::vector<Tensor3>& y,
                               const MeasurementModel& meas, Index R,
                               const std::vector<Index>& L, const Witness& w,
                               const std::map<Index, CpdFactors>& cpds,
                               const SemiAlgOptions& opts);

struct RegressionResult {
  Matrix c3;
  // The Khatri-Rao regressor lacked full column rank, so c3 is the
  // minimum-norm least-squares solution.
  bool rank_deficient = false;
};

// Given matched C1, C2, the mode-3 common factor minimizing
//   || Y1 - [[P_{1,1} C1, P_{1,2} C2, P_{1,3} C3]] ||_F
// in closed form from the mode-3 unfolding.
RegressionResult hybrid_regression_mode3(const Tensor3& y1,
                                         const MeasurementOps& p1,
                                         const Matrix& c1, const Matrix& c2);

}  // namespace perstd
