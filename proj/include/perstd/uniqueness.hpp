#pragma once

// Recoverability certificates for the personalized coupled model.
//
// Both checkers are sufficient conditions: a negative answer means "not
// guaranteed", never "non-unique".

#include <array>
#include <optional>
#include <vector>

#include "perstd/model.hpp"

namespace perstd {

struct ProblemDims {
  Dims common{0, 0, 0};                         // M_1..M_3
  std::vector<Dims> datasets;                   // N_{k,1..3}
  std::vector<std::array<Index, 3>> p_rank;     // rank(P_{k,j})
  std::vector<std::array<bool, 3>> p_full_col;  // P_{k,j} full column rank
  Index R = 1;
  std::vector<Index> L;

  Index K() const { return static_cast<Index>(datasets.size()); }
  // Throws std::invalid_argument on inconsistent sizes or ranks.
  void validate() const;

  // Ranks and full-column-rank flags read off explicit operators.
  static ProblemDims from_measurements(const MeasurementModel& meas, Index R,
                                       std::vector<Index> L);
  // Operators assumed to have full rank min(N_{k,j}, M_j).
  static ProblemDims full_rank(const Dims& common, std::vector<Dims> datasets,
                               Index R, std::vector<Index> L);
};

struct UniquenessReport {
  // Datasets satisfying the full-uniqueness count, and per mode the datasets
  // satisfying the uni-mode count with a full-column-rank operator.
  std::vector<Index> eta_candidates;
  std::array<std::vector<Index>, 3> unimode_candidates;
  // Uni-mode candidates under rank(C) + min(kr(A), kr(B)) >= R + 1.
  // Informational only; never used for `overall`.
  std::array<std::vector<Index>, 3> alt_unimode_candidates;
  bool a6_satisfied = false;
  bool overall = false;
  std::optional<Witness> witness;
};

// Left side of the full-uniqueness count for dataset k:
//   sum_j min(rank P_{k,j}, R + L_k); the bound is 2(R + L_k) + 2.
Index full_uniqueness_count(const ProblemDims& d, Index k);
// Left side of the mode-j uni-mode count for dataset k (j 0-based):
//   min(N_{k,j}, min(M_j, R) + L_k) + sum_{i != j} min(rank P_{k,i}, R + L_k).
Index unimode_count(const ProblemDims& d, Index k, int j);
Index uniqueness_bound(const ProblemDims& d, Index k);

// Generic check on dimensions and ranks. Witness choice: fewest distinct
// datasets among {eta, xi_1, xi_2, xi_3}, then the largest summed
// dimensions of those datasets, then lexicographically smallest.
UniquenessReport check_generic(const ProblemDims& dims);

struct DeterministicReport {
  // Fully unique eta via Kruskal's condition on [P C_j, D_{eta,j}].
  bool a1 = false;
  Index a1_sum = 0;
  Index a1_bound = 0;
  // Per mode: uni-mode uniqueness of xi_j (no zero columns and
  // kr + kr + rank >= bound) and full column rank of P_{xi_j,j}.
  std::array<bool, 3> a2{false, false, false};
  std::array<bool, 3> a2_alt{false, false, false};
  // Per mode with xi_j != eta: Kruskal rank of
  // [P_{eta,j} C_j, P_{eta,j} P_{xi_j,j}^+ D_{xi_j,j}, D_{eta,j}] > 1.
  std::array<std::optional<bool>, 3> a3;
  bool overall = false;
};

// Deterministic check on explicit factors. Throws std::invalid_argument when
// a stacked factor exceeds kKruskalMaxColumns columns.
DeterministicReport check_deterministic(const CoupledModel& model,
                                        const MeasurementModel& meas,
                                        const Witness& witness);

}  // namespace perstd
