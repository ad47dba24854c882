#pragma once

// Alternating least squares for the flexibly coupled problem
//
//   min  sum_k || Y_k - [[Xc_k1, Xc_k2, Xc_k3]] - [[Xd_k1, Xd_k2, Xd_k3]] ||_F^2
//   s.t. Xc_kj = P_kj C_j   for k in Gamma_j.
//
// One sweep updates, in order: C_1, every Xc_k1, C_2, every Xc_k2, C_3,
// every Xc_k3, then one ALS pass over the distinct factors of each dataset,
// and optionally an extrapolation step. Each block is an exact least-squares
// solve and the extrapolation is only accepted when it helps, so the
// objective never increases from one block to the next.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perstd/model.hpp"
#include "perstd/numerics.hpp"
#include "perstd/semialg.hpp"

namespace perstd {

struct CouplingSpec {
  // gamma[j] lists the datasets whose mode-(j+1) factor is tied to C_{j+1}.
  std::array<std::vector<Index>, 3> gamma;

  // Every dataset coupled in every mode.
  static CouplingSpec full(Index K);
  bool coupled(Index k, int j) const;
  // Throws std::invalid_argument on out-of-range indices, duplicates, or a
  // dataset that appears in no gamma[j].
  void validate(Index K) const;
};

using FactorTriple = std::array<Matrix, 3>;

struct AlsState {
  FactorTriple c;                 // M_j x R
  std::vector<FactorTriple> xc;   // N_kj x R
  std::vector<FactorTriple> xd;   // N_kj x L_k
  std::vector<double> objective_trace;  // one entry per sweep
};

struct AlsOptions {
  int max_iters = 1000;
  // Stop when |f_prev - f| <= tol * f_prev.
  double tol = 1e-9;
  // After each sweep, try extrapolating the step taken by the sweep and keep
  // the result only if the objective drops. Counters the slow progress of
  // plain ALS on nearly collinear factors.
  bool line_search = true;
  // Record the objective after every block: 7 entries per sweep, plus one
  // for the extrapolation when enabled.
  bool record_blocks = false;
  // Throw std::logic_error as soon as a block raises the objective by more
  // than monotone_slack * f_prev.
  bool assert_monotone = false;
  double monotone_slack = 1e-9;
};

struct AlsResult {
  AlsState state;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> block_trace;
  // Common-factor solves that needed Tikhonov damping.
  int damped_solves = 0;
  int best_restart = 0;
};

// Objective with Xc_kj replaced by P_kj C_j wherever k is in Gamma_j.
double objective(const AlsState& s, const std::vector<Tensor3>& y,
                 const MeasurementModel& meas, const CouplingSpec& spec);

// The normal equations for C_j (j in 1..3) as sum_k A_k X B_k = F with
// X = C_j^T, A_k the Hadamard product of the Gram matrices of the other two
// coupled factors and B_k = P_kj^T P_kj.
SylvesterSystem common_factor_system(const AlsState& s,
                                     const std::vector<Tensor3>& y,
                                     const MeasurementModel& meas,
                                     const CouplingSpec& spec, int mode);

// Gradient of the objective with respect to C_j, from the normal equations.
Matrix common_factor_gradient(const AlsState& s, const std::vector<Tensor3>& y,
                              const MeasurementModel& meas,
                              const CouplingSpec& spec, int mode);

// Standard Gaussian factors; coupled Xc set to P C.
AlsState random_init(const MeasurementModel& meas, Index R,
                     const std::vector<Index>& L, const CouplingSpec& spec,
                     std::uint64_t seed);

// Common factors from the semi-algebraic solver, distinct factors from a
// rank-L_k CPD of each residual, uncoupled Xc from the measured common
// factors.
AlsState semialg_init(const std::vector<Tensor3>& y,
                      const MeasurementModel& meas, Index R,
                      const std::vector<Index>& L, const CouplingSpec& spec,
                      const Witness& w, const CpdOptions& cpd);

AlsResult coupled_als_fit(const std::vector<Tensor3>& y,
                          const MeasurementModel& meas, Index R,
                          const std::vector<Index>& L,
                          const CouplingSpec& spec, AlsState init,
                          const AlsOptions& opts);

enum class AlsInit { random, semialg };

struct MultistartOptions {
  AlsOptions als;
  AlsInit init = AlsInit::random;
  // Random init: number of independent ALS runs. Semi-algebraic init: number
  // of restarts of every internal CPD, followed by a single ALS run.
  int restarts = 1;
  std::uint64_t seed = 0;
  // Required for semi-algebraic init.
  std::optional<Witness> witness;
  // Iteration limit and tolerance for the CPDs of semi-algebraic init.
  CpdOptions cpd;
};

// Keeps the run with the lowest objective; ties go to the lowest index.
AlsResult coupled_als_multistart(const std::vector<Tensor3>& y,
                                 const MeasurementModel& meas, Index R,
                                 const std::vector<Index>& L,
                                 const CouplingSpec& spec,
                                 const MultistartOptions& opts);

}  // namespace perstd
