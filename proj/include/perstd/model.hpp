#pragma once

// Personalized coupled model: Y_k = P_k(C) + D_k with
//   P_k(C) = C x_1 P_{k,1} x_2 P_{k,2} x_3 P_{k,3},
//   C = [[C_1, C_2, C_3]] (rank R),  D_k = [[D_{k,1}, D_{k,2}, D_{k,3}]] (rank L_k).
// Dataset indices are 0-based here; user-facing reports print them 1-based.

#include <array>
#include <vector>

#include "perstd/tensor.hpp"

namespace perstd {

using MeasurementOps = std::array<Matrix, 3>;

struct MeasurementModel {
  // ops[k][j] is P_{k,j}, of size N_{k,j} x M_j.
  std::vector<MeasurementOps> ops;

  std::size_t size() const { return ops.size(); }
  const MeasurementOps& operator[](std::size_t k) const { return ops[k]; }
  Dims common_dims() const;
  Dims dataset_dims(std::size_t k) const;
  // Throws std::invalid_argument if column counts disagree across datasets.
  void validate() const;
};

struct CoupledModel {
  CpdFactors common;                  // C_j: M_j x R
  std::vector<CpdFactors> distinct;   // D_{k,j}: N_{k,j} x L_k (L_k may be 0)
};

// eta: the fully unique dataset; xi[j]: the mode-(j+1) unique dataset.
struct Witness {
  Index eta = 0;
  std::array<Index, 3> xi{0, 0, 0};

  friend bool operator==(const Witness&, const Witness&) = default;
};

Tensor3 apply_measurement(const Tensor3& c, const MeasurementOps& p);

// Factor matrices of P_k([[C]]): P_{k,j} C_j.
CpdFactors measured_factors(const CpdFactors& common, const MeasurementOps& p);

// Identity operators, i.e. Y_k observes C directly.
MeasurementOps identity_ops(const Dims& dims);

}  // namespace perstd
