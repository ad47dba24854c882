#include "perstd/model.hpp"

#include <stdexcept>
#include <string>

namespace perstd {

Dims MeasurementModel::common_dims() const {
  if (ops.empty()) throw std::invalid_argument("empty measurement model");
  return {ops[0][0].cols(), ops[0][1].cols(), ops[0][2].cols()};
}

Dims MeasurementModel::dataset_dims(std::size_t k) const {
  return {ops.at(k)[0].rows(), ops.at(k)[1].rows(), ops.at(k)[2].rows()};
}

void MeasurementModel::validate() const {
  const Dims m = common_dims();
  for (std::size_t k = 0; k < ops.size(); ++k) {
    for (int j = 0; j < 3; ++j) {
      if (ops[k][j].cols() != m[j]) {
        throw std::invalid_argument(
            "P_{" + std::to_string(k + 1) + "," + std::to_string(j + 1) +
            "} has " + std::to_string(ops[k][j].cols()) + " columns, expected " +
            std::to_string(m[j]));
      }
    }
  }
}

Tensor3 apply_measurement(const Tensor3& c, const MeasurementOps& p) {
  return multilinear_product(c, p[0], p[1], p[2]);
}

CpdFactors measured_factors(const CpdFactors& common, const MeasurementOps& p) {
  return {p[0] * common[0], p[1] * common[1], p[2] * common[2]};
}

MeasurementOps identity_ops(const Dims& dims) {
  return {Matrix::Identity(dims[0], dims[0]), Matrix::Identity(dims[1], dims[1]),
          Matrix::Identity(dims[2], dims[2])};
}

}  // namespace perstd
