#include "perstd/rng.hpp"

#include <cmath>
#include <numbers>

namespace perstd {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b) {
  return mix64(mix64(mix64(seed) ^ (a + kGolden)) ^ (b + 2 * kGolden));
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed ^ mix64(stream + kGolden))) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

Matrix Rng::gaussian(Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index p = 0; p < m.size(); ++p) m.data()[p] = normal();
  return m;
}

Matrix Rng::uniform(Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index p = 0; p < m.size(); ++p) m.data()[p] = uniform();
  return m;
}

Tensor3 Rng::gaussian(const Dims& dims) {
  Tensor3 t(dims);
  for (Index p = 0; p < t.size(); ++p) t.values()[p] = normal();
  return t;
}

}  // namespace perstd
