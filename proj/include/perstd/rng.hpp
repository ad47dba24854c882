#pragma once

// Counter-based random numbers with a platform-independent transform.
//
// Draw n of generator (seed, stream) is splitmix64's finalizer applied to
// key + (n + 1) * 0x9E3779B97F4A7C15, where key mixes seed and stream.
// Uniforms take the top 53 bits; normals use Box-Muller on two consecutive
// uniforms and keep only the cosine branch. Nothing here depends on the
// standard library's distribution implementations, so sequences are
// identical across compilers.

#include <cstdint>

#include "perstd/tensor.hpp"

namespace perstd {

std::uint64_t mix64(std::uint64_t x);

// Independent seed for a sub-task, e.g. derive_seed(seed, trial, restart).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  // Standard normal.
  double normal();

  // Column-major fill.
  Matrix gaussian(Index rows, Index cols);
  Matrix uniform(Index rows, Index cols);
  Tensor3 gaussian(const Dims& dims);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace perstd
