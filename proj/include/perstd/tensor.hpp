#pragma once

// Dense order-3 tensors and the multilinear algebra used throughout perstd.
//
// Storage layout: entry (i, j, k) of an n1 x n2 x n3 tensor lives at linear
// offset i + n1 * (j + n2 * k), i.e. the first index varies fastest.
//
// Matricization follows the same convention: unfold(t, 1) is the
// (n2 * n3) x n1 matrix whose column i is the slice t(i, :, :) vectorized with
// j varying fastest. With this choice
//
//   unfold([[A, B, C]], 1) == khatri_rao(C, B) * A^T
//   unfold([[A, B, C]], 2) == khatri_rao(C, A) * B^T
//   unfold([[A, B, C]], 3) == khatri_rao(B, A) * C^T
//
// Modes are numbered 1..3 in the public API; entry indices are 0-based.

#include <array>
#include <cstddef>
#include <span>

#include <Eigen/Dense>

namespace perstd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Dims = std::array<Index, 3>;

class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Index n1, Index n2, Index n3);
  explicit Tensor3(const Dims& dims);
  Tensor3(const Dims& dims, Vector values);

  static Tensor3 zeros(const Dims& dims) { return Tensor3(dims); }

  const Dims& dims() const { return dims_; }
  // mode in {1,2,3}
  Index dim(int mode) const;
  Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }

  double& operator()(Index i, Index j, Index k) {
    return values_[i + dims_[0] * (j + dims_[1] * k)];
  }
  double operator()(Index i, Index j, Index k) const {
    return values_[i + dims_[0] * (j + dims_[1] * k)];
  }

  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  std::span<const double> data() const {
    return {values_.data(), static_cast<std::size_t>(values_.size())};
  }

  double norm() const { return values_.norm(); }
  double squared_norm() const { return values_.squaredNorm(); }
  bool all_finite() const { return values_.allFinite(); }

  Tensor3& operator+=(const Tensor3& other);
  Tensor3& operator-=(const Tensor3& other);
  Tensor3& operator*=(double s);

  friend bool operator==(const Tensor3& a, const Tensor3& b) {
    return a.dims_ == b.dims_ && a.values_ == b.values_;
  }

 private:
  Dims dims_{0, 0, 0};
  Vector values_;
};

Tensor3 operator+(Tensor3 a, const Tensor3& b);
Tensor3 operator-(Tensor3 a, const Tensor3& b);
Tensor3 operator*(double s, Tensor3 a);

// Three factor matrices with a shared column count (the rank).
struct CpdFactors {
  std::array<Matrix, 3> factors;

  CpdFactors() = default;
  CpdFactors(Matrix a, Matrix b, Matrix c);

  Index rank() const { return factors[0].cols(); }
  Dims dims() const {
    return {factors[0].rows(), factors[1].rows(), factors[2].rows()};
  }
  const Matrix& a() const { return factors[0]; }
  const Matrix& b() const { return factors[1]; }
  const Matrix& c() const { return factors[2]; }
  Matrix& operator[](int j) { return factors[j]; }
  const Matrix& operator[](int j) const { return factors[j]; }
};

Matrix unfold(const Tensor3& t, int mode);
Tensor3 fold(const Matrix& m, int mode, const Dims& dims);

// t x_mode b: every mode-`mode` fiber is multiplied by b.
Tensor3 mode_product(const Tensor3& t, const Matrix& b, int mode);

// t x_1 b1 x_2 b2 x_3 b3.
Tensor3 multilinear_product(const Tensor3& t, const Matrix& b1,
                            const Matrix& b2, const Matrix& b3);

// Column-wise Kronecker product; column r is kron(a.col(r), b.col(r)).
Matrix khatri_rao(const Matrix& a, const Matrix& b);

// Sum of rank-one terms a_r o b_r o c_r.
Tensor3 cp_reconstruct(const CpdFactors& f);
Tensor3 cp_reconstruct(const Matrix& a, const Matrix& b, const Matrix& c);

// Gram matrix of khatri_rao(a, b) without forming it: (a^T a) .* (b^T b).
Matrix khatri_rao_gram(const Matrix& a, const Matrix& b);

// khatri_rao(x, y)^T * unfold(t, mode) for the two factors complementary to
// `mode`, computed without forming the Khatri-Rao product. For mode 1 the
// pair is (x3, x2), for mode 2 (x3, x1), for mode 3 (x2, x1); the argument
// order is always (mode-1, mode-2, mode-3) with the `mode` entry ignored.
Matrix mttkrp(const Tensor3& t, const std::array<const Matrix*, 3>& factors,
              int mode);

}  // namespace perstd
