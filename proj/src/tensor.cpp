#include "perstd/tensor.hpp"

#include <stdexcept>
#include <string>

namespace perstd {

namespace {

void check_mode(int mode) {
  if (mode < 1 || mode > 3) {
    throw std::invalid_argument("mode must be 1, 2 or 3, got " +
                                std::to_string(mode));
  }
}

void check_dims(const Dims& dims) {
  for (Index n : dims) {
    if (n < 0) throw std::invalid_argument("tensor dimensions must be >= 0");
  }
}

void check_same_dims(const Tensor3& a, const Tensor3& b) {
  if (a.dims() != b.dims()) {
    throw std::invalid_argument("tensor dimension mismatch");
  }
}

// Column-major view of frontal slice k as an n1 x n2 matrix.
Eigen::Map<const Matrix> slice(const Tensor3& t, Index k) {
  const auto& d = t.dims();
  return {t.values().data() + k * d[0] * d[1], d[0], d[1]};
}

}  // namespace

Tensor3::Tensor3(Index n1, Index n2, Index n3) : Tensor3(Dims{n1, n2, n3}) {}

Tensor3::Tensor3(const Dims& dims) : dims_(dims) {
  check_dims(dims);
  values_ = Vector::Zero(dims[0] * dims[1] * dims[2]);
}

Tensor3::Tensor3(const Dims& dims, Vector values)
    : dims_(dims), values_(std::move(values)) {
  check_dims(dims);
  if (values_.size() != dims[0] * dims[1] * dims[2]) {
    throw std::invalid_argument("value count does not match tensor dims");
  }
}

Index Tensor3::dim(int mode) const {
  check_mode(mode);
  return dims_[mode - 1];
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  check_same_dims(*this, other);
  values_ += other.values_;
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
  check_same_dims(*this, other);
  values_ -= other.values_;
  return *this;
}

Tensor3& Tensor3::operator*=(double s) {
  values_ *= s;
  return *this;
}

Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

CpdFactors::CpdFactors(Matrix a, Matrix b, Matrix c)
    : factors{std::move(a), std::move(b), std::move(c)} {
  if (factors[0].cols() != factors[1].cols() ||
      factors[0].cols() != factors[2].cols()) {
    throw std::invalid_argument("CPD factors must share a column count");
  }
}

Matrix unfold(const Tensor3& t, int mode) {
  check_mode(mode);
  const auto [n1, n2, n3] = t.dims();
  switch (mode) {
    case 1: {
      Matrix m(n2 * n3, n1);
      for (Index k = 0; k < n3; ++k)
        for (Index j = 0; j < n2; ++j)
          for (Index i = 0; i < n1; ++i) m(j + n2 * k, i) = t(i, j, k);
      return m;
    }
    case 2: {
      Matrix m(n1 * n3, n2);
      for (Index k = 0; k < n3; ++k)
        for (Index j = 0; j < n2; ++j)
          for (Index i = 0; i < n1; ++i) m(i + n1 * k, j) = t(i, j, k);
      return m;
    }
    default:
      return Eigen::Map<const Matrix>(t.values().data(), n1 * n2, n3);
  }
}

Tensor3 fold(const Matrix& m, int mode, const Dims& dims) {
  check_mode(mode);
  check_dims(dims);
  const auto [n1, n2, n3] = dims;
  const Index cols = dims[mode - 1];
  const Index rows = n1 * n2 * n3 / (cols == 0 ? 1 : cols);
  if (m.cols() != cols || (cols != 0 && m.rows() != rows)) {
    throw std::invalid_argument("matrix shape inconsistent with fold dims");
  }
  Tensor3 t(dims);
  switch (mode) {
    case 1:
      for (Index k = 0; k < n3; ++k)
        for (Index j = 0; j < n2; ++j)
          for (Index i = 0; i < n1; ++i) t(i, j, k) = m(j + n2 * k, i);
      break;
    case 2:
      for (Index k = 0; k < n3; ++k)
        for (Index j = 0; j < n2; ++j)
          for (Index i = 0; i < n1; ++i) t(i, j, k) = m(i + n1 * k, j);
      break;
    default:
      t.values() = Eigen::Map<const Vector>(m.data(), m.size());
  }
  return t;
}

Tensor3 mode_product(const Tensor3& t, const Matrix& b, int mode) {
  check_mode(mode);
  if (b.cols() != t.dim(mode)) {
    throw std::invalid_argument("mode_product: matrix has " +
                                std::to_string(b.cols()) +
                                " columns, tensor mode " +
                                std::to_string(mode) + " has size " +
                                std::to_string(t.dim(mode)));
  }
  Dims out = t.dims();
  out[mode - 1] = b.rows();
  return fold(unfold(t, mode) * b.transpose(), mode, out);
}

Tensor3 multilinear_product(const Tensor3& t, const Matrix& b1,
                            const Matrix& b2, const Matrix& b3) {
  return mode_product(mode_product(mode_product(t, b1, 1), b2, 2), b3, 3);
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("khatri_rao: column counts differ");
  }
  const Index ra = a.rows(), rb = b.rows();
  Matrix out(ra * rb, a.cols());
  for (Index r = 0; r < a.cols(); ++r) {
    for (Index i = 0; i < ra; ++i) {
      out.col(r).segment(i * rb, rb) = a(i, r) * b.col(r);
    }
  }
  return out;
}

Matrix khatri_rao_gram(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("khatri_rao_gram: column counts differ");
  }
  return (a.transpose() * a).cwiseProduct(b.transpose() * b);
}

Tensor3 cp_reconstruct(const Matrix& a, const Matrix& b, const Matrix& c) {
  if (a.cols() != b.cols() || a.cols() != c.cols()) {
    throw std::invalid_argument("cp_reconstruct: factor column counts differ");
  }
  Tensor3 t(a.rows(), b.rows(), c.rows());
  if (t.size() == 0) return t;
  Eigen::Map<Matrix> unf(t.values().data(), a.rows() * b.rows(), c.rows());
  unf.noalias() = khatri_rao(b, a) * c.transpose();
  return t;
}

Tensor3 cp_reconstruct(const CpdFactors& f) {
  return cp_reconstruct(f.a(), f.b(), f.c());
}

Matrix mttkrp(const Tensor3& t, const std::array<const Matrix*, 3>& factors,
              int mode) {
  check_mode(mode);
  const auto [n1, n2, n3] = t.dims();
  auto need = [&](int m, Index rows) -> const Matrix& {
    const Matrix* f = factors[m - 1];
    if (f == nullptr || f->rows() != rows) {
      throw std::invalid_argument("mttkrp: factor " + std::to_string(m) +
                                  " missing or wrong row count");
    }
    return *f;
  };
  switch (mode) {
    case 1: {
      const Matrix& b = need(2, n2);
      const Matrix& c = need(3, n3);
      if (b.cols() != c.cols()) throw std::invalid_argument("mttkrp: rank");
      Matrix acc = Matrix::Zero(n1, b.cols());
      for (Index k = 0; k < n3; ++k) {
        acc.noalias() += (slice(t, k) * b) * c.row(k).asDiagonal();
      }
      return acc.transpose();
    }
    case 2: {
      const Matrix& a = need(1, n1);
      const Matrix& c = need(3, n3);
      if (a.cols() != c.cols()) throw std::invalid_argument("mttkrp: rank");
      Matrix acc = Matrix::Zero(n2, a.cols());
      for (Index k = 0; k < n3; ++k) {
        acc.noalias() += (slice(t, k).transpose() * a) * c.row(k).asDiagonal();
      }
      return acc.transpose();
    }
    default: {
      const Matrix& a = need(1, n1);
      const Matrix& b = need(2, n2);
      if (a.cols() != b.cols()) throw std::invalid_argument("mttkrp: rank");
      Matrix out(a.cols(), n3);
      Matrix w(a.cols(), n2);
      for (Index k = 0; k < n3; ++k) {
        w.noalias() = a.transpose() * slice(t, k);
        out.col(k) = w.cwiseProduct(b.transpose()).rowwise().sum();
      }
      return out;
    }
  }
}

}  // namespace perstd
