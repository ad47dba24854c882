#include "perstd/io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace perstd::io {

namespace {

Index read_extent(std::istream& is, const char* what) {
  long long n = -1;
  if (!(is >> n) || n < 0) {
    throw std::runtime_error(std::string("bad or missing ") + what);
  }
  return static_cast<Index>(n);
}

void expect_tag(std::istream& is, const std::string& tag) {
  std::string got;
  if (!(is >> got) || got != tag) {
    throw std::runtime_error("expected header tag '" + tag + "', got '" + got +
                             "'");
  }
}

double read_value(std::istream& is, Index pos) {
  double v;
  if (!(is >> v)) {
    throw std::runtime_error("unexpected end of data at value " +
                             std::to_string(pos));
  }
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor3& t) {
  const auto& d = t.dims();
  os << "T3 " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n'
     << std::setprecision(17);
  const Index row = d[0] > 0 ? d[0] : 1;
  for (Index p = 0; p < t.size(); ++p) {
    os << t.values()[p] << ((p + 1) % row == 0 ? '\n' : ' ');
  }
}

Tensor3 read_tensor(std::istream& is) {
  expect_tag(is, "T3");
  Dims d;
  d[0] = read_extent(is, "n1");
  d[1] = read_extent(is, "n2");
  d[2] = read_extent(is, "n3");
  Tensor3 t(d);
  for (Index p = 0; p < t.size(); ++p) t.values()[p] = read_value(is, p);
  return t;
}

void write_matrix(std::ostream& os, const Matrix& m) {
  os << "M " << m.rows() << ' ' << m.cols() << '\n' << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      os << m(i, j) << (j + 1 == m.cols() ? '\n' : ' ');
    }
  }
}

Matrix read_matrix(std::istream& is) {
  expect_tag(is, "M");
  const Index rows = read_extent(is, "rows");
  const Index cols = read_extent(is, "cols");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = read_value(is, i * cols + j);
  return m;
}

void save_tensor(const std::filesystem::path& path, const Tensor3& t) {
  auto out = open_out(path);
  write_tensor(out, t);
}

Tensor3 load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_tensor(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  auto out = open_out(path);
  write_matrix(out, m);
}

Matrix load_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_matrix(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace perstd::io
