#pragma once

// Plain-text tensor and matrix files.
//
//   T3 <n1> <n2> <n3>
//   <n1*n2*n3 values in storage order: first index fastest>
//
//   M <rows> <cols>
//   <rows*cols values, row-major>
//
// Values are written with 17 significant digits. Readers accept any
// whitespace between tokens.

#include <filesystem>
#include <iosfwd>

#include "perstd/tensor.hpp"

namespace perstd::io {

void write_tensor(std::ostream& os, const Tensor3& t);
Tensor3 read_tensor(std::istream& is);

void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor3& t);
Tensor3 load_tensor(const std::filesystem::path& path);

void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

}  // namespace perstd::io
