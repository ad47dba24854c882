#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "perstd/io.hpp"
#include "perstd/rng.hpp"

using namespace perstd;

TEST_SUITE("io") {

TEST_CASE("tensor text round trip keeps 17 digits") {
  Rng rng(10);
  const Tensor3 t = rng.gaussian(Dims{3, 2, 4});
  std::stringstream ss;
  io::write_tensor(ss, t);
  CHECK(ss.str().rfind("T3 3 2 4\n", 0) == 0);
  CHECK(io::read_tensor(ss) == t);
}

TEST_CASE("matrix text is row-major") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  std::stringstream ss;
  io::write_matrix(ss, m);
  std::string tag;
  long long r, c;
  double first, second;
  ss >> tag >> r >> c >> first >> second;
  CHECK(tag == "M");
  CHECK(r == 2);
  CHECK(c == 3);
  CHECK(first == 1.0);
  CHECK(second == 2.0);
  std::stringstream again;
  io::write_matrix(again, m);
  CHECK(io::read_matrix(again) == m);
}

TEST_CASE("readers accept arbitrary whitespace") {
  std::stringstream ss("T3 1 1 2\n\n  0.5\t\n-1e3");
  const Tensor3 t = io::read_tensor(ss);
  CHECK(t(0, 0, 0) == 0.5);
  CHECK(t(0, 0, 1) == -1000.0);
}

TEST_CASE("malformed input is rejected") {
  std::stringstream wrong_tag("M 1 1 2");
  CHECK_THROWS_AS(io::read_tensor(wrong_tag), std::runtime_error);
  std::stringstream short_data("T3 2 1 1 4.0");
  CHECK_THROWS_AS(io::read_tensor(short_data), std::runtime_error);
  std::stringstream negative("M -1 2");
  CHECK_THROWS_AS(io::read_matrix(negative), std::runtime_error);
}

TEST_CASE("file helpers name the path on failure") {
  const auto missing = std::filesystem::temp_directory_path() / "perstd_no_such_file.t3";
  try {
    io::load_tensor(missing);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("perstd_no_such_file.t3") != std::string::npos);
  }

  const auto path = std::filesystem::temp_directory_path() / "perstd_io_test.mat";
  Rng rng(11);
  const Matrix m = rng.uniform(4, 3);
  io::save_matrix(path, m);
  CHECK(io::load_matrix(path) == m);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
