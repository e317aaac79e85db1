#include "helpers.hpp"

#include "cdl/core_model.hpp"
#include "cdl/dictionary_learning.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>

using namespace cdl;

namespace {

CoupledDictionarySet random_set(Index m, Index n, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const LrGuidanceDictionaries d = initialize_dictionaries(m, n, k, rng);
  CoupledDictionarySet s;
  s.psi_c_l = d.psi_c_l;
  s.psi_l = d.psi_l;
  s.phi_c = d.phi_c;
  s.phi = d.phi;
  s.psi_c_h = test::gaussian(n, k, rng);
  s.psi_h = test::gaussian(n, k, rng);
  s.dims = Dims{m, n, k};
  return s;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("validate accepts a normalized set") {
  const CoupledDictionarySet s = random_set(4, 9, 5, 1);
  const ValidationReport r = validate(s);
  CHECK(r.ok());
  CHECK(r.max_norm_deviation <= 1e-9);
}

TEST_CASE("validate flags a zeroed common atom by column") {
  CoupledDictionarySet s = random_set(4, 9, 5, 2);
  s.psi_c_l.col(3).setZero();
  s.phi_c.col(3).setZero();
  const ValidationReport r = validate(s);
  REQUIRE(r.norm_violations.size() == 1);
  CHECK(r.norm_violations[0].block == "common");
  CHECK(r.norm_violations[0].column == 3);
  CHECK(r.norm_violations[0].norm == 0.0);
}

TEST_CASE("validate flags wrong row counts") {
  CoupledDictionarySet s = random_set(4, 9, 5, 3);
  s.psi_l = Matrix::Ones(5, 5);
  const ValidationReport r = validate(s);
  REQUIRE_FALSE(r.dimension_issues.empty());
  CHECK(r.dimension_issues[0].find("psi_l") != std::string::npos);
}

TEST_CASE("validate flags non-finite entries") {
  CoupledDictionarySet s = random_set(4, 9, 5, 4);
  s.psi_h(0, 0) = NAN;
  CHECK_FALSE(validate(s).finite);
}

TEST_CASE("dictionary file round trip is bit exact" * doctest::test_suite("oracle")) {
  const auto dir = test::scratch_dir("dict_io");
  const CoupledDictionarySet s = random_set(6, 16, 7, 5);
  save_dictionary_set(s, dir / "d.cdl");
  const CoupledDictionarySet t = load_dictionary_set(dir / "d.cdl");
  CHECK(t.dims == s.dims);
  CHECK(bit_equal(t.psi_c_l, s.psi_c_l));
  CHECK(bit_equal(t.psi_l, s.psi_l));
  CHECK(bit_equal(t.psi_c_h, s.psi_c_h));
  CHECK(bit_equal(t.psi_h, s.psi_h));
  CHECK(bit_equal(t.phi_c, s.phi_c));
  CHECK(bit_equal(t.phi, s.phi));
}

TEST_CASE("truncated dictionary file names the short block") {
  const auto dir = test::scratch_dir("dict_trunc");
  const CoupledDictionarySet s = random_set(3, 4, 2, 6);
  save_dictionary_set(s, dir / "d.cdl");
  const auto size = std::filesystem::file_size(dir / "d.cdl");
  std::filesystem::resize_file(dir / "d.cdl", size - 8);
  try {
    load_dictionary_set(dir / "d.cdl");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("phi") != std::string::npos);
    CHECK(std::string(e.what()).find("short payload") != std::string::npos);
  }
}

TEST_CASE("wrong magic is rejected") {
  const auto dir = test::scratch_dir("dict_magic");
  std::ofstream(dir / "d.cdl") << "XXXX 1 1 1\n";
  try {
    load_dictionary_set(dir / "d.cdl");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
}

TEST_CASE("saving inconsistent shapes is refused") {
  CoupledDictionarySet s = random_set(3, 4, 2, 7);
  s.phi = Matrix::Ones(4, 3);
  const auto dir = test::scratch_dir("dict_bad");
  CHECK_THROWS_AS(save_dictionary_set(s, dir / "d.cdl"), DimensionError);
}

TEST_CASE("training batch sample counts must agree") {
  TrainingBatch b{Matrix::Zero(2, 3), Matrix::Zero(4, 3), Matrix::Zero(4, 2)};
  CHECK_THROWS_AS(b.check(), DimensionError);
  b.y = Matrix::Zero(4, 3);
  CHECK_NOTHROW(b.check());
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.check());
  c.atoms = 0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = TrainConfig{};
  c.sparsity = 0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = TrainConfig{};
  c.lambda = 0.0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = TrainConfig{};
  c.clearing.max_coherence = 0.0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = TrainConfig{};
  c.clearing.min_relative_usage = 1.0;
  CHECK_THROWS_AS(c.check(), ConfigError);
}

TEST_CASE("joint code nonzeros") {
  JointSparseCode c{Vector::Zero(3), Vector::Zero(3), Vector::Zero(3)};
  c.z(1) = 2.0;
  c.v(2) = -1.0;
  CHECK(c.nonzeros() == 2);
}
