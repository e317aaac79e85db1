#ifndef CDL_TESTS_HELPERS_HPP
#define CDL_TESTS_HELPERS_HPP

#include "cdl/core_model.hpp"
#include "cdl/dictionary_learning.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace cdl::test {

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  }
  return m;
}

inline Matrix unit_columns(Index rows, Index cols, std::mt19937_64& rng) {
  return gaussian(rows, cols, rng).colwise().normalized();
}

/// Random LR/guidance dictionaries with unit stacked common pairs and unit
/// unique atoms.
inline LrGuidanceDictionaries random_dicts(Index m, Index n, Index k, std::mt19937_64& rng) {
  return initialize_dictionaries(m, n, k, rng);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cdl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cdl::test

#endif  // CDL_TESTS_HELPERS_HPP
