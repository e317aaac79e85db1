#ifndef CDL_CORE_MODEL_HPP
#define CDL_CORE_MODEL_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdl {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when matrix shapes do not agree with each other or with a declared
/// dimension record.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed or unsupported on-disk data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for out-of-range configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// M: LR patch length, N: HR / guidance patch length, K: atoms per dictionary.
struct Dims {
  Index m = 0;
  Index n = 0;
  Index k = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// The six coupled dictionaries. LR matrices are M x K, HR and guidance
/// matrices are N x K.
struct CoupledDictionarySet {
  Matrix psi_c_l;
  Matrix psi_l;
  Matrix psi_c_h;
  Matrix psi_h;
  Matrix phi_c;
  Matrix phi;
  Dims dims;
};

/// Codes of one sample: common part z, target-only part u, guidance-only part v.
struct JointSparseCode {
  Vector z;
  Vector u;
  Vector v;

  Index nonzeros() const;
};

/// Column-stacked registered patch triples; column i of each matrix belongs
/// to the same sample.
struct TrainingBatch {
  Matrix x_l;
  Matrix x_h;
  Matrix y;

  Index samples() const { return x_l.cols(); }
  /// Throws DimensionError when the three matrices disagree on the sample count.
  void check() const;
};

/// Replacement of degenerate atoms after every dictionary update sweep. An
/// atom is replaced when fewer than max(min_usage, min_relative_usage * mean
/// usage of its dictionary) samples use it, when it is
/// nearly parallel to an earlier atom of the same dictionary
/// (|cos| > max_coherence), or, for a common pair, when one branch carries
/// less than `min_branch_share` of its unit norm.
struct AtomClearing {
  bool enabled = true;
  Index min_usage = 4;
  double min_relative_usage = 0.25;
  double max_coherence = 0.99;
  double min_branch_share = 0.05;

  void check() const;
};

struct TrainConfig {
  Index atoms = 128;
  Index sparsity = 6;
  int out_iter = 10;
  int in_iter = 20;
  double lambda = 1e-3;
  std::uint64_t seed = 0;
  /// 0 selects the number of hardware threads.
  int workers = 0;
  AtomClearing clearing;

  void check() const;
};

struct NormViolation {
  std::string block;
  Index column = 0;
  double norm = 0.0;
};

struct ValidationReport {
  std::vector<std::string> dimension_issues;
  std::vector<NormViolation> norm_violations;
  double max_norm_deviation = 0.0;
  bool finite = true;

  bool ok() const {
    return dimension_issues.empty() && norm_violations.empty() && finite;
  }
};

inline constexpr double kUnitNormTolerance = 1e-9;

/// Checks shapes, unit norms of the stacked common pairs and of the unique
/// LR / guidance atoms, and finiteness. HR blocks carry no norm constraint.
ValidationReport validate(const CoupledDictionarySet& dset,
                          double tolerance = kUnitNormTolerance);

void save_dictionary_set(const CoupledDictionarySet& dset,
                         const std::filesystem::path& path);
CoupledDictionarySet load_dictionary_set(const std::filesystem::path& path);

bool all_finite(const Matrix& m);

}  // namespace cdl

#endif  // CDL_CORE_MODEL_HPP
