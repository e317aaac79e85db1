#ifndef CDL_SPARSE_CODING_HPP
#define CDL_SPARSE_CODING_HPP

#include "cdl/core_model.hpp"

#include <vector>

namespace cdl {

/// A dictionary prepared for pursuit: atoms plus their l2 norms and Gram
/// matrix. Every atom must be finite with a strictly positive norm.
class CodingDictionary {
 public:
  CodingDictionary() = default;
  explicit CodingDictionary(Matrix atoms);

  const Matrix& atoms() const { return atoms_; }
  const Vector& norms() const { return norms_; }
  const Matrix& gram() const { return gram_; }
  Index signal_length() const { return atoms_.rows(); }
  Index size() const { return atoms_.cols(); }

 private:
  Matrix atoms_;
  Vector norms_;
  Matrix gram_;
};

/// The stacked matrix [[psi_c_l, psi_l, 0], [phi_c, 0, phi]] of size
/// (M+N) x 3K. Column blocks: [0,K) common, [K,2K) target-only,
/// [2K,3K) guidance-only.
struct JointDictionary {
  Dims dims;
  CodingDictionary dictionary;

  const Matrix& stacked() const { return dictionary.atoms(); }
  const Vector& column_norms() const { return dictionary.norms(); }
};

JointDictionary stack_joint_dictionary(const Matrix& psi_c_l, const Matrix& psi_l,
                                       const Matrix& phi_c, const Matrix& phi);

/// Mean-removed target LR patch and guidance patch.
struct SignalPair {
  Vector x_l;
  Vector y;
};

Vector stack_signal(const SignalPair& sig);
/// Splits a 3K coefficient vector into its (z, u, v) blocks.
JointSparseCode split_code(const Vector& coefficients, Index k);
Vector join_code(const JointSparseCode& code);

/// Relative residual at which pursuit stops early.
inline constexpr double kOmpRelativeTolerance = 1e-12;

struct OmpTrace {
  std::vector<Index> support;          // in selection order
  std::vector<double> residual_norms;  // after each selection
  Vector residual;                     // final residual
};

/// Orthogonal matching pursuit with norm-normalized atom selection and an
/// unrestricted least-squares refit on the selected (unnormalized) atoms.
/// Requires 1 <= budget <= min(atoms, signal length).
Vector omp(const Vector& signal, const CodingDictionary& dict, Index budget,
           OmpTrace* trace = nullptr);

/// Codes every column of `signals`; returns a size x T coefficient matrix.
/// Columns are independent, so the result does not depend on `workers`.
Matrix omp_batch(const Matrix& signals, const CodingDictionary& dict, Index budget,
                 int workers = 0);

JointSparseCode omp_joint(const SignalPair& sig, const JointDictionary& jd, Index budget,
                          OmpTrace* trace = nullptr);

struct IstaOptions {
  double lambda = 0.0;
  int max_iter = 500;
  double tol = 1e-6;
};

struct IstaTrace {
  std::vector<double> objective;  // after each iteration
  double lipschitz = 0.0;         // largest eigenvalue of D^T D
};

/// Iterative soft thresholding for ||signal - D c||^2 + lambda ||c||_1.
Vector ista(const Vector& signal, const CodingDictionary& dict, const IstaOptions& options,
            IstaTrace* trace = nullptr);

JointSparseCode ista_joint(const SignalPair& sig, const JointDictionary& jd,
                           const IstaOptions& options, IstaTrace* trace = nullptr);

/// Largest eigenvalue of a symmetric positive semidefinite matrix, by power
/// iteration.
double largest_eigenvalue(const Matrix& spd);

/// ||[x_l; y] - D [z; u; v]||_2
double residual_norm(const SignalPair& sig, const JointDictionary& jd,
                     const JointSparseCode& code);

}  // namespace cdl

#endif  // CDL_SPARSE_CODING_HPP
