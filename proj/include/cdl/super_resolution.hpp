#ifndef CDL_SUPER_RESOLUTION_HPP
#define CDL_SUPER_RESOLUTION_HPP

#include "cdl/core_model.hpp"
#include "cdl/dictionary_learning.hpp"
#include "cdl/imaging.hpp"

namespace cdl {

enum class SolverKind { kOmp, kIsta };

struct SrConfig {
  int scale = 4;
  Index patch_side = 8;
  Index overlap_stride = 1;
  Index sparsity = 8;
  SolverKind solver = SolverKind::kOmp;
  double ista_lambda = 1e-2;
  int ista_max_iter = 500;
  double ista_tol = 1e-6;
  int workers = 0;

  /// Validates the configuration against the patch lengths of a dictionary
  /// set (M = rows of the LR blocks, N = rows of the HR blocks).
  void check(Index m, Index n) const;
};

/// Codes [x_l; y] jointly and returns psi_c_h z + psi_h u. Inputs must be
/// mean-removed.
Vector super_resolve_patch(const Vector& x_l, const Vector& y, const CoupledDictionarySet& dset,
                           Index sparsity);

/// Column-wise batch version of super_resolve_patch (N x P output).
Matrix super_resolve_patches(const Matrix& x_l, const Matrix& y, const CoupledDictionarySet& dset,
                             const SrConfig& cfg);

/// Codes x_l over [psi_c_l, psi_l] alone and reconstructs with the HR pair.
Matrix super_resolve_patches_without_side_info(const Matrix& x_l,
                                               const SingleModalityDictionarySet& dset,
                                               const SrConfig& cfg);

/// Bicubic upscale to ceil(size * scale).
Image bicubic_upscale(const Image& lr, int scale);

/// Full pipeline: bicubic upscale, aligned patch pairs, DC removal, joint
/// coding, HR reconstruction, LR patch mean restored, overlap averaging.
Image super_resolve_image(const Image& lr, const Image& guidance, const CoupledDictionarySet& dset,
                          const SrConfig& cfg);

/// The same pipeline without the guidance branch.
Image super_resolve_without_side_info(const Image& lr, const SingleModalityDictionarySet& dset,
                                      const SrConfig& cfg);

}  // namespace cdl

#endif  // CDL_SUPER_RESOLUTION_HPP
