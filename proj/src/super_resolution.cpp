#include "cdl/super_resolution.hpp"

#include "cdl/parallel.hpp"
#include "cdl/sparse_coding.hpp"

#include <sstream>

namespace cdl {

void SrConfig::check(Index m, Index n) const {
  if (scale < 2) throw ConfigError("scale must be >= 2");
  if (patch_side < 1 || patch_side * patch_side != n) {
    std::ostringstream os;
    os << "patch side " << patch_side << " does not match dictionary patch length " << n;
    throw ConfigError(os.str());
  }
  if (m != n) {
    throw ConfigError("image super-resolution needs LR dictionaries over upscaled patches (M = N)");
  }
  if (overlap_stride < 1 || overlap_stride > patch_side) {
    throw ConfigError("overlap stride must lie in [1, patch side]");
  }
  if (sparsity < 1) throw ConfigError("sparsity must be >= 1");
  if (solver == SolverKind::kIsta && !(ista_lambda > 0.0)) {
    throw ConfigError("ISTA lambda must be > 0");
  }
}

namespace {

Matrix code_columns(const Matrix& signals, const CodingDictionary& dict, const SrConfig& cfg) {
  if (cfg.solver == SolverKind::kOmp) {
    return omp_batch(signals, dict, cfg.sparsity, cfg.workers);
  }
  Matrix codes(dict.size(), signals.cols());
  const IstaOptions options{cfg.ista_lambda, cfg.ista_max_iter, cfg.ista_tol};
  parallel_for(signals.cols(), cfg.workers, [&](std::ptrdiff_t begin, std::ptrdiff_t end) {
    for (Index i = begin; i < end; ++i) codes.col(i) = ista(signals.col(i), dict, options);
  });
  return codes;
}

void check_dims(const CoupledDictionarySet& dset) {
  const ValidationReport r = validate(dset, INFINITY);
  if (!r.dimension_issues.empty()) throw DimensionError(r.dimension_issues.front());
}

}  // namespace

Matrix super_resolve_patches(const Matrix& x_l, const Matrix& y, const CoupledDictionarySet& dset,
                             const SrConfig& cfg) {
  check_dims(dset);
  if (x_l.rows() != dset.dims.m || y.rows() != dset.dims.n || x_l.cols() != y.cols()) {
    throw DimensionError("patch matrices do not match the dictionary set");
  }
  const JointDictionary jd = stack_joint_dictionary(dset.psi_c_l, dset.psi_l, dset.phi_c, dset.phi);
  Matrix signals(x_l.rows() + y.rows(), x_l.cols());
  signals << x_l, y;
  const Index k = dset.dims.k;
  const Matrix codes = code_columns(signals, jd.dictionary, cfg);
  return dset.psi_c_h * codes.topRows(k) + dset.psi_h * codes.middleRows(k, k);
}

Vector super_resolve_patch(const Vector& x_l, const Vector& y, const CoupledDictionarySet& dset,
                           Index sparsity) {
  check_dims(dset);
  const JointDictionary jd = stack_joint_dictionary(dset.psi_c_l, dset.psi_l, dset.phi_c, dset.phi);
  const JointSparseCode code = omp_joint(SignalPair{x_l, y}, jd, sparsity);
  return dset.psi_c_h * code.z + dset.psi_h * code.u;
}

Matrix super_resolve_patches_without_side_info(const Matrix& x_l,
                                               const SingleModalityDictionarySet& dset,
                                               const SrConfig& cfg) {
  const Index k = dset.psi_c_l.cols();
  if (dset.psi_l.cols() != k || dset.psi_c_h.cols() != k || dset.psi_h.cols() != k ||
      dset.psi_l.rows() != dset.psi_c_l.rows() || dset.psi_h.rows() != dset.psi_c_h.rows()) {
    throw DimensionError("single-modality dictionary blocks disagree");
  }
  if (x_l.rows() != dset.psi_c_l.rows()) throw DimensionError("patch length does not match dictionary");
  Matrix d(dset.psi_c_l.rows(), 2 * k);
  d << dset.psi_c_l, dset.psi_l;
  const Matrix codes = code_columns(x_l, CodingDictionary(std::move(d)), cfg);
  return dset.psi_c_h * codes.topRows(k) + dset.psi_h * codes.bottomRows(k);
}

Image bicubic_upscale(const Image& lr, int scale) {
  return bicubic_resize(lr, upscaled_extent(lr.width, scale), upscaled_extent(lr.height, scale));
}

namespace {

Image restore_and_reassemble(PatchGrid grid, Matrix hr_patches, Index width, Index height) {
  grid.patches = std::move(hr_patches);
  return reassemble(grid, width, height);
}

}  // namespace

Image super_resolve_image(const Image& lr, const Image& guidance, const CoupledDictionarySet& dset,
                          const SrConfig& cfg) {
  check_dims(dset);
  cfg.check(dset.dims.m, dset.dims.n);
  if (upscaled_extent(lr.width, cfg.scale) != guidance.width ||
      upscaled_extent(lr.height, cfg.scale) != guidance.height) {
    std::ostringstream os;
    os << "guidance is " << guidance.width << "x" << guidance.height << " but LR " << lr.width
       << "x" << lr.height << " at scale " << cfg.scale << " needs "
       << upscaled_extent(lr.width, cfg.scale) << "x" << upscaled_extent(lr.height, cfg.scale);
    throw DimensionError(os.str());
  }
  const Image up = bicubic_resize(lr, guidance.width, guidance.height);
  PatchGrid target = extract_patches(up, cfg.patch_side, cfg.overlap_stride);
  const PatchGrid guide = extract_patches(guidance, cfg.patch_side, cfg.overlap_stride);
  Matrix hr = super_resolve_patches(target.patches, guide.patches, dset, cfg);
  return restore_and_reassemble(std::move(target), std::move(hr), guidance.width, guidance.height);
}

Image super_resolve_without_side_info(const Image& lr, const SingleModalityDictionarySet& dset,
                                      const SrConfig& cfg) {
  cfg.check(dset.psi_c_l.rows(), dset.psi_c_h.rows());
  const Image up = bicubic_upscale(lr, cfg.scale);
  PatchGrid target = extract_patches(up, cfg.patch_side, cfg.overlap_stride);
  Matrix hr = super_resolve_patches_without_side_info(target.patches, dset, cfg);
  return restore_and_reassemble(std::move(target), std::move(hr), up.width, up.height);
}

}  // namespace cdl
