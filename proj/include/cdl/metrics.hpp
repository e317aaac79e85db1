#ifndef CDL_METRICS_HPP
#define CDL_METRICS_HPP

#include "cdl/core_model.hpp"
#include "cdl/imaging.hpp"

#include <span>

namespace cdl {

/// sqrt(||x - xhat||_F^2 / numel(x))
double rmse(const Matrix& x, const Matrix& xhat);
double rmse(const Image& x, const Image& xhat);

struct RecoveryThreshold {
  double epsilon = 0.01;
};

/// Fraction of true atoms d for which some learned atom dh satisfies
/// min(||d - dh||, ||d + dh||) < epsilon. Atoms are compared after scaling
/// both to unit l2 norm. A learned atom may match several true atoms.
double atom_recovery_ratio(const Matrix& d_true, const Matrix& d_learned,
                           RecoveryThreshold threshold = {});

/// Fraction of true atoms d for which some learned atom dh satisfies
/// 1 - |cos(d, dh)| < tolerance. Looser than the Euclidean rule for the same
/// number; reported alongside it.
double atom_recovery_ratio_cosine(const Matrix& d_true, const Matrix& d_learned,
                                  double tolerance = 0.01);

/// 10 log10(peak^2 / MSE); +inf for identical inputs.
double psnr(std::span<const double> ref, std::span<const double> test, double peak = 1.0);
double psnr(const Image& ref, const Image& test, double peak = 1.0);

/// 10 log10(||ref||^2 / ||ref - estimate||^2); +inf for identical inputs.
double snr_db(std::span<const double> ref, std::span<const double> estimate);
double snr_db(const Vector& ref, const Vector& estimate);

/// Mean SSIM over all 11x11 Gaussian (sigma 1.5) windows lying fully inside
/// the image, with C1 = (0.01 L)^2, C2 = (0.03 L)^2 and L = 1.
double ssim(const Image& ref, const Image& test);

}  // namespace cdl

#endif  // CDL_METRICS_HPP
