#include "cdl/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace cdl {

double rmse(const Matrix& x, const Matrix& xhat) {
  if (x.rows() != xhat.rows() || x.cols() != xhat.cols()) {
    throw DimensionError("rmse: shape mismatch");
  }
  if (x.size() == 0) return 0.0;
  return std::sqrt((x - xhat).squaredNorm() / static_cast<double>(x.size()));
}

double rmse(const Image& x, const Image& xhat) {
  if (!x.same_size(xhat)) throw DimensionError("rmse: image sizes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.pixels.size(); ++i) {
    const double d = x.pixels[i] - xhat.pixels[i];
    acc += d * d;
  }
  return x.pixels.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(x.pixels.size()));
}

double atom_recovery_ratio(const Matrix& d_true, const Matrix& d_learned,
                           RecoveryThreshold threshold) {
  if (d_true.rows() != d_learned.rows()) throw DimensionError("atom lengths differ");
  if (!(threshold.epsilon > 0.0)) throw ConfigError("recovery threshold must be > 0");
  if (d_true.cols() == 0) return 0.0;
  const Matrix learned = d_learned.colwise().normalized();
  Index recovered = 0;
  for (Index j = 0; j < d_true.cols(); ++j) {
    const Vector d = d_true.col(j).normalized();
    for (Index i = 0; i < learned.cols(); ++i) {
      const double dist = std::min((d - learned.col(i)).norm(), (d + learned.col(i)).norm());
      if (dist < threshold.epsilon) {
        ++recovered;
        break;
      }
    }
  }
  return static_cast<double>(recovered) / static_cast<double>(d_true.cols());
}

double atom_recovery_ratio_cosine(const Matrix& d_true, const Matrix& d_learned,
                                  double tolerance) {
  if (d_true.rows() != d_learned.rows()) throw DimensionError("atom lengths differ");
  if (!(tolerance > 0.0)) throw ConfigError("recovery tolerance must be > 0");
  if (d_true.cols() == 0) return 0.0;
  const Matrix cos = (d_true.colwise().normalized().transpose() *
                      d_learned.colwise().normalized()).cwiseAbs();
  Index recovered = 0;
  for (Index j = 0; j < cos.rows(); ++j) {
    if (cos.cols() > 0 && 1.0 - cos.row(j).maxCoeff() < tolerance) ++recovered;
  }
  return static_cast<double>(recovered) / static_cast<double>(d_true.cols());
}

double psnr(std::span<const double> ref, std::span<const double> test, double peak) {
  if (ref.size() != test.size()) throw DimensionError("psnr: size mismatch");
  if (ref.empty()) throw DimensionError("psnr: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref[i] - test[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(ref.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const Image& ref, const Image& test, double peak) {
  if (!ref.same_size(test)) throw DimensionError("psnr: image sizes differ");
  return psnr(std::span<const double>(ref.pixels), std::span<const double>(test.pixels), peak);
}

double snr_db(std::span<const double> ref, std::span<const double> estimate) {
  if (ref.size() != estimate.size()) throw DimensionError("snr: size mismatch");
  double signal = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    signal += ref[i] * ref[i];
    const double d = ref[i] - estimate[i];
    noise += d * d;
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  if (signal == 0.0) throw std::invalid_argument("snr: reference has zero energy");
  return 10.0 * std::log10(signal / noise);
}

double snr_db(const Vector& ref, const Vector& estimate) {
  return snr_db(std::span<const double>(ref.data(), static_cast<std::size_t>(ref.size())),
                std::span<const double>(estimate.data(), static_cast<std::size_t>(estimate.size())));
}

namespace {

constexpr int kWindow = 11;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - kWindow / 2;
    w[static_cast<std::size_t>(i)] = std::exp(-(x * x) / (2.0 * 1.5 * 1.5));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// 'valid' separable Gaussian filtering of a row-major width x height buffer.
Matrix filter_valid(const std::vector<double>& src, Index width, Index height,
                    const std::array<double, kWindow>& w) {
  const Index ow = width - kWindow + 1;
  const Index oh = height - kWindow + 1;
  Matrix horiz(height, ow);
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) {
        acc += w[static_cast<std::size_t>(k)] * src[static_cast<std::size_t>(r * width + c + k)];
      }
      horiz(r, c) = acc;
    }
  }
  Matrix out(oh, ow);
  for (Index r = 0; r < oh; ++r) {
    for (Index c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += w[static_cast<std::size_t>(k)] * horiz(r + k, c);
      out(r, c) = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& ref, const Image& test) {
  if (!ref.same_size(test)) throw DimensionError("ssim: image sizes differ");
  if (ref.width < kWindow || ref.height < kWindow) {
    throw DimensionError("ssim: image smaller than the 11x11 window");
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const auto w = gaussian_window();
  const std::size_t n = ref.pixels.size();
  std::vector<double> xx(n);
  std::vector<double> yy(n);
  std::vector<double> xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = ref.pixels[i] * ref.pixels[i];
    yy[i] = test.pixels[i] * test.pixels[i];
    xy[i] = ref.pixels[i] * test.pixels[i];
  }
  const Matrix mx = filter_valid(ref.pixels, ref.width, ref.height, w);
  const Matrix my = filter_valid(test.pixels, ref.width, ref.height, w);
  const Matrix exx = filter_valid(xx, ref.width, ref.height, w);
  const Matrix eyy = filter_valid(yy, ref.width, ref.height, w);
  const Matrix exy = filter_valid(xy, ref.width, ref.height, w);
  double total = 0.0;
  for (Index i = 0; i < mx.size(); ++i) {
    const double mux = mx.data()[i];
    const double muy = my.data()[i];
    const double sxx = exx.data()[i] - mux * mux;
    const double syy = eyy.data()[i] - muy * muy;
    const double sxy = exy.data()[i] - mux * muy;
    total += ((2.0 * mux * muy + c1) * (2.0 * sxy + c2)) /
             ((mux * mux + muy * muy + c1) * (sxx + syy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace cdl
