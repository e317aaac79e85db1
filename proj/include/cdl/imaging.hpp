#ifndef CDL_IMAGING_HPP
#define CDL_IMAGING_HPP

#include "cdl/core_model.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace cdl {

/// Single-channel image, row-major, nominal range [0, 1].
struct Image {
  Index width = 0;
  Index height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(Index w, Index h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w * h), fill) {}

  double& at(Index row, Index col) { return pixels[static_cast<std::size_t>(row * width + col)]; }
  double at(Index row, Index col) const {
    return pixels[static_cast<std::size_t>(row * width + col)];
  }
  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
};

/// Reads an 8-bit binary PGM (P5, maxval 255; values mapped by v/255) or a
/// MAT1 float matrix, chosen by the magic bytes.
Image read_image(const std::filesystem::path& path);
/// Writes PGM when the extension is .pgm (round half up, clamped to
/// [0, 255]); any other extension writes MAT1 verbatim.
void write_image(const Image& img, const std::filesystem::path& path);

/// Cubic convolution resize (a = -0.5). Downscaling widens the kernel by the
/// inverse scale factor; source coordinates are clamped at the borders and
/// the output is clamped to [0, 1].
Image bicubic_resize(const Image& img, Index out_width, Index out_height);

/// HR extent for an LR extent and an integer factor (rounded up).
Index upscaled_extent(Index lr_extent, int scale);

Image rgb_to_gray(const Image& r, const Image& g, const Image& b);

struct PatchOrigin {
  Index row = 0;
  Index col = 0;
};

/// Mean-removed patches, one column each, vectorized column-major within the
/// patch. patches.col(j) + dc_means[j] reproduces the source pixels.
struct PatchGrid {
  Index patch_side = 0;
  std::vector<PatchOrigin> origins;
  Matrix patches;
  Vector dc_means;
};

/// Origins 0, stride, 2*stride, ... plus a final origin clamped so that the
/// last patch ends at the border.
std::vector<Index> patch_positions(Index extent, Index patch_side, Index stride);

PatchGrid extract_patches(const Image& img, Index patch_side, Index stride);

/// Averages overlapping patch contributions. Throws if a pixel is uncovered.
Image reassemble(const PatchGrid& grid, Index width, Index height);

/// Population variance of every pixel in a patch.
double patch_variance(const Eigen::Ref<const Vector>& mean_removed_patch);

struct TrainingSetOptions {
  Index patch_side = 8;
  int scale = 4;
  double variance_threshold = 0.02;
  /// <= 0 keeps every retained patch.
  Index max_samples = 0;
  std::uint64_t seed = 0;
  Index stride = 1;
};

/// Upscales each LR image to its HR size, extracts aligned patch triples,
/// drops triples whose upscaled-LR patch variance is below the threshold,
/// mean-removes all three and subsamples (seeded) to max_samples columns.
TrainingBatch build_training_batch(const std::vector<Image>& lr_images,
                                   const std::vector<Image>& hr_images,
                                   const std::vector<Image>& guide_images,
                                   const TrainingSetOptions& options,
                                   std::vector<PatchOrigin>* kept_origins = nullptr);

}  // namespace cdl

#endif  // CDL_IMAGING_HPP
