#include "cdl/imaging.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace cdl {

namespace {

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

Index parse_extent(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
    return static_cast<Index>(v);
  } catch (const std::exception&) {
    throw FormatError(std::string("malformed header: bad ") + what + " '" + tok + "'");
  }
}

Image read_pgm(std::istream& in, const std::string& name) {
  const Index w = parse_extent(pgm_token(in), "width");
  const Index h = parse_extent(pgm_token(in), "height");
  const Index maxval = parse_extent(pgm_token(in), "maxval");
  if (maxval != 255) {
    throw FormatError(name + ": unsupported PGM maxval " + std::to_string(maxval) +
                      " (only 8-bit maxval 255 is accepted)");
  }
  Image img(w, h);
  std::vector<unsigned char> raw(static_cast<std::size_t>(w * h));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw FormatError(name + ": PGM payload has " + std::to_string(in.gcount()) +
                      " bytes, expected " + std::to_string(raw.size()));
  }
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / 255.0;
  return img;
}

Image read_mat(std::istream& in, const std::string& name) {
  std::string line;
  std::getline(in, line);
  std::istringstream hs(line);
  Index rows = -1;
  Index cols = -1;
  if (!(hs >> rows >> cols) || rows < 0 || cols < 0) {
    throw FormatError(name + ": malformed MAT1 header");
  }
  Image img(cols, rows);
  const auto bytes = static_cast<std::streamsize>(img.pixels.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(img.pixels.data()), bytes);
  if (in.gcount() != bytes) {
    throw FormatError(name + ": MAT1 payload has " + std::to_string(in.gcount()) +
                      " bytes, expected " + std::to_string(bytes));
  }
  return img;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 2);
  if (in.gcount() == 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(in, path.string());
  in.read(magic + 2, 2);
  if (in.gcount() == 2 && std::string(magic, 4) == "MAT1") return read_mat(in, path.string());
  throw FormatError(path.string() + ": unsupported image format (expected P5 or MAT1)");
}

void write_image(const Image& img, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (path.extension() == ".pgm") {
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<unsigned char> raw(img.pixels.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double v = std::floor(img.pixels[i] * 255.0 + 0.5);
      raw[i] = static_cast<unsigned char>(std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  } else {
    out << "MAT1 " << img.height << ' ' << img.width << '\n';
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0;
  if (ax < 2.0) return a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a;
  return 0.0;
}

struct Tap {
  Index src;
  double weight;
};

// Per output coordinate, the clamped source indices and normalized weights.
std::vector<std::vector<Tap>> resize_taps(Index in, Index out) {
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double kscale = scale < 1.0 ? scale : 1.0;
  const double width = 4.0 / kscale;
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
  for (Index i = 0; i < out; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto left = static_cast<Index>(std::floor(u - width / 2.0));
    const auto count = static_cast<Index>(std::ceil(width)) + 2;
    auto& t = taps[static_cast<std::size_t>(i)];
    double sum = 0.0;
    for (Index j = 0; j < count; ++j) {
      const Index idx = left + j;
      const double w = kscale * cubic_kernel((u - static_cast<double>(idx)) * kscale);
      if (w == 0.0) continue;
      t.push_back({std::clamp<Index>(idx, 0, in - 1), w});
      sum += w;
    }
    for (auto& tap : t) tap.weight /= sum;
  }
  return taps;
}

}  // namespace

Image bicubic_resize(const Image& img, Index out_width, Index out_height) {
  if (out_width < 1 || out_height < 1) throw DimensionError("resize target must be at least 1x1");
  if (img.width < 1 || img.height < 1) throw DimensionError("cannot resize an empty image");
  const auto col_taps = resize_taps(img.width, out_width);
  const auto row_taps = resize_taps(img.height, out_height);

  Image tmp(out_width, img.height);
  for (Index r = 0; r < img.height; ++r) {
    for (Index c = 0; c < out_width; ++c) {
      double acc = 0.0;
      for (const Tap& t : col_taps[static_cast<std::size_t>(c)]) acc += t.weight * img.at(r, t.src);
      tmp.at(r, c) = acc;
    }
  }
  Image out(out_width, out_height);
  for (Index r = 0; r < out_height; ++r) {
    for (Index c = 0; c < out_width; ++c) {
      double acc = 0.0;
      for (const Tap& t : row_taps[static_cast<std::size_t>(r)]) acc += t.weight * tmp.at(t.src, c);
      out.at(r, c) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

Index upscaled_extent(Index lr_extent, int scale) {
  return static_cast<Index>(std::ceil(static_cast<double>(lr_extent) * scale));
}

Image rgb_to_gray(const Image& r, const Image& g, const Image& b) {
  if (!r.same_size(g) || !r.same_size(b)) throw DimensionError("rgb_to_gray: channel sizes differ");
  Image out(r.width, r.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = 0.299 * r.pixels[i] + 0.587 * g.pixels[i] + 0.114 * b.pixels[i];
  }
  return out;
}

std::vector<Index> patch_positions(Index extent, Index patch_side, Index stride) {
  if (patch_side < 1 || stride < 1) throw ConfigError("patch side and stride must be >= 1");
  if (patch_side > extent) {
    throw DimensionError("patch side " + std::to_string(patch_side) + " exceeds image extent " +
                         std::to_string(extent));
  }
  std::vector<Index> pos;
  const Index last = extent - patch_side;
  for (Index p = 0; p <= last; p += stride) pos.push_back(p);
  if (pos.back() != last) pos.push_back(last);
  return pos;
}

PatchGrid extract_patches(const Image& img, Index patch_side, Index stride) {
  const auto rows = patch_positions(img.height, patch_side, stride);
  const auto cols = patch_positions(img.width, patch_side, stride);
  PatchGrid grid;
  grid.patch_side = patch_side;
  const auto count = static_cast<Index>(rows.size() * cols.size());
  grid.patches.resize(patch_side * patch_side, count);
  grid.dc_means.resize(count);
  grid.origins.reserve(static_cast<std::size_t>(count));
  Index j = 0;
  for (Index r0 : rows) {
    for (Index c0 : cols) {
      auto col = grid.patches.col(j);
      for (Index dc = 0; dc < patch_side; ++dc) {
        for (Index dr = 0; dr < patch_side; ++dr) col[dc * patch_side + dr] = img.at(r0 + dr, c0 + dc);
      }
      const double mean = col.mean();
      col.array() -= mean;
      grid.dc_means[j] = mean;
      grid.origins.push_back({r0, c0});
      ++j;
    }
  }
  return grid;
}

Image reassemble(const PatchGrid& grid, Index width, Index height) {
  const Index side = grid.patch_side;
  if (grid.patches.rows() != side * side ||
      grid.patches.cols() != static_cast<Index>(grid.origins.size()) ||
      grid.dc_means.size() != grid.patches.cols()) {
    throw DimensionError("patch grid is internally inconsistent");
  }
  Image sum(width, height);
  std::vector<int> count(sum.pixels.size(), 0);
  for (Index j = 0; j < grid.patches.cols(); ++j) {
    const PatchOrigin o = grid.origins[static_cast<std::size_t>(j)];
    if (o.row < 0 || o.col < 0 || o.row + side > height || o.col + side > width) {
      throw DimensionError("patch origin out of bounds");
    }
    for (Index dc = 0; dc < side; ++dc) {
      for (Index dr = 0; dr < side; ++dr) {
        sum.at(o.row + dr, o.col + dc) += grid.patches(dc * side + dr, j) + grid.dc_means[j];
        ++count[static_cast<std::size_t>((o.row + dr) * width + o.col + dc)];
      }
    }
  }
  for (std::size_t i = 0; i < sum.pixels.size(); ++i) {
    if (count[i] == 0) {
      throw DimensionError("pixel (" + std::to_string(static_cast<Index>(i) / width) + ", " +
                           std::to_string(static_cast<Index>(i) % width) +
                           ") is not covered by any patch");
    }
    sum.pixels[i] /= count[i];
  }
  return sum;
}

double patch_variance(const Eigen::Ref<const Vector>& p) {
  return p.size() == 0 ? 0.0 : p.squaredNorm() / static_cast<double>(p.size());
}

TrainingBatch build_training_batch(const std::vector<Image>& lr_images,
                                   const std::vector<Image>& hr_images,
                                   const std::vector<Image>& guide_images,
                                   const TrainingSetOptions& options,
                                   std::vector<PatchOrigin>* kept_origins) {
  if (lr_images.size() != hr_images.size() || lr_images.size() != guide_images.size()) {
    throw DimensionError("training image lists have different lengths");
  }
  if (options.scale < 1) throw ConfigError("scale must be >= 1");
  const Index n = options.patch_side * options.patch_side;
  std::vector<Vector> xl;
  std::vector<Vector> xh;
  std::vector<Vector> yy;
  std::vector<PatchOrigin> origins;
  for (std::size_t i = 0; i < lr_images.size(); ++i) {
    const Image& hr = hr_images[i];
    if (!hr.same_size(guide_images[i])) {
      throw DimensionError("training pair " + std::to_string(i) + ": HR and guidance sizes differ");
    }
    if (upscaled_extent(lr_images[i].width, options.scale) != hr.width ||
        upscaled_extent(lr_images[i].height, options.scale) != hr.height) {
      throw DimensionError("training pair " + std::to_string(i) +
                           ": LR size times scale does not match HR size");
    }
    const Image up = bicubic_resize(lr_images[i], hr.width, hr.height);
    const PatchGrid gl = extract_patches(up, options.patch_side, options.stride);
    const PatchGrid gh = extract_patches(hr, options.patch_side, options.stride);
    const PatchGrid gy = extract_patches(guide_images[i], options.patch_side, options.stride);
    for (Index j = 0; j < gl.patches.cols(); ++j) {
      if (patch_variance(gl.patches.col(j)) < options.variance_threshold) continue;
      xl.emplace_back(gl.patches.col(j));
      xh.emplace_back(gh.patches.col(j));
      yy.emplace_back(gy.patches.col(j));
      origins.push_back(gl.origins[static_cast<std::size_t>(j)]);
    }
  }
  if (xl.empty()) {
    throw std::runtime_error("training batch is empty after variance filtering");
  }

  std::vector<std::size_t> keep(xl.size());
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  if (options.max_samples > 0 && static_cast<Index>(keep.size()) > options.max_samples) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(keep.begin(), keep.end(), rng);
    keep.resize(static_cast<std::size_t>(options.max_samples));
    std::sort(keep.begin(), keep.end());
  }

  TrainingBatch batch;
  const auto t = static_cast<Index>(keep.size());
  batch.x_l.resize(n, t);
  batch.x_h.resize(n, t);
  batch.y.resize(n, t);
  if (kept_origins) kept_origins->clear();
  for (Index j = 0; j < t; ++j) {
    const std::size_t s = keep[static_cast<std::size_t>(j)];
    batch.x_l.col(j) = xl[s];
    batch.x_h.col(j) = xh[s];
    batch.y.col(j) = yy[s];
    if (kept_origins) kept_origins->push_back(origins[s]);
  }
  return batch;
}

}  // namespace cdl
