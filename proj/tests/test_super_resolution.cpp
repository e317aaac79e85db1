#include "helpers.hpp"

#include "cdl/metrics.hpp"
#include "cdl/super_resolution.hpp"
#include "cdl/synthetic_bench.hpp"

#include <doctest.h>

using namespace cdl;

namespace {

GroundTruth truth(Index n, Index m, Index k, Index sz, Index su, Index sv, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.k = k;
  cfg.t = 50;
  cfg.s_z = sz;
  cfg.s_u = su;
  cfg.s_v = sv;
  std::mt19937_64 rng(seed);
  return gen_ground_truth(cfg, rng);
}

CoupledDictionarySet random_square_set(Index n, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const LrGuidanceDictionaries d = initialize_dictionaries(n, n, k, rng);
  CoupledDictionarySet s{d.psi_c_l, d.psi_l, test::gaussian(n, k, rng), test::gaussian(n, k, rng),
                         d.phi_c,   d.phi,   Dims{n, n, k}};
  return s;
}

}  // namespace

TEST_CASE("consistent generative patches are recovered") {
  const GroundTruth gt = truth(64, 16, 32, 2, 1, 1, 1);
  const TrainingBatch b = synthesize(gt);
  SrConfig cfg;
  cfg.sparsity = 4;
  cfg.workers = 1;
  const Matrix out = super_resolve_patches(b.x_l, b.y, gt.dictionaries, cfg);
  for (Index i = 0; i < b.samples(); ++i) {
    CHECK((out.col(i) - b.x_h.col(i)).norm() <= 1e-8 * b.x_h.col(i).norm());
    const Vector one = super_resolve_patch(b.x_l.col(i), b.y.col(i), gt.dictionaries, 4);
    CHECK((one - out.col(i)).norm() <= 1e-12);
  }
}

TEST_CASE("zero patches map to zero") {
  const GroundTruth gt = truth(16, 4, 8, 1, 1, 1, 2);
  const Vector out = super_resolve_patch(Vector::Zero(4), Vector::Zero(16), gt.dictionaries, 3);
  CHECK(out.isZero(0.0));
}

TEST_CASE("single-modality recovery with enough measurements") {
  const GroundTruth gt = truth(64, 32, 16, 2, 1, 1, 3);
  const TrainingBatch b = synthesize(gt);
  SrConfig cfg;
  cfg.sparsity = 3;
  cfg.workers = 1;
  const Matrix out =
      super_resolve_patches_without_side_info(b.x_l, target_branch(gt.dictionaries), cfg);
  for (Index i = 0; i < b.samples(); ++i) {
    CHECK((out.col(i) - b.x_h.col(i)).norm() <= 1e-8 * b.x_h.col(i).norm());
  }
}

TEST_CASE("patch dimension mismatches are rejected") {
  const GroundTruth gt = truth(16, 4, 8, 1, 1, 1, 4);
  SrConfig cfg;
  CHECK_THROWS_AS(super_resolve_patches(Matrix::Zero(5, 2), Matrix::Zero(16, 2), gt.dictionaries, cfg),
                  DimensionError);
  CHECK_THROWS_AS(super_resolve_patches(Matrix::Zero(4, 2), Matrix::Zero(16, 3), gt.dictionaries, cfg),
                  DimensionError);
}

TEST_CASE("configuration checks") {
  SrConfig cfg;
  CHECK_NOTHROW(cfg.check(64, 64));
  cfg.overlap_stride = 9;
  CHECK_THROWS_AS(cfg.check(64, 64), ConfigError);
  cfg = SrConfig{};
  CHECK_THROWS_AS(cfg.check(16, 64), ConfigError);
  CHECK_THROWS_AS(cfg.check(49, 49), ConfigError);
  cfg.scale = 1;
  CHECK_THROWS_AS(cfg.check(64, 64), ConfigError);
}

TEST_CASE("constant images stay constant") {
  const CoupledDictionarySet d = random_square_set(16, 12, 5);
  SrConfig cfg;
  cfg.patch_side = 4;
  cfg.scale = 2;
  cfg.sparsity = 4;
  cfg.workers = 1;
  const Image lr(6, 5, 0.3);
  const Image guide(12, 10, 0.8);
  const Image out = super_resolve_image(lr, guide, d, cfg);
  REQUIRE(out.same_size(guide));
  for (double p : out.pixels) CHECK(std::abs(p - 0.3) <= 1e-9);
  const Image base = super_resolve_without_side_info(lr, target_branch(d), cfg);
  for (double p : base.pixels) CHECK(std::abs(p - 0.3) <= 1e-9);
}

TEST_CASE("zero image gives a zero estimate without side information") {
  const CoupledDictionarySet d = random_square_set(16, 12, 6);
  SrConfig cfg;
  cfg.patch_side = 4;
  cfg.scale = 2;
  cfg.workers = 1;
  const Image out = super_resolve_without_side_info(Image(5, 5, 0.0), target_branch(d), cfg);
  for (double p : out.pixels) CHECK(p == 0.0);
}

TEST_CASE("guidance size must match the upscaled input") {
  const CoupledDictionarySet d = random_square_set(16, 12, 7);
  SrConfig cfg;
  cfg.patch_side = 4;
  cfg.scale = 2;
  CHECK_THROWS_AS(super_resolve_image(Image(6, 5, 0.3), Image(12, 11, 0.3), d, cfg), DimensionError);
}

TEST_CASE("ista solver runs through the image pipeline") {
  const CoupledDictionarySet d = random_square_set(16, 12, 8);
  SrConfig cfg;
  cfg.patch_side = 4;
  cfg.scale = 2;
  cfg.solver = SolverKind::kIsta;
  cfg.ista_max_iter = 50;
  cfg.workers = 1;
  const PairedImages p = gen_paired_images(24, 24, 9);
  const Image lr = bicubic_resize(p.a, 12, 12);
  const Image out = super_resolve_image(lr, p.b, d, cfg);
  CHECK(out.same_size(p.a));
  for (double v : out.pixels) CHECK(std::isfinite(v));
}

TEST_CASE("same-modality guidance does not fall below bicubic") {
  // Dictionaries trained with the upscaled LR image as guidance, tested on a
  // held-out image whose guidance is again its upscaled LR version.
  const int scale = 2;
  std::vector<Image> lr;
  std::vector<Image> hr;
  std::vector<Image> guide;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const PairedImages p = gen_paired_images(64, 64, 100 + s);
    hr.push_back(p.a);
    lr.push_back(bicubic_resize(p.a, 32, 32));
    guide.push_back(bicubic_resize(lr.back(), 64, 64));
  }
  TrainingSetOptions opt;
  opt.patch_side = 6;
  opt.scale = scale;
  opt.stride = 2;
  opt.variance_threshold = 0.0;
  opt.max_samples = 2000;
  const TrainingBatch batch = build_training_batch(lr, hr, guide, opt);
  TrainConfig tc;
  tc.atoms = 48;
  tc.sparsity = 6;
  tc.out_iter = 2;
  tc.in_iter = 3;
  tc.workers = 1;
  const CoupledDictionarySet d = train(batch, tc).dictionaries;

  const PairedImages test = gen_paired_images(64, 64, 200);
  const Image test_lr = bicubic_resize(test.a, 32, 32);
  const Image test_guide = bicubic_resize(test_lr, 64, 64);
  SrConfig cfg;
  cfg.patch_side = 6;
  cfg.scale = scale;
  cfg.overlap_stride = 2;
  cfg.sparsity = 6;
  cfg.workers = 1;
  const Image out = super_resolve_image(test_lr, test_guide, d, cfg);
  CHECK(psnr(test.a, out) >= psnr(test.a, test_guide) - 0.1);
}
