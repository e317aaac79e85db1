#ifndef CDL_SYNTHETIC_BENCH_HPP
#define CDL_SYNTHETIC_BENCH_HPP

#include "cdl/core_model.hpp"
#include "cdl/dictionary_learning.hpp"
#include "cdl/imaging.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cdl {

struct SynthConfig {
  Index n = 64;
  Index m = 16;
  Index k = 128;
  Index t = 10000;
  Index s_z = 4;
  Index s_u = 1;
  Index s_v = 1;
  /// Unset means noise-free.
  std::optional<double> input_snr_db;
  int trials = 10;
  std::uint64_t seed = 0;

  Index total_sparsity() const { return s_z + s_u + s_v; }
  void check() const;
  nlohmann::json to_json() const;
};

/// Ground-truth dictionaries (LR blocks = selector * HR blocks), the M x N
/// row selector and the codes.
struct GroundTruth {
  CoupledDictionarySet dictionaries;
  Matrix selector;
  std::vector<Index> selected_rows;
  CodeBatch codes;
};

/// Mixes a master seed with stream indices into an independent seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// Distinct sorted row indices of I_N, chosen uniformly without replacement.
std::vector<Index> choose_rows(Index n, Index m, std::mt19937_64& rng);
Matrix row_selector(Index n, const std::vector<Index>& rows);

/// K x T codes with exactly `nonzeros` N(0,1) entries per column on a uniform
/// random support.
Matrix random_sparse_codes(Index k, Index t, Index nonzeros, std::mt19937_64& rng);

GroundTruth gen_ground_truth(const SynthConfig& cfg, std::mt19937_64& rng);

/// x_h = psi_c_h Z + psi_h U, x_l = psi_c_l Z + psi_l U, y = phi_c Z + phi V.
TrainingBatch synthesize(const GroundTruth& gt);

/// Adds white Gaussian noise whose power (mean square over the whole matrix)
/// sits input_snr_db below the signal power. +inf returns the input.
Matrix add_awgn(const Matrix& data, double input_snr_db, std::uint64_t seed);

struct ExperimentReport {
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json per_setting = nlohmann::json::array();
  nlohmann::json aggregates = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Dictionary recovery experiment: for every trial generate the truth,
/// synthesize (optionally add noise), train and score the four first-step
/// dictionaries.
ExperimentReport run_cdl_recovery(const SynthConfig& cfg, const TrainConfig& train_cfg);

/// HR-level dictionaries used by the measurement sweep. `truth` generates
/// the test signals; `model` is used for coding (after row selection) and
/// reconstruction. Both have M = N.
struct CsrDictionaries {
  CoupledDictionarySet truth;
  CoupledDictionarySet model;
};

/// With `learned`, trains the coupled dictionaries on full-resolution
/// synthetic data (selector = identity); otherwise model = truth.
CsrDictionaries prepare_csr_dictionaries(const SynthConfig& cfg, const TrainConfig& train_cfg,
                                         bool learned);

struct CsrSweepOptions {
  std::vector<Index> measurements;
  int trials = 1000;
  double noisy_input_snr_db = 5.0;
  int workers = 0;
};

/// Per M: fresh selector and fresh test codes; coupled SR and the
/// no-side-information baseline, noise-free and with noisy LR signals.
ExperimentReport run_csr_sweep(const SynthConfig& cfg, const CsrDictionaries& dicts,
                               const CsrSweepOptions& options);

/// Line plot of output SNR against M for both arms of a sweep report.
std::string csr_svg(const ExperimentReport& report);

struct PairedImages {
  Image a;
  Image b;
  /// Region label per pixel, shared by both modalities.
  std::vector<int> labels;
};

/// Piecewise-constant images over one shared region map. Intensities are
/// drawn independently per modality; b additionally carries stripe texture
/// in a subset of regions.
PairedImages gen_paired_images(Index width, Index height, std::uint64_t seed);

}  // namespace cdl

#endif  // CDL_SYNTHETIC_BENCH_HPP
