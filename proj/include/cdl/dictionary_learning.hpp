#ifndef CDL_DICTIONARY_LEARNING_HPP
#define CDL_DICTIONARY_LEARNING_HPP

#include "cdl/core_model.hpp"

#include <functional>
#include <random>
#include <vector>

namespace cdl {

/// Codes of T samples: each matrix is K x T.
struct CodeBatch {
  Matrix z;
  Matrix u;
  Matrix v;
};

/// The dictionaries learned in the first training step (everything except
/// the HR pair). For single-modality training the guidance blocks have zero
/// rows.
struct LrGuidanceDictionaries {
  Matrix psi_c_l;
  Matrix psi_l;
  Matrix phi_c;
  Matrix phi;
};

struct HrDictionaries {
  Matrix psi_c_h;
  Matrix psi_h;
};

struct TrainingTrace {
  /// Per-branch RMSE measured right after every global coding pass.
  std::vector<double> rmse_x;
  std::vector<double> rmse_y;
  /// RMSE after one more coding pass with the final dictionaries.
  double final_rmse_x = 0.0;
  double final_rmse_y = 0.0;
  double coding_seconds = 0.0;
  double update_seconds = 0.0;
  double hr_solve_seconds = 0.0;
};

/// Called after every atom update with the atom index; used to observe the
/// objective between updates.
using AtomUpdateObserver = std::function<void(Index atom)>;

/// Draws i.i.d. N(0,1) entries and normalizes the stacked common pairs and the
/// unique atoms to unit l2 norm.
LrGuidanceDictionaries initialize_dictionaries(Index m, Index n, Index k, std::mt19937_64& rng);

/// Codes every sample pair over the stacked dictionary with total budget s.
CodeBatch global_sparse_coding(const Matrix& x_l, const Matrix& y,
                               const LrGuidanceDictionaries& dicts, Index sparsity,
                               int workers = 0);

/// One sweep of common-atom updates (k ascending). Each used atom pair
/// [psi_c_l_k; phi_c_k] becomes the leading left singular vector of its
/// restricted residual and the matching code entries of Z become
/// sigma * (leading right singular vector). Unused pairs are replaced with
/// the normalized residual of the worst represented sample.
void update_common_dictionaries(const Matrix& x_l, const Matrix& y, LrGuidanceDictionaries& dicts,
                                CodeBatch& codes, const AtomUpdateObserver& observer = {});

/// One sweep over psi_l (with U, X branch only) then over phi (with V,
/// guidance branch only), same update rule as the common sweep.
void update_unique_dictionaries(const Matrix& x_l, const Matrix& y, LrGuidanceDictionaries& dicts,
                                CodeBatch& codes, const AtomUpdateObserver& observer = {});

/// Replaces degenerate common pairs (see AtomClearing). A unique pair
/// (psi_l_j, phi_i) that is used together by most of its samples behaves like
/// a common atom and is promoted into the freed slot; a pair cleared for a
/// vanishing branch hands its other branch to the demoted unique atom.
/// Without such a pair the replacement is the normalized target of the worst
/// represented sample. Code entries of replaced atoms are zeroed. Returns the
/// number of replaced pairs.
Index clear_common_atoms(const Matrix& x_l, const Matrix& y, LrGuidanceDictionaries& dicts,
                         CodeBatch& codes, const AtomClearing& rule);
/// Same for psi_l and phi (usage and coherence rules only).
Index clear_unique_atoms(const Matrix& x_l, const Matrix& y, LrGuidanceDictionaries& dicts,
                         CodeBatch& codes, const AtomClearing& rule);

/// Objective minimized by the common update:
/// ||[X - psi_l U; Y - phi V] - [psi_c_l; phi_c] Z||_F^2.
double common_objective(const Matrix& x_l, const Matrix& y, const LrGuidanceDictionaries& dicts,
                        const CodeBatch& codes);
/// ||X - psi_c_l Z - psi_l U||_F^2
double unique_objective_x(const Matrix& x_l, const LrGuidanceDictionaries& dicts,
                          const CodeBatch& codes);
/// ||Y - phi_c Z - phi V||_F^2
double unique_objective_y(const Matrix& y, const LrGuidanceDictionaries& dicts,
                          const CodeBatch& codes);

struct StepOneResult {
  LrGuidanceDictionaries dicts;
  CodeBatch codes;
  TrainingTrace trace;
};

/// The alternating first step: for each outer iteration, in_iter rounds of
/// (coding, common update) followed by in_iter rounds of (coding, unique
/// update), then a final coding pass. `initial` overrides the random
/// initialization.
StepOneResult learn_lr_guidance_dictionaries(const Matrix& x_l, const Matrix& y,
                                             const TrainConfig& cfg,
                                             const LrGuidanceDictionaries* initial = nullptr);

/// Ridge solution X_h G^T (G G^T + lambda I)^-1 with G = [Z; U], split into
/// the common and unique HR blocks.
HrDictionaries solve_hr_dictionaries(const Matrix& x_h, const Matrix& z, const Matrix& u,
                                     double lambda);

struct TrainResult {
  CoupledDictionarySet dictionaries;
  CodeBatch codes;
  TrainingTrace trace;
};

/// Full two-step training. x_h is read only by the HR solve.
TrainResult train(const TrainingBatch& batch, const TrainConfig& cfg);

/// Dictionaries of the single-modality baseline: [psi_c_l, psi_l] for coding
/// and [psi_c_h, psi_h] for reconstruction.
struct SingleModalityDictionarySet {
  Matrix psi_c_l;
  Matrix psi_l;
  Matrix psi_c_h;
  Matrix psi_h;
};

/// Same two-step machinery with the guidance branch removed.
SingleModalityDictionarySet train_single_modality(const Matrix& x_l, const Matrix& x_h,
                                                  const TrainConfig& cfg,
                                                  TrainingTrace* trace = nullptr);

/// The X branch of a coupled set, usable as a single-modality set.
SingleModalityDictionarySet target_branch(const CoupledDictionarySet& dset);

}  // namespace cdl

#endif  // CDL_DICTIONARY_LEARNING_HPP
