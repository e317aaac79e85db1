#include "cdl/dictionary_learning.hpp"

#include "cdl/sparse_coding.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

namespace cdl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// r -= d * c, skipping zero entries of c (codes are sparse).
void subtract_sparse_product(Matrix& r, const Matrix& d, const Matrix& c) {
  if (d.rows() == 0) return;
  for (Index i = 0; i < c.cols(); ++i) {
    for (Index k = 0; k < c.rows(); ++k) {
      const double a = c(k, i);
      if (a != 0.0) r.col(i).noalias() -= a * d.col(k);
    }
  }
}

Matrix branch_residual(const Matrix& data, const Matrix& common, const Matrix& z,
                       const Matrix& unique, const Matrix& w) {
  Matrix r = data;
  subtract_sparse_product(r, common, z);
  subtract_sparse_product(r, unique, w);
  return r;
}

std::vector<std::vector<Index>> row_supports(const Matrix& codes) {
  std::vector<std::vector<Index>> omega(static_cast<std::size_t>(codes.rows()));
  for (Index i = 0; i < codes.cols(); ++i) {
    for (Index k = 0; k < codes.rows(); ++k) {
      if (codes(k, i) != 0.0) omega[static_cast<std::size_t>(k)].push_back(i);
    }
  }
  return omega;
}

// Leading left singular vector of e, oriented so that its first nonzero entry
// is positive.
Vector leading_left_singular_vector(const Matrix& e) {
  Vector p;
  if (e.rows() <= e.cols()) {
    Matrix g = Matrix::Zero(e.rows(), e.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(e);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.selfadjointView<Eigen::Lower>());
    p = eig.eigenvectors().col(e.rows() - 1);
  } else {
    Matrix g = Matrix::Zero(e.cols(), e.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(e.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.selfadjointView<Eigen::Lower>());
    p = e * eig.eigenvectors().col(e.cols() - 1);
  }
  const double norm = p.norm();
  if (!(norm > 0.0)) return Vector();
  p /= norm;
  const double floor = 1e-12 * p.cwiseAbs().maxCoeff();
  for (Index i = 0; i < p.size(); ++i) {
    if (std::abs(p[i]) > floor) {
      if (p[i] < 0.0) p = -p;
      break;
    }
  }
  return p;
}

// Column index of the unclaimed sample with the largest residual, or -1.
Index worst_sample(const Matrix& residual, const std::vector<char>& used) {
  Index worst = -1;
  double worst_norm = 0.0;
  for (Index i = 0; i < residual.cols(); ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    const double nrm = residual.col(i).squaredNorm();
    if (nrm > worst_norm) {
      worst_norm = nrm;
      worst = i;
    }
  }
  return worst;
}

Index usage_of(const Matrix& codes, Index k) { return (codes.row(k).array() != 0.0).count(); }

double usage_floor(const Matrix& codes, const AtomClearing& rule) {
  const double mean = codes.rows() == 0 ? 0.0
                                        : static_cast<double>((codes.array() != 0.0).count()) /
                                              static_cast<double>(codes.rows());
  return std::max(static_cast<double>(rule.min_usage), rule.min_relative_usage * mean);
}

bool duplicates_earlier(const Matrix& atoms, Index k, double max_coherence) {
  if (k == 0) return false;
  return (atoms.leftCols(k).transpose() * atoms.col(k)).cwiseAbs().maxCoeff() > max_coherence;
}

// Takes atom k out of the representation: its contribution returns to the
// residual and its code row is zeroed.
void release_atom(const Matrix& atoms, Matrix& codes, Matrix& residual, Index k,
                  Index row_offset = 0) {
  for (Index i = 0; i < codes.cols(); ++i) {
    if (codes(k, i) != 0.0) {
      residual.col(i).segment(row_offset, atoms.rows()) += codes(k, i) * atoms.col(k);
      codes(k, i) = 0.0;
    }
  }
}

// Normalized target of sample i for this dictionary: its residual plus the
// dictionary's own contribution. For a sample built from a single atom of
// the dictionary this is that atom.
Vector sample_target(const Matrix& atoms, const Matrix& codes, const Matrix& residual, Index i) {
  Vector t = residual.col(i);
  for (Index j = 0; j < atoms.cols(); ++j) {
    if (codes(j, i) != 0.0) t += codes(j, i) * atoms.col(j);
  }
  return t.normalized();
}

// Target of the worst represented unclaimed sample that is not nearly
// parallel to an atom other than k, with its residual energy. Empty when no
// sample qualifies.
struct Candidate {
  Vector atom;
  double energy = 0.0;
};

Candidate worst_sample_candidate(const Matrix& atoms, const Matrix& codes, const Matrix& residual,
                                 Index k, std::vector<char>& used, double max_coherence) {
  for (;;) {
    const Index worst = worst_sample(residual, used);
    if (worst < 0) return {};
    used[static_cast<std::size_t>(worst)] = 1;
    Vector candidate = sample_target(atoms, codes, residual, worst);
    Vector coherence = (atoms.transpose() * candidate).cwiseAbs();
    coherence[k] = 0.0;
    if (coherence.maxCoeff() <= max_coherence) {
      return {std::move(candidate), residual.col(worst).squaredNorm()};
    }
  }
}

// Two-line fit of the columns an atom represents. A merged atom sits between
// two true directions; its samples then split cleanly into two lines and the
// gain over the single line is large.
struct Split {
  double gain = 0.0;
  Index atom = -1;
  Vector keep;
  Vector fresh;
};

Vector dominant_direction(const Matrix& e, const std::vector<Index>& cols, Vector p) {
  for (int it = 0; it < 3; ++it) {
    Vector next = Vector::Zero(p.size());
    for (Index c : cols) next += (e.col(c).dot(p)) * e.col(c);
    const double nrm = next.norm();
    if (!(nrm > 0.0)) return p;
    p = next / nrm;
  }
  return p;
}

Split two_line_split(const Matrix& atoms, const Matrix& codes, const Matrix& residual, Index j) {
  std::vector<Index> omega;
  for (Index i = 0; i < codes.cols(); ++i) {
    if (codes(j, i) != 0.0) omega.push_back(i);
  }
  const auto count = static_cast<Index>(omega.size());
  if (count < 2) return {};
  Matrix e(atoms.rows(), count);
  for (Index c = 0; c < count; ++c) {
    const Index i = omega[static_cast<std::size_t>(c)];
    e.col(c) = residual.col(i) + codes(j, i) * atoms.col(j);
  }
  Vector p1 = atoms.col(j);
  // Seed the second line with the column worst explained by the atom.
  Index far = 0;
  double far_energy = -1.0;
  for (Index c = 0; c < count; ++c) {
    const double off = e.col(c).squaredNorm() - std::pow(e.col(c).dot(p1), 2);
    if (off > far_energy) {
      far_energy = off;
      far = c;
    }
  }
  Vector p2 = e.col(far).normalized();
  std::vector<Index> g1;
  std::vector<Index> g2;
  for (int it = 0; it < 8; ++it) {
    g1.clear();
    g2.clear();
    for (Index c = 0; c < count; ++c) {
      (std::abs(e.col(c).dot(p1)) >= std::abs(e.col(c).dot(p2)) ? g1 : g2).push_back(c);
    }
    if (g1.empty() || g2.empty()) return {};
    p1 = dominant_direction(e, g1, p1);
    p2 = dominant_direction(e, g2, p2);
  }
  double single = 0.0;
  double twin = 0.0;
  for (Index c = 0; c < count; ++c) {
    single += std::pow(e.col(c).dot(atoms.col(j)), 2);
    twin += std::max(std::pow(e.col(c).dot(p1), 2), std::pow(e.col(c).dot(p2), 2));
  }
  return {twin - single, j, p1, p2};
}

// Supplies replacements for cleared atoms: the best pending split when it
// gains more than fitting the worst sample, otherwise that sample's target.
class Replacer {
 public:
  Replacer(Matrix& atoms, Matrix& codes, Matrix& residual, const std::vector<char>& flagged,
           double max_coherence)
      : atoms_(atoms),
        codes_(codes),
        residual_(residual),
        used_(static_cast<std::size_t>(residual.cols()), 0),
        max_coherence_(max_coherence) {
    for (Index j = 0; j < atoms.cols(); ++j) {
      if (flagged[static_cast<std::size_t>(j)]) continue;
      Split sp = two_line_split(atoms, codes, residual, j);
      if (sp.atom >= 0 && sp.gain > 0.0) splits_.push_back(std::move(sp));
    }
    std::sort(splits_.begin(), splits_.end(), [](const Split& a, const Split& b) {
      return a.gain != b.gain ? a.gain > b.gain : a.atom < b.atom;
    });
  }

  // Fills atom k (already released). Returns false when nothing is left.
  bool replace(Index k) {
    Candidate sample = worst_sample_candidate(atoms_, codes_, residual_, k, used_, max_coherence_);
    if (next_ < splits_.size() && splits_[next_].gain > sample.energy) {
      const Split& sp = splits_[next_++];
      release_atom(atoms_, codes_, residual_, sp.atom);
      atoms_.col(sp.atom) = sp.keep;
      atoms_.col(k) = sp.fresh;
      return true;
    }
    if (sample.atom.size() == 0) return false;
    atoms_.col(k) = sample.atom;
    return true;
  }

 private:
  Matrix& atoms_;
  Matrix& codes_;
  Matrix& residual_;
  std::vector<char> used_;
  double max_coherence_;
  std::vector<Split> splits_;
  std::size_t next_ = 0;
};

std::vector<char> flag_atoms(const Matrix& atoms, const Matrix& codes, const AtomClearing& rule) {
  const double floor = usage_floor(codes, rule);
  std::vector<char> flagged(static_cast<std::size_t>(atoms.cols()), 0);
  for (Index k = 0; k < atoms.cols(); ++k) {
    flagged[static_cast<std::size_t>(k)] =
        usage_of(codes, k) < floor || duplicates_earlier(atoms, k, rule.max_coherence);
  }
  return flagged;
}

Index clear_atoms(Matrix& atoms, Matrix& codes, Matrix& residual, const AtomClearing& rule) {
  const std::vector<char> flagged = flag_atoms(atoms, codes, rule);
  if (std::find(flagged.begin(), flagged.end(), 1) == flagged.end()) return 0;
  Replacer replacer(atoms, codes, residual, flagged, rule.max_coherence);
  Index replaced = 0;
  for (Index k = 0; k < atoms.cols(); ++k) {
    if (!flagged[static_cast<std::size_t>(k)]) continue;
    release_atom(atoms, codes, residual, k);
    if (!replacer.replace(k)) break;
    ++replaced;
  }
  return replaced;
}

// Rank-1 K-SVD step on the atoms `atom` (a column view) with code row `row`.
// `residual` excludes nothing: it is data minus the full reconstruction.
// `used` marks samples already consumed by the unused-atom rule this sweep.
template <class AtomRef>
void update_atom(AtomRef atom, Matrix& code_matrix, Index k, const std::vector<Index>& omega,
                 Matrix& residual, std::vector<char>& used) {
  if (omega.empty()) {
    // Unused atom: take the worst represented sample not yet claimed.
    const Index worst = worst_sample(residual, used);
    if (worst >= 0) {
      used[static_cast<std::size_t>(worst)] = 1;
      atom = residual.col(worst).normalized();
    }
    return;
  }

  const Index rows = residual.rows();
  const auto count = static_cast<Index>(omega.size());
  Matrix e(rows, count);
  for (Index j = 0; j < count; ++j) {
    const Index i = omega[static_cast<std::size_t>(j)];
    e.col(j) = residual.col(i) + code_matrix(k, i) * atom;
  }
  const Vector p = leading_left_singular_vector(e);
  if (p.size() == 0) {
    for (Index i : omega) code_matrix(k, i) = 0.0;
    return;
  }
  const Vector coeff = e.transpose() * p;
  atom = p;
  for (Index j = 0; j < count; ++j) {
    const Index i = omega[static_cast<std::size_t>(j)];
    code_matrix(k, i) = coeff[j];
    residual.col(i) = e.col(j) - coeff[j] * p;
  }
}

void check_pair(const Matrix& x_l, const Matrix& y, const LrGuidanceDictionaries& dicts,
                const CodeBatch* codes) {
  const Index k = dicts.psi_c_l.cols();
  if (x_l.cols() != y.cols()) throw DimensionError("x_l and y sample counts differ");
  if (dicts.psi_c_l.rows() != x_l.rows() || dicts.psi_l.rows() != x_l.rows() ||
      dicts.psi_l.cols() != k || dicts.phi_c.rows() != y.rows() || dicts.phi.rows() != y.rows() ||
      dicts.phi_c.cols() != k || dicts.phi.cols() != k) {
    throw DimensionError("dictionary shapes do not match the training data");
  }
  if (codes) {
    for (const Matrix* c : {&codes->z, &codes->u, &codes->v}) {
      if (c->rows() != k || c->cols() != x_l.cols()) {
        throw DimensionError("code batch shape does not match K x T");
      }
    }
  }
}

double rmse_of(const Matrix& r) {
  return r.size() == 0 ? 0.0 : std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

}  // namespace

LrGuidanceDictionaries initialize_dictionaries(Index m, Index n, Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Index rows) {
    Matrix a(rows, k);
    for (Index j = 0; j < k; ++j) {
      for (Index i = 0; i < rows; ++i) a(i, j) = normal(rng);
    }
    return a;
  };
  LrGuidanceDictionaries d;
  d.psi_c_l = draw(m);
  d.phi_c = draw(n);
  d.psi_l = draw(m);
  d.phi = draw(n);
  for (Index j = 0; j < k; ++j) {
    const double common = std::sqrt(d.psi_c_l.col(j).squaredNorm() + d.phi_c.col(j).squaredNorm());
    d.psi_c_l.col(j) /= common;
    d.phi_c.col(j) /= common;
    d.psi_l.col(j).normalize();
    if (n > 0) d.phi.col(j).normalize();
  }
  return d;
}

CodeBatch global_sparse_coding(const Matrix& x_l, const Matrix& y,
                               const LrGuidanceDictionaries& dicts, Index sparsity, int workers) {
  check_pair(x_l, y, dicts, nullptr);
  const Index k = dicts.psi_c_l.cols();
  const Index t = x_l.cols();
  CodeBatch out;
  if (y.rows() == 0) {
    Matrix d(x_l.rows(), 2 * k);
    d << dicts.psi_c_l, dicts.psi_l;
    const Matrix c = omp_batch(x_l, CodingDictionary(std::move(d)), sparsity, workers);
    out.z = c.topRows(k);
    out.u = c.bottomRows(k);
    out.v = Matrix::Zero(k, t);
    return out;
  }
  const JointDictionary jd = stack_joint_dictionary(dicts.psi_c_l, dicts.psi_l, dicts.phi_c, dicts.phi);
  Matrix signals(x_l.rows() + y.rows(), t);
  signals << x_l, y;
  const Matrix c = omp_batch(signals, jd.dictionary, sparsity, workers);
  out.z = c.topRows(k);
  out.u = c.middleRows(k, k);
  out.v = c.bottomRows(k);
  return out;
}

void update_common_dictionaries(const Matrix& x_l, const Matrix& y, LrGuidanceDictionaries& dicts,
                                CodeBatch& codes, const AtomUpdateObserver& observer) {
  check_pair(x_l, y, dicts, &codes);
  const Index m = x_l.rows();
  const Index n = y.rows();
  const Index k_atoms = dicts.psi_c_l.cols();

  Matrix residual(m + n, x_l.cols());
  residual.topRows(m) = branch_residual(x_l, dicts.psi_c_l, codes.z, dicts.psi_l, codes.u);
  residual.bottomRows(n) = branch_residual(y, dicts.phi_c, codes.z, dicts.phi, codes.v);

  const auto omega = row_supports(codes.z);
  std::vector<char> used(static_cast<std::size_t>(x_l.cols()), 0);
  Vector atom(m + n);
  for (Index k = 0; k < k_atoms; ++k) {
    atom << dicts.psi_c_l.col(k), dicts.phi_c.col(k);
    update_atom(Eigen::Ref<Vector>(atom), codes.z, k, omega[static_cast<std::size_t>(k)],
                residual, used);
    dicts.psi_c_l.col(k) = atom.head(m);
    dicts.phi_c.col(k) = atom.tail(n);
    if (observer) observer(k);
  }
}

void update_unique_dictionaries(const Matrix& x_l, const Matrix& y, LrGuidanceDictionaries& dicts,
                                CodeBatch& codes, const AtomUpdateObserver& observer) {
  check_pair(x_l, y, dicts, &codes);
  const Index k_atoms = dicts.psi_c_l.cols();

  {
    Matrix residual = branch_residual(x_l, dicts.psi_c_l, codes.z, dicts.psi_l, codes.u);
    const auto omega = row_supports(codes.u);
    std::vector<char> used(static_cast<std::size_t>(x_l.cols()), 0);
    for (Index k = 0; k < k_atoms; ++k) {
      update_atom(dicts.psi_l.col(k), codes.u, k, omega[static_cast<std::size_t>(k)], residual,
                  used);
      if (observer) observer(k);
    }
  }
  if (y.rows() == 0) return;
  {
    Matrix residual = branch_residual(y, dicts.phi_c, codes.z, dicts.phi, codes.v);
    const auto omega = row_supports(codes.v);
    std::vector<char> used(static_cast<std::size_t>(y.cols()), 0);
    for (Index k = 0; k < k_atoms; ++k) {
      update_atom(dicts.phi.col(k), codes.v, k, omega[static_cast<std::size_t>(k)], residual,
                  used);
      if (observer) observer(k_atoms + k);
    }
  }
}

Index clear_common_atoms(const Matrix& x_l, const Matrix& y, LrGuidanceDictionaries& dicts,
                         CodeBatch& codes, const AtomClearing& rule) {
  check_pair(x_l, y, dicts, &codes);
  const Index m = x_l.rows();
  const Index n = y.rows();
  const Index k_atoms = dicts.psi_c_l.cols();
  const Index t = x_l.cols();
  Matrix residual(m + n, t);
  residual.topRows(m) = branch_residual(x_l, dicts.psi_c_l, codes.z, dicts.psi_l, codes.u);
  residual.bottomRows(n) = branch_residual(y, dicts.phi_c, codes.z, dicts.phi, codes.v);
  Matrix atoms(m + n, k_atoms);
  atoms << dicts.psi_c_l, dicts.phi_c;
  const bool coupled = m > 0 && n > 0;

  // Unique pairs that fire together: under the model their supports are
  // independent, so sustained co-usage means they jointly play a common atom.
  struct Pair {
    Index count, psi, phi;
  };
  std::vector<Pair> pairs;
  if (coupled) {
    Eigen::MatrixXi together = Eigen::MatrixXi::Zero(k_atoms, k_atoms);
    for (Index i = 0; i < t; ++i) {
      for (Index a = 0; a < k_atoms; ++a) {
        if (codes.u(a, i) == 0.0) continue;
        for (Index b = 0; b < k_atoms; ++b) {
          if (codes.v(b, i) != 0.0) ++together(a, b);
        }
      }
    }
    for (Index a = 0; a < k_atoms; ++a) {
      const Index use_a = usage_of(codes.u, a);
      for (Index b = 0; b < k_atoms; ++b) {
        const Index c = together(a, b);
        if (c >= std::max<Index>(rule.min_usage, 1) &&
            2 * c >= std::min(use_a, usage_of(codes.v, b))) {
          pairs.push_back({c, a, b});
        }
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& l, const Pair& r) {
      if (l.count != r.count) return l.count > r.count;
      return l.psi != r.psi ? l.psi < r.psi : l.phi < r.phi;
    });
  }
  std::vector<char> psi_taken(static_cast<std::size_t>(k_atoms), 0);
  std::vector<char> phi_taken(static_cast<std::size_t>(k_atoms), 0);
  std::size_t next_pair = 0;
  auto take_pair = [&]() -> const Pair* {
    while (next_pair < pairs.size()) {
      const Pair& p = pairs[next_pair++];
      if (psi_taken[static_cast<std::size_t>(p.psi)] || phi_taken[static_cast<std::size_t>(p.phi)]) {
        continue;
      }
      psi_taken[static_cast<std::size_t>(p.psi)] = 1;
      phi_taken[static_cast<std::size_t>(p.phi)] = 1;
      return &p;
    }
    return nullptr;
  };

  std::vector<char> flagged = flag_atoms(atoms, codes.z, rule);
  std::vector<char> thin(static_cast<std::size_t>(k_atoms), 0);
  if (coupled) {
    for (Index k = 0; k < k_atoms; ++k) {
      const double share = std::min(atoms.col(k).head(m).norm(), atoms.col(k).tail(n).norm());
      thin[static_cast<std::size_t>(k)] = share < rule.min_branch_share;
      flagged[static_cast<std::size_t>(k)] |= thin[static_cast<std::size_t>(k)];
    }
  }
  if (std::find(flagged.begin(), flagged.end(), 1) == flagged.end()) return 0;
  std::optional<Replacer> replacer;
  Index replaced = 0;
  for (Index k = 0; k < k_atoms; ++k) {
    if (!flagged[static_cast<std::size_t>(k)]) continue;
    const Vector old = atoms.col(k);
    const Index old_usage = usage_of(codes.z, k);
    release_atom(atoms, codes.z, residual, k);
    if (const Pair* p = take_pair()) {
      std::vector<Index> omega;
      for (Index i = 0; i < t; ++i) {
        if (codes.u(p->psi, i) != 0.0 && codes.v(p->phi, i) != 0.0) omega.push_back(i);
      }
      Matrix e(m + n, static_cast<Index>(omega.size()));
      for (std::size_t j = 0; j < omega.size(); ++j) {
        const Index i = omega[j];
        residual.col(i).head(m) += codes.u(p->psi, i) * dicts.psi_l.col(p->psi);
        residual.col(i).tail(n) += codes.v(p->phi, i) * dicts.phi.col(p->phi);
        codes.u(p->psi, i) = 0.0;
        codes.v(p->phi, i) = 0.0;
        e.col(static_cast<Index>(j)) = residual.col(i);
      }
      const Vector fresh = leading_left_singular_vector(e);
      if (fresh.size() > 0) atoms.col(k) = fresh;
      if (thin[static_cast<std::size_t>(k)]) {
        // The cleared pair lived in one branch; that branch's unique slot
        // of the promoted pair takes it over.
        if (old.head(m).norm() < old.tail(n).norm()) {
          release_atom(dicts.phi, codes.v, residual, p->phi, m);
          dicts.phi.col(p->phi) = old.tail(n).normalized();
        } else {
          release_atom(dicts.psi_l, codes.u, residual, p->psi, 0);
          dicts.psi_l.col(p->psi) = old.head(m).normalized();
        }
      }
    } else {
      if (thin[static_cast<std::size_t>(k)]) {
        // No partner pair: the branch moves into the least used atom of the
        // matching unique dictionary when that atom does less work.
        const bool to_phi = old.head(m).norm() < old.tail(n).norm();
        Matrix& unique = to_phi ? dicts.phi : dicts.psi_l;
        Matrix& unique_codes = to_phi ? codes.v : codes.u;
        Index victim = 0;
        for (Index j = 1; j < k_atoms; ++j) {
          if (usage_of(unique_codes, j) < usage_of(unique_codes, victim)) victim = j;
        }
        if (usage_of(unique_codes, victim) < old_usage) {
          release_atom(unique, unique_codes, residual, victim, to_phi ? m : 0);
          unique.col(victim) = (to_phi ? Vector(old.tail(n)) : Vector(old.head(m))).normalized();
        }
      }
      if (!replacer) replacer.emplace(atoms, codes.z, residual, flagged, rule.max_coherence);
      if (!replacer->replace(k)) break;
    }
    ++replaced;
  }
  dicts.psi_c_l = atoms.topRows(m);
  dicts.phi_c = atoms.bottomRows(n);
  return replaced;
}

Index clear_unique_atoms(const Matrix& x_l, const Matrix& y, LrGuidanceDictionaries& dicts,
                         CodeBatch& codes, const AtomClearing& rule) {
  check_pair(x_l, y, dicts, &codes);
  Matrix residual = branch_residual(x_l, dicts.psi_c_l, codes.z, dicts.psi_l, codes.u);
  Index replaced = clear_atoms(dicts.psi_l, codes.u, residual, rule);
  if (y.rows() > 0) {
    residual = branch_residual(y, dicts.phi_c, codes.z, dicts.phi, codes.v);
    replaced += clear_atoms(dicts.phi, codes.v, residual, rule);
  }
  return replaced;
}

double common_objective(const Matrix& x_l, const Matrix& y, const LrGuidanceDictionaries& dicts,
                        const CodeBatch& codes) {
  return unique_objective_x(x_l, dicts, codes) + unique_objective_y(y, dicts, codes);
}

double unique_objective_x(const Matrix& x_l, const LrGuidanceDictionaries& dicts,
                          const CodeBatch& codes) {
  return (x_l - dicts.psi_c_l * codes.z - dicts.psi_l * codes.u).squaredNorm();
}

double unique_objective_y(const Matrix& y, const LrGuidanceDictionaries& dicts,
                          const CodeBatch& codes) {
  if (y.rows() == 0) return 0.0;
  return (y - dicts.phi_c * codes.z - dicts.phi * codes.v).squaredNorm();
}

StepOneResult learn_lr_guidance_dictionaries(const Matrix& x_l, const Matrix& y,
                                             const TrainConfig& cfg,
                                             const LrGuidanceDictionaries* initial) {
  cfg.check();
  if (x_l.cols() != y.cols()) throw DimensionError("x_l and y sample counts differ");
  if (x_l.cols() < cfg.atoms) {
    std::cerr << "warning: " << x_l.cols() << " training samples for " << cfg.atoms
              << " atoms; T >= K is recommended\n";
  }
  StepOneResult result;
  if (initial) {
    result.dicts = *initial;
  } else {
    std::mt19937_64 rng(cfg.seed);
    result.dicts = initialize_dictionaries(x_l.rows(), y.rows(), cfg.atoms, rng);
  }
  check_pair(x_l, y, result.dicts, nullptr);

  TrainingTrace& trace = result.trace;
  auto code_pass = [&] {
    const auto start = Clock::now();
    result.codes = global_sparse_coding(x_l, y, result.dicts, cfg.sparsity, cfg.workers);
    trace.coding_seconds += seconds_since(start);
    trace.rmse_x.push_back(rmse_of(branch_residual(x_l, result.dicts.psi_c_l, result.codes.z,
                                                   result.dicts.psi_l, result.codes.u)));
    trace.rmse_y.push_back(rmse_of(branch_residual(y, result.dicts.phi_c, result.codes.z,
                                                   result.dicts.phi, result.codes.v)));
  };

  for (int p = 0; p < cfg.out_iter; ++p) {
    for (int q = 0; q < cfg.in_iter; ++q) {
      code_pass();
      const auto start = Clock::now();
      update_common_dictionaries(x_l, y, result.dicts, result.codes);
      if (cfg.clearing.enabled) clear_common_atoms(x_l, y, result.dicts, result.codes, cfg.clearing);
      trace.update_seconds += seconds_since(start);
    }
    for (int q = 0; q < cfg.in_iter; ++q) {
      code_pass();
      const auto start = Clock::now();
      update_unique_dictionaries(x_l, y, result.dicts, result.codes);
      if (cfg.clearing.enabled) clear_unique_atoms(x_l, y, result.dicts, result.codes, cfg.clearing);
      trace.update_seconds += seconds_since(start);
    }
  }
  // Codes consistent with the final dictionaries; not part of the per-pass trace.
  {
    const auto start = Clock::now();
    result.codes = global_sparse_coding(x_l, y, result.dicts, cfg.sparsity, cfg.workers);
    trace.coding_seconds += seconds_since(start);
  }
  trace.final_rmse_x = rmse_of(branch_residual(x_l, result.dicts.psi_c_l, result.codes.z,
                                               result.dicts.psi_l, result.codes.u));
  trace.final_rmse_y = rmse_of(branch_residual(y, result.dicts.phi_c, result.codes.z,
                                               result.dicts.phi, result.codes.v));
  return result;
}

HrDictionaries solve_hr_dictionaries(const Matrix& x_h, const Matrix& z, const Matrix& u,
                                     double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("ridge lambda must be > 0");
  const Index k = z.rows();
  const Index t = z.cols();
  if (u.rows() != k || u.cols() != t || x_h.cols() != t) {
    throw DimensionError("solve_hr_dictionaries: x_h, Z and U shapes disagree");
  }
  std::vector<Eigen::Triplet<double>> entries;
  for (Index i = 0; i < t; ++i) {
    for (Index r = 0; r < k; ++r) {
      if (z(r, i) != 0.0) entries.emplace_back(r, i, z(r, i));
    }
    for (Index r = 0; r < k; ++r) {
      if (u(r, i) != 0.0) entries.emplace_back(k + r, i, u(r, i));
    }
  }
  Eigen::SparseMatrix<double> gamma(2 * k, t);
  gamma.setFromTriplets(entries.begin(), entries.end());
  const Eigen::SparseMatrix<double> gamma_t = gamma.transpose();

  Matrix normal = Matrix(gamma * gamma_t);
  normal.diagonal().array() += lambda;
  const Matrix rhs = gamma * x_h.transpose();  // 2K x N
  const Matrix solved = normal.llt().solve(rhs);
  HrDictionaries out;
  out.psi_c_h = solved.topRows(k).transpose();
  out.psi_h = solved.bottomRows(k).transpose();
  return out;
}

TrainResult train(const TrainingBatch& batch, const TrainConfig& cfg) {
  batch.check();
  StepOneResult step1 = learn_lr_guidance_dictionaries(batch.x_l, batch.y, cfg);
  const auto start = Clock::now();
  HrDictionaries hr = solve_hr_dictionaries(batch.x_h, step1.codes.z, step1.codes.u, cfg.lambda);
  step1.trace.hr_solve_seconds = seconds_since(start);

  TrainResult out;
  CoupledDictionarySet& d = out.dictionaries;
  d.psi_c_l = std::move(step1.dicts.psi_c_l);
  d.psi_l = std::move(step1.dicts.psi_l);
  d.phi_c = std::move(step1.dicts.phi_c);
  d.phi = std::move(step1.dicts.phi);
  d.psi_c_h = std::move(hr.psi_c_h);
  d.psi_h = std::move(hr.psi_h);
  d.dims = Dims{batch.x_l.rows(), batch.x_h.rows(), cfg.atoms};
  out.codes = std::move(step1.codes);
  out.trace = std::move(step1.trace);
  return out;
}

SingleModalityDictionarySet train_single_modality(const Matrix& x_l, const Matrix& x_h,
                                                  const TrainConfig& cfg, TrainingTrace* trace) {
  if (x_l.cols() != x_h.cols()) throw DimensionError("x_l and x_h sample counts differ");
  const Matrix no_guidance(0, x_l.cols());
  StepOneResult step1 = learn_lr_guidance_dictionaries(x_l, no_guidance, cfg);
  HrDictionaries hr = solve_hr_dictionaries(x_h, step1.codes.z, step1.codes.u, cfg.lambda);
  if (trace) *trace = step1.trace;
  return SingleModalityDictionarySet{std::move(step1.dicts.psi_c_l), std::move(step1.dicts.psi_l),
                                     std::move(hr.psi_c_h), std::move(hr.psi_h)};
}

SingleModalityDictionarySet target_branch(const CoupledDictionarySet& dset) {
  return SingleModalityDictionarySet{dset.psi_c_l, dset.psi_l, dset.psi_c_h, dset.psi_h};
}

}  // namespace cdl
