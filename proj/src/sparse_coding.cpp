#include "cdl/sparse_coding.hpp"

#include "cdl/parallel.hpp"

#include <cmath>
#include <sstream>

namespace cdl {

CodingDictionary::CodingDictionary(Matrix atoms) : atoms_(std::move(atoms)) {
  if (!atoms_.allFinite()) {
    throw std::invalid_argument("dictionary contains non-finite entries");
  }
  norms_ = atoms_.colwise().norm().transpose();
  for (Index j = 0; j < norms_.size(); ++j) {
    if (!(norms_[j] > 0.0)) {
      std::ostringstream os;
      os << "dictionary atom " << j << " has zero norm";
      throw std::invalid_argument(os.str());
    }
  }
  gram_.resize(atoms_.cols(), atoms_.cols());
  gram_.setZero();
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(atoms_.transpose());
  gram_ = gram_.selfadjointView<Eigen::Lower>();
}

JointDictionary stack_joint_dictionary(const Matrix& psi_c_l, const Matrix& psi_l,
                                       const Matrix& phi_c, const Matrix& phi) {
  const Index m = psi_c_l.rows();
  const Index n = phi_c.rows();
  const Index k = psi_c_l.cols();
  if (psi_l.rows() != m || psi_l.cols() != k || phi_c.cols() != k || phi.rows() != n ||
      phi.cols() != k) {
    std::ostringstream os;
    os << "joint dictionary blocks disagree: psi_c_l " << m << "x" << k << ", psi_l "
       << psi_l.rows() << "x" << psi_l.cols() << ", phi_c " << phi_c.rows() << "x"
       << phi_c.cols() << ", phi " << phi.rows() << "x" << phi.cols();
    throw DimensionError(os.str());
  }
  for (const Matrix* b : {&psi_c_l, &psi_l, &phi_c, &phi}) {
    if (!b->allFinite()) throw std::invalid_argument("joint dictionary: non-finite entries");
  }
  Matrix stacked = Matrix::Zero(m + n, 3 * k);
  stacked.block(0, 0, m, k) = psi_c_l;
  stacked.block(0, k, m, k) = psi_l;
  stacked.block(m, 0, n, k) = phi_c;
  stacked.block(m, 2 * k, n, k) = phi;
  return JointDictionary{Dims{m, n, k}, CodingDictionary(std::move(stacked))};
}

Vector stack_signal(const SignalPair& sig) {
  Vector s(sig.x_l.size() + sig.y.size());
  s << sig.x_l, sig.y;
  return s;
}

JointSparseCode split_code(const Vector& c, Index k) {
  if (c.size() != 3 * k) throw DimensionError("code length is not 3K");
  return JointSparseCode{c.segment(0, k), c.segment(k, k), c.segment(2 * k, k)};
}

Vector join_code(const JointSparseCode& code) {
  Vector c(code.z.size() + code.u.size() + code.v.size());
  c << code.z, code.u, code.v;
  return c;
}

namespace {

void check_budget(Index budget, const CodingDictionary& dict) {
  if (budget < 1 || budget > dict.size() || budget > dict.signal_length()) {
    std::ostringstream os;
    os << "sparsity budget " << budget << " outside [1, min(" << dict.size() << ", "
       << dict.signal_length() << ")]";
    throw ConfigError(os.str());
  }
}

// Scratch buffers reused across the samples of one worker.
class OmpWorkspace {
 public:
  OmpWorkspace(Index n, Index p, Index budget)
      : q_(n, budget), r_(Matrix::Zero(budget, budget)), qtx_(budget), coef_(budget),
        corr_(p), residual_(n), w_(n), chosen_(static_cast<std::size_t>(p)) {
    support_.reserve(static_cast<std::size_t>(budget));
  }

  // Writes the coefficients into `out` (length p, zeroed by the caller).
  template <class Out>
  void run(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& alpha0,
           const CodingDictionary& dict, Index budget, Out&& out, OmpTrace* trace) {
    const Matrix& atoms = dict.atoms();
    const Vector& norms = dict.norms();
    const Matrix& gram = dict.gram();
    const Index p = dict.size();

    support_.clear();
    std::fill(chosen_.begin(), chosen_.end(), 0);
    residual_ = x;
    double rnorm = x.norm();
    const double tol = kOmpRelativeTolerance * rnorm;
    corr_ = alpha0;
    bool degenerate = false;
    Index k = 0;

    if (trace) {
      trace->support.clear();
      trace->residual_norms.clear();
    }

    while (k < budget && rnorm > tol) {
      Index best = -1;
      double best_score = 0.0;
      for (Index j = 0; j < p; ++j) {
        if (chosen_[static_cast<std::size_t>(j)]) continue;
        const double score = std::abs(corr_[j]) / norms[j];
        if (score > best_score) {
          best_score = score;
          best = j;
        }
      }
      if (best < 0) break;
      chosen_[static_cast<std::size_t>(best)] = 1;
      support_.push_back(best);

      if (!degenerate) {
        // Two passes of Gram-Schmidt against the current orthonormal basis.
        w_ = atoms.col(best);
        for (int pass = 0; pass < 2; ++pass) {
          if (k == 0) break;
          const Vector h = q_.leftCols(k).transpose() * w_;
          w_.noalias() -= q_.leftCols(k) * h;
          r_.col(k).head(k) += h;
        }
        const double rkk = w_.norm();
        if (rkk <= 1e-10 * norms[best]) {
          degenerate = true;
        } else {
          r_(k, k) = rkk;
          q_.col(k) = w_ / rkk;
          qtx_[k] = q_.col(k).dot(x);
        }
      }
      ++k;

      if (degenerate) {
        Matrix selected(atoms.rows(), k);
        for (Index i = 0; i < k; ++i) selected.col(i) = atoms.col(support_[static_cast<std::size_t>(i)]);
        coef_.head(k) = selected.completeOrthogonalDecomposition().solve(Vector(x));
      } else {
        coef_.head(k) =
            r_.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(qtx_.head(k));
      }

      residual_ = x;
      corr_ = alpha0;
      for (Index i = 0; i < k; ++i) {
        const Index j = support_[static_cast<std::size_t>(i)];
        residual_.noalias() -= coef_[i] * atoms.col(j);
        corr_.noalias() -= coef_[i] * gram.col(j);
      }
      rnorm = residual_.norm();
      if (trace) {
        trace->support.push_back(best);
        trace->residual_norms.push_back(rnorm);
      }
    }

    for (Index i = 0; i < k; ++i) out[support_[static_cast<std::size_t>(i)]] = coef_[i];
    // Reset the triangular factor for the next sample.
    r_.topLeftCorner(k, k).setZero();
    if (trace) trace->residual = residual_;
  }

 private:
  Matrix q_;
  Matrix r_;
  Vector qtx_;
  Vector coef_;
  Vector corr_;
  Vector residual_;
  Vector w_;
  std::vector<char> chosen_;
  std::vector<Index> support_;
};

}  // namespace

Vector omp(const Vector& signal, const CodingDictionary& dict, Index budget, OmpTrace* trace) {
  check_budget(budget, dict);
  if (signal.size() != dict.signal_length()) {
    throw DimensionError("signal length does not match dictionary rows");
  }
  if (!signal.allFinite()) throw std::invalid_argument("signal contains non-finite entries");
  Vector out = Vector::Zero(dict.size());
  OmpWorkspace ws(dict.signal_length(), dict.size(), budget);
  const Vector alpha0 = dict.atoms().transpose() * signal;
  ws.run(signal, alpha0, dict, budget, out, trace);
  return out;
}

Matrix omp_batch(const Matrix& signals, const CodingDictionary& dict, Index budget,
                 int workers) {
  check_budget(budget, dict);
  if (signals.rows() != dict.signal_length()) {
    throw DimensionError("signal length does not match dictionary rows");
  }
  if (!signals.allFinite()) throw std::invalid_argument("signals contain non-finite entries");
  Matrix codes = Matrix::Zero(dict.size(), signals.cols());
  constexpr Index kBlock = 256;
  parallel_for(signals.cols(), workers, [&](std::ptrdiff_t begin, std::ptrdiff_t end) {
    OmpWorkspace ws(dict.signal_length(), dict.size(), budget);
    Matrix alpha;
    for (Index b0 = begin; b0 < end; b0 += kBlock) {
      const Index cols = std::min<Index>(kBlock, end - b0);
      alpha.noalias() = dict.atoms().transpose() * signals.middleCols(b0, cols);
      for (Index i = 0; i < cols; ++i) {
        ws.run(signals.col(b0 + i), alpha.col(i), dict, budget, codes.col(b0 + i), nullptr);
      }
    }
  });
  return codes;
}

JointSparseCode omp_joint(const SignalPair& sig, const JointDictionary& jd, Index budget,
                          OmpTrace* trace) {
  if (sig.x_l.size() != jd.dims.m || sig.y.size() != jd.dims.n) {
    throw DimensionError("signal pair does not match joint dictionary dimensions");
  }
  return split_code(omp(stack_signal(sig), jd.dictionary, budget, trace), jd.dims.k);
}

double largest_eigenvalue(const Matrix& spd) {
  const Index p = spd.rows();
  if (p == 0) return 0.0;
  // Deterministic start with all components nonzero.
  Vector v(p);
  for (Index i = 0; i < p; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    Vector w = spd * v;
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (std::abs(next - lambda) <= 1e-13 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

Vector ista(const Vector& signal, const CodingDictionary& dict, const IstaOptions& options,
            IstaTrace* trace) {
  if (!(options.lambda > 0.0)) throw ConfigError("ISTA lambda must be > 0");
  if (signal.size() != dict.signal_length()) {
    throw DimensionError("signal length does not match dictionary rows");
  }
  const Matrix& d = dict.atoms();
  const double lip_sq = largest_eigenvalue(dict.gram());
  // The smooth term ||x - Dc||^2 has gradient 2 D^T (Dc - x), Lipschitz
  // constant 2 sigma_max^2. The tiny margin covers the power-iteration
  // estimate approaching sigma_max^2 from below.
  const double step = 1.0 / (2.0 * lip_sq * (1.0 + 1e-9));
  const double thresh = step * options.lambda;
  const Vector dtx = d.transpose() * signal;

  Vector c = Vector::Zero(dict.size());
  double f = signal.squaredNorm();
  if (trace) {
    trace->objective.clear();
    trace->lipschitz = lip_sq;
  }
  for (int it = 0; it < options.max_iter && f > 0.0; ++it) {
    const Vector grad = 2.0 * (dict.gram() * c - dtx);
    Vector next = c - step * grad;
    for (Index j = 0; j < next.size(); ++j) {
      const double a = std::abs(next[j]) - thresh;
      next[j] = a > 0.0 ? std::copysign(a, next[j]) : 0.0;
    }
    const double f_next = (signal - d * next).squaredNorm() + options.lambda * next.lpNorm<1>();
    if (trace) trace->objective.push_back(f_next);
    const double decrease = (f - f_next) / f;
    c = std::move(next);
    f = f_next;
    if (decrease < options.tol) break;
  }
  return c;
}

JointSparseCode ista_joint(const SignalPair& sig, const JointDictionary& jd,
                           const IstaOptions& options, IstaTrace* trace) {
  if (sig.x_l.size() != jd.dims.m || sig.y.size() != jd.dims.n) {
    throw DimensionError("signal pair does not match joint dictionary dimensions");
  }
  return split_code(ista(stack_signal(sig), jd.dictionary, options, trace), jd.dims.k);
}

double residual_norm(const SignalPair& sig, const JointDictionary& jd,
                     const JointSparseCode& code) {
  if (sig.x_l.size() != jd.dims.m || sig.y.size() != jd.dims.n || code.z.size() != jd.dims.k ||
      code.u.size() != jd.dims.k || code.v.size() != jd.dims.k) {
    throw DimensionError("residual_norm: shape mismatch");
  }
  return (stack_signal(sig) - jd.stacked() * join_code(code)).norm();
}

}  // namespace cdl
