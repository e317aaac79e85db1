#include "cdl/core_model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "dictionary files are written in native little-endian order");

namespace cdl {

Index JointSparseCode::nonzeros() const {
  return (z.array() != 0.0).count() + (u.array() != 0.0).count() +
         (v.array() != 0.0).count();
}

void TrainingBatch::check() const {
  if (x_h.cols() != x_l.cols() || y.cols() != x_l.cols()) {
    std::ostringstream os;
    os << "training batch sample counts differ: x_l " << x_l.cols() << ", x_h "
       << x_h.cols() << ", y " << y.cols();
    throw DimensionError(os.str());
  }
  if (x_h.rows() != y.rows()) {
    throw DimensionError("training batch: x_h and y must have the same patch length");
  }
  if (x_l.rows() > x_h.rows()) {
    throw DimensionError("training batch: LR patch length exceeds HR patch length");
  }
}

void TrainConfig::check() const {
  if (atoms < 1) throw ConfigError("atoms must be >= 1");
  if (sparsity < 1 || sparsity > 3 * atoms) {
    throw ConfigError("sparsity must lie in [1, 3*atoms]");
  }
  if (out_iter < 1) throw ConfigError("out_iter must be >= 1");
  if (in_iter < 1) throw ConfigError("in_iter must be >= 1");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  clearing.check();
}

void AtomClearing::check() const {
  if (min_usage < 0) throw ConfigError("min_usage must be >= 0");
  if (!(min_relative_usage >= 0.0 && min_relative_usage < 1.0)) {
    throw ConfigError("min_relative_usage must lie in [0, 1)");
  }
  if (!(max_coherence > 0.0 && max_coherence <= 1.0)) {
    throw ConfigError("max_coherence must lie in (0, 1]");
  }
  if (!(min_branch_share >= 0.0 && min_branch_share < 1.0)) {
    throw ConfigError("min_branch_share must lie in [0, 1)");
  }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

namespace {

struct Block {
  const char* name;
  Matrix CoupledDictionarySet::*member;
  bool low_res;
};

constexpr std::array<Block, 6> kBlocks{{
    {"psi_c_l", &CoupledDictionarySet::psi_c_l, true},
    {"psi_l", &CoupledDictionarySet::psi_l, true},
    {"psi_c_h", &CoupledDictionarySet::psi_c_h, false},
    {"psi_h", &CoupledDictionarySet::psi_h, false},
    {"phi_c", &CoupledDictionarySet::phi_c, false},
    {"phi", &CoupledDictionarySet::phi, false},
}};

void check_columns(const Matrix& m, const char* name, double tolerance,
                   ValidationReport& report) {
  for (Index j = 0; j < m.cols(); ++j) {
    const double norm = m.col(j).norm();
    const double dev = std::abs(norm - 1.0);
    if (std::isfinite(dev)) {
      report.max_norm_deviation = std::max(report.max_norm_deviation, dev);
    }
    if (!(dev <= tolerance)) report.norm_violations.push_back({name, j, norm});
  }
}

}  // namespace

ValidationReport validate(const CoupledDictionarySet& dset, double tolerance) {
  ValidationReport report;
  const Dims& d = dset.dims;
  if (d.m > d.n) report.dimension_issues.push_back("M exceeds N");
  for (const Block& b : kBlocks) {
    const Matrix& m = dset.*b.member;
    const Index rows = b.low_res ? d.m : d.n;
    if (m.rows() != rows || m.cols() != d.k) {
      std::ostringstream os;
      os << b.name << " is " << m.rows() << "x" << m.cols() << ", expected "
         << rows << "x" << d.k;
      report.dimension_issues.push_back(os.str());
    }
    if (!m.allFinite()) report.finite = false;
  }
  if (!report.dimension_issues.empty()) return report;

  for (Index j = 0; j < d.k; ++j) {
    const double norm = std::sqrt(dset.psi_c_l.col(j).squaredNorm() +
                                  dset.phi_c.col(j).squaredNorm());
    const double dev = std::abs(norm - 1.0);
    if (std::isfinite(dev)) {
      report.max_norm_deviation = std::max(report.max_norm_deviation, dev);
    }
    if (!(dev <= tolerance)) report.norm_violations.push_back({"common", j, norm});
  }
  check_columns(dset.psi_l, "psi_l", tolerance, report);
  check_columns(dset.phi, "phi", tolerance, report);
  return report;
}

void save_dictionary_set(const CoupledDictionarySet& dset,
                         const std::filesystem::path& path) {
  const ValidationReport shape = validate(dset, INFINITY);
  if (!shape.dimension_issues.empty()) {
    throw DimensionError("cannot save dictionary set: " + shape.dimension_issues.front());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "CDL1 " << dset.dims.m << ' ' << dset.dims.n << ' ' << dset.dims.k << '\n';
  for (const Block& b : kBlocks) {
    const Matrix& m = dset.*b.member;
    out << b.name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

std::string read_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("unexpected end of file reading " + what);
  return line;
}

}  // namespace

CoupledDictionarySet load_dictionary_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  std::istringstream header(read_line(in, "header"));
  std::string magic;
  header >> magic;
  if (magic != "CDL1") {
    throw FormatError("magic mismatch in " + path.string() + ": expected CDL1, got '" +
                      magic + "'");
  }
  CoupledDictionarySet dset;
  if (!(header >> dset.dims.m >> dset.dims.n >> dset.dims.k) || dset.dims.m < 0 ||
      dset.dims.n < 0 || dset.dims.k < 0) {
    throw FormatError("malformed CDL1 header in " + path.string());
  }

  for (const Block& b : kBlocks) {
    std::istringstream bh(read_line(in, std::string("block ") + b.name));
    std::string name;
    Index rows = -1;
    Index cols = -1;
    if (!(bh >> name >> rows >> cols)) {
      throw FormatError(std::string("malformed header for block ") + b.name);
    }
    if (name != b.name) {
      throw FormatError(std::string("expected block ") + b.name + ", found '" + name + "'");
    }
    const Index want_rows = b.low_res ? dset.dims.m : dset.dims.n;
    if (rows != want_rows || cols != dset.dims.k) {
      std::ostringstream os;
      os << "block " << b.name << " declares " << rows << "x" << cols
         << " but the file header implies " << want_rows << "x" << dset.dims.k;
      throw FormatError(os.str());
    }
    Matrix m(rows, cols);
    const auto bytes = static_cast<std::streamsize>(m.size() * sizeof(double));
    in.read(reinterpret_cast<char*>(m.data()), bytes);
    if (in.gcount() != bytes) {
      std::ostringstream os;
      os << "short payload in block " << b.name << ": expected " << bytes
         << " bytes, got " << in.gcount();
      throw FormatError(os.str());
    }
    dset.*b.member = std::move(m);
  }
  return dset;
}

}  // namespace cdl
