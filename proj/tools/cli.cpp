#include "cli.hpp"

#include "cdl/core_model.hpp"
#include "cdl/dictionary_learning.hpp"
#include "cdl/imaging.hpp"
#include "cdl/metrics.hpp"
#include "cdl/super_resolution.hpp"
#include "cdl/synthetic_bench.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace cdl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// A declared pass condition on a report aggregate. `key@a:b` restricts an
// array aggregate to the entries whose M lies in [a, b]; without it every
// entry must pass.
struct Threshold {
  std::string text;
  std::string key;
  std::string op;
  double bound = 0.0;
  std::optional<std::pair<long, long>> m_range;
};

Threshold parse_threshold(const std::string& text) {
  static const char* ops[] = {">=", "<=", ">", "<"};
  for (const char* op : ops) {
    const auto pos = text.find(op);
    if (pos == std::string::npos) continue;
    Threshold t;
    t.text = text;
    t.op = op;
    std::string lhs = trim(text.substr(0, pos));
    const std::string rhs = trim(text.substr(pos + std::string(op).size()));
    try {
      std::size_t used = 0;
      t.bound = std::stod(rhs, &used);
      if (used != rhs.size()) throw std::invalid_argument(rhs);
    } catch (const std::exception&) {
      throw ConfigError("threshold '" + text + "': bad bound '" + rhs + "'");
    }
    if (const auto at = lhs.find('@'); at != std::string::npos) {
      const std::string range = lhs.substr(at + 1);
      lhs = lhs.substr(0, at);
      const auto colon = range.find(':');
      try {
        const long lo = std::stol(range.substr(0, colon));
        const long hi = colon == std::string::npos ? lo : std::stol(range.substr(colon + 1));
        t.m_range = std::make_pair(lo, hi);
      } catch (const std::exception&) {
        throw ConfigError("threshold '" + text + "': bad M range '" + range + "'");
      }
    }
    if (lhs.empty()) throw ConfigError("threshold '" + text + "' names no metric");
    t.key = lhs;
    return t;
  }
  throw ConfigError("threshold '" + text + "' needs one of >=, <=, >, <");
}

bool holds(double value, const Threshold& t) {
  if (std::isnan(value)) return false;
  if (t.op == ">=") return value >= t.bound;
  if (t.op == "<=") return value <= t.bound;
  if (t.op == ">") return value > t.bound;
  return value < t.bound;
}

json check_threshold(const json& aggregates, const Threshold& t) {
  if (!aggregates.contains(t.key)) {
    throw ConfigError("threshold '" + t.text + "': unknown metric '" + t.key + "'");
  }
  const json& metric = aggregates.at(t.key);
  json result = {{"threshold", t.text}};
  if (metric.is_number()) {
    if (t.m_range) throw ConfigError("threshold '" + t.text + "': metric is not per-M");
    const double v = metric.get<double>();
    result["observed"] = v;
    result["pass"] = holds(v, t);
    return result;
  }
  if (!metric.is_array() || !aggregates.contains("M")) {
    throw ConfigError("threshold '" + t.text + "': metric is not a number or per-M list");
  }
  const json& ms = aggregates.at("M");
  json observed = json::object();
  bool pass = true;
  for (std::size_t i = 0; i < metric.size(); ++i) {
    const long m = ms.at(i).get<long>();
    if (t.m_range && (m < t.m_range->first || m > t.m_range->second)) continue;
    const double v = metric.at(i).is_number() ? metric.at(i).get<double>() : NAN;
    observed[std::to_string(m)] = v;
    pass = pass && holds(v, t);
  }
  if (observed.empty()) throw ConfigError("threshold '" + t.text + "' selects no M value");
  result["observed"] = observed;
  result["pass"] = pass;
  return result;
}

// JSON has no infinity; the eval and sr outputs spell it as a string.
json finite_or_sentinel(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

void write_text(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path);
}

std::vector<std::string> image_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

struct ClearingArgs {
  bool disabled = false;
  AtomClearing rule;

  void add_to(CLI::App* cmd) {
    cmd->add_flag("--no-clearing", disabled, "Keep degenerate atoms instead of replacing them");
    cmd->add_option("--clear-min-usage", rule.min_usage, "Absolute usage floor")
        ->capture_default_str();
    cmd->add_option("--clear-relative-usage", rule.min_relative_usage,
                    "Usage floor as a fraction of the mean usage")
        ->capture_default_str();
    cmd->add_option("--clear-max-coherence", rule.max_coherence,
                    "Largest |cos| allowed between atoms of one dictionary")
        ->capture_default_str();
    cmd->add_option("--clear-branch-share", rule.min_branch_share,
                    "Smallest squared norm share of a common atom branch")
        ->capture_default_str();
  }
  AtomClearing get() const {
    AtomClearing r = rule;
    r.enabled = !disabled;
    return r;
  }
};

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string lr_dir;
  std::string hr_dir;
  std::string guide_dir;
  std::string out;
  int scale = 4;
  Index patch = 8;
  Index stride = 1;
  Index atoms = 1024;
  Index sparsity = 8;
  int out_iter = 10;
  int in_iter = 20;
  double lambda = 1e-3;
  Index max_samples = 0;
  double var_threshold = 0.02;
  std::uint64_t seed = 0;
  int workers = 0;
  ClearingArgs clearing;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig tc;
  tc.atoms = a.atoms;
  tc.sparsity = a.sparsity;
  tc.out_iter = a.out_iter;
  tc.in_iter = a.in_iter;
  tc.lambda = a.lambda;
  tc.seed = a.seed;
  tc.workers = a.workers;
  tc.clearing = a.clearing.get();
  tc.check();
  if (a.scale < 2) throw ConfigError("scale must be >= 2");
  if (a.patch < 1) throw ConfigError("patch must be >= 1");

  const std::vector<std::string> names = image_names(a.lr_dir);
  if (names.empty()) throw std::runtime_error("no images in " + a.lr_dir);
  for (const std::string& dir : {a.hr_dir, a.guide_dir}) {
    for (const std::string& n : image_names(dir)) {
      if (!std::binary_search(names.begin(), names.end(), n)) {
        throw std::runtime_error("file " + (fs::path(dir) / n).string() +
                                 " has no counterpart in " + a.lr_dir);
      }
    }
  }
  std::vector<Image> lr;
  std::vector<Image> hr;
  std::vector<Image> guide;
  for (const std::string& n : names) {
    for (const std::string& dir : {a.hr_dir, a.guide_dir}) {
      const fs::path p = fs::path(dir) / n;
      if (!fs::exists(p)) throw std::runtime_error("missing file " + p.string());
    }
    lr.push_back(read_image(fs::path(a.lr_dir) / n));
    hr.push_back(read_image(fs::path(a.hr_dir) / n));
    guide.push_back(read_image(fs::path(a.guide_dir) / n));
  }
  TrainingSetOptions opts;
  opts.patch_side = a.patch;
  opts.scale = a.scale;
  opts.variance_threshold = a.var_threshold;
  opts.max_samples = a.max_samples;
  opts.seed = a.seed;
  opts.stride = a.stride;
  const TrainingBatch batch = build_training_batch(lr, hr, guide, opts);
  if (batch.samples() == 0) {
    throw std::runtime_error("no training patches left after variance filtering");
  }
  err << "training on " << batch.samples() << " patch triples from " << names.size()
      << " image(s)\n";
  const auto start = std::chrono::steady_clock::now();
  const TrainResult res = train(batch, tc);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_dictionary_set(res.dictionaries, a.out);
  err << "wrote " << a.out << " in " << seconds << " s\n";
  const json report = {{"dictionary", a.out},
                       {"images", names.size()},
                       {"samples", batch.samples()},
                       {"final_rmse_x", res.trace.final_rmse_x},
                       {"final_rmse_y", res.trace.final_rmse_y},
                       {"seconds", seconds}};
  out << report.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- sr

struct SrArgs {
  std::string input;
  std::string guide;
  std::string dict;
  std::string out;
  std::string truth;
  std::string solver = "omp";
  int scale = 4;
  Index stride = 1;
  Index sparsity = 8;
  double ista_lambda = 1e-2;
  bool no_side_info = false;
  int workers = 0;
};

json quality(const Image& ref, const Image& test) {
  return {{"psnr", finite_or_sentinel(psnr(ref, test))},
          {"ssim", ssim(ref, test)},
          {"rmse", rmse(ref, test)}};
}

int cmd_sr(const SrArgs& a, std::ostream& out, std::ostream& err) {
  const CoupledDictionarySet dset = load_dictionary_set(a.dict);
  const auto side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(dset.dims.n))));
  SrConfig cfg;
  cfg.scale = a.scale;
  cfg.patch_side = side;
  cfg.overlap_stride = a.stride;
  cfg.sparsity = a.sparsity;
  cfg.ista_lambda = a.ista_lambda;
  cfg.workers = a.workers;
  if (a.solver == "omp") {
    cfg.solver = SolverKind::kOmp;
  } else if (a.solver == "ista") {
    cfg.solver = SolverKind::kIsta;
  } else {
    throw ConfigError("unknown solver '" + a.solver + "' (omp or ista)");
  }
  cfg.check(dset.dims.m, dset.dims.n);
  if (!a.no_side_info && a.guide.empty()) {
    throw ConfigError("--guide is required unless --no-side-info is given");
  }

  const Image lr = read_image(a.input);
  const auto start = std::chrono::steady_clock::now();
  Image hr;
  if (a.no_side_info) {
    hr = super_resolve_without_side_info(lr, target_branch(dset), cfg);
  } else {
    hr = super_resolve_image(lr, read_image(a.guide), dset, cfg);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_image(hr, a.out);
  err << "wrote " << a.out << " (" << hr.width << "x" << hr.height << ") in " << seconds
      << " s\n";

  json report = {{"output", a.out},
                 {"width", hr.width},
                 {"height", hr.height},
                 {"side_info", !a.no_side_info},
                 {"seconds", seconds}};
  if (!a.truth.empty()) {
    const Image truth = read_image(a.truth);
    report["metrics"] = quality(truth, hr);
    report["bicubic_metrics"] = quality(truth, bicubic_resize(lr, truth.width, truth.height));
  }
  out << report.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& ref_path, const std::string& test_path, std::ostream& out) {
  const Image ref = read_image(ref_path);
  const Image test = read_image(test_path);
  if (!ref.same_size(test)) {
    std::ostringstream os;
    os << "reference is " << ref.width << "x" << ref.height << " but test is " << test.width
       << "x" << test.height;
    throw DimensionError(os.str());
  }
  out << quality(ref, test).dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SynthConfig synth;
  std::optional<double> input_snr;
  int out_iter = 10;
  int in_iter = 20;
  double lambda = 1e-3;
  int workers = 0;
  ClearingArgs clearing;
  std::vector<std::string> thresholds;
  std::string out;

  TrainConfig train_config() const {
    TrainConfig tc;
    tc.atoms = synth.k;
    tc.sparsity = synth.total_sparsity();
    tc.out_iter = out_iter;
    tc.in_iter = in_iter;
    tc.lambda = lambda;
    tc.seed = synth.seed;
    tc.workers = workers;
    tc.clearing = clearing.get();
    return tc;
  }
};

void add_synth_options(CLI::App* cmd, SynthArgs& a) {
  cmd->add_option("--n", a.synth.n, "HR / guidance signal length")->capture_default_str();
  cmd->add_option("--k", a.synth.k, "Atoms per dictionary")->capture_default_str();
  cmd->add_option("--t", a.synth.t, "Training samples")->capture_default_str();
  cmd->add_option("--s-z", a.synth.s_z, "Common sparsity")->capture_default_str();
  cmd->add_option("--s-u", a.synth.s_u, "Target-only sparsity")->capture_default_str();
  cmd->add_option("--s-v", a.synth.s_v, "Guidance-only sparsity")->capture_default_str();
  cmd->add_option("--trials", a.synth.trials, "Independent trials")->capture_default_str();
  cmd->add_option("--seed", a.synth.seed, "Master seed")->capture_default_str();
  cmd->add_option("--out-iter", a.out_iter, "Outer training iterations")->capture_default_str();
  cmd->add_option("--in-iter", a.in_iter, "Inner training iterations")->capture_default_str();
  cmd->add_option("--lambda", a.lambda, "Ridge weight of the HR solve")->capture_default_str();
  cmd->add_option("--workers", a.workers, "Worker threads (0 = all cores)")
      ->capture_default_str();
  cmd->add_option("--threshold", a.thresholds,
                  "Pass condition on an aggregate, e.g. mean_ratio_phi>=0.9 or "
                  "side_info_gain_db@2:48>0 (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  cmd->add_option("--out", a.out, "Report file (default stdout)");
  a.clearing.add_to(cmd);
}

int finish_report(ExperimentReport report, const std::vector<Threshold>& thresholds,
                  const std::string& out_path, std::ostream& out, std::ostream& err) {
  bool pass = true;
  json results = json::array();
  for (const Threshold& t : thresholds) {
    json r = check_threshold(report.aggregates, t);
    err << (r["pass"].get<bool>() ? "PASS " : "FAIL ") << t.text << " observed "
        << r["observed"].dump() << "\n";
    pass = pass && r["pass"].get<bool>();
    results.push_back(std::move(r));
  }
  json j = report.to_json();
  if (!thresholds.empty()) j["thresholds"] = results;
  write_text(j.dump(2) + "\n", out_path, out);
  return pass ? kExitOk : kExitFailure;
}

std::vector<Threshold> parse_thresholds(const std::vector<std::string>& texts) {
  std::vector<Threshold> out;
  for (const std::string& t : texts) out.push_back(parse_threshold(t));
  return out;
}

struct SynthCdlArgs : SynthArgs {
  std::optional<double> min_ratio;
  std::optional<double> max_rmse;
};

int cmd_synth_cdl(const SynthCdlArgs& a, std::ostream& out, std::ostream& err) {
  SynthConfig cfg = a.synth;
  cfg.input_snr_db = a.input_snr;
  cfg.check();
  std::vector<std::string> texts = a.thresholds;
  if (a.min_ratio) {
    for (const char* k : {"mean_ratio_psi_c", "mean_ratio_phi_c", "mean_ratio_psi",
                          "mean_ratio_phi"}) {
      texts.push_back(std::string(k) + ">=" + std::to_string(*a.min_ratio));
    }
  }
  if (a.max_rmse) {
    for (const char* k : {"mean_final_rmse_x", "mean_final_rmse_y"}) {
      texts.push_back(std::string(k) + "<=" + std::to_string(*a.max_rmse));
    }
  }
  const std::vector<Threshold> thresholds = parse_thresholds(texts);
  err << "cdl recovery: " << cfg.trials << " trial(s), N=" << cfg.n << " M=" << cfg.m
      << " K=" << cfg.k << " T=" << cfg.t << " s=(" << cfg.s_z << "," << cfg.s_u << ","
      << cfg.s_v << ")\n";
  ExperimentReport report = run_cdl_recovery(cfg, a.train_config());
  return finish_report(std::move(report), thresholds, a.out, out, err);
}

struct SynthCsrArgs : SynthArgs {
  std::string measurements = "2:64:2";
  int test_trials = 1000;
  double noisy_snr = 5.0;
  bool true_dicts = false;
  std::string svg;
};

int cmd_synth_csr(const SynthCsrArgs& a, std::ostream& out, std::ostream& err) {
  SynthConfig cfg = a.synth;
  cfg.m = cfg.n / 2;
  cfg.input_snr_db.reset();
  cfg.check();
  CsrSweepOptions options;
  for (long m : parse_int_list(a.measurements)) options.measurements.push_back(m);
  options.trials = a.test_trials;
  options.noisy_input_snr_db = a.noisy_snr;
  options.workers = a.workers;
  const std::vector<Threshold> thresholds = parse_thresholds(a.thresholds);
  err << "csr sweep: " << (a.true_dicts ? "true" : "learned") << " dictionaries, K=" << cfg.k
      << ", " << options.measurements.size() << " M value(s), " << options.trials
      << " test signal(s) each\n";
  const CsrDictionaries dicts = prepare_csr_dictionaries(cfg, a.train_config(), !a.true_dicts);
  ExperimentReport report = run_csr_sweep(cfg, dicts, options);
  if (!a.svg.empty()) write_text(csr_svg(report), a.svg, out);
  return finish_report(std::move(report), thresholds, a.out, out, err);
}

// Splits `--config FILE` out of the arguments and splices the file's pairs in
// right after the subcommand so that explicit flags (parsed later) win.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  std::vector<std::string> rest;
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file name");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return rest;
  if (rest.empty()) throw ConfigError("--config needs a subcommand");
  CLI::App* cmd = app.get_subcommand_no_throw(rest.front());
  if (cmd == nullptr) throw ConfigError("unknown subcommand '" + rest.front() + "'");
  const std::vector<std::string> pairs = config_arguments(read_text(*path));
  for (const std::string& p : pairs) {
    const std::string key = p.substr(2, p.find('=') - 2);
    if (cmd->get_option_no_throw("--" + key) == nullptr) {
      throw ConfigError("unknown config key '" + key + "' for " + rest.front());
    }
  }
  std::vector<std::string> merged{rest.front()};
  merged.insert(merged.end(), pairs.begin(), pairs.end());
  merged.insert(merged.end(), rest.begin() + 1, rest.end());
  return merged;
}

}  // namespace

std::vector<std::string> config_arguments(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value: " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + " has no key");
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

std::vector<long> parse_int_list(const std::string& text) {
  std::vector<long> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::vector<long> parts;
    std::istringstream pin(item);
    std::string p;
    while (std::getline(pin, p, ':')) {
      try {
        std::size_t used = 0;
        parts.push_back(std::stol(p, &used));
        if (used != p.size()) throw std::invalid_argument(p);
      } catch (const std::exception&) {
        throw ConfigError("bad integer '" + p + "' in list '" + text + "'");
      }
    }
    if (parts.size() == 1) {
      out.push_back(parts[0]);
    } else if (parts.size() == 3 && parts[2] > 0 && parts[0] <= parts[1]) {
      for (long v = parts[0]; v <= parts[1]; v += parts[2]) out.push_back(v);
    } else {
      throw ConfigError("bad range '" + item + "' (expected start:stop:step)");
    }
  }
  if (out.empty()) throw ConfigError("empty list '" + text + "'");
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coupled dictionary learning and guided super-resolution", "cdlsr"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  // Consumed by expand_config before parsing; declared for --help.
  std::string config_path;
  const std::string config_help = "key=value file; explicit flags override it";

  TrainArgs ta;
  CLI::App* train_cmd = app.add_subcommand("train", "Learn coupled dictionaries from image triples");
  train_cmd->add_option("--config", config_path, config_help);
  train_cmd->add_option("--lr-dir", ta.lr_dir, "LR target images")->required();
  train_cmd->add_option("--hr-dir", ta.hr_dir, "HR target images")->required();
  train_cmd->add_option("--guide-dir", ta.guide_dir, "HR guidance images")->required();
  train_cmd->add_option("--out", ta.out, "Dictionary file to write")->required();
  train_cmd->add_option("--scale", ta.scale, "Upscaling factor")->capture_default_str();
  train_cmd->add_option("--patch", ta.patch, "Patch side")->capture_default_str();
  train_cmd->add_option("--stride", ta.stride, "Patch extraction stride")->capture_default_str();
  train_cmd->add_option("--atoms", ta.atoms, "Atoms per dictionary")->capture_default_str();
  train_cmd->add_option("--sparsity", ta.sparsity, "Total sparsity")->capture_default_str();
  train_cmd->add_option("--out-iter", ta.out_iter, "Outer iterations")->capture_default_str();
  train_cmd->add_option("--in-iter", ta.in_iter, "Inner iterations")->capture_default_str();
  train_cmd->add_option("--lambda", ta.lambda, "Ridge weight of the HR solve")
      ->capture_default_str();
  train_cmd->add_option("--max-samples", ta.max_samples, "Subsample to this many patches (0 = all)")
      ->capture_default_str();
  train_cmd->add_option("--var-threshold", ta.var_threshold, "Minimum LR patch variance")
      ->capture_default_str();
  train_cmd->add_option("--seed", ta.seed, "Seed")->capture_default_str();
  train_cmd->add_option("--workers", ta.workers, "Worker threads (0 = all cores)")
      ->capture_default_str();
  ta.clearing.add_to(train_cmd);

  SrArgs sa;
  CLI::App* sr_cmd = app.add_subcommand("sr", "Super-resolve one image");
  sr_cmd->add_option("--config", config_path, config_help);
  sr_cmd->add_option("--input", sa.input, "LR image")->required();
  sr_cmd->add_option("--guide", sa.guide, "Registered HR guidance image");
  sr_cmd->add_option("--dict", sa.dict, "Dictionary file")->required();
  sr_cmd->add_option("--out", sa.out, "Output image (.pgm or MAT1)")->required();
  sr_cmd->add_option("--truth", sa.truth, "HR reference for metrics");
  sr_cmd->add_option("--scale", sa.scale, "Upscaling factor")->capture_default_str();
  sr_cmd->add_option("--stride", sa.stride, "Patch overlap stride")->capture_default_str();
  sr_cmd->add_option("--sparsity", sa.sparsity, "Total sparsity")->capture_default_str();
  sr_cmd->add_option("--solver", sa.solver, "omp or ista")->capture_default_str();
  sr_cmd->add_option("--ista-lambda", sa.ista_lambda, "l1 weight for ista")->capture_default_str();
  sr_cmd->add_flag("--no-side-info", sa.no_side_info, "Ignore the guidance branch");
  sr_cmd->add_option("--workers", sa.workers, "Worker threads (0 = all cores)")
      ->capture_default_str();

  std::string ref_path;
  std::string test_path;
  CLI::App* eval_cmd = app.add_subcommand("eval", "PSNR, SSIM and RMSE of two images");
  eval_cmd->add_option("--config", config_path, config_help);
  eval_cmd->add_option("--ref", ref_path, "Reference image")->required();
  eval_cmd->add_option("--test", test_path, "Test image")->required();

  SynthCdlArgs ca;
  CLI::App* cdl_cmd = app.add_subcommand("synth-cdl", "Synthetic dictionary recovery experiment");
  cdl_cmd->add_option("--config", config_path, config_help);
  add_synth_options(cdl_cmd, ca);
  cdl_cmd->add_option("--m", ca.synth.m, "LR signal length")->capture_default_str();
  cdl_cmd->add_option("--input-snr", ca.input_snr, "Input SNR in dB (omit for noise-free)");
  cdl_cmd->add_option("--min-ratio", ca.min_ratio, "Threshold on all four mean recovery ratios");
  cdl_cmd->add_option("--max-rmse", ca.max_rmse, "Threshold on both mean final RMSE values");

  SynthCsrArgs xa;
  xa.synth.k = 256;
  xa.synth.trials = 1;
  CLI::App* csr_cmd = app.add_subcommand("synth-csr", "Synthetic measurement sweep");
  csr_cmd->add_option("--config", config_path, config_help);
  add_synth_options(csr_cmd, xa);
  csr_cmd->add_option("--measurements", xa.measurements, "M values, e.g. 2:64:2 or 8,16,32")
      ->capture_default_str();
  csr_cmd->add_option("--test-trials", xa.test_trials, "Test signals per M")
      ->capture_default_str();
  csr_cmd->add_option("--noisy-snr", xa.noisy_snr, "Input SNR of the noisy arm in dB")
      ->capture_default_str();
  csr_cmd->add_flag("--true-dicts", xa.true_dicts, "Use the ground-truth dictionaries");
  csr_cmd->add_option("--svg", xa.svg, "Write an SNR-versus-M plot");

  try {
    std::vector<std::string> expanded = expand_config(args, app);
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(ta, out, err);
    if (sr_cmd->parsed()) return cmd_sr(sa, out, err);
    if (eval_cmd->parsed()) return cmd_eval(ref_path, test_path, out);
    if (cdl_cmd->parsed()) return cmd_synth_cdl(ca, out, err);
    if (csr_cmd->parsed()) return cmd_synth_csr(xa, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cdl::cli
