#pragma once

// Experiment configuration: flat "key = value" text, one entry per line,
// '#' starts a comment. Unknown keys and malformed values are errors.
//
//   pde            poisson | semilinear
//   source         constant right-hand side f (default 1)
//   gamma          reaction coefficient of the semilinear PDE (default 50)
//   goal           mean | regional | mean_squared
//   adjoint_backend fem | nn
//   refinement     uniform | adaptive
//   marking        dorfler | top_fraction (default dorfler)
//   marking_param  theta or alpha in (0, 1] (default 0.5)
//   initial_cells  cells per axis of the starting mesh, power of two (default 2)
//   max_levels     number of refinement levels to run (default 6)
//   stop_tol       stop once |eta| falls below this (default 1e-12)
//   seed           seed for network init and random collocation (default 0)
//   output_dir     directory for results.csv, mesh_L<l>.svg, loss_L<l>.csv
//   cache_dir      where reference values are cached (default <output_dir>/../cache)
//   reference_depth  uniform depth of the reference mesh, or auto (default)
//   timing         write measured wall time, or 0 when false (default true)
//   nn.layers      comma-separated layer sizes (default 2,32,32,1)
//   nn.collocation dofs | uniform:<n> (default dofs)
//   nn.retrain     auto | once | per_level (default auto)
//   nn.max_epochs, nn.stop_tol, nn.patience, nn.lbfgs_history, nn.adam_lr,
//   nn.adam_steps, nn.restart_limit   training settings
//   nn.save_snapshots  write net_L<l>.txt parameter snapshots (default false)

#include <cerrno>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dwr/estimator.hpp"
#include "dwr/train.hpp"

namespace dwr {

enum class AdjointBackend { Fem, Nn };
enum class RefinementMode { Uniform, Adaptive };
enum class RetrainPolicy { Auto, Once, PerLevel };

inline std::string to_string(AdjointBackend b) { return b == AdjointBackend::Fem ? "fem" : "nn"; }

struct NnSettings {
  std::vector<int> layers = {2, 32, 32, 1};
  TrainConfig train;
  RetrainPolicy retrain = RetrainPolicy::Auto;
  bool save_snapshots = false;
};

struct ExperimentConfig {
  PdeProblem pde;  // source defaults to 1
  double source_value = 1.0;
  GoalFunctional goal;
  AdjointBackend backend = AdjointBackend::Fem;
  NnSettings nn;
  RefinementMode refinement = RefinementMode::Uniform;
  MarkingStrategy marking = MarkingStrategy::dorfler(0.5);
  int initial_cells = 2;
  int max_levels = 6;
  double stop_tol = 1e-12;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string cache_dir;  // empty: <output_dir>/../cache
  std::optional<int> reference_depth;
  bool timing = true;

  ProblemForms forms() const { return {pde, goal}; }

  std::string resolved_cache_dir() const {
    if (!cache_dir.empty()) return cache_dir;
    return (std::filesystem::path(output_dir).parent_path() / "cache").string();
  }

  void set_seed(std::uint64_t s) {
    seed = s;
    nn.train.seed = s;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (max_levels < 1) fail("max_levels must be at least 1");
    if (!(stop_tol > 0.0)) fail("stop_tol must be positive");
    if (initial_cells < 1 || (initial_cells & (initial_cells - 1)) != 0) fail("initial_cells must be a power of two");
    if (!(marking.param > 0.0 && marking.param <= 1.0)) fail("marking_param must lie in (0, 1]");
    if (pde.kind == PdeKind::Semilinear && !(pde.gamma > 0.0)) fail("gamma must be positive");
    if (reference_depth && (*reference_depth < 0 || *reference_depth > 12)) fail("reference_depth out of range");
    if (nn.layers.size() < 2 || nn.layers.front() != 2 || nn.layers.back() != 1) {
      fail("nn.layers must start with 2 and end with 1");
    }
    for (int n : nn.layers)
      if (n < 1) fail("nn.layers entries must be positive");
    try {
      nn.train.validate();
    } catch (const InvalidArgument& e) {
      fail(e.what());
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError("invalid number for " + key + ": '" + v + "'");
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long n = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), n);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw ConfigError("invalid integer for " + key + ": '" + v + "'");
  }
  return n;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  cfg.pde.gamma = 50.0;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, val).second) throw ConfigError("duplicate key: " + key);
  }

  using detail::parse_double;
  using detail::parse_int;
  for (const auto& [key, v] : kv) {
    auto choice = [&](std::initializer_list<const char*> options) {
      for (const char* o : options)
        if (v == o) return;
      std::string all;
      for (const char* o : options) all += std::string(all.empty() ? "" : "|") + o;
      throw ConfigError("invalid value for " + key + ": '" + v + "' (expected " + all + ")");
    };
    if (key == "pde") {
      choice({"poisson", "semilinear"});
      cfg.pde.kind = v == "poisson" ? PdeKind::Poisson : PdeKind::Semilinear;
    } else if (key == "source") {
      cfg.source_value = parse_double(key, v);
    } else if (key == "gamma") {
      cfg.pde.gamma = parse_double(key, v);
    } else if (key == "goal") {
      choice({"mean", "regional", "mean_squared"});
      cfg.goal.kind = v == "mean" ? GoalKind::MeanValue : v == "regional" ? GoalKind::RegionalMean : GoalKind::MeanSquared;
    } else if (key == "adjoint_backend") {
      choice({"fem", "nn"});
      cfg.backend = v == "fem" ? AdjointBackend::Fem : AdjointBackend::Nn;
    } else if (key == "refinement") {
      choice({"uniform", "adaptive"});
      cfg.refinement = v == "uniform" ? RefinementMode::Uniform : RefinementMode::Adaptive;
    } else if (key == "marking") {
      choice({"dorfler", "top_fraction"});
      cfg.marking.kind = v == "dorfler" ? MarkingStrategy::Kind::Dorfler : MarkingStrategy::Kind::TopFraction;
    } else if (key == "marking_param") {
      cfg.marking.param = parse_double(key, v);
    } else if (key == "initial_cells") {
      cfg.initial_cells = static_cast<int>(parse_int(key, v));
    } else if (key == "max_levels") {
      cfg.max_levels = static_cast<int>(parse_int(key, v));
    } else if (key == "stop_tol") {
      cfg.stop_tol = parse_double(key, v);
    } else if (key == "seed") {
      const long long s = parse_int(key, v);
      if (s < 0) throw ConfigError("seed must be non-negative");
      cfg.set_seed(static_cast<std::uint64_t>(s));
    } else if (key == "output_dir") {
      cfg.output_dir = v;
    } else if (key == "cache_dir") {
      cfg.cache_dir = v;
    } else if (key == "reference_depth") {
      if (v != "auto") cfg.reference_depth = static_cast<int>(parse_int(key, v));
    } else if (key == "timing") {
      cfg.timing = detail::parse_bool(key, v);
    } else if (key == "nn.layers") {
      cfg.nn.layers.clear();
      std::istringstream ls(v);
      for (std::string tok; std::getline(ls, tok, ',');)
        cfg.nn.layers.push_back(static_cast<int>(parse_int(key, detail::trim(tok))));
    } else if (key == "nn.collocation") {
      if (v == "dofs") {
        cfg.nn.train.collocation = {CollocationKind::DofCoords, 0};
      } else if (v.rfind("uniform:", 0) == 0) {
        const long long n = parse_int(key, v.substr(8));
        if (n < 1) throw ConfigError("nn.collocation: point count must be positive");
        cfg.nn.train.collocation = {CollocationKind::UniformRandom, static_cast<std::size_t>(n)};
      } else {
        throw ConfigError("invalid value for nn.collocation: '" + v + "' (expected dofs|uniform:<n>)");
      }
    } else if (key == "nn.retrain") {
      choice({"auto", "once", "per_level"});
      cfg.nn.retrain = v == "auto" ? RetrainPolicy::Auto : v == "once" ? RetrainPolicy::Once : RetrainPolicy::PerLevel;
    } else if (key == "nn.max_epochs") {
      cfg.nn.train.max_epochs = static_cast<int>(parse_int(key, v));
    } else if (key == "nn.stop_tol") {
      cfg.nn.train.stop_tol = parse_double(key, v);
    } else if (key == "nn.patience") {
      cfg.nn.train.patience = static_cast<int>(parse_int(key, v));
    } else if (key == "nn.lbfgs_history") {
      cfg.nn.train.lbfgs_history = static_cast<int>(parse_int(key, v));
    } else if (key == "nn.adam_lr") {
      cfg.nn.train.adam_lr = parse_double(key, v);
    } else if (key == "nn.adam_steps") {
      cfg.nn.train.adam_steps = static_cast<int>(parse_int(key, v));
    } else if (key == "nn.restart_limit") {
      cfg.nn.train.restart_limit = static_cast<int>(parse_int(key, v));
    } else if (key == "nn.save_snapshots") {
      cfg.nn.save_snapshots = detail::parse_bool(key, v);
    } else {
      throw ConfigError("unknown key: " + key);
    }
  }
  cfg.pde.source = ScalarField::constant(cfg.source_value);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace dwr
