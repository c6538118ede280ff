#pragma once

// Experiment orchestration: configuration, seed sweeps over dynamical regimes,
// aggregation and plot-ready output files.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "nmqrc/errors.hpp"
#include "nmqrc/esp.hpp"
#include "nmqrc/hamiltonian.hpp"
#include "nmqrc/random.hpp"
#include "nmqrc/readout.hpp"
#include "nmqrc/reservoir.hpp"
#include "nmqrc/tasks.hpp"

namespace nmqrc {

inline constexpr int kConfigSchemaVersion = 1;

enum class Task { Stm, Narma, Esp };
enum class Scale { AsConfigured, Quick, Paper };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::Stm: return "stm";
    case Task::Narma: return "narma";
    case Task::Esp: return "esp";
  }
  return "?";
}

struct Regime {
  std::string label;
  double alpha = 1.0;
  double beta = 1.0;
};

inline const std::string kFnLabel = "fn";

/// Named (alpha, beta) presets. STM and ESP share one table, NARMA uses a
/// milder one.
inline std::optional<Regime> regime_preset(Task task, const std::string& name) {
  const bool narma = task == Task::Narma;
  if (name == "markov") return Regime{name, narma ? 5.0 : 10.0, narma ? 0.1 : 0.01};
  if (name == "non_markov") return Regime{name, narma ? 0.1 : 0.01, narma ? 5.0 : 10.0};
  if (name == "intermediate") return Regime{name, 1.0, 1.0};
  return std::nullopt;
}

inline std::vector<Regime> default_regimes(Task task) {
  return {*regime_preset(task, "markov"), *regime_preset(task, "non_markov"), *regime_preset(task, "intermediate")};
}

struct ExperimentConfig {
  Task task = Task::Stm;
  int n_sys = 4;
  int n_env = 3;
  double j0 = 1.0;
  std::optional<double> h_sys;  // default: J0/2 (stm, esp), J0 (narma)
  std::optional<double> h_env;  // default: alpha * J0 per regime
  std::vector<Regime> regimes;
  std::vector<double> taus{0.5};
  int v = 50;
  ObservableKind observables = ObservableKind::ZOnly;
  Multiplex multiplex = Multiplex::SubStep;
  int input_qubit = 0;
  SplitSpec split;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int tau_d_max = 30;                                 // stm
  std::vector<int> orders{1, 5, 10, 20, 30, 40, 50};  // narma
  bool fn_baseline = true;                            // narma
  int window_from = 1500;                             // esp, [from, to)
  int window_to = 2500;
  double backflow_tol = kDefaultBackflowTol;
  double ridge_lambda = 0.0;
  double rcond = kDefaultRcond;
  int threads = 0;  // 0: hardware concurrency
  std::string output_dir = "results";

  double resolved_h_sys() const { return h_sys.value_or(task == Task::Narma ? j0 : 0.5 * j0); }

  ReservoirParams params_for(const Regime& regime, std::uint64_t seed) const {
    ReservoirParams p;
    p.n_sys = n_sys;
    p.n_env = regime.label == kFnLabel ? 0 : n_env;
    p.j0 = j0;
    p.alpha = regime.alpha;
    p.beta = regime.beta;
    p.h_sys = resolved_h_sys();
    p.h_env = h_env.value_or(regime.alpha * j0);
    p.seed = seed;
    return p;
  }

  ReservoirConfig reservoir_config(double tau) const {
    ReservoirConfig c;
    c.tau = tau;
    c.v = v;
    c.observables = task == Task::Esp ? ObservableKind::ZOnly : observables;
    c.input_qubit = input_qubit;
    c.multiplex = multiplex;
    return c;
  }

  /// Checks every module precondition up front; throws ConfigError naming
  /// the offending field.
  void validate() const {
    auto fail = [](const char* field, const std::string& what) { throw ConfigError(field, what); };
    if (n_sys < 1) fail("n_sys", "must be >= 1");
    if (n_env < 0) fail("n_env", "must be >= 0");
    if (n_sys + n_env > kMaxQubits) fail("n_env", "n_sys + n_env must be <= " + std::to_string(kMaxQubits));
    if (!(std::isfinite(j0) && j0 > 0.0)) fail("j0", "must be finite and > 0");
    if (h_sys && !std::isfinite(*h_sys)) fail("h_sys", "must be finite");
    if (h_env && !std::isfinite(*h_env)) fail("h_env", "must be finite");
    if (regimes.empty()) fail("regimes", "at least one regime required");
    std::set<std::string> seen;
    for (const auto& r : regimes) {
      if (!(std::isfinite(r.alpha) && r.alpha >= 0.0)) fail("alpha", "must be finite and >= 0");
      if (!(std::isfinite(r.beta) && r.beta >= 0.0)) fail("beta", "must be finite and >= 0");
      if (!seen.insert(r.label).second) fail("regimes", "duplicate regime '" + r.label + "'");
    }
    if (taus.empty()) fail("tau", "at least one value required");
    for (double t : taus)
      if (!(std::isfinite(t) && t > 0.0)) fail("tau", "must be finite and > 0");
    if (task != Task::Narma && taus.size() != 1) fail("tau", "stm and esp take a single tau");
    if (v < 1) fail("v", "must be >= 1");
    if (input_qubit < 0 || input_qubit >= n_sys) fail("input_qubit", "must index a system qubit");
    if (split.washout < 0) fail("washout", "must be >= 0");
    if (split.train < 1) fail("train", "must be >= 1");
    if (split.val < 1) fail("val", "must be >= 1");
    if (seeds.empty()) fail("seeds", "at least one seed required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail("seeds", "duplicate seed");
    if (!(rcond > 0.0 && rcond < 1.0)) fail("rcond", "must lie in (0, 1)");
    if (!(std::isfinite(ridge_lambda) && ridge_lambda >= 0.0)) fail("ridge_lambda", "must be finite and >= 0");
    if (threads < 0) fail("threads", "must be >= 0");
    if (task == Task::Stm) {
      if (tau_d_max < 0) fail("tau_d_max", "must be >= 0");
      if (tau_d_max > 0 && tau_d_max >= split.washout) fail("tau_d_max", "must be smaller than washout");
    }
    if (task == Task::Narma) {
      if (orders.empty()) fail("orders", "at least one order required");
      for (int n : orders)
        if (n < 1) fail("orders", "orders must be >= 1");
    }
    if (task == Task::Esp) {
      if (window_from < 0 || window_from >= window_to) fail("window_from", "window must satisfy 0 <= from < to");
      if (window_to > split.total()) fail("window_to", "window ends after the last step");
      if (!(backflow_tol >= 0.0)) fail("backflow_tol", "must be >= 0");
    }
  }
};

// ---------------------------------------------------------------------------
// Config file: one flat JSON object, unknown keys rejected.

namespace detail {

inline double cfg_number(const nlohmann::json& j, const char* key) {
  if (!j.is_number()) throw ConfigError(key, "expected a number");
  return j.get<double>();
}

inline int cfg_int(const nlohmann::json& j, const char* key) {
  if (!j.is_number_integer()) throw ConfigError(key, "expected an integer");
  return j.get<int>();
}

inline std::string cfg_string(const nlohmann::json& j, const char* key) {
  if (!j.is_string()) throw ConfigError(key, "expected a string");
  return j.get<std::string>();
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& doc) {
  using detail::cfg_int;
  using detail::cfg_number;
  using detail::cfg_string;
  if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  static const std::set<std::string> known{
      "schema_version", "task",     "n_sys",       "n_env",      "j0",         "h_sys",       "h_env",
      "alpha",          "beta",     "regimes",     "tau",        "v",          "observables", "multiplex",
      "input_qubit",    "washout",  "train",       "val",        "seeds",      "tau_d_max",   "orders",
      "fn_baseline",    "window_from", "window_to", "backflow_tol", "ridge_lambda", "rcond", "threads",
      "output_dir"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw ConfigError(key, "unknown key");
  }
  if (!doc.contains("schema_version")) throw ConfigError("schema_version", "missing");
  if (cfg_int(doc["schema_version"], "schema_version") != kConfigSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version (expected " + std::to_string(kConfigSchemaVersion) + ")");
  }
  if (!doc.contains("task")) throw ConfigError("task", "missing");

  ExperimentConfig cfg;
  const std::string task = cfg_string(doc["task"], "task");
  if (task == "stm") cfg.task = Task::Stm;
  else if (task == "narma") cfg.task = Task::Narma;
  else if (task == "esp") cfg.task = Task::Esp;
  else throw ConfigError("task", "expected stm, narma or esp");

  // Task-dependent defaults.
  if (cfg.task == Task::Narma) {
    cfg.v = 20;
    cfg.observables = ObservableKind::ZAndZZ;
    cfg.taus = {0.5, 1.0, 5.0};
  }
  if (cfg.task == Task::Esp) cfg.split = SplitSpec{1000, 1000, 500};

  auto get = [&](const char* key) -> const nlohmann::json* { return doc.contains(key) ? &doc[key] : nullptr; };

  if (auto* j = get("n_sys")) cfg.n_sys = cfg_int(*j, "n_sys");
  if (auto* j = get("n_env")) cfg.n_env = cfg_int(*j, "n_env");
  if (auto* j = get("j0")) cfg.j0 = cfg_number(*j, "j0");
  if (auto* j = get("h_sys")) cfg.h_sys = cfg_number(*j, "h_sys");
  if (auto* j = get("h_env")) cfg.h_env = cfg_number(*j, "h_env");
  if (auto* j = get("regimes")) {
    if (!j->is_array()) throw ConfigError("regimes", "expected an array of preset names");
    for (const auto& item : *j) {
      const std::string name = cfg_string(item, "regimes");
      auto preset = regime_preset(cfg.task, name);
      if (!preset) throw ConfigError("regimes", "unknown preset '" + name + "'");
      cfg.regimes.push_back(*preset);
    }
  }
  const bool has_alpha = doc.contains("alpha");
  const bool has_beta = doc.contains("beta");
  if (has_alpha != has_beta) throw ConfigError(has_alpha ? "beta" : "alpha", "alpha and beta must be given together");
  if (has_alpha) cfg.regimes.push_back(Regime{"custom", cfg_number(doc["alpha"], "alpha"), cfg_number(doc["beta"], "beta")});
  if (cfg.regimes.empty() && !doc.contains("regimes")) cfg.regimes = default_regimes(cfg.task);

  if (auto* j = get("tau")) {
    cfg.taus.clear();
    if (j->is_array()) {
      for (const auto& t : *j) cfg.taus.push_back(cfg_number(t, "tau"));
    } else {
      cfg.taus.push_back(cfg_number(*j, "tau"));
    }
  }
  if (auto* j = get("v")) cfg.v = cfg_int(*j, "v");
  if (auto* j = get("observables")) {
    const std::string o = cfg_string(*j, "observables");
    if (o == "z") cfg.observables = ObservableKind::ZOnly;
    else if (o == "z_zz") cfg.observables = ObservableKind::ZAndZZ;
    else throw ConfigError("observables", "expected z or z_zz");
  }
  if (auto* j = get("multiplex")) {
    const std::string m = cfg_string(*j, "multiplex");
    if (m == "sub_step") cfg.multiplex = Multiplex::SubStep;
    else if (m == "per_node") cfg.multiplex = Multiplex::PerNode;
    else throw ConfigError("multiplex", "expected sub_step or per_node");
  }
  if (auto* j = get("input_qubit")) cfg.input_qubit = cfg_int(*j, "input_qubit");
  if (auto* j = get("washout")) cfg.split.washout = cfg_int(*j, "washout");
  if (auto* j = get("train")) cfg.split.train = cfg_int(*j, "train");
  if (auto* j = get("val")) cfg.split.val = cfg_int(*j, "val");
  if (auto* j = get("seeds")) {
    if (!j->is_array()) throw ConfigError("seeds", "expected an array of non-negative integers");
    cfg.seeds.clear();
    for (const auto& s : *j) {
      if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
        throw ConfigError("seeds", "expected non-negative integers");
      }
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (auto* j = get("tau_d_max")) cfg.tau_d_max = cfg_int(*j, "tau_d_max");
  if (auto* j = get("orders")) {
    if (!j->is_array()) throw ConfigError("orders", "expected an array of integers");
    cfg.orders.clear();
    for (const auto& n : *j) cfg.orders.push_back(cfg_int(n, "orders"));
  }
  if (auto* j = get("fn_baseline")) {
    if (!j->is_boolean()) throw ConfigError("fn_baseline", "expected true or false");
    cfg.fn_baseline = j->get<bool>();
  }
  if (auto* j = get("window_from")) cfg.window_from = cfg_int(*j, "window_from");
  if (auto* j = get("window_to")) cfg.window_to = cfg_int(*j, "window_to");
  if (auto* j = get("backflow_tol")) cfg.backflow_tol = cfg_number(*j, "backflow_tol");
  if (auto* j = get("ridge_lambda")) cfg.ridge_lambda = cfg_number(*j, "ridge_lambda");
  if (auto* j = get("rcond")) cfg.rcond = cfg_number(*j, "rcond");
  if (auto* j = get("threads")) cfg.threads = cfg_int(*j, "threads");
  if (auto* j = get("output_dir")) cfg.output_dir = cfg_string(*j, "output_dir");
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("--config", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

/// Overrides the run size. Quick: V = 10, splits 200/600/200, seeds 0..2.
/// Paper: the published protocol sizes (V = 50, or 20 for NARMA; 10 seeds).
inline void apply_scale(ExperimentConfig& cfg, Scale scale) {
  if (scale == Scale::AsConfigured) return;
  if (scale == Scale::Quick) {
    cfg.v = 10;
    cfg.split = SplitSpec{200, 600, 200};
    cfg.seeds = {0, 1, 2};
    if (cfg.task == Task::Stm) cfg.tau_d_max = std::min(cfg.tau_d_max, cfg.split.washout - 1);
    if (cfg.task == Task::Esp) {
      cfg.window_from = 600;
      cfg.window_to = 1000;
    }
    return;
  }
  cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  switch (cfg.task) {
    case Task::Stm:
      cfg.v = 50;
      cfg.split = SplitSpec{1000, 3000, 1000};
      break;
    case Task::Narma:
      cfg.v = 20;
      cfg.split = SplitSpec{1000, 3000, 1000};
      break;
    case Task::Esp:
      cfg.v = 50;
      cfg.split = SplitSpec{1000, 1000, 500};
      cfg.window_from = 1500;
      cfg.window_to = 2500;
      break;
  }
}

/// seeds = 0..k-1
inline void apply_seed_count(ExperimentConfig& cfg, int k) {
  if (k < 1) throw ConfigError("--seeds", "must be >= 1");
  cfg.seeds.clear();
  for (int i = 0; i < k; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
}

// ---------------------------------------------------------------------------
// Aggregation and parallel execution.

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Arithmetic mean and population standard deviation.
inline MeanStd aggregate(std::span<const double> scores) {
  if (scores.empty()) throw InvalidArgument("aggregate: no scores");
  double sum = 0.0;
  for (double s : scores) sum += s;
  const double mean = sum / static_cast<double>(scores.size());
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi) return {*lo, 0.0};
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  return {mean, std::sqrt(ss / static_cast<double>(scores.size()))};
}

/// Runs fn(0..jobs-1) on a bounded pool. The exception of the lowest failing
/// job index, if any, is rethrown after all workers finish.
inline void run_parallel(std::size_t jobs, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Seed of the input stream shared by every regime for one seed index.
inline std::uint64_t input_seed(std::uint64_t seed) { return derive_seed(seed, kInputStream); }

struct SweepResult {
  double axis = 0.0;  // tau_d (stm) or NARMA order
  double tau = 0.0;
  std::string regime;
  std::vector<std::uint64_t> seeds;
  std::vector<double> scores;  // aligned with seeds
  int degenerate = 0;          // zero-variance scores forced to 0
  double mean = 0.0;
  double std = 0.0;
};

struct EspSummary {
  std::uint64_t seed = 0;
  std::string regime;
  WindowStats window;
  Backflow backflow_sys;
  Backflow backflow_full;
  std::vector<EspRecord> records;
};

struct RunOptions {
  std::ostream* log = nullptr;  // progress lines, one per finished job
};

namespace detail {

inline void log_line(const RunOptions& opt, std::mutex& mu, const std::string& line) {
  if (!opt.log) return;
  std::lock_guard<std::mutex> lock(mu);
  *opt.log << line << '\n';
  opt.log->flush();
}

inline std::string job_context(const std::string& regime, std::uint64_t seed) {
  return "regime " + regime + ", seed " + std::to_string(seed);
}

template <typename Fn>
auto with_context(const std::string& ctx, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    throw NumericalError(ctx + ": " + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw InvalidArgument(ctx + ": " + e.what());
  }
}

inline double score_readout(const RealMatrix& features, std::span<const double> y, const ExperimentConfig& cfg,
                            bool& degenerate) {
  const TrainValData d = slice_train_val(features, y, cfg.split);
  const ReadoutWeights w = fit_linear(d.x_train, d.y_train, ReadoutOptions{cfg.rcond, cfg.ridge_lambda});
  const CorrelationScore s = squared_correlation(d.y_val, predict(d.x_val, w));
  degenerate = s.degenerate;
  return s.value;
}

inline void finalize(SweepResult& r) {
  const MeanStd ms = aggregate(r.scores);
  r.mean = ms.mean;
  r.std = ms.std;
}

}  // namespace detail

/// Delayed-recall sweep. One trajectory per (regime, seed) serves every delay.
inline std::vector<SweepResult> run_stm(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  if (cfg.task != Task::Stm) throw ConfigError("task", "run_stm needs task = stm");
  cfg.validate();
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_jobs = cfg.regimes.size() * n_seeds;
  const int n_delays = cfg.tau_d_max + 1;
  std::vector<std::vector<double>> scores(n_jobs);
  std::vector<std::vector<char>> degenerate(n_jobs);
  std::mutex log_mu;

  run_parallel(n_jobs, cfg.threads, [&](std::size_t job) {
    const Regime& regime = cfg.regimes[job / n_seeds];
    const std::uint64_t seed = cfg.seeds[job % n_seeds];
    detail::with_context(detail::job_context(regime.label, seed), [&] {
      const Reservoir res(realize(cfg.params_for(regime, seed)), cfg.reservoir_config(cfg.taus.front()));
      const auto s = gen_uniform_inputs(static_cast<std::size_t>(cfg.split.total()), 0.0, 1.0, input_seed(seed));
      const TrajectoryResult traj = res.run_trajectory(s);
      scores[job].resize(static_cast<std::size_t>(n_delays));
      degenerate[job].resize(static_cast<std::size_t>(n_delays));
      for (int d = 0; d < n_delays; ++d) {
        const auto y = stm_targets(s, d, cfg.split.washout);
        bool deg = false;
        scores[job][static_cast<std::size_t>(d)] = detail::score_readout(traj.features.values, y, cfg, deg);
        degenerate[job][static_cast<std::size_t>(d)] = deg;
      }
      return 0;
    });
    detail::log_line(opt, log_mu, "stm " + detail::job_context(regime.label, seed) + " done");
  });

  std::vector<SweepResult> out;
  for (std::size_t r = 0; r < cfg.regimes.size(); ++r) {
    for (int d = 0; d < n_delays; ++d) {
      SweepResult res;
      res.axis = d;
      res.tau = cfg.taus.front();
      res.regime = cfg.regimes[r].label;
      for (std::size_t si = 0; si < n_seeds; ++si) {
        const std::size_t job = r * n_seeds + si;
        res.seeds.push_back(cfg.seeds[si]);
        res.scores.push_back(scores[job][static_cast<std::size_t>(d)]);
        res.degenerate += degenerate[job][static_cast<std::size_t>(d)];
      }
      detail::finalize(res);
      out.push_back(std::move(res));
    }
  }
  return out;
}

/// Regimes evaluated by run_narma: the configured ones plus the
/// environment-free baseline when requested.
inline std::vector<Regime> narma_regimes(const ExperimentConfig& cfg) {
  std::vector<Regime> regimes = cfg.regimes;
  if (cfg.fn_baseline) regimes.push_back(Regime{kFnLabel, 0.0, 0.0});
  return regimes;
}

/// NARMA sweep over taus x regimes x seeds. Input streams do not depend on
/// the order, so one trajectory serves every order.
inline std::vector<SweepResult> run_narma(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  if (cfg.task != Task::Narma) throw ConfigError("task", "run_narma needs task = narma");
  cfg.validate();
  const auto regimes = narma_regimes(cfg);
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t per_tau = regimes.size() * n_seeds;
  const std::size_t n_jobs = cfg.taus.size() * per_tau;
  const std::size_t n_orders = cfg.orders.size();
  std::vector<std::vector<double>> scores(n_jobs);
  std::vector<std::vector<char>> degenerate(n_jobs);
  std::mutex log_mu;

  run_parallel(n_jobs, cfg.threads, [&](std::size_t job) {
    const double tau = cfg.taus[job / per_tau];
    const Regime& regime = regimes[(job % per_tau) / n_seeds];
    const std::uint64_t seed = cfg.seeds[job % n_seeds];
    const std::string ctx = detail::job_context(regime.label, seed) + ", tau " + std::to_string(tau);
    detail::with_context(ctx, [&] {
      const Reservoir res(realize(cfg.params_for(regime, seed)), cfg.reservoir_config(tau));
      const auto u = gen_uniform_inputs(static_cast<std::size_t>(cfg.split.total()), 0.0, 0.5, input_seed(seed));
      const auto s = scale_inputs(u, 0.5);
      const TrajectoryResult traj = res.run_trajectory(s);
      scores[job].resize(n_orders);
      degenerate[job].resize(n_orders);
      for (std::size_t o = 0; o < n_orders; ++o) {
        const auto y = detail::with_context("order " + std::to_string(cfg.orders[o]),
                                            [&] { return narma_series(u, cfg.orders[o]); });
        bool deg = false;
        scores[job][o] = detail::score_readout(traj.features.values, y, cfg, deg);
        degenerate[job][o] = deg;
      }
      return 0;
    });
    detail::log_line(opt, log_mu, "narma " + ctx + " done");
  });

  std::vector<SweepResult> out;
  for (std::size_t t = 0; t < cfg.taus.size(); ++t) {
    for (std::size_t r = 0; r < regimes.size(); ++r) {
      for (std::size_t o = 0; o < n_orders; ++o) {
        SweepResult res;
        res.axis = cfg.orders[o];
        res.tau = cfg.taus[t];
        res.regime = regimes[r].label;
        for (std::size_t si = 0; si < n_seeds; ++si) {
          const std::size_t job = t * per_tau + r * n_seeds + si;
          res.seeds.push_back(cfg.seeds[si]);
          res.scores.push_back(scores[job][o]);
          res.degenerate += degenerate[job][o];
        }
        detail::finalize(res);
        out.push_back(std::move(res));
      }
    }
  }
  return out;
}

/// Dual-trajectory echo-state check per (regime, seed) on the STM input
/// stream, summarized over [window_from, window_to).
inline std::vector<EspSummary> run_esp(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  if (cfg.task != Task::Esp) throw ConfigError("task", "run_esp needs task = esp");
  cfg.validate();
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_jobs = cfg.regimes.size() * n_seeds;
  std::vector<EspSummary> out(n_jobs);
  std::mutex log_mu;

  run_parallel(n_jobs, cfg.threads, [&](std::size_t job) {
    const Regime& regime = cfg.regimes[job / n_seeds];
    const std::uint64_t seed = cfg.seeds[job % n_seeds];
    detail::with_context(detail::job_context(regime.label, seed), [&] {
      const auto real = realize(cfg.params_for(regime, seed));
      const auto s = gen_uniform_inputs(static_cast<std::size_t>(cfg.split.total()), 0.0, 1.0, input_seed(seed));
      EspSummary& sum = out[job];
      sum.seed = seed;
      sum.regime = regime.label;
      sum.records = dual_trajectory(real, s, cfg.reservoir_config(cfg.taus.front()));
      sum.window = window_stats(sum.records, cfg.window_from, cfg.window_to);
      sum.backflow_sys = backflow_count(sum.records, DistanceRegister::System, cfg.backflow_tol);
      sum.backflow_full = backflow_count(sum.records, DistanceRegister::Full, cfg.backflow_tol);
      return 0;
    });
    detail::log_line(opt, log_mu, "esp " + detail::job_context(regime.label, seed) + " done");
  });
  return out;
}

// ---------------------------------------------------------------------------
// Output files: <output_dir>/<task>/<regime>/summary.csv, scores.csv,
// couplings_seed{n}.json, plus <output_dir>/<task>/run.json.

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  os.precision(17);
  return os;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["task"] = to_string(cfg.task);
  j["n_sys"] = cfg.n_sys;
  j["n_env"] = cfg.n_env;
  j["j0"] = cfg.j0;
  j["h_sys"] = cfg.resolved_h_sys();
  if (cfg.h_env) j["h_env"] = *cfg.h_env;
  nlohmann::json regimes = nlohmann::json::array();
  for (const auto& r : cfg.regimes) regimes.push_back({{"label", r.label}, {"alpha", r.alpha}, {"beta", r.beta}});
  j["regimes"] = regimes;
  j["tau"] = cfg.taus;
  j["v"] = cfg.v;
  j["observables"] = cfg.observables == ObservableKind::ZOnly ? "z" : "z_zz";
  j["multiplex"] = cfg.multiplex == Multiplex::SubStep ? "sub_step" : "per_node";
  j["input_qubit"] = cfg.input_qubit;
  j["washout"] = cfg.split.washout;
  j["train"] = cfg.split.train;
  j["val"] = cfg.split.val;
  j["seeds"] = cfg.seeds;
  if (cfg.task == Task::Stm) j["tau_d_max"] = cfg.tau_d_max;
  if (cfg.task == Task::Narma) {
    j["orders"] = cfg.orders;
    j["fn_baseline"] = cfg.fn_baseline;
  }
  if (cfg.task == Task::Esp) {
    j["window_from"] = cfg.window_from;
    j["window_to"] = cfg.window_to;
    j["backflow_tol"] = cfg.backflow_tol;
  }
  j["ridge_lambda"] = cfg.ridge_lambda;
  j["rcond"] = cfg.rcond;
  return j;
}

inline void write_run_metadata(const ExperimentConfig& cfg, const std::vector<Regime>& regimes) {
  const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / to_string(cfg.task);
  auto os = open_out(dir / "run.json");
  nlohmann::json meta;
  meta["config"] = config_to_json(cfg);
  meta["input_stream_policy"] = "shared across regimes for a given seed";
  meta["rng"] = "mt19937_64, 53-bit uniform doubles, splitmix64-derived stream seeds";
  os << meta.dump(2) << '\n';
  for (const auto& regime : regimes) {
    for (std::uint64_t seed : cfg.seeds) {
      const ReservoirParams p = cfg.params_for(regime, seed);
      const CouplingSet c = sample_couplings(p);
      auto cj = open_out(dir / regime.label / ("couplings_seed" + std::to_string(seed) + ".json"));
      cj << nlohmann::json{{"params", to_json(p)}, {"j_sys", c.j_sys}, {"j_env", c.j_env}, {"g", c.g}}.dump(2)
         << '\n';
    }
  }
}

}  // namespace detail

inline void write_stm_outputs(const ExperimentConfig& cfg, const std::vector<SweepResult>& results) {
  detail::write_run_metadata(cfg, cfg.regimes);
  const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / "stm";
  for (const auto& regime : cfg.regimes) {
    auto sum = detail::open_out(dir / regime.label / "summary.csv");
    auto per = detail::open_out(dir / regime.label / "scores.csv");
    sum << "tau_d,regime,mean_cstm,std_cstm,n_seeds\n";
    per << "tau_d,seed,cstm\n";
    for (const auto& r : results) {
      if (r.regime != regime.label) continue;
      sum << static_cast<int>(r.axis) << ',' << r.regime << ',' << r.mean << ',' << r.std << ',' << r.seeds.size()
          << '\n';
      for (std::size_t i = 0; i < r.seeds.size(); ++i)
        per << static_cast<int>(r.axis) << ',' << r.seeds[i] << ',' << r.scores[i] << '\n';
    }
  }
}

inline void write_narma_outputs(const ExperimentConfig& cfg, const std::vector<SweepResult>& results) {
  const auto regimes = narma_regimes(cfg);
  detail::write_run_metadata(cfg, regimes);
  const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / "narma";
  for (const auto& regime : regimes) {
    auto sum = detail::open_out(dir / regime.label / "summary.csv");
    auto per = detail::open_out(dir / regime.label / "scores.csv");
    sum << "order,tau,regime,mean_r2,std_r2,n_seeds\n";
    per << "order,tau,seed,r2\n";
    for (const auto& r : results) {
      if (r.regime != regime.label) continue;
      sum << static_cast<int>(r.axis) << ',' << r.tau << ',' << r.regime << ',' << r.mean << ',' << r.std << ','
          << r.seeds.size() << '\n';
      for (std::size_t i = 0; i < r.seeds.size(); ++i)
        per << static_cast<int>(r.axis) << ',' << r.tau << ',' << r.seeds[i] << ',' << r.scores[i] << '\n';
    }
  }
}

inline void write_esp_outputs(const ExperimentConfig& cfg, const std::vector<EspSummary>& results) {
  detail::write_run_metadata(cfg, cfg.regimes);
  const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / "esp";
  for (const auto& regime : cfg.regimes) {
    auto sum = detail::open_out(dir / regime.label / "summary.csv");
    sum << "seed,regime,window_mean_sqnorm,window_max_sqnorm,backflow_count_sys\n";
    std::vector<const EspSummary*> rows;
    for (const auto& r : results)
      if (r.regime == regime.label) rows.push_back(&r);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->seed < b->seed; });
    for (const auto* r : rows) {
      sum << r->seed << ',' << r->regime << ',' << r->window.mean_sqnorm << ',' << r->window.max_sqnorm << ','
          << r->backflow_sys.count << '\n';
      auto rec = detail::open_out(dir / regime.label / ("records_seed" + std::to_string(r->seed) + ".csv"));
      write_esp_csv(rec, r->records);
    }
  }
}

}  // namespace nmqrc
