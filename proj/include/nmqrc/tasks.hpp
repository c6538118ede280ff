#pragma once

// Benchmark data: uniform input streams, delayed-recall (STM) targets and
// NARMA-n series, plus washout / train / validation splitting.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "nmqrc/errors.hpp"
#include "nmqrc/linalg.hpp"
#include "nmqrc/random.hpp"

namespace nmqrc {

struct SplitSpec {
  int washout = 1000;
  int train = 3000;
  int val = 1000;

  int total() const noexcept { return washout + train + val; }

  void validate() const {
    if (washout < 0) throw InvalidArgument("split: washout must be >= 0");
    if (train < 1) throw InvalidArgument("split: train must be >= 1");
    if (val < 1) throw InvalidArgument("split: val must be >= 1");
  }
};

enum class TaskKind { Stm, Narma };

struct TaskDataset {
  TaskKind kind = TaskKind::Stm;
  std::vector<double> u;  // raw input (equal to s for STM)
  std::vector<double> s;  // reservoir input in [0, 1]
  std::vector<double> y;  // target aligned with s
  SplitSpec split;
  int tau_d = 0;  // STM delay
  int order = 0;  // NARMA order

  void validate() const {
    split.validate();
    const auto n = static_cast<std::size_t>(split.total());
    if (s.size() != n || y.size() != n || u.size() != n) {
      throw InvalidArgument("dataset: sequence lengths do not match the split");
    }
    for (double v : s)
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("dataset: input outside [0, 1]");
    for (double v : y)
      if (!std::isfinite(v)) throw InvalidArgument("dataset: non-finite target");
  }
};

/// i.i.d. Uniform[lo, hi) draws.
inline std::vector<double> gen_uniform_inputs(std::size_t length, double lo, double hi, Rng& rng) {
  if (!(lo < hi)) throw InvalidArgument("gen_uniform_inputs: lo must be < hi");
  std::vector<double> out(length);
  for (auto& v : out) v = rng.uniform(lo, hi);
  return out;
}

inline std::vector<double> gen_uniform_inputs(std::size_t length, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed);
  return gen_uniform_inputs(length, lo, hi, rng);
}

/// y_k = s_{k - tau_d}. Entries with k < tau_d lie inside the washout and are
/// set to 0; they never reach the readout.
inline std::vector<double> stm_targets(std::span<const double> s, int tau_d, int washout) {
  if (tau_d < 0) throw InvalidArgument("stm_targets: tau_d must be >= 0");
  if (tau_d > 0 && tau_d >= washout) {
    throw InvalidArgument("stm_targets: tau_d = " + std::to_string(tau_d) + " needs washout > tau_d (washout = " +
                          std::to_string(washout) + ")");
  }
  std::vector<double> y(s.size(), 0.0);
  for (std::size_t k = static_cast<std::size_t>(tau_d); k < s.size(); ++k) y[k] = s[k - static_cast<std::size_t>(tau_d)];
  return y;
}

struct NarmaConstants {
  double a = 0.3;
  double b = 0.05;
  double c = 1.5;
  double d = 0.1;
};

inline constexpr double kNarmaDivergenceGuard = 10.0;

/// y_k = a y_{k-1} + b y_{k-1} (1/n) sum_{i=1..n} y_{k-i} + c u_{k-n} u_{k-1} + d,
/// with y_k = 0 for the first n steps.
inline std::vector<double> narma_series(std::span<const double> u, int n, const NarmaConstants& k = {}) {
  if (n < 1) throw InvalidArgument("narma_series: order must be >= 1");
  std::vector<double> y(u.size(), 0.0);
  const auto order = static_cast<std::size_t>(n);
  for (std::size_t t = order; t < u.size(); ++t) {
    double window = 0.0;
    for (std::size_t i = 1; i <= order; ++i) window += y[t - i];
    const double prev = y[t - 1];
    const double next = k.a * prev + k.b * prev * (window / n) + k.c * u[t - order] * u[t - 1] + k.d;
    if (!std::isfinite(next) || std::abs(next) > kNarmaDivergenceGuard) {
      throw NumericalError("narma_series: order " + std::to_string(n) + " diverged at step " + std::to_string(t));
    }
    y[t] = next;
  }
  return y;
}

/// s = u / u_max using the declared generation range.
inline std::vector<double> scale_inputs(std::span<const double> u, double u_max = 0.5) {
  if (!(u_max > 0.0)) throw InvalidArgument("scale_inputs: u_max must be > 0");
  std::vector<double> s(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] >= 0.0 && u[i] <= u_max)) {
      throw InvalidArgument("scale_inputs: value " + std::to_string(u[i]) + " outside [0, u_max]");
    }
    s[i] = u[i] / u_max;
  }
  return s;
}

inline TaskDataset make_stm_dataset(const SplitSpec& split, int tau_d, std::uint64_t input_seed) {
  split.validate();
  TaskDataset ds;
  ds.kind = TaskKind::Stm;
  ds.split = split;
  ds.tau_d = tau_d;
  ds.s = gen_uniform_inputs(static_cast<std::size_t>(split.total()), 0.0, 1.0, input_seed);
  ds.u = ds.s;
  ds.y = stm_targets(ds.s, tau_d, split.washout);
  return ds;
}

inline TaskDataset make_narma_dataset(const SplitSpec& split, int order, std::uint64_t input_seed,
                                      const NarmaConstants& k = {}) {
  split.validate();
  TaskDataset ds;
  ds.kind = TaskKind::Narma;
  ds.split = split;
  ds.order = order;
  ds.u = gen_uniform_inputs(static_cast<std::size_t>(split.total()), 0.0, 0.5, input_seed);
  ds.y = narma_series(ds.u, order, k);
  ds.s = scale_inputs(ds.u, 0.5);
  return ds;
}

/// Half-open step ranges of the train and validation blocks.
struct SplitRanges {
  Eigen::Index train_begin = 0;
  Eigen::Index train_end = 0;
  Eigen::Index val_begin = 0;
  Eigen::Index val_end = 0;
};

inline SplitRanges split_ranges(const SplitSpec& split, std::size_t length) {
  split.validate();
  if (static_cast<std::size_t>(split.total()) != length) {
    throw InvalidArgument("split: washout + train + val = " + std::to_string(split.total()) +
                          " but sequence has " + std::to_string(length) + " steps");
  }
  SplitRanges r;
  r.train_begin = split.washout;
  r.train_end = split.washout + split.train;
  r.val_begin = r.train_end;
  r.val_end = r.val_begin + split.val;
  return r;
}

inline SplitRanges split_dataset(const TaskDataset& ds) { return split_ranges(ds.split, ds.s.size()); }

/// Feature rows and targets of the train / validation blocks.
struct TrainValData {
  RealMatrix x_train;
  RealVector y_train;
  RealMatrix x_val;
  RealVector y_val;
};

inline TrainValData slice_train_val(const RealMatrix& features, std::span<const double> y, const SplitSpec& split) {
  if (static_cast<std::size_t>(features.rows()) != y.size()) {
    throw InvalidArgument("slice_train_val: feature rows and targets differ in length");
  }
  const SplitRanges r = split_ranges(split, y.size());
  const RealVector all = Eigen::Map<const RealVector>(y.data(), static_cast<Eigen::Index>(y.size()));
  TrainValData out;
  out.x_train = features.middleRows(r.train_begin, r.train_end - r.train_begin);
  out.y_train = all.segment(r.train_begin, r.train_end - r.train_begin);
  out.x_val = features.middleRows(r.val_begin, r.val_end - r.val_begin);
  out.y_val = all.segment(r.val_begin, r.val_end - r.val_begin);
  return out;
}

/// CSV `step,u,s,y`.
inline void write_dataset_csv(std::ostream& os, const TaskDataset& ds) {
  os << "step,u,s,y\n";
  const auto old = os.precision(17);
  for (std::size_t k = 0; k < ds.s.size(); ++k) os << k << ',' << ds.u[k] << ',' << ds.s[k] << ',' << ds.y[k] << '\n';
  os.precision(old);
}

/// Reads `step,u,s,y` rows. The split and task metadata are supplied by the
/// caller since the CSV carries only the sequences.
inline TaskDataset read_dataset_csv(std::istream& is, const SplitSpec& split, TaskKind kind) {
  std::string line;
  if (!std::getline(is, line) || line != "step,u,s,y") throw InvalidArgument("dataset csv: bad header");
  TaskDataset ds;
  ds.kind = kind;
  ds.split = split;
  std::size_t expected = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell[4];
    for (auto& c : cell) {
      if (!std::getline(row, c, ',')) throw InvalidArgument("dataset csv: short row '" + line + "'");
    }
    try {
      if (std::stoull(cell[0]) != expected) throw InvalidArgument("dataset csv: steps out of order");
      ds.u.push_back(std::stod(cell[1]));
      ds.s.push_back(std::stod(cell[2]));
      ds.y.push_back(std::stod(cell[3]));
    } catch (const std::logic_error&) {
      throw InvalidArgument("dataset csv: unparsable row '" + line + "'");
    }
    ++expected;
  }
  ds.validate();
  return ds;
}

}  // namespace nmqrc
