#pragma once

// Echo-state diagnostics: two copies of the reservoir, started from the
// maximally mixed state and from |0...0>, driven by the same inputs.

#include <algorithm>
#include <ostream>
#include <span>
#include <vector>

#include "nmqrc/errors.hpp"
#include "nmqrc/hamiltonian.hpp"
#include "nmqrc/linalg.hpp"
#include "nmqrc/reservoir.hpp"

namespace nmqrc {

struct EspRecord {
  int step = 0;
  double sqnorm_diff = 0.0;         // ||x1_k - x2_k||^2, bias excluded
  double trace_distance = 0.0;      // Tr|rho1_k - rho2_k| on the full register
  double trace_distance_sys = 0.0;  // same on the system marginals
};

/// Lockstep evolution of two initial states under identical injections.
inline std::vector<EspRecord> dual_trajectory(const Reservoir& res, std::span<const double> inputs,
                                              DensityMatrix first, DensityMatrix second) {
  std::vector<EspRecord> out;
  out.reserve(inputs.size());
  RealVector f1(res.feature_width());
  RealVector f2(res.feature_width());
  const auto as_span = [](RealVector& v) { return std::span<double>(v.data(), static_cast<std::size_t>(v.size())); };
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    try {
      first = res.evolve_step(first, inputs[k], as_span(f1));
      second = res.evolve_step(second, inputs[k], as_span(f2));
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(k) + ": " + e.what());
    }
    EspRecord r;
    r.step = static_cast<int>(k);
    r.sqnorm_diff = (f1 - f2).squaredNorm();
    r.trace_distance = trace_distance(first, second);
    r.trace_distance_sys = trace_distance(res.system_marginal(first), res.system_marginal(second));
    out.push_back(r);
  }
  return out;
}

/// rho_max = I / 2^N against rho_sep = |0...0><0...0|, Z_i observables.
inline std::vector<EspRecord> dual_trajectory(const HamiltonianRealization& real, std::span<const double> inputs,
                                              ReservoirConfig cfg) {
  cfg.observables = ObservableKind::ZOnly;
  const Reservoir res(real, cfg);
  const int n = real.qubit_count();
  return dual_trajectory(res, inputs, DensityMatrix::maximally_mixed(n), DensityMatrix::basis_state(n));
}

struct WindowStats {
  double mean_sqnorm = 0.0;
  double max_sqnorm = 0.0;
  double mean_trace_distance = 0.0;
};

/// Statistics over records with step in [from, to).
inline WindowStats window_stats(std::span<const EspRecord> records, int from, int to) {
  if (from >= to) throw InvalidArgument("window_stats: empty window");
  double sum_sq = 0.0;
  double max_sq = 0.0;
  double sum_td = 0.0;
  int count = 0;
  for (const auto& r : records) {
    if (r.step < from || r.step >= to) continue;
    sum_sq += r.sqnorm_diff;
    max_sq = std::max(max_sq, r.sqnorm_diff);
    sum_td += r.trace_distance;
    ++count;
  }
  if (count != to - from) {
    throw InvalidArgument("window_stats: window [" + std::to_string(from) + ", " + std::to_string(to) +
                          ") not covered by records");
  }
  return {sum_sq / count, max_sq, sum_td / count};
}

enum class DistanceRegister { Full, System };

struct Backflow {
  int count = 0;
  double total = 0.0;
};

inline constexpr double kDefaultBackflowTol = 1e-6;

/// Counts steps where the trace distance grows by more than tol and sums
/// those increases.
inline Backflow backflow_count(std::span<const EspRecord> records, DistanceRegister reg,
                               double tol = kDefaultBackflowTol) {
  if (records.size() < 2) throw InvalidArgument("backflow_count: needs at least two records");
  auto pick = [reg](const EspRecord& r) { return reg == DistanceRegister::Full ? r.trace_distance : r.trace_distance_sys; };
  Backflow b;
  for (std::size_t k = 1; k < records.size(); ++k) {
    const double inc = pick(records[k]) - pick(records[k - 1]);
    if (inc > tol) {
      ++b.count;
      b.total += inc;
    }
  }
  return b;
}

/// CSV `step,sqnorm_diff,trace_distance_full,trace_distance_sys`.
inline void write_esp_csv(std::ostream& os, std::span<const EspRecord> records) {
  os << "step,sqnorm_diff,trace_distance_full,trace_distance_sys\n";
  const auto old = os.precision(17);
  for (const auto& r : records) {
    os << r.step << ',' << r.sqnorm_diff << ',' << r.trace_distance << ',' << r.trace_distance_sys << '\n';
  }
  os.precision(old);
}

}  // namespace nmqrc
