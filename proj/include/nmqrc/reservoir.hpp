#pragma once

// Input injection, unitary evolution and time-multiplexed readout.
//
// One input step k:
//   rho <- rho_in(s_k) (x) Tr_in[rho]            (injection into the input qubit)
//   repeat V times:
//     rho <- U rho U^H,  U = exp(-i H dt)         (dt = tau / V, or tau per node)
//     x   <- Tr[Tr_env(rho) O_i] for every observable
//
// Features of one step are laid out [v=1: O_1..O_M, v=2: O_1..O_M, ...].

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nmqrc/errors.hpp"
#include "nmqrc/hamiltonian.hpp"
#include "nmqrc/linalg.hpp"

namespace nmqrc {

enum class ObservableKind { ZOnly, ZAndZZ };
enum class Multiplex { SubStep, PerNode };

inline constexpr double kImagTol = 1e-9;

struct ReservoirConfig {
  double tau = 0.5;
  int v = 1;
  ObservableKind observables = ObservableKind::ZOnly;
  int input_qubit = 0;
  Multiplex multiplex = Multiplex::SubStep;

  /// Evolution time between two successive measurements.
  double sub_step_time() const { return multiplex == Multiplex::SubStep ? tau / v : tau; }

  void validate(int n_sys) const {
    if (!(std::isfinite(tau) && tau > 0.0)) throw InvalidArgument("tau must be finite and > 0");
    if (v < 1) throw InvalidArgument("v must be >= 1");
    if (input_qubit < 0 || input_qubit >= n_sys) {
      throw InvalidArgument("input_qubit must be a system qubit (0.." + std::to_string(n_sys - 1) + ")");
    }
  }
};

/// Hermitian observables on the system register.
struct ObservableSet {
  int n_sys = 0;
  std::vector<std::string> labels;
  std::vector<ComplexMatrix> operators;

  std::size_t size() const noexcept { return operators.size(); }

  /// Z_i, optionally followed by Z_i Z_j for i < j.
  static ObservableSet make(ObservableKind kind, int n_sys) {
    ObservableSet set;
    set.n_sys = n_sys;
    for (int i = 0; i < n_sys; ++i) {
      set.labels.push_back("Z" + std::to_string(i));
      set.operators.push_back(embed_pauli(PauliAxis::Z, i, n_sys));
    }
    if (kind == ObservableKind::ZAndZZ) {
      for (int i = 0; i < n_sys; ++i) {
        for (int j = i + 1; j < n_sys; ++j) {
          set.labels.push_back("Z" + std::to_string(i) + "Z" + std::to_string(j));
          set.operators.push_back(embed_pauli(PauliAxis::Z, i, n_sys) * embed_pauli(PauliAxis::Z, j, n_sys));
        }
      }
    }
    return set;
  }
};

/// Per-step features, one row per input step, trailing bias column of ones.
struct FeatureMatrix {
  RealMatrix values;                // steps x (v * n_obs + 1)
  std::vector<std::string> labels;  // one per column, last is "bias"

  Eigen::Index steps() const noexcept { return values.rows(); }
  Eigen::Index width() const noexcept { return values.cols(); }

  /// Rows [begin, begin + count).
  RealMatrix rows(Eigen::Index begin, Eigen::Index count) const { return values.middleRows(begin, count); }
};

inline std::vector<std::string> feature_labels(const ObservableSet& obs, int v) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(v) * obs.size() + 1);
  for (int node = 1; node <= v; ++node)
    for (const auto& l : obs.labels) out.push_back("v" + std::to_string(node) + "_" + l);
  out.emplace_back("bias");
  return out;
}

/// CSV: `step,v1_Z0,...,bias`, one row per input step.
inline void write_features_csv(std::ostream& os, const FeatureMatrix& fm) {
  os << "step";
  for (const auto& l : fm.labels) os << ',' << l;
  os << '\n';
  const auto old = os.precision(17);
  for (Eigen::Index r = 0; r < fm.steps(); ++r) {
    os << r;
    for (Eigen::Index c = 0; c < fm.width(); ++c) os << ',' << fm.values(r, c);
    os << '\n';
  }
  os.precision(old);
}

/// |psi_s><psi_s| with |psi_s> = sqrt(1-s)|0> + sqrt(s)|1>.
inline DensityMatrix encode_input(double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("encode_input: s must lie in [0, 1]");
  ComplexMatrix m(2, 2);
  const double off = std::sqrt(s * (1.0 - s));
  m << 1.0 - s, off, off, s;
  return DensityMatrix(std::move(m));
}

/// rho_in (x) Tr_q[rho] with rho_in re-inserted at register position q.
inline DensityMatrix inject_input(const DensityMatrix& rho, const DensityMatrix& rho_in, int input_qubit) {
  if (rho_in.qubit_count() != 1) throw InvalidArgument("inject_input: rho_in must be a single qubit");
  const int n = rho.qubit_count();
  if (input_qubit < 0 || input_qubit >= n) throw InvalidArgument("inject_input: input qubit out of range");
  if (n == 1) return rho_in;

  const ComplexMatrix rest = partial_trace(rho, {input_qubit}).matrix();
  const std::size_t bit = detail::bit_of(input_qubit, n);
  const std::size_t low = bit - 1;
  // Full index -> index on the remaining n-1 qubits.
  auto strip = [low](std::size_t i) { return ((i >> 1) & ~low) | (i & low); };
  const auto dim = static_cast<std::size_t>(rho.dim());
  const auto& in = rho_in.matrix();
  ComplexMatrix out(rho.dim(), rho.dim());
  for (std::size_t c = 0; c < dim; ++c) {
    const auto cb = static_cast<Eigen::Index>((c & bit) ? 1 : 0);
    const auto cr = static_cast<Eigen::Index>(strip(c));
    for (std::size_t r = 0; r < dim; ++r) {
      const auto rb = static_cast<Eigen::Index>((r & bit) ? 1 : 0);
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          in(rb, cb) * rest(static_cast<Eigen::Index>(strip(r)), cr);
    }
  }
  return DensityMatrix(std::move(out));
}

/// Tr[rho O_i] for every observable. Fails when an expectation value has an
/// imaginary part above 1e-9.
inline RealVector measure(const DensityMatrix& rho_sys, const ObservableSet& obs) {
  RealVector out(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs.operators[i];
    if (o.rows() != rho_sys.dim()) throw InvalidArgument("measure: observable dimension mismatch");
    // Tr[rho O] = sum_ij rho_ij O_ji
    const Complex val = rho_sys.matrix().cwiseProduct(o.transpose()).sum();
    if (std::abs(val.imag()) > kImagTol) {
      throw NumericalError("measure: expectation of " + obs.labels[i] + " has imaginary part " +
                           std::to_string(val.imag()));
    }
    out(static_cast<Eigen::Index>(i)) = val.real();
  }
  return out;
}

struct TrajectoryResult {
  FeatureMatrix features;
  DensityMatrix final_state;
};

/// How a step is carried out numerically.
///   Eigenbasis: the state is rotated into the eigenbasis of H once per input
///     step; each sub-step is then an elementwise phase multiplication and
///     each measurement an inner product with a pre-rotated observable.
///   Direct: U rho U^H with a dense propagator, then partial trace over the
///     environment and measurement, at every sub-step.
///   Auto: Eigenbasis unless the pre-rotated observables would exceed the
///     memory budget (large registers).
enum class EvolutionPath { Auto, Eigenbasis, Direct };

/// Drives one realization under one configuration. Immutable after
/// construction; a single instance may serve concurrent trajectories.
class Reservoir {
public:
  static constexpr std::size_t kRotatedObservableBudget = std::size_t{1} << 22;  // complex entries

  Reservoir(HamiltonianRealization real, ReservoirConfig cfg, std::optional<ObservableSet> obs = std::nullopt,
            EvolutionPath path = EvolutionPath::Auto)
      : real_(std::move(real)), cfg_(cfg) {
    const int n_sys = real_.params().n_sys;
    cfg_.validate(n_sys);
    obs_ = obs ? std::move(*obs) : ObservableSet::make(cfg_.observables, n_sys);
    if (obs_.n_sys != n_sys) throw InvalidArgument("Reservoir: observable set built for a different n_sys");
    for (const auto& o : obs_.operators) require_hermitian(o, "observable");
    labels_ = feature_labels(obs_, cfg_.v);

    const auto dim = static_cast<std::size_t>(real_.dim());
    if (path == EvolutionPath::Auto) {
      path = dim * dim * obs_.size() <= kRotatedObservableBudget ? EvolutionPath::Eigenbasis : EvolutionPath::Direct;
    }
    path_ = path;
    const double dt = cfg_.sub_step_time();
    if (path_ == EvolutionPath::Eigenbasis) {
      prepare_eigenbasis(dt);
    } else {
      u_sub_ = build_propagator(real_, dt);
    }
  }

  const HamiltonianRealization& realization() const noexcept { return real_; }
  const ReservoirConfig& config() const noexcept { return cfg_; }
  const ObservableSet& observables() const noexcept { return obs_; }
  EvolutionPath path() const noexcept { return path_; }
  int qubit_count() const noexcept { return real_.qubit_count(); }

  /// Features per step excluding the bias column.
  Eigen::Index feature_width() const noexcept {
    return static_cast<Eigen::Index>(cfg_.v) * static_cast<Eigen::Index>(obs_.size());
  }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  DensityMatrix ground_state() const { return DensityMatrix::basis_state(qubit_count()); }

  /// Injection only (no evolution).
  DensityMatrix inject(const DensityMatrix& rho, double s) const {
    check_register(rho);
    return inject_input(rho, encode_input(s), cfg_.input_qubit);
  }

  /// Unitary evolution only, for an arbitrary time t >= 0.
  DensityMatrix advance(const DensityMatrix& rho, double t) const {
    check_register(rho);
    const ComplexMatrix u = propagator(real_.eigen(), t);
    return DensityMatrix(hermitize(u * rho.matrix() * u.adjoint()));
  }

  /// Observables of the system marginal of a full-register state.
  RealVector measure_system(const DensityMatrix& rho) const {
    check_register(rho);
    return measure(system_marginal(rho), obs_);
  }

  DensityMatrix system_marginal(const DensityMatrix& rho) const {
    const auto& p = real_.params();
    if (p.n_env == 0) return rho;
    std::vector<int> env;
    for (int k = 0; k < p.n_env; ++k) env.push_back(p.n_sys + k);
    return partial_trace(rho, env);
  }

  /// One input step. Writes feature_width() values into `features` and
  /// returns the full-register state after the last sub-step.
  DensityMatrix evolve_step(const DensityMatrix& rho, double s, std::span<double> features) const {
    if (features.size() != static_cast<std::size_t>(feature_width())) {
      throw InvalidArgument("evolve_step: feature buffer has wrong size");
    }
    DensityMatrix injected = inject(rho, s);
    return path_ == EvolutionPath::Eigenbasis ? step_eigenbasis(injected, features)
                                              : step_direct(injected, features);
  }

  RealVector evolve_step(const DensityMatrix& rho, double s, DensityMatrix& next) const {
    RealVector f(feature_width());
    next = evolve_step(rho, s, std::span<double>(f.data(), static_cast<std::size_t>(f.size())));
    return f;
  }

  TrajectoryResult run_trajectory(std::span<const double> inputs, const DensityMatrix& initial) const {
    check_register(initial);
    const auto steps = static_cast<Eigen::Index>(inputs.size());
    FeatureMatrix fm;
    fm.labels = labels_;
    fm.values.resize(steps, feature_width() + 1);
    // Row-major scratch so that one step writes a contiguous slice.
    RealVector row(feature_width());
    DensityMatrix rho = initial;
    for (Eigen::Index k = 0; k < steps; ++k) {
      try {
        rho = evolve_step(rho, inputs[static_cast<std::size_t>(k)],
                          std::span<double>(row.data(), static_cast<std::size_t>(row.size())));
      } catch (const NumericalError& e) {
        throw NumericalError("step " + std::to_string(k) + ": " + e.what());
      } catch (const Error& e) {
        throw InvalidArgument("step " + std::to_string(k) + ": " + e.what());
      }
      fm.values.row(k).head(feature_width()) = row.transpose();
      fm.values(k, feature_width()) = 1.0;
    }
    return TrajectoryResult{std::move(fm), std::move(rho)};
  }

  TrajectoryResult run_trajectory(std::span<const double> inputs) const {
    return run_trajectory(inputs, ground_state());
  }

private:
  static ComplexMatrix hermitize(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

  void check_register(const DensityMatrix& rho) const {
    if (rho.qubit_count() != qubit_count()) {
      throw InvalidArgument("state has " + std::to_string(rho.qubit_count()) + " qubits, reservoir has " +
                            std::to_string(qubit_count()));
    }
  }

  void prepare_eigenbasis(double dt) {
    const auto& eig = real_.eigen();
    const Eigen::Index dim = real_.dim();
    const RealVector& e = eig.eigenvalues;
    phase_.resize(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j)
      for (Eigen::Index i = 0; i < dim; ++i) phase_(i, j) = std::exp(Complex{0.0, -(e(i) - e(j)) * dt});

    // Rows hold conj(V^H (O (x) I_env) V), flattened column-major, so that
    // Tr[rho O] = row . vec(rho_eigenbasis).
    const int n_env = real_.params().n_env;
    const ComplexMatrix id_env = ComplexMatrix::Identity(Eigen::Index{1} << n_env, Eigen::Index{1} << n_env);
    rotated_obs_.resize(static_cast<Eigen::Index>(obs_.size()), dim * dim);
    for (std::size_t o = 0; o < obs_.size(); ++o) {
      const ComplexMatrix full = n_env == 0 ? obs_.operators[o] : kron(obs_.operators[o], id_env);
      const ComplexMatrix rot = eig.eigenvectors.adjoint() * full * eig.eigenvectors;
      rotated_obs_.row(static_cast<Eigen::Index>(o)) =
          Eigen::Map<const ComplexVector>(rot.data(), dim * dim).conjugate().transpose();
    }
  }

  DensityMatrix step_eigenbasis(const DensityMatrix& injected, std::span<double> features) const {
    const auto& vecs = real_.eigen().eigenvectors;
    const Eigen::Index dim = real_.dim();
    const auto n_obs = static_cast<Eigen::Index>(obs_.size());
    ComplexMatrix rot = vecs.adjoint() * injected.matrix() * vecs;
    ComplexVector vals(n_obs);
    for (int node = 0; node < cfg_.v; ++node) {
      rot.array() *= phase_.array();
      vals.noalias() = rotated_obs_ * Eigen::Map<const ComplexVector>(rot.data(), dim * dim);
      for (Eigen::Index o = 0; o < n_obs; ++o) {
        if (std::abs(vals(o).imag()) > kImagTol) {
          throw NumericalError("expectation of " + obs_.labels[static_cast<std::size_t>(o)] +
                               " has imaginary part " + std::to_string(vals(o).imag()));
        }
        features[static_cast<std::size_t>(node * n_obs + o)] = vals(o).real();
      }
    }
    return DensityMatrix(hermitize(vecs * rot * vecs.adjoint()));
  }

  DensityMatrix step_direct(const DensityMatrix& injected, std::span<double> features) const {
    const auto n_obs = static_cast<Eigen::Index>(obs_.size());
    ComplexMatrix m = injected.matrix();
    for (int node = 0; node < cfg_.v; ++node) {
      m = hermitize(u_sub_ * m * u_sub_.adjoint());
      const RealVector x = measure(system_marginal(DensityMatrix(m)), obs_);
      for (Eigen::Index o = 0; o < n_obs; ++o) features[static_cast<std::size_t>(node * n_obs + o)] = x(o);
    }
    return DensityMatrix(std::move(m));
  }

  HamiltonianRealization real_;
  ReservoirConfig cfg_;
  ObservableSet obs_;
  std::vector<std::string> labels_;
  EvolutionPath path_ = EvolutionPath::Auto;
  ComplexMatrix phase_;        // Eigenbasis: exp(-i (e_i - e_j) dt)
  ComplexMatrix rotated_obs_;  // Eigenbasis: n_obs x dim^2
  ComplexMatrix u_sub_;        // Direct: exp(-i H dt)
};

/// One input step for a given realization / configuration / observable set.
/// Builds a Reservoir per call; prefer Reservoir::evolve_step in loops.
inline std::pair<DensityMatrix, RealVector> evolve_step(const DensityMatrix& rho, double s,
                                                        const HamiltonianRealization& real,
                                                        const ReservoirConfig& cfg, const ObservableSet& obs) {
  const Reservoir res(real, cfg, obs);
  DensityMatrix next = rho;
  RealVector f = res.evolve_step(rho, s, next);
  return {std::move(next), std::move(f)};
}

inline TrajectoryResult run_trajectory(const HamiltonianRealization& real, std::span<const double> inputs,
                                       const ReservoirConfig& cfg, const DensityMatrix& initial) {
  return Reservoir(real, cfg).run_trajectory(inputs, initial);
}

}  // namespace nmqrc
