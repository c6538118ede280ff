#pragma once

// System / environment spin Hamiltonian:
//
//   H = H_sys (x) I + I (x) H_env + H_int
//   H_sys = sum_{i<j} J_ij^sys X_i X_j + h_sys sum_i Z_i
//   H_env = sum_{k<l} J_kl^env X_k X_l + h_env sum_k Z_k
//   H_int = sum_{i,k} g_ik Z_i Z_k
//
// with J^sys ~ U(-J0, J0), J^env ~ U(-alpha J0, alpha J0), g ~ U(-beta J0, beta J0).
// System qubits occupy register indices 0..n_sys-1, environment qubits follow.

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmqrc/errors.hpp"
#include "nmqrc/linalg.hpp"
#include "nmqrc/random.hpp"

namespace nmqrc {

enum class PauliAxis { X, Y, Z };

struct ReservoirParams {
  int n_sys = 1;
  int n_env = 0;
  double j0 = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  double h_sys = 0.5;
  double h_env = 1.0;
  std::uint64_t seed = 0;

  int n_total() const noexcept { return n_sys + n_env; }

  void validate() const {
    if (n_sys < 1) throw InvalidArgument("n_sys must be >= 1");
    if (n_env < 0) throw InvalidArgument("n_env must be >= 0");
    if (n_total() > kMaxQubits) {
      throw DimensionError("n_sys + n_env = " + std::to_string(n_total()) + " exceeds " +
                           std::to_string(kMaxQubits));
    }
    if (!(std::isfinite(j0) && j0 > 0.0)) throw InvalidArgument("j0 must be finite and > 0");
    if (!(std::isfinite(alpha) && alpha >= 0.0)) throw InvalidArgument("alpha must be finite and >= 0");
    if (!(std::isfinite(beta) && beta >= 0.0)) throw InvalidArgument("beta must be finite and >= 0");
    if (!std::isfinite(h_sys)) throw InvalidArgument("h_sys must be finite");
    if (!std::isfinite(h_env)) throw InvalidArgument("h_env must be finite");
  }
};

/// Sampled coupling coefficients.
///   j_sys: pairs (i<j) of system sites, lexicographic
///   j_env: pairs (k<l) of environment sites, lexicographic
///   g:     row-major over (system i, environment k)
struct CouplingSet {
  std::vector<double> j_sys;
  std::vector<double> j_env;
  std::vector<double> g;

  double g_at(int i, int k, int n_env) const {
    return g[static_cast<std::size_t>(i * n_env + k)];
  }
};

inline std::size_t pair_count(int n) {
  return n < 2 ? 0 : static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
}

/// Pauli operator on `qubit` embedded in an n-qubit register.
inline ComplexMatrix embed_pauli(PauliAxis axis, int qubit, int n) {
  if (n < 1 || n > kMaxQubits) throw DimensionError("embed_pauli: register size out of range");
  if (qubit < 0 || qubit >= n) throw InvalidArgument("embed_pauli: qubit index out of range");
  ComplexMatrix sigma(2, 2);
  switch (axis) {
    case PauliAxis::X: sigma << 0.0, 1.0, 1.0, 0.0; break;
    case PauliAxis::Y: sigma << 0.0, Complex{0.0, -1.0}, Complex{0.0, 1.0}, 0.0; break;
    case PauliAxis::Z: sigma << 1.0, 0.0, 0.0, -1.0; break;
  }
  const ComplexMatrix id2 = ComplexMatrix::Identity(2, 2);
  ComplexMatrix out = (qubit == 0) ? sigma : id2;
  for (int q = 1; q < n; ++q) out = kron(out, q == qubit ? sigma : id2);
  return out;
}

/// Draws couplings in the fixed order: system pairs, environment pairs, g.
inline CouplingSet sample_couplings(const ReservoirParams& params, Rng& rng) {
  params.validate();
  CouplingSet c;
  c.j_sys.reserve(pair_count(params.n_sys));
  for (int i = 0; i < params.n_sys; ++i)
    for (int j = i + 1; j < params.n_sys; ++j) c.j_sys.push_back(rng.symmetric(params.j0));
  c.j_env.reserve(pair_count(params.n_env));
  for (int k = 0; k < params.n_env; ++k)
    for (int l = k + 1; l < params.n_env; ++l) c.j_env.push_back(rng.symmetric(params.alpha * params.j0));
  c.g.reserve(static_cast<std::size_t>(params.n_sys * params.n_env));
  for (int i = 0; i < params.n_sys; ++i)
    for (int k = 0; k < params.n_env; ++k) c.g.push_back(rng.symmetric(params.beta * params.j0));
  return c;
}

/// Same as above with the generator seeded from params.seed.
inline CouplingSet sample_couplings(const ReservoirParams& params) {
  Rng rng(derive_seed(params.seed, kCouplingStream));
  return sample_couplings(params, rng);
}

/// A sampled Hamiltonian together with its eigendecomposition. Immutable;
/// copies share the decomposition.
class HamiltonianRealization {
public:
  HamiltonianRealization(ReservoirParams params, CouplingSet couplings, ComplexMatrix h_full)
      : params_(std::move(params)),
        couplings_(std::move(couplings)),
        h_full_(std::move(h_full)),
        eigen_(std::make_shared<const HermitianEigen>(hermitian_eig(h_full_))) {}

  const ReservoirParams& params() const noexcept { return params_; }
  const CouplingSet& couplings() const noexcept { return couplings_; }
  const ComplexMatrix& h_full() const noexcept { return h_full_; }
  const HermitianEigen& eigen() const noexcept { return *eigen_; }
  int qubit_count() const noexcept { return params_.n_total(); }
  Eigen::Index dim() const noexcept { return h_full_.rows(); }

private:
  ReservoirParams params_;
  CouplingSet couplings_;
  ComplexMatrix h_full_;
  std::shared_ptr<const HermitianEigen> eigen_;
};

namespace detail {

// Adds coeff * X_a X_b (a != b) to h; X_a X_b flips both bits.
inline void add_xx(ComplexMatrix& h, int a, int b, int n, double coeff) {
  const std::size_t mask = bit_of(a, n) | bit_of(b, n);
  const auto dim = static_cast<std::size_t>(h.rows());
  for (std::size_t s = 0; s < dim; ++s) {
    h(static_cast<Eigen::Index>(s ^ mask), static_cast<Eigen::Index>(s)) += coeff;
  }
}

inline double z_sign(std::size_t state, int q, int n) { return (state & bit_of(q, n)) ? -1.0 : 1.0; }

}  // namespace detail

inline HamiltonianRealization build_hamiltonian(const ReservoirParams& params, const CouplingSet& couplings) {
  params.validate();
  const int ns = params.n_sys;
  const int ne = params.n_env;
  const int n = params.n_total();
  if (couplings.j_sys.size() != pair_count(ns) || couplings.j_env.size() != pair_count(ne) ||
      couplings.g.size() != static_cast<std::size_t>(ns * ne)) {
    throw InvalidArgument("build_hamiltonian: coupling counts do not match n_sys / n_env");
  }
  const auto dim = static_cast<Eigen::Index>(1) << n;
  ComplexMatrix h = ComplexMatrix::Zero(dim, dim);

  std::size_t p = 0;
  for (int i = 0; i < ns; ++i)
    for (int j = i + 1; j < ns; ++j) detail::add_xx(h, i, j, n, couplings.j_sys[p++]);
  p = 0;
  for (int k = 0; k < ne; ++k)
    for (int l = k + 1; l < ne; ++l) detail::add_xx(h, ns + k, ns + l, n, couplings.j_env[p++]);

  for (std::size_t s = 0; s < static_cast<std::size_t>(dim); ++s) {
    double diag = 0.0;
    for (int i = 0; i < ns; ++i) diag += params.h_sys * detail::z_sign(s, i, n);
    for (int k = 0; k < ne; ++k) diag += params.h_env * detail::z_sign(s, ns + k, n);
    for (int i = 0; i < ns; ++i)
      for (int k = 0; k < ne; ++k)
        diag += couplings.g_at(i, k, ne) * detail::z_sign(s, i, n) * detail::z_sign(s, ns + k, n);
    h(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) += diag;
  }
  return HamiltonianRealization(params, couplings, std::move(h));
}

/// Samples couplings from params.seed and assembles the Hamiltonian.
inline HamiltonianRealization realize(const ReservoirParams& params) {
  return build_hamiltonian(params, sample_couplings(params));
}

/// exp(-i H dt) from the realization's cached eigendecomposition.
inline ComplexMatrix build_propagator(const HamiltonianRealization& real, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("build_propagator: dt must be > 0");
  return propagator(real.eigen(), dt);
}

// JSON provenance: {"params": {...}, "j_sys": [...], "j_env": [...], "g": [...]}

inline nlohmann::json to_json(const ReservoirParams& p) {
  return nlohmann::json{{"n_sys", p.n_sys}, {"n_env", p.n_env}, {"j0", p.j0},
                        {"alpha", p.alpha}, {"beta", p.beta},   {"h_sys", p.h_sys},
                        {"h_env", p.h_env}, {"seed", p.seed}};
}

inline nlohmann::json couplings_to_json(const HamiltonianRealization& real) {
  const auto& c = real.couplings();
  return nlohmann::json{{"params", to_json(real.params())},
                        {"j_sys", c.j_sys},
                        {"j_env", c.j_env},
                        {"g", c.g}};
}

/// Rebuilds a realization from an exported couplings document.
inline HamiltonianRealization realization_from_json(const nlohmann::json& doc) {
  try {
    const auto& jp = doc.at("params");
    ReservoirParams p;
    p.n_sys = jp.at("n_sys").get<int>();
    p.n_env = jp.at("n_env").get<int>();
    p.j0 = jp.at("j0").get<double>();
    p.alpha = jp.at("alpha").get<double>();
    p.beta = jp.at("beta").get<double>();
    p.h_sys = jp.at("h_sys").get<double>();
    p.h_env = jp.at("h_env").get<double>();
    p.seed = jp.at("seed").get<std::uint64_t>();
    CouplingSet c;
    c.j_sys = doc.at("j_sys").get<std::vector<double>>();
    c.j_env = doc.at("j_env").get<std::vector<double>>();
    c.g = doc.at("g").get<std::vector<double>>();
    return build_hamiltonian(p, c);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("couplings document: ") + e.what());
  }
}

}  // namespace nmqrc
