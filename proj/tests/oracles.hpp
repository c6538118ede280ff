#pragma once

// Test-only reference routines. Nothing here calls into the eigen-based
// paths of the library: exponentials use a Taylor series with scaling and
// squaring, partial traces use explicit projector sandwiches.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;

inline CMat pauli_x() {
  CMat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline CMat pauli_z() {
  CMat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

inline CMat id(Eigen::Index n) { return CMat::Identity(n, n); }

/// Kronecker product written straight from the index formula.
inline CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index k = 0; k < b.rows(); ++k)
        for (Eigen::Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

/// Single-qubit operator at `qubit` (qubit 0 leftmost) in an n-qubit register.
inline CMat embed(const CMat& op, int qubit, int n) {
  CMat out = CMat::Identity(1, 1);
  for (int q = 0; q < n; ++q) out = kron(out, q == qubit ? op : id(2));
  return out;
}

/// exp(-i H t) by Taylor series with scaling and squaring.
inline CMat expm_minus_i(const CMat& h, double t) {
  const CMat a = Complex{0.0, -t} * h;
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
  const CMat scaled = a / std::pow(2.0, squarings);
  CMat term = id(h.rows());
  CMat sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// Tr over the last `n_b` qubits: sum_t (I (x) <t|) rho (I (x) |t>).
inline CMat trace_out_tail(const CMat& rho, int n_b) {
  const Eigen::Index db = Eigen::Index{1} << n_b;
  const Eigen::Index da = rho.rows() / db;
  CMat out = CMat::Zero(da, da);
  for (Eigen::Index t = 0; t < db; ++t) {
    CMat ket = CMat::Zero(db, 1);
    ket(t, 0) = 1.0;
    const CMat p = kron(id(da), ket);
    out += p.adjoint() * rho * p;
  }
  return out;
}

/// Tr over the first `n_a` qubits.
inline CMat trace_out_head(const CMat& rho, int n_a) {
  const Eigen::Index da = Eigen::Index{1} << n_a;
  const Eigen::Index db = rho.rows() / da;
  CMat out = CMat::Zero(db, db);
  for (Eigen::Index t = 0; t < da; ++t) {
    CMat ket = CMat::Zero(da, 1);
    ket(t, 0) = 1.0;
    const CMat p = kron(ket, id(db));
    out += p.adjoint() * rho * p;
  }
  return out;
}

/// Eigenvalues of a 2x2 Hermitian matrix, closed form.
inline std::pair<double, double> eig2(const CMat& m) {
  const double a = m(0, 0).real();
  const double d = m(1, 1).real();
  const double b = std::abs(m(0, 1));
  const double mid = 0.5 * (a + d);
  const double rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
  return {mid - rad, mid + rad};
}

inline CMat random_hermitian(Eigen::Index dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  CMat a(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = Complex{nd(rng), nd(rng)};
  return 0.5 * (a + a.adjoint());
}

/// Random full-rank density matrix G G^H / Tr.
inline CMat random_density(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  CMat g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = Complex{nd(rng), nd(rng)};
  CMat rho = g * g.adjoint();
  rho /= rho.trace();
  return 0.5 * (rho + rho.adjoint());
}

inline CMat encode(double s) {
  CMat m(2, 2);
  const double off = std::sqrt(s * (1.0 - s));
  m << 1.0 - s, off, off, s;
  return m;
}

/// Environment-free reservoir written out longhand: input injected into
/// qubit 0, V sub-steps of exp(-i H dt), Z_i (and Z_i Z_j) read off the
/// diagonal of rho.
struct ReferenceChain {
  int n = 0;
  CMat u;
  int v = 1;
  bool zz = false;

  std::vector<double> step(CMat& rho, double s) const {
    rho = kron(encode(s), trace_out_head(rho, 1));
    std::vector<double> out;
    for (int node = 0; node < v; ++node) {
      rho = u * rho * u.adjoint();
      const Eigen::Index dim = rho.rows();
      auto z = [&](Eigen::Index b, int q) { return ((b >> (n - 1 - q)) & 1) ? -1.0 : 1.0; };
      for (int q = 0; q < n; ++q) {
        double acc = 0.0;
        for (Eigen::Index b = 0; b < dim; ++b) acc += z(b, q) * rho(b, b).real();
        out.push_back(acc);
      }
      if (zz) {
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (Eigen::Index b = 0; b < dim; ++b) acc += z(b, i) * z(b, j) * rho(b, b).real();
            out.push_back(acc);
          }
      }
    }
    return out;
  }
};

/// Transverse-field XX chain assembled from embedded Paulis.
inline CMat xx_field_hamiltonian(int n, const std::vector<double>& j_pairs, double h) {
  const Eigen::Index dim = Eigen::Index{1} << n;
  CMat hm = CMat::Zero(dim, dim);
  std::size_t p = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) hm += j_pairs[p++] * embed(pauli_x(), i, n) * embed(pauli_x(), j, n);
  for (int i = 0; i < n; ++i) hm += h * embed(pauli_z(), i, n);
  return hm;
}

}  // namespace oracle
