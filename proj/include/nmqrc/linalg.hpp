#pragma once

// Dense complex linear algebra over qubit registers.
//
// Qubit ordering: qubit 0 is the most significant bit of a basis index, so in
// an n-qubit register qubit q corresponds to bit (n - 1 - q).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "nmqrc/errors.hpp"

namespace nmqrc {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Largest register the dense representation accepts (4096-dim).
inline constexpr int kMaxQubits = 12;
inline constexpr Eigen::Index kMaxDim = Eigen::Index{1} << kMaxQubits;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kTraceTol = 1e-9;
inline constexpr double kPositivityTol = 1e-9;

/// Default relative singular-value cutoff for pseudoinverses.
inline constexpr double kDefaultRcond = 1e-12;

namespace detail {

inline bool is_power_of_two(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

inline int log2_exact(Eigen::Index n) {
  int q = 0;
  while ((Eigen::Index{1} << q) < n) ++q;
  return q;
}

inline std::size_t bit_of(int qubit, int n_qubits) {
  return std::size_t{1} << (n_qubits - 1 - qubit);
}

}  // namespace detail

/// max_ij |A_ij - conj(A_ji)|
inline double hermiticity_error(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline void require_hermitian(const ComplexMatrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw InvalidArgument(std::string(what) + ": matrix is not square");
  }
  if (!a.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
  const double err = hermiticity_error(a);
  if (err > kHermitianTol) {
    throw NumericalError(std::string(what) + ": matrix is not Hermitian (max |A - A^H| = " +
                         std::to_string(err) + ")");
  }
}

/// Unit-trace, Hermitian, positive semidefinite matrix on a qubit register.
///
/// Construction checks shape, finiteness, Hermiticity (1e-10 entrywise) and
/// trace (1e-9). Positivity needs an eigendecomposition and is checked on
/// request through min_eigenvalue() / require_positive().
class DensityMatrix {
public:
  explicit DensityMatrix(ComplexMatrix m) : matrix_(std::move(m)) {
    if (matrix_.rows() != matrix_.cols()) throw InvalidArgument("density matrix is not square");
    if (!detail::is_power_of_two(matrix_.rows())) {
      throw InvalidArgument("density matrix dimension is not a power of two");
    }
    if (matrix_.rows() > kMaxDim) {
      throw DimensionError("density matrix exceeds " + std::to_string(kMaxQubits) + " qubits");
    }
    qubits_ = detail::log2_exact(matrix_.rows());
    if (!matrix_.allFinite()) throw NumericalError("density matrix has non-finite entries");
    const double herm = hermiticity_error(matrix_);
    if (herm > kHermitianTol) {
      throw NumericalError("density matrix is not Hermitian (error " + std::to_string(herm) + ")");
    }
    const Complex tr = matrix_.trace();
    if (std::abs(tr - Complex{1.0, 0.0}) > kTraceTol) {
      throw NumericalError("density matrix trace " + std::to_string(tr.real()) + " != 1");
    }
  }

  /// |psi><psi| for a normalized state vector.
  static DensityMatrix pure(const ComplexVector& psi) { return DensityMatrix(psi * psi.adjoint()); }

  /// |b><b| for computational basis index b (default |0...0>).
  static DensityMatrix basis_state(int qubits, std::size_t index = 0) {
    check_qubits(qubits);
    const Eigen::Index dim = Eigen::Index{1} << qubits;
    if (static_cast<Eigen::Index>(index) >= dim) throw InvalidArgument("basis index out of range");
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    m(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
    return DensityMatrix(std::move(m));
  }

  /// I / 2^qubits
  static DensityMatrix maximally_mixed(int qubits) {
    check_qubits(qubits);
    const Eigen::Index dim = Eigen::Index{1} << qubits;
    ComplexMatrix m = ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim);
    return DensityMatrix(std::move(m));
  }

  int qubit_count() const noexcept { return qubits_; }
  Eigen::Index dim() const noexcept { return matrix_.rows(); }
  const ComplexMatrix& matrix() const noexcept { return matrix_; }

  double trace_error() const { return std::abs(matrix_.trace() - Complex{1.0, 0.0}); }
  double hermiticity() const { return hermiticity_error(matrix_); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(matrix_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solver did not converge");
    return es.eigenvalues()(0);
  }

  void require_positive() const {
    const double lo = min_eigenvalue();
    if (lo < -kPositivityTol) {
      throw NumericalError("density matrix has negative eigenvalue " + std::to_string(lo));
    }
  }

private:
  static void check_qubits(int qubits) {
    if (qubits < 1) throw InvalidArgument("register needs at least one qubit");
    if (qubits > kMaxQubits) {
      throw DimensionError("register of " + std::to_string(qubits) + " qubits exceeds limit " +
                           std::to_string(kMaxQubits));
    }
  }

  ComplexMatrix matrix_;
  int qubits_ = 0;
};

/// Eigendecomposition of a Hermitian matrix: h = V diag(eigenvalues) V^H,
/// eigenvalues ascending, eigenvectors in the columns of V.
struct HermitianEigen {
  RealVector eigenvalues;
  ComplexMatrix eigenvectors;

  ComplexMatrix reconstruct() const {
    return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
  }
};

/// Kronecker product; entry (i*b.rows()+k, j*b.cols()+l) = a(i,j) * b(k,l).
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (!a.allFinite() || !b.allFinite()) throw InvalidArgument("kron: non-finite operand");
  const Eigen::Index rows = a.rows() * b.rows();
  const Eigen::Index cols = a.cols() * b.cols();
  if (rows > kMaxDim || cols > kMaxDim) {
    throw DimensionError("kron: result exceeds the " + std::to_string(kMaxQubits) +
                         "-qubit register limit");
  }
  ComplexMatrix out(rows, cols);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline HermitianEigen hermitian_eig(const ComplexMatrix& h) {
  require_hermitian(h, "hermitian_eig");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalError("hermitian_eig: solver did not converge");
  return HermitianEigen{es.eigenvalues(), es.eigenvectors()};
}

/// exp(-i H t) assembled from a precomputed decomposition of H.
inline ComplexMatrix propagator(const HermitianEigen& eig, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("propagator: time must be finite and >= 0");
  const ComplexVector phases =
      eig.eigenvalues.unaryExpr([t](double e) { return std::exp(Complex{0.0, -e * t}); });
  return eig.eigenvectors * phases.asDiagonal() * eig.eigenvectors.adjoint();
}

inline ComplexMatrix propagator(const ComplexMatrix& h, double t) {
  if (t == 0.0) {
    require_hermitian(h, "propagator");
    return ComplexMatrix::Identity(h.rows(), h.cols());
  }
  return propagator(hermitian_eig(h), t);
}

/// Traces out `traced_qubits`; the remaining qubits keep their relative order.
inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& traced_qubits) {
  const int n = rho.qubit_count();
  std::vector<bool> traced(static_cast<std::size_t>(n), false);
  for (int q : traced_qubits) {
    if (q < 0 || q >= n) {
      throw InvalidArgument("partial_trace: qubit index " + std::to_string(q) + " out of range");
    }
    if (traced[static_cast<std::size_t>(q)]) {
      throw InvalidArgument("partial_trace: duplicate qubit index " + std::to_string(q));
    }
    traced[static_cast<std::size_t>(q)] = true;
  }
  std::vector<int> kept;
  std::vector<int> gone;
  for (int q = 0; q < n; ++q) (traced[static_cast<std::size_t>(q)] ? gone : kept).push_back(q);
  if (kept.empty()) throw InvalidArgument("partial_trace: cannot trace out every qubit");
  if (gone.empty()) return rho;

  // Full-register offsets of every kept / traced sub-index, MSB-first.
  auto offsets = [n](const std::vector<int>& qubits) {
    const std::size_t count = std::size_t{1} << qubits.size();
    std::vector<std::size_t> out(count, 0);
    for (std::size_t idx = 0; idx < count; ++idx) {
      std::size_t full = 0;
      for (std::size_t k = 0; k < qubits.size(); ++k) {
        if (idx & (std::size_t{1} << (qubits.size() - 1 - k))) full |= detail::bit_of(qubits[k], n);
      }
      out[idx] = full;
    }
    return out;
  };
  const auto kept_off = offsets(kept);
  const auto gone_off = offsets(gone);

  const auto& m = rho.matrix();
  const auto dk = static_cast<Eigen::Index>(kept_off.size());
  ComplexMatrix out = ComplexMatrix::Zero(dk, dk);
  for (Eigen::Index c = 0; c < dk; ++c) {
    for (Eigen::Index r = 0; r < dk; ++r) {
      Complex acc{0.0, 0.0};
      for (std::size_t t : gone_off) {
        acc += m(static_cast<Eigen::Index>(kept_off[static_cast<std::size_t>(r)] | t),
                 static_cast<Eigen::Index>(kept_off[static_cast<std::size_t>(c)] | t));
      }
      out(r, c) = acc;
    }
  }
  return DensityMatrix(std::move(out));
}

/// Sum of absolute eigenvalues of a Hermitian matrix (Tr|A|, no 1/2 factor).
inline double trace_norm(const ComplexMatrix& a) {
  require_hermitian(a, "trace_norm");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("trace_norm: solver did not converge");
  return es.eigenvalues().cwiseAbs().sum();
}

/// Tr|rho1 - rho2| on matching registers.
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("trace_distance: register size mismatch");
  return trace_norm(a.matrix() - b.matrix());
}

/// Moore-Penrose pseudoinverse; singular values below rcond * sigma_max are
/// treated as zero.
inline RealMatrix pseudoinverse(const RealMatrix& a, double rcond = kDefaultRcond) {
  if (!(rcond > 0.0 && rcond < 1.0)) throw InvalidArgument("pseudoinverse: rcond must lie in (0, 1)");
  if (!a.allFinite()) throw InvalidArgument("pseudoinverse: non-finite input");
  if (a.size() == 0) return RealMatrix::Zero(a.cols(), a.rows());
  Eigen::BDCSVD<RealMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("pseudoinverse: SVD did not converge");
  const RealVector& sv = svd.singularValues();
  const double cutoff = rcond * (sv.size() > 0 ? sv(0) : 0.0);
  RealVector inv = RealVector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace nmqrc
