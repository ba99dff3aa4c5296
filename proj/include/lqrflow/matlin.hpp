#pragma once

// Dense real-matrix kernel shared by every other module: Kronecker products,
// column-stacking vectorization, pivoted linear solves, eigenvalues and
// symmetric definiteness tests. All functions are templated on the scalar
// type and accept arbitrary Eigen expressions.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "lqrflow/errors.hpp"

namespace lqrflow {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Numerical thresholds used across the library. One record, one place.
struct Tolerances {
  double pivot_rel = 1e-13;          // LU pivot floor, relative to max |entry|
  double symmetry_rel = 1e-10;       // admissible asymmetry, relative to norm
  double conjugate_pairing = 1e-9;   // conjugate-pair matching of eigenvalues
  double stability_margin = 1e-9;    // abscissa < -margin  <=>  Hurwitz
  double sigma_gap = 1e-9;           // min |l_i + l_j| for the sigma set
  double pbh_eigen_margin = 1e-9;    // eigenvalues with Re >= -margin are tested
  double pbh_rank_rel = 1e-9;        // singular-value rank threshold
  double semidefinite = 1e-8;        // PSD/NSD eigenvalue slack (scaled)
  double positive_floor = 1e-12;     // strict positive definiteness
  double lyapunov_residual_rel = 1e-9;
  int eigen_sweeps_per_order = 100;  // QR iteration cap = sweeps * n
};

inline constexpr Tolerances kTolerances{};

/// Spectrum of a real square matrix.
template <typename Scalar>
struct Spectrum {
  std::vector<std::complex<Scalar>> eigenvalues;
  Scalar abscissa = -std::numeric_limits<Scalar>::infinity();
};

namespace detail {

inline std::string shape(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace detail

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) {
    throw Error(ErrorKind::NonFinite, std::string(what) + " has non-finite entries");
  }
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + " must be square, got " +
                    detail::shape(a.rows(), a.cols()));
  }
}

/// Kronecker product a ⊗ b.
template <typename DA, typename DB>
Matrix<typename DA::Scalar> kron(const Eigen::MatrixBase<DA>& a,
                                 const Eigen::MatrixBase<DB>& b) {
  const Eigen::Index br = b.rows(), bc = b.cols();
  Matrix<typename DA::Scalar> out(a.rows() * br, a.cols() * bc);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * br, j * bc, br, bc) = a(i, j) * b;
    }
  }
  return out;
}

/// Column-stacking vectorization.
template <typename Derived>
Vector<typename Derived::Scalar> vec(const Eigen::MatrixBase<Derived>& a) {
  Matrix<typename Derived::Scalar> col_major = a;
  return col_major.reshaped();
}

/// Inverse of vec: rebuilds a rows x cols matrix from its stacked columns.
template <typename Derived>
Matrix<typename Derived::Scalar> unvec(const Eigen::MatrixBase<Derived>& v,
                                       Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols || (v.rows() != 1 && v.cols() != 1)) {
    throw Error(ErrorKind::DimensionMismatch,
                "unvec of " + detail::shape(v.rows(), v.cols()) + " into " +
                    detail::shape(rows, cols));
  }
  Vector<typename Derived::Scalar> flat = v.reshaped();
  return flat.reshaped(rows, cols);
}

/// Solves m x = rhs by LU with partial pivoting. Throws SingularMatrix when a
/// pivot of U falls below pivot_rel * max |m_ij|.
template <typename DM, typename DR>
Matrix<typename DM::Scalar> solve_linear(const Eigen::MatrixBase<DM>& m,
                                         const Eigen::MatrixBase<DR>& rhs,
                                         const Tolerances& tol = kTolerances) {
  using Scalar = typename DM::Scalar;
  require_square(m, "solve_linear matrix");
  if (rhs.rows() != m.rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                "solve_linear rhs " + detail::shape(rhs.rows(), rhs.cols()) +
                    " against " + detail::shape(m.rows(), m.cols()));
  }
  const Scalar scale = m.cwiseAbs().maxCoeff();
  if (!(scale > Scalar(0))) {
    throw Error(ErrorKind::SingularMatrix, "zero matrix");
  }
  Eigen::PartialPivLU<Matrix<Scalar>> lu(m);
  const Scalar floor = Scalar(tol.pivot_rel) * scale;
  const auto& packed = lu.matrixLU();
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    if (!(std::abs(packed(i, i)) >= floor)) {
      throw Error(ErrorKind::SingularMatrix,
                  "pivot " + std::to_string(i) + " below threshold");
    }
  }
  return lu.solve(rhs);
}

/// Full complex spectrum via Hessenberg reduction and shifted QR.
template <typename Derived>
Spectrum<typename Derived::Scalar> spectrum(const Eigen::MatrixBase<Derived>& a,
                                            const Tolerances& tol = kTolerances) {
  using Scalar = typename Derived::Scalar;
  require_square(a, "spectrum argument");
  require_finite(a, "spectrum argument");
  Eigen::EigenSolver<Matrix<Scalar>> solver;
  solver.setMaxIterations(tol.eigen_sweeps_per_order * static_cast<int>(a.rows()));
  solver.compute(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "QR iteration cap reached");
  }
  Spectrum<Scalar> out;
  const auto& values = solver.eigenvalues();
  out.eigenvalues.assign(values.data(), values.data() + values.size());
  for (const auto& lambda : out.eigenvalues) {
    out.abscissa = std::max(out.abscissa, lambda.real());
  }
  return out;
}

template <typename Derived>
typename Derived::Scalar spectral_abscissa(const Eigen::MatrixBase<Derived>& a) {
  return spectrum(a).abscissa;
}

/// (a + aᵀ) / 2
template <typename Derived>
Matrix<typename Derived::Scalar> sym_part(const Eigen::MatrixBase<Derived>& a) {
  require_square(a, "sym_part argument");
  return (a + a.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
typename Derived::Scalar asymmetry(const Eigen::MatrixBase<Derived>& a) {
  return (a - a.transpose()).norm();
}

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& a, const char* what,
                       const Tolerances& tol = kTolerances) {
  using Scalar = typename Derived::Scalar;
  require_square(a, what);
  if (asymmetry(a) > Scalar(tol.symmetry_rel) * std::max(Scalar(1), a.norm())) {
    throw Error(ErrorKind::NotSymmetric, std::string(what) + " is not symmetric");
  }
}

/// Eigenvalues of a symmetric matrix in ascending order.
template <typename Derived>
Vector<typename Derived::Scalar> eig_sym(const Eigen::MatrixBase<Derived>& a,
                                         const Tolerances& tol = kTolerances) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(a, "eig_sym argument", tol);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(sym_part(a), Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

template <typename Derived>
typename Derived::Scalar min_eig_sym(const Eigen::MatrixBase<Derived>& a,
                                     const Tolerances& tol = kTolerances) {
  return eig_sym(a, tol).minCoeff();
}

template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar slack,
            const Tolerances& tol = kTolerances) {
  return min_eig_sym(a, tol) >= -slack;
}

/// Symmetric PSD square root; negative eigenvalues (round-off) are clipped.
template <typename Derived>
Matrix<typename Derived::Scalar> psd_sqrt(const Eigen::MatrixBase<Derived>& a,
                                          const Tolerances& tol = kTolerances) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(a, "psd_sqrt argument", tol);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(sym_part(a));
  const Vector<Scalar> roots = solver.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

/// Symmetric matrix power a^p for a ≻ 0.
template <typename Derived>
Matrix<typename Derived::Scalar> spd_power(const Eigen::MatrixBase<Derived>& a,
                                           typename Derived::Scalar power,
                                           const Tolerances& tol = kTolerances) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(a, "spd_power argument", tol);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(sym_part(a));
  if (!(solver.eigenvalues().minCoeff() > Scalar(tol.positive_floor))) {
    throw Error(ErrorKind::NotPD, "spd_power argument is not positive definite");
  }
  const Vector<Scalar> powered =
      solver.eigenvalues().unaryExpr([power](Scalar x) { return std::pow(x, power); });
  return solver.eigenvectors() * powered.asDiagonal() * solver.eigenvectors().transpose();
}

/// Numerical rank of a (possibly complex) matrix by singular-value threshold
/// relative to the largest singular value.
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& a, double rel) {
  using RealScalar = typename Derived::RealScalar;
  Eigen::JacobiSVD<Matrix<typename Derived::Scalar>> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > RealScalar(0))) return 0;
  const RealScalar cut = RealScalar(rel) * sv(0);
  return (sv.array() > cut).count();
}

}  // namespace lqrflow
