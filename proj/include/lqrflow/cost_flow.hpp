#pragma once

// Baseline objective: the LQR cost f_K = tr(P_K Σ₀) with its gradient
// 2 (R K - Bᵀ P_K) Y_K and the natural gradient (∇f_K) Y_K^{-γ}, where
// A_K Y_K + Y_K A_Kᵀ + Σ₀ = 0.

#include "lqrflow/lqr_core.hpp"

namespace lqrflow {

template <typename Scalar>
struct CostEval {
  Scalar f = 0;
  ValueSolution<Scalar> value;
  Matrix<Scalar> y_matrix;
  Scalar y_residual = 0;
  Matrix<Scalar> sigma0;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> default_sigma0(const SystemInstance<Scalar>& sys, const Matrix<Same<Scalar>>& sigma0) {
  if (sigma0.size() == 0) return Matrix<Scalar>::Identity(sys.n(), sys.n());
  if (sigma0.rows() != sys.n() || sigma0.cols() != sys.n()) {
    throw Error(ErrorKind::DimensionMismatch, "Σ₀ must be n x n");
  }
  require_symmetric(sigma0, "Σ₀");
  return sigma0;
}

}  // namespace detail

/// Σ₀ defaults to the identity when passed empty.
template <typename Scalar>
CostEval<Scalar> lqr_cost(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                          const Matrix<Same<Scalar>>& sigma0 = {},
                          const Tolerances& tol = kTolerances) {
  const Matrix<Scalar> a_k = closed_loop(sys, k);
  if (!is_hurwitz(a_k, tol)) {
    throw Error(ErrorKind::NotStabilizing, "LQR cost is infinite outside the stabilizing set");
  }
  CostEval<Scalar> out;
  out.sigma0 = detail::default_sigma0(sys, sigma0);
  out.value = solve_lyapunov<Scalar>(a_k.transpose(), sys.q + k.transpose() * sys.r * k, tol);
  out.f = (out.value.p * out.sigma0).trace();
  const auto y = solve_lyapunov<Scalar>(a_k, out.sigma0, tol);
  out.y_matrix = y.p;
  out.y_residual = y.lyap_residual;
  return out;
}

template <typename Scalar>
Matrix<Scalar> lqr_gradient(const CostEval<Scalar>& eval, const SystemInstance<Scalar>& sys,
                            const Gain<Same<Scalar>>& k) {
  return Scalar(2) * (sys.r * k - sys.b.transpose() * eval.value.p) * eval.y_matrix;
}

template <typename Scalar>
Matrix<Scalar> lqr_gradient(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                            const Matrix<Same<Scalar>>& sigma0 = {},
                            const Tolerances& tol = kTolerances) {
  return lqr_gradient(lqr_cost(sys, k, sigma0, tol), sys, k);
}

/// (∇f_K) Y_K^{-γ}. γ = 1 goes through a linear solve, other powers through
/// the symmetric eigendecomposition of Y_K.
template <typename Scalar>
Matrix<Scalar> natural_gradient(const CostEval<Scalar>& eval, const SystemInstance<Scalar>& sys,
                                const Gain<Same<Scalar>>& k, Scalar gamma,
                                const Tolerances& tol = kTolerances) {
  if (!(gamma >= Scalar(0)) || !std::isfinite(gamma)) {
    throw Error(ErrorKind::InvalidArgument, "γ must be a nonnegative finite number");
  }
  if (!(min_eig_sym(eval.y_matrix, tol) > Scalar(tol.positive_floor))) {
    throw Error(ErrorKind::NotPD, "Y_K is not positive definite");
  }
  const Matrix<Scalar> grad = lqr_gradient(eval, sys, k);
  if (gamma == Scalar(1)) {
    // G Y = ∇f with Y symmetric  <=>  Y Gᵀ = ∇fᵀ
    return solve_linear(eval.y_matrix, grad.transpose(), tol).transpose();
  }
  return grad * spd_power(eval.y_matrix, -gamma, tol);
}

template <typename Scalar>
Matrix<Scalar> natural_gradient(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                                Scalar gamma = Scalar(1), const Matrix<Same<Scalar>>& sigma0 = {},
                                const Tolerances& tol = kTolerances) {
  return natural_gradient(lqr_cost(sys, k, sigma0, tol), sys, k, gamma, tol);
}

/// Value-function trace tr(P_K Σ₀) on all of 𝒦_σ, without the stability
/// requirement of lqr_cost. Used for contour data in the unstable region.
template <typename Scalar>
Scalar value_trace(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                   const Matrix<Same<Scalar>>& sigma0 = {}, const Tolerances& tol = kTolerances) {
  return (solve_value_lyapunov(sys, k, tol).p * detail::default_sigma0(sys, sigma0)).trace();
}

/// The LQR cost of the reference system as the explicit rational function
/// 2(K1³ + 2K1²K2 + 5K1² + 2K1K2² + 4K1K2 + 4K1 + 2K2³ + 7K2² + 2K2 + 5)
///   / (2(K1² + 2K1K2 + 4K1 + K2² + 4K2 + 3)), taken literally.
inline double reference_cost_rational(double k1, double k2) {
  const double numerator = k1 * k1 * k1 + 2 * k1 * k1 * k2 + 5 * k1 * k1 + 2 * k1 * k2 * k2 +
                           4 * k1 * k2 + 4 * k1 + 2 * k2 * k2 * k2 + 7 * k2 * k2 + 2 * k2 + 5;
  const double base = k1 * k1 + 2 * k1 * k2 + 4 * k1 + k2 * k2 + 4 * k2 + 3;
  if (base == 0.0) {
    throw Error(ErrorKind::SingularMatrix, "rational LQR cost: zero denominator");
  }
  return 2 * numerator / (2 * base);
}

}  // namespace lqrflow
