#pragma once

// The feedback-parametrized Bellman error
//
//   e_K = -tr(M_K),  M_K = Aᵀ P_K + P_K A - P_K B R⁻¹ Bᵀ P_K + Q,
//
// where P_K solves the value Lyapunov equation of the gain K, together with
// its closed-form gradient
//
//   ∇e_K = -4 (R K - Bᵀ P_K) X_K,
//   A_K X_K + X_K A_Kᵀ + (Ã_K + Ã_Kᵀ)/2 = 0,  Ã_K = A - B R⁻¹ Bᵀ P_K.
//
// e_K is finite on the whole of 𝒦_σ; the gradient is only offered on 𝒦.

#include "lqrflow/lqr_core.hpp"

namespace lqrflow {

template <typename Scalar>
struct BellmanEval {
  Scalar e = 0;
  Matrix<Scalar> m_matrix;        // symmetrized direct form
  Scalar factored_gap = 0;        // ‖M_direct - M_factored‖_F
  ValueSolution<Scalar> value;
  Gain<Scalar> k;
};

template <typename Scalar>
struct BellmanGradient {
  Matrix<Scalar> grad;      // m x n
  Matrix<Scalar> x_matrix;  // n x n symmetric
  Matrix<Scalar> a_tilde;   // A - B R⁻¹ Bᵀ P_K
  Scalar x_residual = 0;
  ValueSolution<Scalar> value;
};

/// -(K - R⁻¹BᵀP)ᵀ R (K - R⁻¹BᵀP)
template <typename Scalar>
Matrix<Scalar> bellman_matrix_factored(const SystemInstance<Scalar>& sys,
                                       const Gain<Same<Scalar>>& k, const Matrix<Same<Scalar>>& p) {
  const Matrix<Scalar> mismatch = k - gain_from_value(sys, p);
  return -(mismatch.transpose() * sys.r * mismatch);
}

template <typename Scalar>
BellmanEval<Scalar> bellman_error(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                                  const Tolerances& tol = kTolerances) {
  BellmanEval<Scalar> out;
  out.value = solve_value_lyapunov(sys, k, tol);
  out.m_matrix = sym_part(care_residual(sys, out.value.p));
  out.e = -out.m_matrix.trace();
  out.factored_gap =
      (out.m_matrix - bellman_matrix_factored(sys, k, out.value.p)).norm();
  out.k = k;
  return out;
}

template <typename Scalar>
BellmanGradient<Scalar> bellman_gradient(const SystemInstance<Scalar>& sys,
                                         const Gain<Same<Scalar>>& k,
                                         const Tolerances& tol = kTolerances) {
  const Matrix<Scalar> a_k = closed_loop(sys, k);
  if (!is_hurwitz(a_k, tol)) {
    throw Error(ErrorKind::NotStabilizing, "Bellman gradient needs a stabilizing gain");
  }
  BellmanGradient<Scalar> out;
  out.value = solve_lyapunov<Scalar>(a_k.transpose(), sys.q + k.transpose() * sys.r * k, tol);
  const Matrix<Scalar>& p = out.value.p;
  out.a_tilde = sys.a - input_weight(sys) * p;
  // A_K multiplies from the left here, unlike the value equation.
  const auto x = solve_lyapunov<Scalar>(a_k, sym_part(out.a_tilde), tol);
  out.x_matrix = x.p;
  out.x_residual = x.lyap_residual;
  out.grad = Scalar(-4) * (sys.r * k - sys.b.transpose() * p) * out.x_matrix;
  return out;
}

/// e_K of the two-state reference system (reference_system_2d) as an explicit
/// rational function of K = (k1, k2). The denominator vanishes on the lines
/// k1 + k2 = -1 (the stability boundary) and k1 + k2 = -3.
inline double reference_bellman_error_rational(double k1, double k2) {
  const double k1_2 = k1 * k1, k1_3 = k1_2 * k1, k1_4 = k1_3 * k1, k1_5 = k1_4 * k1,
               k1_6 = k1_5 * k1;
  const double k2_2 = k2 * k2, k2_3 = k2_2 * k2, k2_4 = k2_3 * k2, k2_5 = k2_4 * k2,
               k2_6 = k2_5 * k2;
  const double numerator =
      k1_6 + 4 * k1_5 * k2 + 12 * k1_5 + 7 * k1_4 * k2_2 + 34 * k1_4 * k2 + 49 * k1_4 +
      8 * k1_3 * k2_3 + 40 * k1_3 * k2_2 + 84 * k1_3 * k2 + 72 * k1_3 + 7 * k1_2 * k2_4 +
      36 * k1_2 * k2_3 + 58 * k1_2 * k2_2 + 32 * k1_2 * k2 + 29 * k1_2 + 4 * k1 * k2_5 +
      28 * k1 * k2_4 + 60 * k1 * k2_3 + 16 * k1 * k2_2 - 52 * k1 * k2 - 8 * k1 + k2_6 +
      10 * k2_5 + 37 * k2_4 + 56 * k2_3 + 17 * k2_2 - 22 * k2 + 5;
  const double base = k1_2 + 2 * k1 * k2 + 4 * k1 + k2_2 + 4 * k2 + 3;
  if (base == 0.0) {
    throw Error(ErrorKind::SingularMatrix, "rational Bellman error: zero denominator");
  }
  return numerator / (2 * base * base);
}

}  // namespace lqrflow
