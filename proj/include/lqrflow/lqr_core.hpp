#pragma once

// LQR problem data, closed-loop stability predicates, the Kronecker-form
// Lyapunov solver, the CARE residual, and Kleinman's policy iteration.

#include <cmath>
#include <complex>
#include <string>
#include <type_traits>
#include <vector>

#include "lqrflow/matlin.hpp"

namespace lqrflow {

/// The quadruple (A, B, Q, R) of one continuous-time LQR problem.
template <typename Scalar>
struct SystemInstance {
  Matrix<Scalar> a;  // n x n
  Matrix<Scalar> b;  // n x m
  Matrix<Scalar> q;  // n x n, symmetric PSD
  Matrix<Scalar> r;  // m x m, symmetric PD

  [[nodiscard]] Eigen::Index n() const { return a.rows(); }
  [[nodiscard]] Eigen::Index m() const { return b.cols(); }
};

using System = SystemInstance<double>;

/// Non-deduced alias: lets the system fix the scalar type while matrix
/// arguments may be arbitrary Eigen expressions.
template <typename T>
using Same = std::type_identity_t<T>;

/// A feedback gain K (m x n), u = -K x.
template <typename Scalar>
using Gain = Matrix<Scalar>;

template <typename Scalar>
struct ValueSolution {
  Matrix<Scalar> p;
  Scalar lyap_residual = 0;    // ‖Fᵀ P + P F + L‖_F after symmetrization
  Scalar symmetry_defect = 0;  // of the returned p
  Scalar raw_asymmetry = 0;    // of the unsymmetrized solve
};

struct AssumptionReport {
  bool stabilizable = false;
  bool detectable = false;
};

template <typename Scalar>
void require_dimensions(const SystemInstance<Scalar>& sys) {
  const auto n = sys.a.rows(), m = sys.b.cols();
  if (n == 0 || m == 0 || sys.a.cols() != n || sys.b.rows() != n ||
      sys.q.rows() != n || sys.q.cols() != n || sys.r.rows() != m ||
      sys.r.cols() != m) {
    throw Error(ErrorKind::DimensionMismatch, "inconsistent system dimensions");
  }
  require_finite(sys.a, "A");
  require_finite(sys.b, "B");
  require_finite(sys.q, "Q");
  require_finite(sys.r, "R");
}

/// Full well-formedness check: shapes, symmetry, Q ⪰ 0, R ≻ 0, B ≠ 0, Q ≠ 0.
/// Stabilizability/detectability are reported separately by check_assumptions.
template <typename Scalar>
void validate_instance(const SystemInstance<Scalar>& sys,
                       const Tolerances& tol = kTolerances) {
  require_dimensions(sys);
  try {
    require_symmetric(sys.q, "Q", tol);
    require_symmetric(sys.r, "R", tol);
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidInstance, e.what());
  }
  if (min_eig_sym(sys.q, tol) < -Scalar(tol.symmetry_rel)) {
    throw Error(ErrorKind::InvalidInstance, "Q is not positive semidefinite");
  }
  if (!(min_eig_sym(sys.r, tol) > Scalar(0))) {
    throw Error(ErrorKind::InvalidInstance, "R is not positive definite");
  }
  if (sys.b.isZero(0) || sys.q.isZero(0)) {
    throw Error(ErrorKind::InvalidInstance, "B and Q must be nonzero");
  }
}

template <typename Scalar>
void require_gain_shape(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k) {
  if (k.rows() != sys.m() || k.cols() != sys.n()) {
    throw Error(ErrorKind::DimensionMismatch,
                "gain must be " + detail::shape(sys.m(), sys.n()) + ", got " +
                    detail::shape(k.rows(), k.cols()));
  }
  require_finite(k, "gain");
}

/// PBH tests at every eigenvalue of A with Re λ ≥ -margin.
template <typename Scalar>
AssumptionReport check_assumptions(const SystemInstance<Scalar>& sys,
                                   const Tolerances& tol = kTolerances) {
  using Complex = std::complex<Scalar>;
  using CMatrix = Matrix<Complex>;
  require_dimensions(sys);
  const auto n = sys.n(), m = sys.m();
  const Matrix<Scalar> root_q = psd_sqrt(sys.q, tol);
  const CMatrix a = sys.a.template cast<Complex>();
  const CMatrix identity = CMatrix::Identity(n, n);

  AssumptionReport report{true, true};
  for (const Complex& lambda : spectrum(sys.a, tol).eigenvalues) {
    if (lambda.real() < -Scalar(tol.pbh_eigen_margin)) continue;
    CMatrix control(n, n + m);
    control << lambda * identity - a, sys.b.template cast<Complex>();
    if (numerical_rank(control, tol.pbh_rank_rel) < n) report.stabilizable = false;

    CMatrix observe(n, 2 * n);
    observe << lambda * identity - a.transpose(),
        root_q.transpose().template cast<Complex>();
    if (numerical_rank(observe, tol.pbh_rank_rel) < n) report.detectable = false;
  }
  return report;
}

/// A_K = A - B K
template <typename Scalar>
Matrix<Scalar> closed_loop(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k) {
  require_gain_shape(sys, k);
  return sys.a - sys.b * k;
}

template <typename Scalar>
bool is_hurwitz(const Matrix<Scalar>& a, const Tolerances& tol = kTolerances) {
  return spectrum(a, tol).abscissa < -Scalar(tol.stability_margin);
}

/// σ(F) ∩ σ(-F) = ∅, i.e. min |λ_i + λ_j| over all pairs exceeds the gap.
template <typename Scalar>
bool has_sigma_gap(const Matrix<Scalar>& f, const Tolerances& tol = kTolerances) {
  const auto eig = spectrum(f, tol).eigenvalues;
  for (std::size_t i = 0; i < eig.size(); ++i) {
    for (std::size_t j = i; j < eig.size(); ++j) {
      if (!(std::abs(eig[i] + eig[j]) > Scalar(tol.sigma_gap))) return false;
    }
  }
  return true;
}

/// K ∈ 𝒦: A - BK is Hurwitz with margin.
template <typename Scalar>
bool in_stabilizing_set(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                        const Tolerances& tol = kTolerances) {
  return is_hurwitz(closed_loop(sys, k), tol);
}

/// K ∈ 𝒦_σ: the value Lyapunov equation has a unique solution.
template <typename Scalar>
bool in_sigma_set(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                  const Tolerances& tol = kTolerances) {
  return has_sigma_gap(closed_loop(sys, k), tol);
}

/// Solves F X + X Fᵀ + L = 0 through the n²×n² system
/// (I ⊗ F + F ⊗ I) vec X = -vec L, then symmetrizes.
template <typename Scalar>
ValueSolution<Scalar> solve_lyapunov(const Matrix<Scalar>& f, const Matrix<Scalar>& l,
                                     const Tolerances& tol = kTolerances) {
  require_square(f, "Lyapunov coefficient");
  if (l.rows() != f.rows() || l.cols() != f.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "Lyapunov right-hand side");
  }
  const auto n = f.rows();
  const Matrix<Scalar> identity = Matrix<Scalar>::Identity(n, n);
  const Matrix<Scalar> op = kron(identity, f) + kron(f, identity);
  const Matrix<Scalar> raw = unvec(solve_linear(op, -vec(l), tol), n, n);

  ValueSolution<Scalar> out;
  out.raw_asymmetry = asymmetry(raw);
  out.p = sym_part(raw);
  out.symmetry_defect = asymmetry(out.p);
  out.lyap_residual = (f * out.p + out.p * f.transpose() + l).norm();
  return out;
}

/// P_K from A_Kᵀ P + P A_K + Q + Kᵀ R K = 0, defined on 𝒦_σ.
template <typename Scalar>
ValueSolution<Scalar> solve_value_lyapunov(const SystemInstance<Scalar>& sys,
                                           const Gain<Same<Scalar>>& k,
                                           const Tolerances& tol = kTolerances) {
  const Matrix<Scalar> a_k = closed_loop(sys, k);
  if (!has_sigma_gap(a_k, tol)) {
    throw Error(ErrorKind::NotInSigmaSet, "A - BK and -(A - BK) share an eigenvalue");
  }
  const Matrix<Scalar> load = sys.q + k.transpose() * sys.r * k;
  return solve_lyapunov<Scalar>(a_k.transpose(), load, tol);
}

/// R⁻¹ Bᵀ P
template <typename Scalar>
Gain<Scalar> gain_from_value(const SystemInstance<Scalar>& sys, const Matrix<Same<Scalar>>& p) {
  return sys.r.ldlt().solve(sys.b.transpose() * p);
}

/// B R⁻¹ Bᵀ
template <typename Scalar>
Matrix<Scalar> input_weight(const SystemInstance<Scalar>& sys) {
  return sys.b * sys.r.ldlt().solve(sys.b.transpose());
}

/// Aᵀ P + P A - P B R⁻¹ Bᵀ P + Q, exactly as written.
template <typename Scalar>
Matrix<Scalar> care_residual(const SystemInstance<Scalar>& sys, const Matrix<Same<Scalar>>& p) {
  if (p.rows() != sys.n() || p.cols() != sys.n()) {
    throw Error(ErrorKind::DimensionMismatch, "CARE residual argument");
  }
  return sys.a.transpose() * p + p * sys.a - p * input_weight(sys) * p + sys.q;
}

struct KleinmanOptions {
  double tol = 1e-10;
  int max_iter = 50;
};

template <typename Scalar>
struct KleinmanResult {
  Matrix<Scalar> p_star;
  Gain<Scalar> k_star;
  int iterations = 0;
  std::vector<Scalar> residual_history;   // ‖CARE residual(P_i)‖_F
  std::vector<Matrix<Scalar>> value_iterates;  // P_0, P_1, ...
};

/// Kleinman's policy iteration: P_i from the value Lyapunov equation at K_i,
/// then K_{i+1} = R⁻¹ Bᵀ P_i. Requires a stabilizing start.
template <typename Scalar>
KleinmanResult<Scalar> kleinman(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k0,
                                const KleinmanOptions& options = {},
                                const Tolerances& tol = kTolerances) {
  if (!in_stabilizing_set(sys, k0, tol)) {
    throw Error(ErrorKind::NotStabilizing, "initial gain is not stabilizing");
  }
  KleinmanResult<Scalar> out;
  Gain<Scalar> k = k0;
  for (int it = 1; it <= options.max_iter; ++it) {
    const Matrix<Scalar> p = solve_value_lyapunov(sys, k, tol).p;
    const Scalar residual = care_residual(sys, p).norm();
    out.residual_history.push_back(residual);
    out.value_iterates.push_back(p);
    const Gain<Scalar> next = gain_from_value(sys, p);
    const Scalar step = (next - k).norm();
    if (residual <= Scalar(options.tol) || step <= Scalar(options.tol)) {
      out.p_star = p;
      out.k_star = next;
      out.iterations = it;
      return out;
    }
    if (!in_stabilizing_set(sys, next, tol)) {
      throw Error(ErrorKind::NoConvergence, "policy iterate left the stabilizing set");
    }
    k = next;
  }
  throw Error(ErrorKind::MaxIterExceeded,
              "no convergence in " + std::to_string(options.max_iter) + " iterations");
}

/// The two-state, single-input example used throughout the tests and the
/// grid tooling: A = [[-2, 1], [0, -1]], B = (1, 1)ᵀ, Q = I, R = 2.
template <typename Scalar = double>
SystemInstance<Scalar> reference_system_2d() {
  SystemInstance<Scalar> sys;
  sys.a.resize(2, 2);
  sys.a << -2, 1, 0, -1;
  sys.b.resize(2, 1);
  sys.b << 1, 1;
  sys.q = Matrix<Scalar>::Identity(2, 2);
  sys.r = Matrix<Scalar>::Constant(1, 1, Scalar(2));
  return sys;
}

}  // namespace lqrflow
