#pragma once

// Gain-matrix gradient flows K̇ = -β∇e_K, K̇ = -∇f_K and K̇ = -(∇f_K)Y_K^{-γ},
// integrated with the Dormand–Prince 5(4) pair. Steps whose stages or
// endpoint leave the stabilizing set are rejected and halved.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lqrflow/bellman.hpp"
#include "lqrflow/cost_flow.hpp"

namespace lqrflow {

enum class FlowKind { Bellman, Lqr, Natural };

constexpr std::string_view to_string(FlowKind kind) {
  switch (kind) {
    case FlowKind::Bellman: return "bellman";
    case FlowKind::Lqr: return "lqr";
    case FlowKind::Natural: return "natural";
  }
  return "unknown";
}

inline std::optional<FlowKind> parse_flow_kind(std::string_view name) {
  if (name == "bellman") return FlowKind::Bellman;
  if (name == "lqr") return FlowKind::Lqr;
  if (name == "natural") return FlowKind::Natural;
  return std::nullopt;
}

struct FlowConfig {
  FlowKind kind = FlowKind::Bellman;
  double beta = 1.0;
  double gamma = 1.0;
  double rtol = 1e-8;
  double atol = 1e-10;
  double t_max = 1e4;
  double grad_tol = 1e-8;
  long max_steps = 1'000'000;
  int record_stride = 1;
  int max_consecutive_rejections = 40;
};

inline void validate(const FlowConfig& config) {
  const bool ok = config.beta > 0 && config.gamma > 0 && config.rtol > 0 && config.atol > 0 &&
                  config.t_max > 0 && config.grad_tol > 0 && config.max_steps > 0 &&
                  config.record_stride > 0 && config.max_consecutive_rejections > 0 &&
                  std::isfinite(config.beta) && std::isfinite(config.gamma) &&
                  std::isfinite(config.t_max);
  if (!ok) throw Error(ErrorKind::InvalidArgument, "invalid flow configuration");
}

enum class FlowStatus { ConvergedGradTol, ReachedTMax, StepFailure };

constexpr std::string_view to_string(FlowStatus status) {
  switch (status) {
    case FlowStatus::ConvergedGradTol: return "ConvergedGradTol";
    case FlowStatus::ReachedTMax: return "ReachedTMax";
    case FlowStatus::StepFailure: return "StepFailure";
  }
  return "unknown";
}

template <typename Scalar>
struct FlowSample {
  Scalar t = 0;
  Gain<Scalar> k;
  Scalar objective = 0;
  Scalar grad_norm = 0;
  Scalar abscissa = 0;
};

template <typename Scalar>
struct FlowTrajectory {
  std::vector<FlowSample<Scalar>> samples;
  FlowStatus status = FlowStatus::StepFailure;
  Gain<Scalar> k_final;
  long accepted_steps = 0;
  long rejected_steps = 0;
};

/// Gradient of the flow's objective (∇e_K, ∇f_K or the natural direction).
template <typename Scalar>
Matrix<Scalar> flow_direction(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                              const FlowConfig& config, const Tolerances& tol = kTolerances) {
  switch (config.kind) {
    case FlowKind::Bellman:
      return bellman_gradient(sys, k, tol).grad;
    case FlowKind::Lqr:
      return lqr_gradient<Scalar>(sys, k, Matrix<Scalar>{}, tol);
    case FlowKind::Natural:
      return natural_gradient<Scalar>(sys, k, Scalar(config.gamma), Matrix<Scalar>{}, tol);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown flow kind");
}

/// Right-hand side K̇ of the configured flow. β scales the Bellman flow only.
template <typename Scalar>
Matrix<Scalar> flow_rhs(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                        const FlowConfig& config, const Tolerances& tol = kTolerances) {
  const Scalar scale = config.kind == FlowKind::Bellman ? Scalar(config.beta) : Scalar(1);
  return -scale * flow_direction(sys, k, config, tol);
}

/// e_K for the Bellman flow, f_K (Σ₀ = I) for the other two.
template <typename Scalar>
Scalar flow_objective(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k,
                      const FlowConfig& config, const Tolerances& tol = kTolerances) {
  if (config.kind == FlowKind::Bellman) return bellman_error(sys, k, tol).e;
  return lqr_cost<Scalar>(sys, k, Matrix<Scalar>{}, tol).f;
}

namespace detail {

// Dormand–Prince 5(4) tableau.
struct DormandPrince {
  static constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  // fifth-order weights equal the last row of a; error = b5 - b4
  static constexpr double e[7] = {71.0 / 57600,  0.0,         -71.0 / 16695, 71.0 / 1920,
                                  -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
};

inline bool is_domain_error(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::NotStabilizing:
    case ErrorKind::NotInSigmaSet:
    case ErrorKind::SingularMatrix:
    case ErrorKind::NotPD:
    case ErrorKind::NoConvergence:
    case ErrorKind::NonFinite:
      return true;
    default:
      return false;
  }
}

}  // namespace detail

/// Integrates the configured flow from k0 ∈ 𝒦 until the gradient norm drops
/// below grad_tol, t reaches t_max, or the step controller gives up.
template <typename Scalar>
FlowTrajectory<Scalar> integrate(const SystemInstance<Scalar>& sys, const Gain<Same<Scalar>>& k0,
                                 const FlowConfig& config, const Tolerances& tol = kTolerances) {
  using Tableau = detail::DormandPrince;
  validate(config);
  require_gain_shape(sys, k0);
  if (!in_stabilizing_set(sys, k0, tol)) {
    throw Error(ErrorKind::NotStabilizing, "initial gain is not stabilizing");
  }
  const Scalar rhs_scale = config.kind == FlowKind::Bellman ? Scalar(config.beta) : Scalar(1);
  const Scalar atol(config.atol), rtol(config.rtol), t_max(config.t_max);

  FlowTrajectory<Scalar> traj;
  auto record = [&](Scalar t, const Gain<Same<Scalar>>& k, Scalar grad_norm) {
    FlowSample<Scalar> s;
    s.t = t;
    s.k = k;
    s.objective = flow_objective(sys, k, config, tol);
    s.grad_norm = grad_norm;
    s.abscissa = spectral_abscissa(closed_loop(sys, k));
    traj.samples.push_back(std::move(s));
  };

  Scalar t = 0;
  Gain<Scalar> k = k0;
  Matrix<Scalar> f0 = flow_rhs(sys, k, config, tol);
  Scalar grad_norm = f0.norm() / rhs_scale;
  record(t, k, grad_norm);
  traj.k_final = k;
  if (grad_norm <= Scalar(config.grad_tol)) {
    traj.status = FlowStatus::ConvergedGradTol;
    return traj;
  }

  // Initial step from the usual scale heuristic, with one Euler probe.
  Scalar h;
  {
    const Scalar sc = atol + rtol * k.norm();
    const Scalar d0 = k.norm() / sc, d1 = f0.norm() / sc;
    Scalar h0 = (d0 < Scalar(1e-5) || d1 < Scalar(1e-5)) ? Scalar(1e-6) : Scalar(0.01) * d0 / d1;
    h = h0;
    try {
      const Matrix<Scalar> f1 = flow_rhs<Scalar>(sys, k + h0 * f0, config, tol);
      const Scalar d2 = (f1 - f0).norm() / sc / h0;
      const Scalar dmax = std::max(d1, d2);
      const Scalar h1 = dmax <= Scalar(1e-15) ? std::max(Scalar(1e-6), h0 * Scalar(1e-3))
                                              : std::pow(Scalar(0.01) / dmax, Scalar(0.2));
      h = std::min(Scalar(100) * h0, h1);
    } catch (const Error& e) {
      if (!detail::is_domain_error(e)) throw;
    }
  }

  std::array<Matrix<Scalar>, 7> stages;
  int consecutive_rejections = 0;
  auto reject = [&]() {
    ++traj.rejected_steps;
    return ++consecutive_rejections >= config.max_consecutive_rejections;
  };

  while (true) {
    if (traj.accepted_steps >= config.max_steps) {
      traj.status = FlowStatus::StepFailure;
      break;
    }
    h = std::min(h, t_max - t);

    bool stage_failed = false;
    Gain<Scalar> k_next;
    stages[0] = f0;
    try {
      for (int i = 1; i < 7; ++i) {
        Gain<Scalar> probe = k;
        for (int j = 0; j < i; ++j) {
          if (Tableau::a[i][j] != 0.0) probe += (h * Scalar(Tableau::a[i][j])) * stages[j];
        }
        if (i == 6) k_next = probe;
        stages[i] = flow_rhs(sys, probe, config, tol);
      }
    } catch (const Error& e) {
      if (!detail::is_domain_error(e)) throw;
      stage_failed = true;
    }
    if (stage_failed || !k_next.allFinite() || !in_stabilizing_set(sys, k_next, tol)) {
      if (reject()) {
        traj.status = FlowStatus::StepFailure;
        break;
      }
      h /= 2;
      continue;
    }

    Matrix<Scalar> err_vec = Matrix<Scalar>::Zero(k.rows(), k.cols());
    for (int i = 0; i < 7; ++i) {
      if (Tableau::e[i] != 0.0) err_vec += (h * Scalar(Tableau::e[i])) * stages[i];
    }
    const Scalar scale = atol + rtol * std::max(k.norm(), k_next.norm());
    const Scalar err = err_vec.norm() / scale;
    const Scalar factor =
        std::clamp(Scalar(0.9) * std::pow(std::max(err, Scalar(1e-300)), Scalar(-0.2)),
                   Scalar(0.2), Scalar(5));
    if (!(err <= Scalar(1))) {
      if (reject()) {
        traj.status = FlowStatus::StepFailure;
        break;
      }
      h *= factor;
      continue;
    }

    consecutive_rejections = 0;
    ++traj.accepted_steps;
    const bool hit_end = t_max - t <= h;
    t = hit_end ? t_max : t + h;
    k = k_next;
    f0 = stages[6];
    grad_norm = f0.norm() / rhs_scale;
    traj.k_final = k;

    const bool converged = grad_norm <= Scalar(config.grad_tol);
    if (converged || hit_end || traj.accepted_steps % config.record_stride == 0) {
      record(t, k, grad_norm);
    }
    if (converged) {
      traj.status = FlowStatus::ConvergedGradTol;
      break;
    }
    if (hit_end) {
      traj.status = FlowStatus::ReachedTMax;
      break;
    }
    h *= factor;
  }

  if (traj.samples.back().t != t) record(t, k, grad_norm);
  return traj;
}

struct ResidualPoint {
  double t = 0;
  double rho = 0;
};

/// ρ(t) = ‖K(t) - K*‖_F / ‖K(0) - K*‖_F on the recorded samples.
template <typename Scalar>
std::vector<ResidualPoint> normalized_residuals(const FlowTrajectory<Scalar>& traj,
                                                const Gain<Scalar>& k_star) {
  if (traj.samples.empty()) {
    throw Error(ErrorKind::InvalidArgument, "empty trajectory");
  }
  const Scalar start = (traj.samples.front().k - k_star).norm();
  if (!(start > std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + k_star.norm()))) {
    throw Error(ErrorKind::DegenerateStart, "initial gain coincides with K*");
  }
  std::vector<ResidualPoint> out;
  out.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    out.push_back({static_cast<double>(s.t), static_cast<double>((s.k - k_star).norm() / start)});
  }
  return out;
}

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  std::size_t points = 0;
};

/// Least-squares line through (t, log ρ) over the samples whose index lies in
/// [lo_frac, hi_frac) of the sequence.
inline LineFit fit_log_residual(const std::vector<ResidualPoint>& residuals, double lo_frac = 0.1,
                                double hi_frac = 0.9) {
  const auto count = residuals.size();
  const auto lo = static_cast<std::size_t>(std::floor(lo_frac * static_cast<double>(count)));
  const auto hi = static_cast<std::size_t>(std::ceil(hi_frac * static_cast<double>(count)));
  LineFit fit;
  Eigen::Index used = 0;
  Eigen::MatrixX2d design(static_cast<Eigen::Index>(hi - lo), 2);
  Eigen::VectorXd target(static_cast<Eigen::Index>(hi - lo));
  for (std::size_t i = lo; i < std::min(hi, count); ++i) {
    design(used, 0) = residuals[i].t;
    design(used, 1) = 1.0;
    target(used) = std::log(std::max(residuals[i].rho, 1e-300));
    ++used;
  }
  fit.points = static_cast<std::size_t>(used);
  if (used < 3) return fit;
  design.conservativeResize(used, 2);
  target.conservativeResize(used);
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(target);
  fit.slope = coef(0);
  fit.intercept = coef(1);
  const double mean = target.mean();
  const double total = (target.array() - mean).square().sum();
  const double residual = (target - design * coef).squaredNorm();
  fit.r_squared = total > 0 ? 1.0 - residual / total : 1.0;
  return fit;
}

}  // namespace lqrflow
