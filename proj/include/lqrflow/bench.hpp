#pragma once

// Random-instance generation, the three-flow convergence study and 2-D grid
// evaluation of the objectives. Double precision only.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lqrflow/flow.hpp"

namespace lqrflow::bench {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of instance `id` derived from the master seed; independent of the
/// order in which instances are processed.
std::uint64_t instance_seed(std::uint64_t master_seed, std::uint64_t id);

/// A, B i.i.d. standard normal, Q = q_scale I, R = r_scale I; redrawn until
/// both PBH tests pass (at most 1000 attempts).
System random_instance(Eigen::Index n, Eigen::Index m, Rng& rng, double q_scale = 1.0,
                       double r_scale = 1.0);

/// Rejection sampling of K with i.i.d. standard normal entries until
/// abscissa(A - BK) < -1e-6 (at most 1e5 attempts).
MatrixXd sample_stabilizing_gain(const System& sys, Rng& rng);

/// Plants drawn per instance before giving up on finding a stabilizing K0.
inline constexpr int kInstanceRedraws = 100;

struct Draw {
  System system;
  MatrixXd k0;
};

/// One benchmark instance: random_instance followed by
/// sample_stabilizing_gain, redrawing the plant (up to kInstanceRedraws
/// times) when no stabilizing gain turns up.
Draw draw_instance(Eigen::Index n, Eigen::Index m, Rng& rng, double q_scale = 1.0,
                   double r_scale = 1.0);

struct BenchConfig {
  int num_instances = 200;
  int n = 2;
  int m = 1;
  std::uint64_t seed = 0;
  std::vector<FlowKind> flows = {FlowKind::Bellman, FlowKind::Lqr, FlowKind::Natural};
  double q_scale = 1.0;
  double r_scale = 1.0;
  std::vector<double> time_grid = default_time_grid();
  FlowConfig flow = default_flow_config();  // kind is overridden per flow

  static std::vector<double> default_time_grid();
  /// Flow defaults with integrator tolerances rtol 1e-12, atol 1e-13. Near K*
  /// a stiff closed loop pins the explicit pair to its stability limit and K
  /// jitters at about atol + rtol‖K‖; the gradient test only fires once that
  /// jitter times the largest Hessian eigenvalue is below grad_tol.
  static FlowConfig default_flow_config();
};

void validate(const BenchConfig& config);

/// Per-flow outcome on one instance.
struct FlowRecord {
  FlowKind kind = FlowKind::Bellman;
  FlowStatus status = FlowStatus::StepFailure;
  std::string error;          // non-empty when the flow could not be run
  std::vector<double> rho;    // on the time grid
  double min_rho = 1.0;       // over all recorded samples
  double final_rho = 1.0;
  double t_final = 0.0;
  long accepted_steps = 0;
  std::size_t samples = 0;
  double max_abscissa = 0.0;  // over recorded samples
  double max_ascent = 0.0;    // largest objective increase beyond the slack
  LineFit fit;                // log ρ vs t, middle 80% of a uniform-in-time resampling

  [[nodiscard]] bool ok() const { return error.empty(); }
};

struct BenchRecord {
  int instance_id = 0;
  std::uint64_t seed = 0;
  System system;
  MatrixXd k0;
  MatrixXd k_star;
  int kleinman_iterations = 0;
  double kleinman_residual = 0.0;
  std::string error;  // generation/oracle failure
  std::vector<FlowRecord> flows;
};

struct FlowSummary {
  FlowKind kind = FlowKind::Bellman;
  std::vector<double> median_log10_rho;
  std::vector<double> q1_log10_rho;
  std::vector<double> q3_log10_rho;
  int reached_tolerance = 0;  // ρ ≤ 1e-6 before t_max
  int converged = 0;          // ConvergedGradTol
  int reached_t_max = 0;
  int step_failures = 0;
  int errors = 0;
};

struct BenchResult {
  BenchConfig config;
  std::vector<BenchRecord> records;
  std::vector<FlowSummary> summary;
};

/// Descent slack used when checking the flow objective along a trajectory.
inline constexpr double kDescentSlack = 1e-10;
inline constexpr double kResidualTarget = 1e-6;

/// Runs one instance: draw_instance, Kleinman oracle, then every requested
/// flow from the same initial gain. Failures are recorded, never thrown.
BenchRecord run_instance(const BenchConfig& config, int instance_id);

BenchResult run_benchmark(const BenchConfig& config);

/// Piecewise-linear interpolation of log ρ onto `grid`; values past the last
/// sample hold the last value.
std::vector<double> interpolate_log_residuals(const std::vector<ResidualPoint>& residuals,
                                              const std::vector<double>& grid);

/// `count` points evenly spaced over [t_0, t_last], log ρ interpolated.
std::vector<ResidualPoint> resample_uniform(const std::vector<ResidualPoint>& residuals,
                                            int count = 201);

/// Linear-interpolated quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> values, double p);

// ---------------------------------------------------------------------------
// Grid evaluation

enum class Objective { Bellman, Lqr };

struct AxisSpec {
  double min = 0.0;
  double max = 0.0;
  int steps = 1;

  [[nodiscard]] double at(int i) const;
};

struct GridCell {
  double k1 = 0.0;
  double k2 = 0.0;
  double value = 0.0;  // NaN outside the objective's domain
  bool stable = false;
};

/// Value of `objective` at K = (k1, k2) for a 2-state single-input system.
/// Bellman: e_K on 𝒦_σ. LQR: tr(P_K) wherever the value equation is uniquely
/// solvable, including unstable gains; `stable` flags K ∈ 𝒦.
GridCell evaluate_cell(const System& sys, double k1, double k2, Objective objective);

/// Row-major grid with k2 as the row index and k1 as the column index.
std::vector<GridCell> grid_eval(const System& sys, const AxisSpec& k1, const AxisSpec& k2,
                                Objective objective);

}  // namespace lqrflow::bench
