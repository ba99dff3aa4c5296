#include "lqrflow/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lqrflow::bench {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t instance_seed(std::uint64_t master_seed, std::uint64_t id) {
  return splitmix64(master_seed ^ splitmix64(id));
}

namespace {

MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd out(rows, cols);
  // Row-major draw order so the stream maps onto entries as written.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  }
  return out;
}

}  // namespace

System random_instance(Eigen::Index n, Eigen::Index m, Rng& rng, double q_scale, double r_scale) {
  if (n < 1 || m < 1 || !(q_scale > 0) || !(r_scale > 0)) {
    throw Error(ErrorKind::InvalidArgument, "random_instance needs n, m >= 1 and positive scales");
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    System sys;
    sys.a = normal_matrix(n, n, rng);
    sys.b = normal_matrix(n, m, rng);
    sys.q = q_scale * MatrixXd::Identity(n, n);
    sys.r = r_scale * MatrixXd::Identity(m, m);
    const auto report = check_assumptions(sys);
    if (report.stabilizable && report.detectable) return sys;
  }
  throw Error(ErrorKind::GenerationFailure, "no admissible instance in 1000 draws");
}

MatrixXd sample_stabilizing_gain(const System& sys, Rng& rng) {
  require_dimensions(sys);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    MatrixXd k = normal_matrix(sys.m(), sys.n(), rng);
    if (spectral_abscissa(closed_loop(sys, k)) < -1e-6) return k;
  }
  throw Error(ErrorKind::SamplingFailure, "no stabilizing gain in 1e5 draws");
}

Draw draw_instance(Eigen::Index n, Eigen::Index m, Rng& rng, double q_scale, double r_scale) {
  // Plants on which a normally drawn stabilizing gain is (numerically)
  // impossible are replaced rather than reported.
  for (int attempt = 1;; ++attempt) {
    Draw draw;
    draw.system = random_instance(n, m, rng, q_scale, r_scale);
    try {
      draw.k0 = sample_stabilizing_gain(draw.system, rng);
      return draw;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SamplingFailure || attempt >= kInstanceRedraws) throw;
    }
  }
}

std::vector<double> BenchConfig::default_time_grid() {
  std::vector<double> grid(201);
  for (int i = 0; i < 201; ++i) grid[i] = 0.1 * i;
  return grid;
}

FlowConfig BenchConfig::default_flow_config() {
  FlowConfig flow;
  flow.rtol = 1e-12;
  flow.atol = 1e-13;
  return flow;
}

void validate(const BenchConfig& config) {
  if (config.num_instances <= 0) {
    throw Error(ErrorKind::InvalidArgument, "num_instances must be positive");
  }
  if (config.m < 1 || config.n < config.m) {
    throw Error(ErrorKind::InvalidArgument, "need n >= m >= 1");
  }
  if (config.flows.empty()) throw Error(ErrorKind::InvalidArgument, "no flows requested");
  if (!(config.q_scale > 0) || !(config.r_scale > 0)) {
    throw Error(ErrorKind::InvalidArgument, "q_scale and r_scale must be positive");
  }
  const auto& grid = config.time_grid;
  if (grid.empty() || !(grid.front() >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "time_grid must be non-empty and start at t >= 0");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "time_grid must be strictly increasing");
    }
  }
  validate(config.flow);
}

std::vector<double> interpolate_log_residuals(const std::vector<ResidualPoint>& residuals,
                                              const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  auto log_rho = [&](std::size_t i) { return std::log(std::max(residuals[i].rho, 1e-300)); };
  std::size_t seg = 0;
  for (double t : grid) {
    while (seg + 1 < residuals.size() && residuals[seg + 1].t < t) ++seg;
    if (seg + 1 >= residuals.size() || t <= residuals.front().t) {
      const std::size_t i = t <= residuals.front().t ? 0 : residuals.size() - 1;
      out.push_back(residuals[i].rho);
      continue;
    }
    const double t0 = residuals[seg].t, t1 = residuals[seg + 1].t;
    const double w = (t - t0) / (t1 - t0);
    out.push_back(std::exp((1.0 - w) * log_rho(seg) + w * log_rho(seg + 1)));
  }
  return out;
}

std::vector<ResidualPoint> resample_uniform(const std::vector<ResidualPoint>& residuals,
                                            int count) {
  if (residuals.empty() || count < 2) {
    throw Error(ErrorKind::InvalidArgument, "resampling needs samples and count >= 2");
  }
  const double t0 = residuals.front().t, t1 = residuals.back().t;
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) grid[i] = t0 + (t1 - t0) * i / (count - 1);
  const auto rho = interpolate_log_residuals(residuals, grid);
  std::vector<ResidualPoint> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = {grid[i], rho[i]};
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

namespace {

FlowRecord run_flow(const BenchConfig& config, const System& sys, const MatrixXd& k0,
                    const MatrixXd& k_star, FlowKind kind) {
  FlowRecord rec;
  rec.kind = kind;
  try {
    FlowConfig flow = config.flow;
    flow.kind = kind;
    const auto traj = integrate(sys, k0, flow);
    rec.status = traj.status;
    rec.accepted_steps = traj.accepted_steps;
    rec.samples = traj.samples.size();
    rec.t_final = traj.samples.back().t;

    const auto residuals = normalized_residuals(traj, k_star);
    rec.rho = interpolate_log_residuals(residuals, config.time_grid);
    rec.final_rho = residuals.back().rho;
    rec.min_rho = 1.0;
    for (const auto& r : residuals) rec.min_rho = std::min(rec.min_rho, r.rho);

    rec.max_abscissa = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
      const auto& s = traj.samples[i];
      rec.max_abscissa = std::max(rec.max_abscissa, s.abscissa);
      if (i > 0) {
        const double prev = traj.samples[i - 1].objective;
        const double ascent = s.objective - prev - kDescentSlack * (1.0 + std::abs(prev));
        rec.max_ascent = std::max(rec.max_ascent, ascent);
      }
    }
    rec.fit = fit_log_residual(resample_uniform(residuals));
  } catch (const Error& e) {
    rec.error = e.what();
    rec.rho.assign(config.time_grid.size(), std::numeric_limits<double>::quiet_NaN());
  }
  return rec;
}

}  // namespace

BenchRecord run_instance(const BenchConfig& config, int instance_id) {
  BenchRecord rec;
  rec.instance_id = instance_id;
  rec.seed = instance_seed(config.seed, static_cast<std::uint64_t>(instance_id));
  Rng rng(rec.seed);
  try {
    auto draw = draw_instance(config.n, config.m, rng, config.q_scale, config.r_scale);
    rec.system = std::move(draw.system);
    rec.k0 = std::move(draw.k0);
    const auto oracle = kleinman(rec.system, rec.k0);
    rec.k_star = oracle.k_star;
    rec.kleinman_iterations = oracle.iterations;
    rec.kleinman_residual = oracle.residual_history.back();
  } catch (const Error& e) {
    rec.error = e.what();
    for (FlowKind kind : config.flows) {
      FlowRecord flow;
      flow.kind = kind;
      flow.error = "instance unavailable";
      flow.rho.assign(config.time_grid.size(), std::numeric_limits<double>::quiet_NaN());
      rec.flows.push_back(std::move(flow));
    }
    return rec;
  }
  for (FlowKind kind : config.flows) {
    rec.flows.push_back(run_flow(config, rec.system, rec.k0, rec.k_star, kind));
  }
  return rec;
}

BenchResult run_benchmark(const BenchConfig& config) {
  validate(config);
  BenchResult result;
  result.config = config;
  result.records.reserve(static_cast<std::size_t>(config.num_instances));
  for (int id = 0; id < config.num_instances; ++id) {
    result.records.push_back(run_instance(config, id));
  }

  for (std::size_t f = 0; f < config.flows.size(); ++f) {
    FlowSummary summary;
    summary.kind = config.flows[f];
    for (const auto& rec : result.records) {
      const FlowRecord& flow = rec.flows[f];
      if (!flow.ok()) {
        ++summary.errors;
        continue;
      }
      if (flow.min_rho <= kResidualTarget) ++summary.reached_tolerance;
      switch (flow.status) {
        case FlowStatus::ConvergedGradTol: ++summary.converged; break;
        case FlowStatus::ReachedTMax: ++summary.reached_t_max; break;
        case FlowStatus::StepFailure: ++summary.step_failures; break;
      }
    }
    for (std::size_t g = 0; g < config.time_grid.size(); ++g) {
      std::vector<double> column;
      for (const auto& rec : result.records) {
        const FlowRecord& flow = rec.flows[f];
        if (flow.ok()) column.push_back(std::log10(std::max(flow.rho[g], 1e-300)));
      }
      summary.median_log10_rho.push_back(quantile(column, 0.5));
      summary.q1_log10_rho.push_back(quantile(column, 0.25));
      summary.q3_log10_rho.push_back(quantile(column, 0.75));
    }
    result.summary.push_back(std::move(summary));
  }
  return result;
}

double AxisSpec::at(int i) const {
  if (steps <= 1) return min;
  return min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

GridCell evaluate_cell(const System& sys, double k1, double k2, Objective objective) {
  if (sys.n() != 2 || sys.m() != 1) {
    throw Error(ErrorKind::DimensionMismatch, "grid evaluation needs n = 2 and m = 1");
  }
  GridCell cell{k1, k2, std::numeric_limits<double>::quiet_NaN(), false};
  MatrixXd k(1, 2);
  k << k1, k2;
  cell.stable = in_stabilizing_set(sys, k);
  try {
    cell.value = objective == Objective::Bellman ? bellman_error(sys, k).e
                                                 : value_trace<double>(sys, k);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotInSigmaSet && e.kind() != ErrorKind::SingularMatrix) throw;
  }
  return cell;
}

std::vector<GridCell> grid_eval(const System& sys, const AxisSpec& k1, const AxisSpec& k2,
                                Objective objective) {
  if (k1.steps < 1 || k2.steps < 1) {
    throw Error(ErrorKind::InvalidArgument, "grid axes need at least one step");
  }
  std::vector<GridCell> cells;
  cells.reserve(static_cast<std::size_t>(k1.steps) * static_cast<std::size_t>(k2.steps));
  for (int j = 0; j < k2.steps; ++j) {
    for (int i = 0; i < k1.steps; ++i) {
      cells.push_back(evaluate_cell(sys, k1.at(i), k2.at(j), objective));
    }
  }
  return cells;
}

}  // namespace lqrflow::bench
