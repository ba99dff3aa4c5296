// Acceptance suite: one PASS/FAIL line per criterion. The exit status counts
// failures that are not on the known-unattainable list below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lqrflow/bench.hpp"
#include "lqrflow/cli.hpp"

namespace {

using namespace lqrflow;
using Clock = std::chrono::steady_clock;

// Criterion 4 asks the printed LQR-cost rational to be a constant multiple of
// tr(P_K); as printed it is not (the ratio varies over 𝒦). See the README.
const std::set<int> kKnownUnattainable = {4};

int unexpected_failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("CRITERION %d %s: %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  if (!pass && !kKnownUnattainable.count(id)) ++unexpected_failures;
  if (pass && kKnownUnattainable.count(id)) {
    std::printf("NOTE criterion %d passed although listed as unattainable\n", id);
  }
  std::fflush(stdout);
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

MatrixXd gain2(double k1, double k2) {
  MatrixXd k(1, 2);
  k << k1, k2;
  return k;
}

MatrixXd central_difference(const std::function<double(const MatrixXd&)>& f, const MatrixXd& k) {
  MatrixXd grad(k.rows(), k.cols());
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      const double h = 1e-6 * (1.0 + std::abs(k(i, j)));
      MatrixXd plus = k, minus = k;
      plus(i, j) += h;
      minus(i, j) -= h;
      grad(i, j) = (f(plus) - f(minus)) / (2.0 * h);
    }
  }
  return grad;
}

double relative_error(const MatrixXd& got, const MatrixXd& want) {
  return (got - want).norm() / std::max(1e-300, std::max(got.norm(), want.norm()));
}

struct OracleCase {
  System sys;
  MatrixXd k0;
};

std::vector<OracleCase> oracle_cases() {
  std::vector<OracleCase> cases;
  bench::Rng rng(20240601);
  for (int i = 0; i < 100; ++i) {
    const int n = 2 + i % 5, m = 1 + (i / 5) % 3;
    auto draw = bench::draw_instance(n, m, rng);
    cases.push_back({std::move(draw.system), std::move(draw.k0)});
  }
  return cases;
}

void criteria_1_2_3() {
  const auto cases = oracle_cases();

  // 1: Kleinman oracle
  const auto start = Clock::now();
  std::vector<MatrixXd> k_star(cases.size());
  int ok = 0, max_iter = 0;
  double worst_residual = 0, min_eig = INFINITY;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    try {
      const auto r = kleinman(cases[i].sys, cases[i].k0);
      const double residual = care_residual(cases[i].sys, r.p_star).norm();
      const double eig = min_eig_sym(r.p_star);
      worst_residual = std::max(worst_residual, residual);
      min_eig = std::min(min_eig, eig);
      max_iter = std::max(max_iter, r.iterations);
      k_star[i] = r.k_star;
      if (residual <= 1e-8 && r.iterations <= 50 && eig > 0) ++ok;
    } catch (const Error& e) {
      std::printf("  instance %zu: %s\n", i, e.what());
    }
  }
  const double elapsed = seconds_since(start);
  report(1, ok == 100 && elapsed <= 10.0,
         fmt("%d/100 converged, max residual %.2e, max iterations %d, min eig(P*) %.2e, %.2fs",
             ok, worst_residual, max_iter, min_eig, elapsed));

  // 2: stationarity at K*
  int stationary = 0;
  double worst_e = -INFINITY, worst_grad = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (k_star[i].size() == 0) continue;
    const double e = bellman_error(cases[i].sys, k_star[i]).e;
    const double g = bellman_gradient(cases[i].sys, k_star[i]).grad.norm();
    worst_e = std::max(worst_e, e);
    worst_grad = std::max(worst_grad, g);
    if (e <= 1e-10 && g <= 1e-6) ++stationary;
  }
  report(2, stationary == 100,
         fmt("%d/100 stationary, max e %.2e, max |grad e| %.2e", stationary, worst_e, worst_grad));

  // 3: gradients against central differences
  int matched = 0;
  double worst_be = 0, worst_lqr = 0;
  for (const auto& c : cases) {
    const double be = relative_error(
        bellman_gradient(c.sys, c.k0).grad,
        central_difference([&](const MatrixXd& k) { return bellman_error(c.sys, k).e; }, c.k0));
    const double lq = relative_error(
        lqr_gradient(c.sys, c.k0),
        central_difference([&](const MatrixXd& k) { return lqr_cost(c.sys, k).f; }, c.k0));
    worst_be = std::max(worst_be, be);
    worst_lqr = std::max(worst_lqr, lq);
    if (be <= 1e-4 && lq <= 1e-4) ++matched;
  }
  System scalar;
  scalar.a = MatrixXd::Constant(1, 1, -1);
  scalar.b = scalar.q = scalar.r = MatrixXd::Constant(1, 1, 1);
  const double hand = bellman_gradient(scalar, MatrixXd::Zero(1, 1)).grad(0, 0);
  report(3, matched == 100 && std::abs(hand + 1.5) <= 1e-9,
         fmt("%d/100 within 1e-4 (worst Bellman %.2e, worst LQR %.2e), scalar grad %.12f", matched,
             worst_be, worst_lqr, hand));
}

void criterion_4() {
  const auto sys = reference_system_2d();
  bench::Rng rng(4);
  std::uniform_real_distribution<double> u(-3, 3);
  double worst_e = 0, ratio_min = INFINITY, ratio_max = -INFINITY;
  for (int checked = 0; checked < 100;) {
    const double k1 = u(rng), k2 = u(rng);
    const MatrixXd k = gain2(k1, k2);
    if (!in_stabilizing_set(sys, k)) continue;
    const double closed = reference_bellman_error_rational(k1, k2);
    worst_e = std::max(worst_e, std::abs(bellman_error(sys, k).e - closed) / std::abs(closed));
    const double ratio = reference_cost_rational(k1, k2) / lqr_cost(sys, k).f;
    ratio_min = std::min(ratio_min, ratio);
    ratio_max = std::max(ratio_max, ratio);
    ++checked;
  }
  const double origin = bellman_error(sys, gain2(0, 0)).e;
  const bool e_ok = worst_e <= 1e-8 && std::abs(origin - 5.0 / 18.0) <= 1e-12;
  const double spread = (ratio_max - ratio_min) / ratio_min;
  const bool f_ok = spread <= 1e-8 && std::abs(ratio_min - 2.0) <= 1e-8;
  report(4, e_ok && f_ok,
         fmt("e_K: max rel err %.2e, e(0,0)-5/18 = %.1e; f_K printed/pipeline ratio in "
             "[%.6f, %.6f] (relative spread %.2e, constant-ratio check %s)",
             worst_e, origin - 5.0 / 18.0, ratio_min, ratio_max, spread,
             f_ok ? "holds" : "fails"));
}

void criteria_5_6_7() {
  bench::BenchConfig config;
  config.seed = 2024;
  const auto start = Clock::now();
  const auto result = bench::run_benchmark(config);
  const double elapsed = seconds_since(start);

  const auto flow_index = [&](FlowKind kind) {
    return static_cast<std::size_t>(
        std::find(config.flows.begin(), config.flows.end(), kind) - config.flows.begin());
  };
  const std::size_t bellman = flow_index(FlowKind::Bellman);

  // 5: Bellman flow convergence, invariance and descent
  int reached = 0, stable = 0, descent = 0;
  for (const auto& rec : result.records) {
    const auto& flow = rec.flows[bellman];
    if (!flow.ok()) continue;
    reached += flow.min_rho <= bench::kResidualTarget ? 1 : 0;
    stable += flow.max_abscissa < 0 ? 1 : 0;
    descent += flow.max_ascent <= 0 ? 1 : 0;
  }
  const int total = static_cast<int>(result.records.size());
  report(5, reached >= 0.95 * total && stable == total && descent == total && elapsed <= 300,
         fmt("%d/%d reach rho <= 1e-6, %d/%d stay stabilizing, %d/%d monotone e_K, %.1fs for "
             "all three flows",
             reached, total, stable, total, descent, total, elapsed));

  // 6: linear convergence on trajectories stopped by the gradient test
  int converged = 0, linear = 0;
  double worst_r2 = 1;
  for (const auto& rec : result.records) {
    for (const auto& flow : rec.flows) {
      if (!flow.ok() || flow.status != FlowStatus::ConvergedGradTol) continue;
      ++converged;
      worst_r2 = std::min(worst_r2, flow.fit.r_squared);
      linear += flow.fit.r_squared >= 0.95 ? 1 : 0;
    }
  }
  report(6, converged > 0 && linear == converged,
         fmt("%d/%d converged trajectories with R^2 >= 0.95 (worst %.4f)", linear, converged,
             worst_r2));

  // 7: median ordering at the last grid point
  const auto median = [&](FlowKind kind) {
    return result.summary[flow_index(kind)].median_log10_rho.back();
  };
  const double m_b = median(FlowKind::Bellman), m_l = median(FlowKind::Lqr),
               m_n = median(FlowKind::Natural);
  report(7, m_l >= m_b && m_l >= m_n,
         fmt("median log10 rho at t=%g: lqr %.3f, bellman %.3f, natural %.3f",
             config.time_grid.back(), m_l, m_b, m_n));
}

void criterion_8() {
  const auto sys = reference_system_2d();
  std::vector<double> values;
  bool increasing = true;
  for (int s = 1; s <= 4; ++s) {
    values.push_back(
        bench::evaluate_cell(sys, 0.0, -1.0 + std::pow(10.0, -s), bench::Objective::Bellman).value);
    if (s > 1) increasing = increasing && values[s - 1] > values[s - 2];
  }
  const bench::AxisSpec axis{-3, 3, 121};
  int on_line = 0, flagged = 0;
  for (const auto& cell : bench::grid_eval(sys, axis, axis, bench::Objective::Bellman)) {
    if (std::abs(cell.k1 + cell.k2 + 1) > 1e-9) continue;
    ++on_line;
    flagged += std::isnan(cell.value) && !cell.stable ? 1 : 0;
  }
  report(8, increasing && on_line > 0 && flagged == on_line,
         fmt("e along (0,-1+10^-s): %.4g < %.4g < %.4g < %.4g %s; %d/%d boundary cells singular",
             values[0], values[1], values[2], values[3], increasing ? "holds" : "violated",
             flagged, on_line));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_9() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "lqrflow_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path config = dir / "bench.json";
  std::ofstream(config) << R"({"seed": 9})";

  int codes = 0;
  for (const char* run : {"run1", "run2"}) {
    std::ostringstream out, err;
    codes += cli::run({"lqrflow", "bench", "--config", config.string(), "--out",
                       (dir / run).string()},
                      out, err);
  }
  std::size_t files = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(dir / "run1")) {
    ++files;
    const auto name = entry.path().filename();
    if (fs::exists(dir / "run2" / name) && slurp(entry.path()) == slurp(dir / "run2" / name)) {
      ++identical;
    }
  }
  std::size_t files2 = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(dir / "run2")) ++files2;
  fs::remove_all(dir);
  report(9, codes == 0 && files > 0 && identical == files && files2 == files,
         fmt("%zu/%zu output files byte-identical across two runs (exit codes sum %d)", identical,
             files, codes));
}

}  // namespace

int main() {
  criteria_1_2_3();
  criterion_4();
  criteria_5_6_7();
  criterion_8();
  criterion_9();
  std::printf("unexpected failures: %d\n", unexpected_failures);
  return unexpected_failures == 0 ? 0 : 1;
}
