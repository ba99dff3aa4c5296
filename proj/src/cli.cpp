#include "lqrflow/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "lqrflow/io.hpp"

namespace lqrflow::cli {

using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidInstance:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NonFinite:
      return kInputError;
    case ErrorKind::NotStabilizing:
    case ErrorKind::NotInSigmaSet:
    case ErrorKind::MaxIterExceeded:
    case ErrorKind::NotPD:
    case ErrorKind::NotSymmetric:
    case ErrorKind::DegenerateStart:
    case ErrorKind::UnsupportedDimensions:
      return kDomainError;
    case ErrorKind::SingularMatrix:
    case ErrorKind::NoConvergence:
    case ErrorKind::GenerationFailure:
    case ErrorKind::SamplingFailure:
      return kNumericalFailure;
  }
  return kNumericalFailure;
}

namespace {

void print_error(std::ostream& err, std::string_view kind, const std::string& message) {
  json doc;
  doc["error"] = std::string(kind);
  doc["message"] = message;
  err << io::dump_json(doc, -1) << '\n';
}

/// Initial gain: --k0 flag, then the instance file, then a seeded draw.
MatrixXd initial_gain(const io::InstanceFile& file, const std::string& k0_text, std::uint64_t seed) {
  const auto& sys = file.system;
  if (!k0_text.empty()) return io::parse_csv_matrix(k0_text, sys.m(), sys.n());
  if (file.k0) return *file.k0;
  bench::Rng rng(seed);
  return bench::sample_stabilizing_gain(sys, rng);
}

std::optional<bench::Objective> parse_objective(const std::string& name) {
  if (name == "bellman") return bench::Objective::Bellman;
  if (name == "lqr") return bench::Objective::Lqr;
  return std::nullopt;
}

json eigen_json(const VectorXd& values) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < values.size(); ++i) arr.push_back(values(i));
  return arr;
}

struct CareArgs {
  std::string instance;
  double tol = 1e-10;
  int max_iter = 50;
  std::string k0;
  std::uint64_t seed = 0;
};

int cmd_care(const CareArgs& args, std::ostream& out) {
  const auto file = io::load_instance(args.instance);
  const MatrixXd k0 = initial_gain(file, args.k0, args.seed);
  KleinmanOptions options;
  options.tol = args.tol;
  options.max_iter = args.max_iter;
  const auto result = kleinman(file.system, k0, options);
  json doc;
  doc["p_star"] = io::matrix_json(result.p_star);
  doc["k_star"] = io::matrix_json(result.k_star);
  doc["residual"] = care_residual(file.system, result.p_star).norm();
  doc["iterations"] = result.iterations;
  out << io::dump_json(doc) << '\n';
  return kSuccess;
}

struct EvalArgs {
  std::string instance;
  std::string k;
  std::string objective = "bellman";
};

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const auto file = io::load_instance(args.instance);
  const auto& sys = file.system;
  const auto objective = parse_objective(args.objective);
  if (!objective) throw Error(ErrorKind::ParseError, "objective must be bellman or lqr");
  const MatrixXd k = io::parse_csv_matrix(args.k, sys.m(), sys.n());

  const bool in_k = in_stabilizing_set(sys, k);
  const bool in_k_sigma = in_sigma_set(sys, k);
  json doc;
  doc["objective"] = args.objective;
  doc["abscissa"] = spectral_abscissa(closed_loop(sys, k));
  doc["in_K"] = in_k;
  doc["in_K_sigma"] = in_k_sigma;
  if (*objective == bench::Objective::Bellman) {
    if (!in_k_sigma) {
      throw Error(ErrorKind::NotInSigmaSet, "Bellman error undefined: K is outside the sigma set");
    }
    const auto eval = bellman_error(sys, k);
    doc["value"] = eval.e;
    doc["m_eigs"] = eigen_json(eig_sym(eval.m_matrix));
    if (in_k) {
      doc["grad"] = io::matrix_json(bellman_gradient(sys, k).grad);
      doc["grad_null_reason"] = nullptr;
    } else {
      doc["grad"] = nullptr;
      doc["grad_null_reason"] = "gain is not stabilizing; the gradient exists only on K";
    }
  } else {
    if (!in_k) throw Error(ErrorKind::NotStabilizing, "LQR cost is infinite: K is not stabilizing");
    const auto eval = lqr_cost<double>(sys, k);
    doc["value"] = eval.f;
    doc["y_eigs"] = eigen_json(eig_sym(eval.y_matrix));
    doc["grad"] = io::matrix_json(lqr_gradient(eval, sys, k));
    doc["grad_null_reason"] = nullptr;
  }
  out << io::dump_json(doc) << '\n';
  return kSuccess;
}

struct FlowArgs {
  std::string instance;
  std::string kind = "bellman";
  FlowConfig config;
  std::string k0;
  std::uint64_t seed = 0;
  std::string out_path;
};

int cmd_flow(FlowArgs args, std::ostream& out) {
  const auto file = io::load_instance(args.instance);
  const auto kind = parse_flow_kind(args.kind);
  if (!kind) throw Error(ErrorKind::ParseError, "kind must be bellman, lqr or natural");
  args.config.kind = *kind;
  validate(args.config);
  const MatrixXd k0 = initial_gain(file, args.k0, args.seed);
  const auto traj = integrate(file.system, k0, args.config);
  io::write_file(args.out_path, io::trajectory_csv(traj));

  const auto& last = traj.samples.back();
  json doc;
  doc["status"] = std::string(to_string(traj.status));
  doc["kind"] = args.kind;
  doc["t"] = last.t;
  doc["k"] = io::matrix_json(last.k);
  doc["objective"] = last.objective;
  doc["grad_norm"] = last.grad_norm;
  doc["abscissa"] = last.abscissa;
  doc["accepted_steps"] = traj.accepted_steps;
  doc["rejected_steps"] = traj.rejected_steps;
  doc["samples"] = traj.samples.size();
  doc["out"] = args.out_path;
  out << io::dump_json(doc) << '\n';
  return traj.status == FlowStatus::StepFailure ? kNumericalFailure : kSuccess;
}

struct GridArgs {
  std::string instance;
  std::string objective = "bellman";
  std::string k1 = "-3:3:121";
  std::string k2 = "-3:3:121";
  std::string out_path;
};

int cmd_grid(const GridArgs& args, std::ostream& out) {
  const auto file = io::load_instance(args.instance);
  const auto objective = parse_objective(args.objective);
  if (!objective) throw Error(ErrorKind::ParseError, "objective must be bellman or lqr");
  const auto k1 = io::parse_axis(args.k1);
  const auto k2 = io::parse_axis(args.k2);
  if (file.system.n() != 2 || file.system.m() != 1) {
    throw Error(ErrorKind::UnsupportedDimensions, "grid evaluation needs n = 2 and m = 1");
  }
  const auto cells = bench::grid_eval(file.system, k1, k2, *objective);
  io::write_file(args.out_path, io::grid_csv(cells));
  std::size_t singular = 0, stable = 0;
  for (const auto& c : cells) {
    singular += std::isnan(c.value) ? 1 : 0;
    stable += c.stable ? 1 : 0;
  }
  json doc;
  doc["cells"] = cells.size();
  doc["singular"] = singular;
  doc["stable"] = stable;
  doc["out"] = args.out_path;
  out << io::dump_json(doc) << '\n';
  return kSuccess;
}

struct BenchArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_bench(const BenchArgs& args, std::ostream& out) {
  json doc;
  {
    std::ifstream in(args.config_path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open config " + args.config_path);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, std::string("malformed JSON: ") + e.what());
    }
  }
  auto config = io::parse_bench_config(doc);
  if (args.seed) config.seed = *args.seed;

  std::error_code ec;
  std::filesystem::create_directories(args.out_dir, ec);
  if (ec) throw Error(ErrorKind::InvalidArgument, "cannot create " + args.out_dir);

  const auto result = bench::run_benchmark(config);
  for (const auto& rec : result.records) {
    std::ostringstream name;
    name << "instance_" << std::setw(4) << std::setfill('0') << rec.instance_id << ".csv";
    io::write_file((std::filesystem::path(args.out_dir) / name.str()).string(),
                   io::residual_csv(config, rec));
  }
  const json summary = io::bench_summary_json(result);
  io::write_file((std::filesystem::path(args.out_dir) / "summary.json").string(),
                 io::dump_json(summary) + "\n");

  json brief;
  brief["instances"] = result.records.size();
  brief["flows"] = summary["flows"];
  for (auto& [_, f] : brief["flows"].items()) {
    f.erase("median_log10_rho");
    f.erase("q1_log10_rho");
    f.erase("q3_log10_rho");
  }
  brief["out"] = args.out_dir;
  out << io::dump_json(brief) << '\n';
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient flows for continuous-time LQR: Bellman error, LQR cost, Kleinman oracle"};
  app.require_subcommand(1);

  CareArgs care;
  auto* care_cmd = app.add_subcommand("care", "Solve the CARE by Kleinman's policy iteration");
  care_cmd->add_option("instance", care.instance, "Instance JSON file")->required();
  care_cmd->add_option("--tol", care.tol, "Residual / step tolerance");
  care_cmd->add_option("--max-iter", care.max_iter, "Iteration cap");
  care_cmd->add_option("--k0", care.k0, "Initial gain, row-major comma-separated");
  care_cmd->add_option("--seed", care.seed, "Seed for sampling K0 when none is given");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate an objective and its gradient at K");
  eval_cmd->add_option("instance", eval.instance, "Instance JSON file")->required();
  eval_cmd->add_option("--k", eval.k, "Gain, row-major comma-separated")->required();
  eval_cmd->add_option("--objective", eval.objective, "bellman | lqr");

  FlowArgs flow;
  auto* flow_cmd = app.add_subcommand("flow", "Integrate a gradient flow and write its trajectory");
  flow_cmd->add_option("instance", flow.instance, "Instance JSON file")->required();
  flow_cmd->add_option("--kind", flow.kind, "bellman | lqr | natural");
  flow_cmd->add_option("--beta", flow.config.beta, "Bellman flow gain");
  flow_cmd->add_option("--gamma", flow.config.gamma, "Natural gradient exponent");
  flow_cmd->add_option("--rtol", flow.config.rtol, "Relative step tolerance");
  flow_cmd->add_option("--atol", flow.config.atol, "Absolute step tolerance");
  flow_cmd->add_option("--tmax", flow.config.t_max, "Final time");
  flow_cmd->add_option("--grad-tol", flow.config.grad_tol, "Gradient-norm stopping tolerance");
  flow_cmd->add_option("--stride", flow.config.record_stride, "Record every n-th accepted step");
  flow_cmd->add_option("--max-steps", flow.config.max_steps, "Accepted-step cap");
  flow_cmd->add_option("--k0", flow.k0, "Initial gain, row-major comma-separated");
  flow_cmd->add_option("--seed", flow.seed, "Seed for sampling K0 when none is given");
  flow_cmd->add_option("--out", flow.out_path, "Trajectory CSV path")->required();

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Evaluate an objective on a 2-D gain grid");
  grid_cmd->add_option("instance", grid.instance, "Instance JSON file")->required();
  grid_cmd->add_option("--objective", grid.objective, "bellman | lqr");
  grid_cmd->add_option("--k1", grid.k1, "min:max:steps");
  grid_cmd->add_option("--k2", grid.k2, "min:max:steps");
  grid_cmd->add_option("--out", grid.out_path, "Grid CSV path")->required();

  BenchArgs bench_args;
  std::uint64_t bench_seed = 0;
  auto* bench_cmd = app.add_subcommand("bench", "Run the random-instance convergence study");
  bench_cmd->add_option("--config", bench_args.config_path, "Bench config JSON")->required();
  bench_cmd->add_option("--out", bench_args.out_dir, "Output directory")->required();
  auto* seed_opt = bench_cmd->add_option("--seed", bench_seed, "Override the config seed");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    print_error(err, "ParseError", e.what());
    return kInputError;
  }

  try {
    if (care_cmd->parsed()) return cmd_care(care, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (flow_cmd->parsed()) return cmd_flow(flow, out);
    if (grid_cmd->parsed()) return cmd_grid(grid, out);
    if (bench_cmd->parsed()) {
      if (seed_opt->count() > 0) bench_args.seed = bench_seed;
      return cmd_bench(bench_args, out);
    }
  } catch (const Error& e) {
    print_error(err, to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  }
  print_error(err, "ParseError", "no subcommand");
  return kInputError;
}

}  // namespace lqrflow::cli
