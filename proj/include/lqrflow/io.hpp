#pragma once

// Instance files and the text formats emitted by the command-line tool.
// Every floating-point number is written with 17 significant digits.

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "lqrflow/bench.hpp"

namespace lqrflow::io {

/// {"n", "m", "a", "b", "q", "r", optional "k0"}, matrices as row-major arrays.
struct InstanceFile {
  System system;
  std::optional<MatrixXd> k0;
};

InstanceFile parse_instance(const nlohmann::json& doc);
InstanceFile load_instance(const std::string& path);
nlohmann::json instance_json(const System& sys, const std::optional<MatrixXd>& k0 = {});

/// Row-major comma-separated entries into a rows x cols matrix.
MatrixXd parse_csv_matrix(std::string_view text, Eigen::Index rows, Eigen::Index cols);

/// "min:max:steps"
bench::AxisSpec parse_axis(std::string_view text);

/// %.17g, with "nan"/"inf"/"-inf" for non-finite values.
std::string format_double(double x);

/// Nested row arrays.
nlohmann::json matrix_json(const MatrixXd& a);

/// Serializes like nlohmann::json::dump but prints floats with 17
/// significant digits; non-finite floats become null.
std::string dump_json(const nlohmann::json& value, int indent = 2);

/// Trajectory CSV: t,k_11,...,k_mn,objective,grad_norm,abscissa
std::string trajectory_csv(const FlowTrajectory<double>& traj);

/// Grid CSV: k1,k2,value,stable
std::string grid_csv(const std::vector<bench::GridCell>& cells);

/// Per-instance residual CSV: t,rho_<flow>... on the benchmark time grid.
std::string residual_csv(const bench::BenchConfig& config, const bench::BenchRecord& record);

bench::BenchConfig parse_bench_config(const nlohmann::json& doc);
nlohmann::json bench_summary_json(const bench::BenchResult& result);

void write_file(const std::string& path, std::string_view contents);

}  // namespace lqrflow::io
