#include "lqrflow/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lqrflow::io {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& what) {
  throw Error(ErrorKind::ParseError, what);
}

MatrixXd read_matrix(const json& doc, const char* key, Eigen::Index rows, Eigen::Index cols) {
  if (!doc.contains(key)) parse_fail(std::string("missing field '") + key + "'");
  const json& arr = doc.at(key);
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols) {
    parse_fail(std::string("field '") + key + "' must be an array of " +
               std::to_string(rows * cols) + " numbers");
  }
  MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const json& v = arr[static_cast<std::size_t>(i * cols + j)];
      if (!v.is_number()) parse_fail(std::string("field '") + key + "' has a non-number");
      out(i, j) = v.get<double>();
      if (!std::isfinite(out(i, j))) parse_fail(std::string("field '") + key + "' not finite");
    }
  }
  return out;
}

json row_major(const MatrixXd& a) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) arr.push_back(a(i, j));
  }
  return arr;
}

int read_positive_int(const json& doc, const char* key) {
  if (!doc.contains(key)) parse_fail(std::string("missing field '") + key + "'");
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 64) {
    parse_fail(std::string("field '") + key + "' must be an integer in [1, 64]");
  }
  return v.get<int>();
}

void dump_value(const json& value, int indent, int depth, std::string& out) {
  const bool pretty = indent >= 0;
  auto newline = [&](int level) {
    if (!pretty) return;
    out.push_back('\n');
    out.append(static_cast<std::size_t>(indent * level), ' ');
  };
  switch (value.type()) {
    case json::value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out.push_back('{');
      bool first = true;
      for (const auto& [key, item] : value.items()) {
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        out += json(key).dump();
        out += pretty ? ": " : ":";
        dump_value(item, indent, depth + 1, out);
      }
      newline(depth);
      out.push_back('}');
      return;
    }
    case json::value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& item : value) flat = flat && !item.is_structured();
      out.push_back('[');
      bool first = true;
      for (const auto& item : value) {
        if (!first) out += flat && pretty ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        dump_value(item, indent, depth + 1, out);
      }
      if (!flat) newline(depth);
      out.push_back(']');
      return;
    }
    case json::value_t::number_float: {
      const double x = value.get<double>();
      out += std::isfinite(x) ? format_double(x) : "null";
      return;
    }
    default:
      out += value.dump();
      return;
  }
}

}  // namespace

InstanceFile parse_instance(const json& doc) {
  if (!doc.is_object()) parse_fail("instance must be a JSON object");
  const int n = read_positive_int(doc, "n");
  const int m = read_positive_int(doc, "m");
  InstanceFile file;
  file.system.a = read_matrix(doc, "a", n, n);
  file.system.b = read_matrix(doc, "b", n, m);
  file.system.q = read_matrix(doc, "q", n, n);
  file.system.r = read_matrix(doc, "r", m, m);
  if (doc.contains("k0") && !doc.at("k0").is_null()) file.k0 = read_matrix(doc, "k0", m, n);
  validate_instance(file.system);
  return file;
}

InstanceFile load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) parse_fail("cannot open instance file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    parse_fail(std::string("malformed JSON: ") + e.what());
  }
  return parse_instance(doc);
}

json instance_json(const System& sys, const std::optional<MatrixXd>& k0) {
  json doc;
  doc["n"] = sys.n();
  doc["m"] = sys.m();
  doc["a"] = row_major(sys.a);
  doc["b"] = row_major(sys.b);
  doc["q"] = row_major(sys.q);
  doc["r"] = row_major(sys.r);
  if (k0) doc["k0"] = row_major(*k0);
  return doc;
}

MatrixXd parse_csv_matrix(std::string_view text, Eigen::Index rows, Eigen::Index cols) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string field(text.substr(pos, end - pos));
    const auto first = field.find_first_not_of(" \t");
    const auto last = field.find_last_not_of(" \t");
    if (first == std::string::npos) parse_fail("empty entry in matrix list");
    field = field.substr(first, last - first + 1);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
      parse_fail("bad number '" + field + "'");
    }
    values.push_back(v);
    pos = end + 1;
  }
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    parse_fail("expected " + std::to_string(rows * cols) + " entries, got " +
               std::to_string(values.size()));
  }
  MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  }
  return out;
}

bench::AxisSpec parse_axis(std::string_view text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string_view::npos) parse_fail("axis must be min:max:steps");
  bench::AxisSpec axis;
  const MatrixXd ends = parse_csv_matrix(
      std::string(text.substr(0, c1)) + "," + std::string(text.substr(c1 + 1, c2 - c1 - 1)), 1, 2);
  axis.min = ends(0, 0);
  axis.max = ends(0, 1);
  const auto steps_text = text.substr(c2 + 1);
  const auto [ptr, ec] =
      std::from_chars(steps_text.data(), steps_text.data() + steps_text.size(), axis.steps);
  if (ec != std::errc() || ptr != steps_text.data() + steps_text.size() || axis.steps < 1) {
    parse_fail("axis steps must be a positive integer");
  }
  if (axis.steps > 1 && !(axis.max > axis.min)) parse_fail("axis needs max > min");
  return axis;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json matrix_json(const MatrixXd& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string dump_json(const json& value, int indent) {
  std::string out;
  dump_value(value, indent, 0, out);
  return out;
}

std::string trajectory_csv(const FlowTrajectory<double>& traj) {
  std::ostringstream os;
  os << 't';
  if (!traj.samples.empty()) {
    const auto& k = traj.samples.front().k;
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      for (Eigen::Index j = 0; j < k.cols(); ++j) os << ",k_" << i + 1 << j + 1;
    }
  }
  os << ",objective,grad_norm,abscissa\n";
  for (const auto& s : traj.samples) {
    os << format_double(s.t);
    for (Eigen::Index i = 0; i < s.k.rows(); ++i) {
      for (Eigen::Index j = 0; j < s.k.cols(); ++j) os << ',' << format_double(s.k(i, j));
    }
    os << ',' << format_double(s.objective) << ',' << format_double(s.grad_norm) << ','
       << format_double(s.abscissa) << '\n';
  }
  return os.str();
}

std::string grid_csv(const std::vector<bench::GridCell>& cells) {
  std::ostringstream os;
  os << "k1,k2,value,stable\n";
  for (const auto& c : cells) {
    os << format_double(c.k1) << ',' << format_double(c.k2) << ',' << format_double(c.value)
       << ',' << (c.stable ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string residual_csv(const bench::BenchConfig& config, const bench::BenchRecord& record) {
  std::ostringstream os;
  os << 't';
  for (const auto& flow : record.flows) os << ",rho_" << to_string(flow.kind);
  os << '\n';
  for (std::size_t g = 0; g < config.time_grid.size(); ++g) {
    os << format_double(config.time_grid[g]);
    for (const auto& flow : record.flows) os << ',' << format_double(flow.rho[g]);
    os << '\n';
  }
  return os.str();
}

bench::BenchConfig parse_bench_config(const json& doc) {
  if (!doc.is_object()) parse_fail("bench config must be a JSON object");
  static const std::vector<std::string> known = {
      "num_instances", "n",     "m",    "seed", "flows", "q_scale",  "r_scale",       "time_grid",
      "beta",          "gamma", "rtol", "atol", "t_max", "grad_tol", "record_stride", "max_steps"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      parse_fail("unknown bench config field '" + key + "'");
    }
  }
  bench::BenchConfig config;
  try {
    auto get_int = [&](const char* key, auto& dst) {
      if (!doc.contains(key)) return;
      if (!doc.at(key).is_number_integer()) parse_fail(std::string(key) + " must be an integer");
      dst = doc.at(key).get<std::decay_t<decltype(dst)>>();
    };
    auto get_real = [&](const char* key, double& dst) {
      if (!doc.contains(key)) return;
      if (!doc.at(key).is_number()) parse_fail(std::string(key) + " must be a number");
      dst = doc.at(key).get<double>();
    };
    get_int("num_instances", config.num_instances);
    get_int("n", config.n);
    get_int("m", config.m);
    if (doc.contains("seed")) {
      const json& seed = doc.at("seed");
      if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
        parse_fail("seed must be a non-negative integer");
      }
      config.seed = seed.get<std::uint64_t>();
    }
    if (doc.contains("flows")) {
      config.flows.clear();
      for (const auto& name : doc.at("flows")) {
        const auto kind = name.is_string() ? parse_flow_kind(name.get<std::string>()) : std::nullopt;
        if (!kind) parse_fail("unknown flow " + name.dump());
        config.flows.push_back(*kind);
      }
    }
    get_real("q_scale", config.q_scale);
    get_real("r_scale", config.r_scale);
    if (doc.contains("time_grid")) {
      config.time_grid.clear();
      for (const auto& t : doc.at("time_grid")) {
        if (!t.is_number()) parse_fail("time_grid entries must be numbers");
        config.time_grid.push_back(t.get<double>());
      }
    }
    get_real("beta", config.flow.beta);
    get_real("gamma", config.flow.gamma);
    get_real("rtol", config.flow.rtol);
    get_real("atol", config.flow.atol);
    get_real("t_max", config.flow.t_max);
    get_real("grad_tol", config.flow.grad_tol);
    get_int("record_stride", config.flow.record_stride);
    get_int("max_steps", config.flow.max_steps);
  } catch (const json::exception& e) {
    parse_fail(std::string("bench config: ") + e.what());
  }
  try {
    bench::validate(config);
  } catch (const Error& e) {
    parse_fail(e.what());
  }
  return config;
}

json bench_summary_json(const bench::BenchResult& result) {
  const auto& config = result.config;
  json doc;
  json cfg;
  cfg["num_instances"] = config.num_instances;
  cfg["n"] = config.n;
  cfg["m"] = config.m;
  cfg["seed"] = config.seed;
  cfg["flows"] = json::array();
  for (FlowKind kind : config.flows) cfg["flows"].push_back(std::string(to_string(kind)));
  cfg["q_scale"] = config.q_scale;
  cfg["r_scale"] = config.r_scale;
  cfg["beta"] = config.flow.beta;
  cfg["gamma"] = config.flow.gamma;
  cfg["rtol"] = config.flow.rtol;
  cfg["atol"] = config.flow.atol;
  cfg["t_max"] = config.flow.t_max;
  cfg["grad_tol"] = config.flow.grad_tol;
  cfg["time_grid"] = config.time_grid;
  doc["config"] = std::move(cfg);

  json flows = json::object();
  for (const auto& s : result.summary) {
    json f;
    f["reached_rho_1e-6"] = s.reached_tolerance;
    f["converged_grad_tol"] = s.converged;
    f["reached_t_max"] = s.reached_t_max;
    f["step_failures"] = s.step_failures;
    f["errors"] = s.errors;
    f["median_log10_rho"] = s.median_log10_rho;
    f["q1_log10_rho"] = s.q1_log10_rho;
    f["q3_log10_rho"] = s.q3_log10_rho;
    flows[std::string(to_string(s.kind))] = std::move(f);
  }
  doc["flows"] = std::move(flows);

  json instances = json::array();
  for (const auto& rec : result.records) {
    json item;
    item["instance_id"] = rec.instance_id;
    item["seed"] = rec.seed;
    item["error"] = rec.error.empty() ? json(nullptr) : json(rec.error);
    item["kleinman_iterations"] = rec.kleinman_iterations;
    item["kleinman_residual"] = rec.kleinman_residual;
    item["k_star"] = rec.k_star.size() ? matrix_json(rec.k_star) : json(nullptr);
    json per_flow = json::object();
    for (const auto& flow : rec.flows) {
      json f;
      f["status"] = flow.ok() ? json(std::string(to_string(flow.status))) : json("Error");
      f["error"] = flow.ok() ? json(nullptr) : json(flow.error);
      f["final_rho"] = flow.final_rho;
      f["min_rho"] = flow.min_rho;
      f["t_final"] = flow.t_final;
      f["accepted_steps"] = flow.accepted_steps;
      f["log_rho_fit_r2"] = flow.fit.r_squared;
      f["log_rho_fit_slope"] = flow.fit.slope;
      per_flow[std::string(to_string(flow.kind))] = std::move(f);
    }
    item["flows"] = std::move(per_flow);
    instances.push_back(std::move(item));
  }
  doc["instances"] = std::move(instances);
  return doc;
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::InvalidArgument, "write failed for " + path);
}

}  // namespace lqrflow::io
