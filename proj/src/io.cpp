#include "mlptest/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mlptest/errors.hpp"

namespace mlptest {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t start = 0;
    while (start < field.size() && field[start] == ' ') ++start;
    out.push_back(field.substr(start));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string &s, std::size_t line_no) {
  double v = 0.0;
  const char *first = s.data();
  const char *last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ConfigInvalid("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  }
  return v;
}

const Json &require(const Json &j, const char *key, const std::string &where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigInvalid(where + ": missing field '" + key + "'");
  }
  return j.at(key);
}

template <typename T>
T get_as(const Json &j, const std::string &where) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception &) {
    throw ConfigInvalid(where + ": wrong type");
  }
}

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open dataset '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigInvalid(path.string() + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = split_csv_line(line);

  std::size_t d_in = 0, d_out = 0;
  for (const auto &h : header) {
    if (h == "z_" + std::to_string(d_in + 1) && d_out == 0) {
      ++d_in;
    } else if (h == "y_" + std::to_string(d_out + 1)) {
      ++d_out;
    } else {
      throw ConfigInvalid(path.string() + ": line 1: unexpected column '" + h +
                          "' (expected z_1..z_d', y_1..y_d)");
    }
  }
  if (d_in == 0 || d_out == 0) {
    throw ConfigInvalid(path.string() + ": line 1: need at least one z and one y column");
  }

  std::vector<double> zs, ys;
  std::size_t line_no = 1, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != d_in + d_out) {
      throw ConfigInvalid(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                          std::to_string(d_in + d_out) + " fields, got " +
                          std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < d_in; ++i) zs.push_back(parse_double(fields[i], line_no));
    for (std::size_t o = 0; o < d_out; ++o) ys.push_back(parse_double(fields[d_in + o], line_no));
    ++rows;
  }
  if (rows == 0) throw ConfigInvalid(path.string() + ": no data rows");
  Matrix inputs(rows, d_in), targets(rows, d_out);
  inputs.data() = std::move(zs);
  targets.data() = std::move(ys);
  return Dataset(std::move(inputs), std::move(targets));
}

std::string dataset_to_csv(const Dataset &data) {
  std::string out;
  for (std::size_t i = 0; i < data.input_dim(); ++i) {
    out += (i ? ",z_" : "z_") + std::to_string(i + 1);
  }
  for (std::size_t o = 0; o < data.output_dim(); ++o) out += ",y_" + std::to_string(o + 1);
  out += '\n';
  for (std::size_t t = 0; t < data.size(); ++t) {
    for (std::size_t i = 0; i < data.input_dim(); ++i) {
      if (i) out += ',';
      out += format_double(data.inputs()(t, i));
    }
    for (std::size_t o = 0; o < data.output_dim(); ++o) {
      out += ',' + format_double(data.targets()(t, o));
    }
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path &path, const std::string &content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Json to_json(const MLPArchitecture &arch) {
  return Json{{"input_dim", arch.input_dim},
              {"hidden_units", arch.hidden_units},
              {"output_dim", arch.output_dim},
              {"activation", "tanh"}};
}

MLPArchitecture architecture_from_json(const Json &j) {
  const std::string where = "architecture";
  MLPArchitecture a;
  a.input_dim = get_as<std::size_t>(require(j, "input_dim", where), where + ".input_dim");
  a.hidden_units =
      get_as<std::size_t>(require(j, "hidden_units", where), where + ".hidden_units");
  a.output_dim = get_as<std::size_t>(require(j, "output_dim", where), where + ".output_dim");
  if (j.contains("activation") && j.at("activation") != "tanh") {
    throw ConfigInvalid(where + ".activation: only tanh is supported");
  }
  try {
    a.validate();
  } catch (const InvalidArgument &e) {
    throw ConfigInvalid(where + ": " + e.what());
  }
  return a;
}

Json to_json(const WeightVector &w) {
  return Json{{"architecture", to_json(w.arch())}, {"values", w.values()}};
}

WeightVector weights_from_json(const Json &j, const MLPArchitecture &arch) {
  const Json &values = j.is_object() ? require(j, "values", "weights") : j;
  if (j.is_object() && j.contains("architecture") &&
      !(architecture_from_json(j.at("architecture")) == arch)) {
    throw ConfigInvalid("weights: architecture header does not match");
  }
  auto v = get_as<std::vector<double>>(values, "weights.values");
  if (v.size() != arch.parameter_count()) {
    throw ConfigInvalid("weights: expected " + std::to_string(arch.parameter_count()) +
                        " values, got " + std::to_string(v.size()));
  }
  try {
    return WeightVector(arch, std::move(v));
  } catch (const Error &e) {
    throw ConfigInvalid(std::string("weights: ") + e.what());
  }
}

Json to_json(const ParameterMask &mask) {
  Json arr = Json::array();
  for (bool b : mask.free()) arr.push_back(b);
  return arr;
}

ParameterMask mask_from_json(const Json &j, const MLPArchitecture &arch) {
  const auto v = get_as<std::vector<bool>>(j, "mask");
  if (v.size() != arch.parameter_count()) {
    throw ConfigInvalid("mask: expected " + std::to_string(arch.parameter_count()) +
                        " booleans, got " + std::to_string(v.size()));
  }
  try {
    return ParameterMask(arch, v);
  } catch (const Error &e) {
    throw ConfigInvalid(std::string("mask: ") + e.what());
  }
}

Json to_json(const SymMatrix &m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

SymMatrix sym_matrix_from_json(const Json &j) {
  const auto rows = get_as<std::vector<std::vector<double>>>(j, "matrix");
  if (rows.empty()) throw ConfigInvalid("matrix: empty");
  Matrix m(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw ConfigInvalid("matrix: must be square");
    for (std::size_t k = 0; k < rows.size(); ++k) m(i, k) = rows[i][k];
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (m(i, k) != m(k, i)) throw ConfigInvalid("matrix: must be symmetric");
  return SymMatrix(m);
}

namespace {

Json nullable(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json start_to_json(const StartSummary &s) {
  return Json{{"index", s.index},
              {"seed", s.seed},
              {"from_initial_point", s.from_initial_point},
              {"succeeded", s.succeeded},
              {"converged", s.converged},
              {"duplicate", s.duplicate},
              {"cost", nullable(s.cost)},
              {"gradient_norm", nullable(s.gradient_norm)},
              {"iterations", s.iterations},
              {"failure", s.failure}};
}

}  // namespace

Json to_json(const FitResult &fit) {
  Json j;
  j["architecture"] = to_json(fit.arch);
  j["mask"] = to_json(fit.mask);
  j["cost_kind"] = to_string(fit.cost_kind);
  j["weights"] = fit.weights.values();
  j["cost"] = fit.cost;
  j["gradient_norm"] = fit.gradient_norm;
  j["converged"] = fit.converged;
  j["on_boundary"] = fit.on_boundary;
  j["iterations"] = fit.iterations;
  j["best_start"] = fit.best_start;
  j["distinct_minima"] = fit.distinct_minima;
  Json starts = Json::array();
  for (const auto &s : fit.starts) starts.push_back(start_to_json(s));
  j["starts"] = std::move(starts);
  if (fit.info_matrix) {
    j["info_matrix"] = Json{{"dim", fit.info_matrix->dim()},
                            {"row_major", fit.info_matrix->matrix().data()}};
  } else {
    j["info_matrix"] = nullptr;
  }
  return j;
}

Json to_json(const TestReport &r) {
  Json j;
  j["n"] = r.n;
  j["dof"] = r.dof;
  j["t_n"] = r.t_n;
  j["p_value_t"] = r.p_value_t;
  Json dec = Json::array();
  for (const auto &d : r.decisions) {
    dec.push_back(Json{{"level", d.level}, {"reject", d.reject}});
  }
  j["decisions"] = std::move(dec);
  j["s_n"] = r.s_n ? Json(*r.s_n) : Json(nullptr);
  j["fit_full"] = to_json(r.fit_full);
  j["fit_restricted"] = to_json(r.fit_restricted);
  if (r.ls_fit_full) j["ls_fit_full"] = to_json(*r.ls_fit_full);
  if (r.ls_fit_restricted) j["ls_fit_restricted"] = to_json(*r.ls_fit_restricted);
  return j;
}

Json to_json(const MonteCarloReport &r) {
  auto opt = [](const std::optional<double> &v) { return v ? Json(*v) : Json(nullptr); };
  Json j;
  j["replications"] = r.replications;
  j["dof"] = r.dof;
  j["usable"] = r.usable;
  j["failures"] = r.failures;
  j["failure_fraction"] = r.failure_fraction;
  j["valid"] = r.valid;
  Json reasons = Json::object();
  for (const auto &[reason, count] : r.failure_reasons) reasons[reason] = count;
  j["failure_reasons"] = std::move(reasons);
  j["empirical_mean_t"] = opt(r.empirical_mean_t);
  j["ks_t_vs_chi2"] = opt(r.ks_t_vs_chi2);
  j["empirical_mean_s"] = opt(r.empirical_mean_s);
  j["ks_s_vs_chi2"] = opt(r.ks_s_vs_chi2);
  j["ks_critical_01"] = r.ks_critical_01;
  Json qq = Json::array();
  for (const auto &p : r.qq_t) qq.push_back(Json::array({p.theoretical, p.empirical}));
  j["qq_points"] = std::move(qq);
  return j;
}

std::string replications_to_csv(const MonteCarloReport &report) {
  std::string out = "rep,t_n,s_n,converged_full,converged_restricted,cost_full,cost_restricted\n";
  auto opt = [](const std::optional<double> &v) { return v ? format_double(*v) : std::string(); };
  for (const auto &r : report.records) {
    out += std::to_string(r.rep) + ',' + opt(r.t_n) + ',' + opt(r.s_n) + ',' +
           (r.converged_full ? "1" : "0") + ',' + (r.converged_restricted ? "1" : "0") + ',' +
           (r.ok ? format_double(r.cost_full) : std::string()) + ',' +
           (r.ok ? format_double(r.cost_restricted) : std::string()) + '\n';
  }
  return out;
}

std::string qq_points_to_csv(const std::vector<QQPoint> &points) {
  std::string out = "theoretical,empirical\n";
  for (const auto &p : points) {
    out += format_double(p.theoretical) + ',' + format_double(p.empirical) + '\n';
  }
  return out;
}

GeneratorSpec generator_from_json(const Json &j, const MLPArchitecture &arch,
                                  std::uint64_t default_seed) {
  const std::string where = "generator";
  GeneratorSpec spec;
  spec.arch = arch;
  spec.true_weights = weights_from_json(require(j, "true_weights", where), arch);
  try {
    spec.noise_cov = sym_matrix_from_json(require(j, "noise_cov", where));
  } catch (const ConfigInvalid &e) {
    throw ConfigInvalid(where + ".noise_cov: " + e.what());
  }
  if (j.contains("noise_family")) {
    try {
      spec.noise_family =
          noise_family_from_string(get_as<std::string>(j.at("noise_family"), where));
    } catch (const InvalidArgument &e) {
      throw ConfigInvalid(where + ".noise_family: " + e.what());
    }
  }
  if (j.contains("input_law")) {
    const Json &law = j.at("input_law");
    if (law.is_string() && law == "standard-gaussian") {
      spec.input_law = {InputLawKind::kStandardGaussian, 1.0};
    } else if (law.is_object() && law.contains("uniform_box")) {
      spec.input_law = {InputLawKind::kUniformBox,
                        get_as<double>(law.at("uniform_box"), where + ".input_law")};
    } else {
      throw ConfigInvalid(where +
                          ".input_law: expected \"standard-gaussian\" or {\"uniform_box\": a}");
    }
  }
  spec.n = get_as<std::size_t>(require(j, "n", where), where + ".n");
  spec.seed = j.contains("seed") ? get_as<std::uint64_t>(j.at("seed"), where + ".seed")
                                 : default_seed;
  try {
    spec.validate();
  } catch (const Error &e) {
    throw ConfigInvalid(where + ": " + e.what());
  }
  return spec;
}

Json to_json(const GeneratorSpec &spec) {
  Json law = spec.input_law.kind == InputLawKind::kStandardGaussian
                 ? Json("standard-gaussian")
                 : Json{{"uniform_box", spec.input_law.half_width}};
  return Json{{"true_weights", spec.true_weights.values()},
              {"noise_cov", to_json(spec.noise_cov)},
              {"noise_family", to_string(spec.noise_family)},
              {"input_law", std::move(law)},
              {"n", spec.n},
              {"seed", spec.seed}};
}

FitConfig fit_config_from_json(const Json &j) {
  FitConfig cfg;
  if (j.is_null()) return cfg;
  const std::string where = "fit";
  if (j.contains("max_iterations")) cfg.max_iterations = get_as<int>(j.at("max_iterations"), where);
  if (j.contains("gradient_tolerance"))
    cfg.gradient_tolerance = get_as<double>(j.at("gradient_tolerance"), where);
  if (j.contains("n_starts")) cfg.n_starts = get_as<int>(j.at("n_starts"), where);
  if (j.contains("box_radius")) cfg.box_radius = get_as<double>(j.at("box_radius"), where);
  if (j.contains("compute_info_matrix"))
    cfg.compute_info_matrix = get_as<bool>(j.at("compute_info_matrix"), where);
  try {
    cfg.validate();
  } catch (const InvalidArgument &e) {
    throw ConfigInvalid(where + ": " + e.what());
  }
  return cfg;
}

Json to_json(const FitConfig &cfg) {
  return Json{{"max_iterations", cfg.max_iterations},
              {"gradient_tolerance", cfg.gradient_tolerance},
              {"n_starts", cfg.n_starts},
              {"seed", cfg.seed},
              {"box_radius", cfg.box_radius},
              {"compute_info_matrix", cfg.compute_info_matrix}};
}

std::string render_test_table(const TestReport &r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-10s %12s %5s %12s %8s %8s %8s\n", "statistic", "value",
                "dof", "p-value", "10%", "5%", "1%");
  out += buf;
  auto word = [](bool reject) { return reject ? "reject" : "accept"; };
  std::snprintf(buf, sizeof(buf), "%-10s %12.6f %5d %12.6g %8s %8s %8s\n", "T_n", r.t_n, r.dof,
                r.p_value_t, word(r.decisions[0].reject), word(r.decisions[1].reject),
                word(r.decisions[2].reject));
  out += buf;
  if (r.s_n) {
    std::snprintf(buf, sizeof(buf), "%-10s %12.6f %5d %12s %8s %8s %8s\n", "S_n", *r.s_n, r.dof,
                  "n/a", "-", "-", "-");
    out += buf;
  }
  return out;
}

}  // namespace mlptest
