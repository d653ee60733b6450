#include "mlptest/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mlptest/errors.hpp"

namespace mlptest::cli {

namespace {

const char *to_string(Command c) {
  switch (c) {
    case Command::kFit:
      return "fit";
    case Command::kTest:
      return "test";
    case Command::kSimulate:
      return "simulate";
    case Command::kGradcheck:
      return "gradcheck";
  }
  return "unknown";
}

StatisticKinds kinds_from_json(const Json &j, const std::string &where) {
  if (!j.is_array()) throw ConfigInvalid(where + ": expected an array of \"t\" / \"s\"");
  StatisticKinds k{false, false};
  for (const auto &e : j) {
    if (e == "t") {
      k.t = true;
    } else if (e == "s") {
      k.s = true;
    } else {
      throw ConfigInvalid(where + ": unknown statistic " + e.dump());
    }
  }
  if (!k.t && !k.s) throw ConfigInvalid(where + ": no statistic selected");
  return k;
}

Json kinds_to_json(const StatisticKinds &k) {
  Json arr = Json::array();
  if (k.t) arr.push_back("t");
  if (k.s) arr.push_back("s");
  return arr;
}

template <typename T>
T field(const Json &j, const char *key, T fallback, const std::string &where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &) {
    throw ConfigInvalid(where + "." + key + ": wrong type");
  }
}

Dataset load_data(const RunConfig &cfg) {
  if (cfg.dataset_path) {
    Dataset data = read_dataset_csv(*cfg.dataset_path);
    try {
      data.check_compatible(cfg.arch);
    } catch (const DimensionMismatch &e) {
      throw ConfigInvalid(cfg.dataset_path->string() + ": " + e.what());
    }
    return data;
  }
  return generate(*cfg.generator);
}

Json envelope(const RunConfig &cfg) {
  Json j;
  j["spec_version"] = kReportSchemaVersion;
  j["command"] = to_string(cfg.command);
  j["config"] = cfg.resolved();
  return j;
}

void write_outputs(const std::filesystem::path &dir,
                   const std::vector<std::pair<std::string, std::string>> &files) {
  std::filesystem::create_directories(dir);
  for (const auto &[name, content] : files) write_file_atomic(dir / name, content);
}

int run_fit(const RunConfig &cfg, const Dataset &data, std::ostream &out) {
  const ParameterMask mask = cfg.mask ? *cfg.mask : ParameterMask(cfg.arch);
  CostKind cost{cfg.cost, std::nullopt};
  if (cfg.cost == CostKind::Kind::kGls) {
    // GLS weighting taken from the residual covariance of an initial U_n fit.
    const FitResult pilot = minimize(data, cfg.arch, mask, cfg.fit);
    cost = CostKind::gls(gamma_n(pilot.weights, data).gamma);
  }
  const FitResult fit = minimize(data, cfg.arch, mask, cfg.fit, cost);
  Json doc = envelope(cfg);
  doc["fit_result"] = to_json(fit);
  write_outputs(cfg.out_dir, {{"fit_result.json", doc.dump(2) + "\n"}});
  if (!cfg.quiet) {
    out << "cost " << format_double(fit.cost) << "  gradient " << format_double(fit.gradient_norm)
        << "  converged " << (fit.converged ? "yes" : "no") << "\n";
  }
  return kOk;
}

int run_test(const RunConfig &cfg, const Dataset &data, std::ostream &out) {
  const TestReport report = mlptest::run_test(data, cfg.arch, *cfg.mask, cfg.fit,
                                              cfg.simulate.kinds);
  Json doc = envelope(cfg);
  doc["test_report"] = to_json(report);
  const std::string table = render_test_table(report);
  write_outputs(cfg.out_dir, {{"test_report.json", doc.dump(2) + "\n"}});
  out << table;
  return kOk;
}

int run_simulate(const RunConfig &cfg, std::ostream &out, std::ostream &err) {
  MonteCarloOptions options;
  options.kinds = cfg.simulate.kinds;
  options.qq_grid = cfg.simulate.qq_grid;
  options.threads = cfg.simulate.threads;
  options.quadratic_form = cfg.simulate.quadratic_form;
  const MonteCarloReport report =
      run_replications(*cfg.generator, *cfg.mask, cfg.fit, cfg.simulate.reps, options);
  Json doc = envelope(cfg);
  doc["monte_carlo_report"] = to_json(report);
  write_outputs(cfg.out_dir, {{"monte_carlo_report.json", doc.dump(2) + "\n"},
                              {"replications.csv", replications_to_csv(report)},
                              {"qq_points.csv", qq_points_to_csv(report.qq_t)}});
  if (!report.valid) {
    err << "warning: " << report.failures << " of " << report.replications
        << " replications failed; report marked invalid\n";
  }
  if (!cfg.quiet) {
    auto show = [](const std::optional<double> &v) {
      return v ? format_double(*v) : std::string("n/a");
    };
    out << "usable " << report.usable << "/" << report.replications << "  mean_t "
        << show(report.empirical_mean_t) << "  ks_t " << show(report.ks_t_vs_chi2)
        << "  mean_s " << show(report.empirical_mean_s) << "  ks_s "
        << show(report.ks_s_vs_chi2) << "  ks_crit_1% " << format_double(report.ks_critical_01)
        << "\n";
  }
  return kOk;
}

int run_gradcheck(const RunConfig &cfg, const Dataset &data, std::ostream &out) {
  const auto &g = cfg.gradcheck;
  const ParameterMask all(cfg.arch);
  Json rows = Json::array();
  bool all_pass = true;
  std::string table;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-6s %14s %14s %14s %6s\n", "config", "grad_rel_err",
                "hess_rel_err", "hess_asym", "pass");
  table += buf;
  for (int i = 0; i < g.configurations; ++i) {
    const WeightVector w =
        random_init(cfg.arch, all, start_seed(cfg.seed, static_cast<std::size_t>(i)));
    const DerivativeCheck c = check_derivatives(w, data, g.step);
    const bool pass = c.max_gradient_error < g.gradient_tolerance &&
                      c.max_hessian_error < g.hessian_tolerance && c.hessian_asymmetry == 0.0;
    all_pass = all_pass && pass;
    std::snprintf(buf, sizeof(buf), "%-6d %14.3e %14.3e %14.3e %6s\n", i, c.max_gradient_error,
                  c.max_hessian_error, c.hessian_asymmetry, pass ? "PASS" : "FAIL");
    table += buf;
    rows.push_back(Json{{"config", i},
                        {"weights", w.values()},
                        {"gradient_relative_error", c.max_gradient_error},
                        {"hessian_relative_error", c.max_hessian_error},
                        {"hessian_asymmetry", c.hessian_asymmetry},
                        {"pass", pass}});
  }
  Json doc = envelope(cfg);
  doc["gradcheck"] = Json{{"pass", all_pass}, {"configurations", std::move(rows)}};
  write_outputs(cfg.out_dir, {{"gradcheck.json", doc.dump(2) + "\n"}});
  out << table;
  return all_pass ? kOk : kNumericalFailure;
}

}  // namespace

Command command_from_string(const std::string &s) {
  if (s == "fit") return Command::kFit;
  if (s == "test") return Command::kTest;
  if (s == "simulate") return Command::kSimulate;
  if (s == "gradcheck") return Command::kGradcheck;
  throw ConfigInvalid("unknown command '" + s + "'");
}

Json RunConfig::resolved() const {
  Json j;
  j["architecture"] = to_json(arch);
  if (dataset_path) j["dataset"] = dataset_path->string();
  if (generator) j["generator"] = to_json(*generator);
  j["mask"] = mask ? to_json(*mask) : Json(nullptr);
  j["cost"] = to_string(cost);
  j["fit"] = to_json(fit);
  j["seed"] = seed;
  j["out"] = out_dir.string();
  j["statistics"] = kinds_to_json(simulate.kinds);
  if (command == Command::kSimulate) {
    j["simulate"] = Json{{"reps", simulate.reps},
                         {"qq_grid", simulate.qq_grid},
                         {"quadratic_form", simulate.quadratic_form}};
  }
  if (command == Command::kGradcheck) {
    j["gradcheck"] = Json{{"configurations", gradcheck.configurations},
                          {"step", gradcheck.step}};
  }
  return j;
}

RunConfig parse_run_config(Command command, const Json &doc,
                           const std::filesystem::path &base_dir, const Overrides &overrides) {
  if (!doc.is_object()) throw ConfigInvalid("config: top level must be a JSON object");
  RunConfig cfg;
  cfg.command = command;
  cfg.quiet = overrides.quiet;
  if (!doc.contains("architecture")) throw ConfigInvalid("config: missing field 'architecture'");
  cfg.arch = architecture_from_json(doc.at("architecture"));

  cfg.seed = overrides.seed ? *overrides.seed : field<std::uint64_t>(doc, "seed", 0, "config");
  cfg.out_dir = overrides.out ? *overrides.out : field<std::string>(doc, "out", "out", "config");

  const bool has_dataset = doc.contains("dataset");
  const bool has_generator = doc.contains("generator");
  if (has_dataset == has_generator) {
    throw ConfigInvalid("config: exactly one of 'dataset' and 'generator' must be given");
  }
  if (has_dataset) {
    std::filesystem::path p = field<std::string>(doc, "dataset", "", "config");
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) {
      throw ConfigInvalid("config.dataset: file '" + p.string() + "' does not exist");
    }
    cfg.dataset_path = p;
  } else {
    cfg.generator = generator_from_json(doc.at("generator"), cfg.arch, cfg.seed);
  }

  if (doc.contains("mask") && !doc.at("mask").is_null()) {
    cfg.mask = mask_from_json(doc.at("mask"), cfg.arch);
  }
  cfg.fit = fit_config_from_json(doc.contains("fit") ? doc.at("fit") : Json());
  cfg.fit.seed = cfg.seed;

  const std::string cost = field<std::string>(doc, "cost", "logdet", "config");
  if (cost == "logdet") {
    cfg.cost = CostKind::Kind::kLogDet;
  } else if (cost == "sumsquares") {
    cfg.cost = CostKind::Kind::kSumSquares;
  } else if (cost == "gls") {
    cfg.cost = CostKind::Kind::kGls;
  } else {
    throw ConfigInvalid("config.cost: expected logdet, sumsquares or gls");
  }

  const Json sim = doc.contains("simulate") ? doc.at("simulate") : Json::object();
  const Json default_kinds = command == Command::kTest ? Json::array({"t", "s"})
                                                       : Json::array({"t"});
  const Json kinds_doc = doc.contains("statistics")  ? doc.at("statistics")
                         : sim.contains("statistics") ? sim.at("statistics")
                                                      : default_kinds;
  cfg.simulate.kinds = kinds_from_json(kinds_doc, "config.statistics");
  cfg.simulate.reps = overrides.reps ? *overrides.reps
                                     : field<std::size_t>(sim, "reps", 100, "config.simulate");
  cfg.simulate.qq_grid = field<int>(sim, "qq_grid", 20, "config.simulate");
  cfg.simulate.threads = field<int>(sim, "threads", 1, "config.simulate");
  cfg.simulate.quadratic_form = field<bool>(sim, "quadratic_form", false, "config.simulate");
  if (cfg.simulate.reps == 0) throw ConfigInvalid("config.simulate.reps: must be positive");
  if (cfg.simulate.qq_grid < 2) throw ConfigInvalid("config.simulate.qq_grid: must be >= 2");

  const Json gc = doc.contains("gradcheck") ? doc.at("gradcheck") : Json::object();
  cfg.gradcheck.configurations = field<int>(gc, "configurations", 5, "config.gradcheck");
  cfg.gradcheck.step = field<double>(gc, "step", 1e-5, "config.gradcheck");
  if (cfg.gradcheck.configurations <= 0 || !(cfg.gradcheck.step > 0.0)) {
    throw ConfigInvalid("config.gradcheck: configurations and step must be positive");
  }

  if (command == Command::kTest || command == Command::kSimulate) {
    if (!cfg.mask) throw ConfigInvalid("config.mask: required for '" +
                                       std::string(to_string(command)) + "'");
    if (cfg.mask->pinned_count() == 0) {
      throw ConfigInvalid("config.mask: must pin at least one weight");
    }
  }
  if (command == Command::kSimulate && !cfg.generator) {
    throw ConfigInvalid("config.generator: required for 'simulate'");
  }
  return cfg;
}

RunConfig load_run_config(Command command, const std::filesystem::path &config_path,
                          const Overrides &overrides) {
  std::ifstream in(config_path);
  if (!in) throw ConfigInvalid("cannot open config '" + config_path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigInvalid(config_path.string() + ": " + e.what());
  }
  return parse_run_config(command, doc, config_path.parent_path(), overrides);
}

int run(const RunConfig &config, std::ostream &out, std::ostream &err) {
  const char *stage = "data";
  try {
    if (config.command == Command::kSimulate) {
      stage = "simulate";
      return run_simulate(config, out, err);
    }
    const Dataset data = load_data(config);
    switch (config.command) {
      case Command::kFit:
        stage = "estimate";
        return run_fit(config, data, out);
      case Command::kTest:
        stage = "hypothesis";
        return run_test(config, data, out);
      case Command::kGradcheck:
        stage = "cost";
        return run_gradcheck(config, data, out);
      case Command::kSimulate:
        break;
    }
  } catch (const ConfigInvalid &e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const InvalidArgument &e) {
    err << "error [" << stage << "]: " << e.what() << "\n";
    return kValidationError;
  } catch (const DimensionMismatch &e) {
    err << "error [" << stage << "]: " << e.what() << "\n";
    return kValidationError;
  } catch (const ArchMismatch &e) {
    err << "error [" << stage << "]: " << e.what() << "\n";
    return kValidationError;
  } catch (const Error &e) {
    err << "numerical failure [" << stage << "]: " << e.what() << "\n";
    return kNumericalFailure;
  }
  return kOk;
}

int main_entry(int argc, char **argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Log-determinant MLP fitting and parameter-count tests"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t reps = 0;

  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_flag("--quiet", overrides.quiet, "Suppress the summary line");
  };
  CLI::App *fit = app.add_subcommand("fit", "Minimize the cost and write the fit");
  CLI::App *test = app.add_subcommand("test", "Compute T_n (and S_n) for a nested mask");
  CLI::App *sim = app.add_subcommand("simulate", "Monte Carlo study of the test statistics");
  CLI::App *grad = app.add_subcommand("gradcheck", "Analytic vs finite-difference derivatives");
  for (CLI::App *sub : {fit, test, sim, grad}) add_common(sub);
  sim->add_option("--reps", reps, "Override the number of replications");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kOk : kValidationError;
  }

  CLI::App *chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) overrides.seed = seed;
  if (chosen->count("--out")) overrides.out = out_dir;
  if (chosen == sim && sim->count("--reps")) overrides.reps = reps;

  RunConfig cfg;
  try {
    cfg = load_run_config(command_from_string(chosen->get_name()), config_path, overrides);
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  }
  return run(cfg, out, err);
}

}  // namespace mlptest::cli
