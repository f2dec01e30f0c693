#include "auxgmm/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "auxgmm/bounds.hpp"
#include "auxgmm/config.hpp"
#include "auxgmm/error.hpp"
#include "auxgmm/estimators.hpp"
#include "auxgmm/report.hpp"
#include "auxgmm/simulate.hpp"

namespace auxgmm {

namespace {

using nlohmann::json;

struct Flags {
  std::string config;
  std::string data;
  std::string out;
  std::string preset;
  std::string format;
  std::string sample_case;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> n;
  std::optional<std::int64_t> reps;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file");
  sub->add_option("--data", f.data, "CSV data file");
  sub->add_option("--out", f.out, "output file (default stdout)");
  sub->add_option("--seed", f.seed, "random seed");
  sub->add_option("--preset", f.preset, "simulation preset")
      ->check(CLI::IsMember(preset_names()));
  sub->add_option("--n", f.n, "sample size per replication");
  sub->add_option("--reps", f.reps, "Monte Carlo replications");
  sub->add_option("--format", f.format, "json or table")->check(CLI::IsMember({"json", "table"}));
  sub->add_option("--case", f.sample_case, "verify-out or verify-in")
      ->check(CLI::IsMember({"verify-out", "verify-in"}));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json provenance(const RunConfig& cfg) {
  return {{"version", kVersion}, {"seed", cfg.seed}, {"config_hash", config_hash(cfg)}};
}

std::string provenance_line(const RunConfig& cfg) {
  return std::string("# auxgmm ") + kVersion + " seed=" + std::to_string(cfg.seed) +
         " config=" + config_hash(cfg) + "\n";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (f) f << text;
  if (!f) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
}

// JSON always goes to --out when given. stdout gets the table in table mode,
// otherwise the JSON unless it already went to a file.
void emit(const RunConfig& cfg, const json& report, const std::string& table, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (cfg.output) write_file(*cfg.output, text);
  if (cfg.format == "table") {
    out << provenance_line(cfg) << table;
  } else if (!cfg.output) {
    out << text;
  }
}

json matrix_json(const Eigen::MatrixXd& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

const std::string& require_data(const RunConfig& cfg) {
  if (!cfg.data) throw Error(ErrorKind::ConfigError, cfg.command + " needs --data or config.data");
  return *cfg.data;
}

// Returns false when some optimizer hit its iteration cap.
bool run_estimate(const RunConfig& cfg, std::ostream& out) {
  const Dataset ds = load_dataset_file(require_data(cfg), cfg.sample_case);
  const auto configs = make_estimator_configs(cfg, nullptr, ds.d_x());
  std::vector<Estimate> estimates;
  bool converged = true;
  for (const auto& c : configs) {
    estimates.push_back(estimate(c, ds));
    converged = converged && estimates.back().diagnostics.converged;
  }
  json j;
  if (estimates.size() == 1) {
    j = estimate_json(estimates.front());
  } else {
    j["estimates"] = json::array();
    for (const auto& e : estimates) j["estimates"].push_back(estimate_json(e));
  }
  j["provenance"] = provenance(cfg);
  const std::string table = cfg.format == "table"
                                ? format_report(estimates, ReportStyle::Table, configs.front().moment)
                                : std::string();
  emit(cfg, j, table, out);
  return converged;
}

void run_bounds(const RunConfig& cfg, std::ostream& out) {
  const Dataset ds = load_dataset_file(require_data(cfg), cfg.sample_case);
  RunConfig base = cfg;
  base.families = {"cep"};
  const EstimatorConfig cep = make_estimator_configs(base, nullptr, ds.d_x()).front();
  const Estimate est = estimate(cep, ds);
  const double phat = marginal_p(ds);

  const auto aux = split_samples(ds).auxiliary;
  Eigen::MatrixXd xa(static_cast<Eigen::Index>(aux.size()), ds.d_x());
  for (std::size_t k = 0; k < aux.size(); ++k) xa.row(static_cast<Eigen::Index>(k)) = ds.x().row(aux[k]);
  const CondMomentFit cm = fit_cond_moments(cep.moment, est.beta, ds, build_basis(cep.basis, xa));

  json omegas = json::object();
  json v0 = json::object();
  auto add = [&](BoundKind kind, const PropensityModel& pm) {
    const Eigen::MatrixXd omega = estimate_omega(kind, cm, pm, phat, ds);
    const auto bound = efficiency_bound(est.jac.matrix, omega);
    omegas[to_string(kind)] = matrix_json(omega);
    v0[to_string(kind)] = matrix_json(bound.value);
  };

  const PropensityModel np = fit_propensity(cep.propensity, ds);
  if (cfg.sample_case == SampleCase::VerifyIn) {
    add(BoundKind::Omega2, np);
  } else {
    add(BoundKind::Omega1, np);
    if (cfg.propensity.known) {
      add(BoundKind::Omega1Known, known_propensity(*cfg.propensity.known, cep.propensity.clip));
    }
    if (!cfg.propensity.design.empty()) {
      RunConfig pc = cfg;
      pc.families = {"cep-param"};
      const EstimatorConfig pcfg = make_estimator_configs(pc, nullptr, ds.d_x()).front();
      add(BoundKind::OmegaParam, fit_propensity(pcfg.propensity, ds));
    }
  }
  json j = {
      {"case", to_string(cfg.sample_case)},
      {"beta", std::vector<double>(est.beta.data(), est.beta.data() + est.beta.size())},
      {"phat", phat},
      {"n", ds.n()},
      {"k_n", est.diagnostics.k_n},
      {"omega", omegas},
      {"v0", v0},
      {"provenance", provenance(cfg)},
  };
  emit(cfg, j, cfg.format == "table" ? j.dump(2) + "\n" : std::string(), out);
}

// Returns false when the report is not ok.
bool run_simulate(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.preset) throw Error(ErrorKind::ConfigError, "simulate needs --preset or config.preset");
  DGPSpec spec = dgp_preset(*cfg.preset);
  spec.sample_case = cfg.sample_case;
  const auto configs = make_estimator_configs(cfg, &spec, 1);
  const MCReport report = run_monte_carlo(spec, configs, cfg.n.value_or(2000), cfg.reps.value_or(500),
                                          cfg.seed);
  json j = mc_report_json(report);
  j["provenance"] = provenance(cfg);
  emit(cfg, j, cfg.format == "table" ? format_mc_table(report) : std::string(), out);
  return report.ok;
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return 1;
    case ErrorCategory::Data: return 2;
    case ErrorCategory::Numerical: return 3;
  }
  return 3;
}

void error_json(std::ostream& err, const std::string& kind, const std::string& category,
                const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"category", category}, {"message", message}}}}.dump()
      << "\n";
}

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Numerical: return "numerical";
  }
  return "numerical";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moment estimation with auxiliary data (CEP-GMM and IPW-GMM)", "auxgmm"};
  app.require_subcommand(1);
  Flags flags;
  for (const char* name : {"estimate", "bounds", "simulate"}) {
    add_flags(app.add_subcommand(name, std::string(name) + " command"), flags);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    error_json(err, "UsageError", "usage", e.what());
    return 1;
  }

  try {
    RunConfig cfg;
    if (!flags.config.empty()) cfg = parse_config_text(read_file(flags.config));
    cfg.command = app.get_subcommands().front()->get_name();
    if (!flags.data.empty()) cfg.data = flags.data;
    if (!flags.out.empty()) cfg.output = flags.out;
    if (!flags.preset.empty()) cfg.preset = flags.preset;
    if (!flags.format.empty()) cfg.format = flags.format;
    if (!flags.sample_case.empty()) cfg.sample_case = parse_sample_case(flags.sample_case);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.n) cfg.n = *flags.n;
    if (flags.reps) cfg.reps = *flags.reps;
    if (cfg.n && *cfg.n < 2) throw Error(ErrorKind::ConfigError, "n must be at least 2");
    if (cfg.reps && *cfg.reps < 2) throw Error(ErrorKind::ConfigError, "reps must be at least 2");

    if (cfg.command == "estimate") {
      if (!run_estimate(cfg, out)) {
        error_json(err, to_string(ErrorKind::NoConvergence), "numerical",
                   "optimizer reached the iteration cap; results were written with a flag");
        return 3;
      }
    } else if (cfg.command == "bounds") {
      run_bounds(cfg, out);
    } else {
      if (!run_simulate(cfg, out)) {
        error_json(err, "ReplicationFailures", "numerical",
                   "more than 1% of replications failed for some estimator");
        return 3;
      }
    }
    return 0;
  } catch (const Error& e) {
    error_json(err, to_string(e.kind()), category_name(e.category()), e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    error_json(err, "InternalError", "numerical", e.what());
    return 3;
  }
}

}  // namespace auxgmm
