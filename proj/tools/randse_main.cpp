#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "randse/config.hpp"
#include "randse/dataset.hpp"
#include "randse/dgp.hpp"
#include "randse/diagnostics.hpp"
#include "randse/errors.hpp"
#include "randse/io.hpp"
#include "randse/linmodel.hpp"
#include "randse/montecarlo.hpp"
#include "randse/rng.hpp"
#include "randse/variance.hpp"
#include "randse/version.hpp"

namespace {

using namespace randse;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

struct AssertSpec {
  std::string kind;  // coverage | var-ratio | oracle-match
  std::string method;
  double lo = 0.0;
  double hi = 0.0;
  double k_sigma = 0.0;
};

AssertSpec parse_assert(const std::string& text) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  AssertSpec spec;
  spec.kind = parts[0];
  if (spec.kind == "coverage" || spec.kind == "var-ratio") {
    if (parts.size() != 4) {
      throw ConfigError("--assert " + spec.kind + " needs <method>:<lo>:<hi>");
    }
    spec.method = parts[1];
    spec.lo = std::stod(parts[2]);
    spec.hi = std::stod(parts[3]);
    return spec;
  }
  if (spec.kind == "oracle-match") {
    if (parts.size() != 2) throw ConfigError("--assert oracle-match needs <k-sigmas>");
    spec.k_sigma = std::stod(parts[1]);
    return spec;
  }
  throw ConfigError("unknown --assert kind '" + spec.kind + "'");
}

bool check_assert(const AssertSpec& a, const mc::ScenarioResult& result, std::ostream& out) {
  if (a.kind == "oracle-match") {
    const double gap = std::abs(result.empirical_asy_var - result.oracle_asy_var);
    const double allowed = a.k_sigma * result.empirical_asy_var_mc_se;
    const bool ok = gap <= allowed;
    out << (ok ? "assert ok" : "assert FAILED") << ": |empirical - oracle| = " << fmt6(gap)
        << " vs " << fmt6(allowed) << "\n";
    return ok;
  }
  for (const auto& m : result.methods) {
    if (method_name(m.method) != a.method) continue;
    const double value = a.kind == "coverage" ? m.coverage : m.variance_ratio;
    const bool ok = value >= a.lo && value <= a.hi;
    out << (ok ? "assert ok" : "assert FAILED") << ": " << a.kind << " " << a.method << " = "
        << fmt6(value) << " target [" << fmt6(a.lo) << ", " << fmt6(a.hi) << "]\n";
    return ok;
  }
  out << "assert FAILED: method '" << a.method << "' not present in results\n";
  return false;
}

int cmd_simulate(const std::string& preset, const std::string& config_path,
                 const std::vector<std::string>& overrides, std::int64_t n_override,
                 std::int64_t reps, std::uint64_t seed, int threads,
                 const std::string& methods, const std::string& out_dir, bool per_rep,
                 const std::vector<std::string>& asserts) {
  dgp::ScenarioSpec spec;
  std::string source;
  if (!preset.empty() && !config_path.empty()) {
    throw ConfigError("choose either --preset or --config, not both");
  }
  if (!preset.empty()) {
    spec = dgp::scenario_preset(preset);
    source = "preset " + preset;
  } else if (!config_path.empty()) {
    spec = config::parse_scenario_config(read_file(config_path));
    source = "config " + config_path;
  } else {
    throw ConfigError("simulate needs --preset or --config");
  }

  for (const auto& pair : overrides) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + pair + "'");
    config::apply_override(spec, pair.substr(0, eq), pair.substr(eq + 1));
  }
  if (n_override > 0) config::apply_override(spec, "n", std::to_string(n_override));
  if (!methods.empty()) config::apply_override(spec, "methods", methods);
  spec.validate();

  std::cout << "run: " << source
            << " (precedence: command-line overrides beat config/preset values)\n";
  std::cout << "seed " << seed << ", R " << reps << ", threads "
            << (threads > 0 ? threads : mc::default_parallelism()) << ", derivation "
            << kDerivationVersion << ", version " << kLibraryVersion << "\n";
  if (spec.group_sizes) {
    std::cout << "group-size ratio sqrt(sum n_j^2)/n = " << fmt6(spec.kappa_ratio()) << "\n";
  }
  std::cout << config::serialize_scenario(spec) << "\n";

  const mc::ScenarioResult result =
      mc::run_scenario(spec, static_cast<std::uint64_t>(reps), seed, threads);

  std::vector<std::vector<std::string>> rows;
  for (const auto& m : result.methods) {
    rows.push_back({method_name(m.method), fmt6(m.mean_se), fmt6(m.coverage),
                    fmt6(m.mc_se_of_coverage), fmt6(m.rejection_rate),
                    fmt6(m.variance_ratio)});
  }
  std::cout << io::render_table(
      {"method", "mean_se", "coverage", "mc_se", "reject_5pct", "var_ratio"}, rows);
  std::cout << "\nbeta_mean " << fmt6(result.beta_mean) << ", beta_sd " << fmt6(result.beta_sd)
            << ", oracle_asy_var " << fmt6(result.oracle_asy_var) << ", empirical_asy_var "
            << fmt6(result.empirical_asy_var) << " (mc se "
            << fmt6(result.empirical_asy_var_mc_se) << ")\n";
  std::cout << "included " << result.included << "/" << result.requested << ", failed "
            << result.failed << ", degenerate " << result.degenerate << "\n";

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    io::write_file(out_dir + "/summary.csv", io::scenario_result_csv(result));
    io::write_file(out_dir + "/summary.json", io::scenario_result_json(result, spec));
    if (per_rep) {
      std::vector<mc::ReplicationRecord> records;
      records.reserve(static_cast<std::size_t>(reps));
      for (std::int64_t i = 0; i < reps; ++i) {
        records.push_back(mc::run_replication(spec, seed, static_cast<std::uint64_t>(i)));
      }
      io::write_file(out_dir + "/replications.csv", io::replications_csv(records));
    }
    std::cout << "wrote " << out_dir << "/summary.csv and summary.json\n";
  }

  bool all_ok = true;
  for (const auto& text : asserts) {
    all_ok = check_assert(parse_assert(text), result, std::cout) && all_ok;
  }
  return all_ok ? 0 : 3;
}

int cmd_estimate(const std::string& data_path, std::string methods, int bandwidth,
                 bool small_sample, bool dof_adjust, double level, bool t_crit,
                 const std::string& out_dir) {
  Dataset data = load_dataset_csv(data_path, &std::cerr);
  if (methods.empty()) {
    methods = "classic,hc0,hc1,hac";
    if (data.group_ids) methods += ",cluster";
    if (data.v) methods += ",tsls";
  }

  OlsOptions opts;
  opts.dof_adjust_s2 = dof_adjust;
  OlsFit ols;
  TslsFit tsls;
  bool have_ols = false;
  bool have_tsls = false;

  std::vector<io::EstimateRow> rows;
  std::stringstream method_stream(methods);
  std::string token;
  while (std::getline(method_stream, token, ',')) {
    const auto method = parse_method(token);
    if (!method) throw ConfigError("unknown method '" + token + "'");
    VarianceEstimate est;
    double beta = 0.0;
    if (*method == Method::Tsls) {
      if (!have_tsls) {
        tsls = fit_2sls(data, opts);
        have_tsls = true;
      }
      est = var_2sls(tsls);
      beta = tsls.beta_2sls;
    } else {
      if (!have_ols) {
        ols = fit_ols(data, opts);
        have_ols = true;
      }
      beta = ols.beta_hat();
      switch (*method) {
        case Method::Classic: est = var_classic(ols); break;
        case Method::HC0:
        case Method::HC1: est = var_hc(ols, data, *method); break;
        case Method::ClusterLZ: {
          if (!data.group_ids) throw DataError("cluster method needs a group column");
          ClusterOptions copts;
          copts.small_sample = small_sample;
          est = var_cluster(ols, data, *data.group_ids, copts);
          break;
        }
        case Method::HacNW:
          est = var_hac_nw(ols, data, bandwidth >= 0 ? bandwidth : default_nw_bandwidth(data.n()));
          break;
        default: break;
      }
    }
    const Interval interval =
        t_crit ? ci_student_t(beta, est, level,
                              static_cast<int>(data.n() - 1 - data.w.cols()))
               : ci(beta, est, level);
    rows.push_back({method_name(*method), beta, est.se, interval.lo, interval.hi});
  }

  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows) {
    table.push_back({r.method, fmt6(r.beta_hat), fmt6(r.se), fmt6(r.ci_lo), fmt6(r.ci_hi)});
  }
  std::cout << io::render_table({"method", "beta_hat", "se", "ci_lo", "ci_hi"}, table);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    io::write_file(out_dir + "/estimates.csv", io::estimates_csv(rows));
    io::write_file(out_dir + "/estimates.json", io::estimates_json(rows, data.n()));
    std::cout << "wrote " << out_dir << "/estimates.csv and estimates.json\n";
  }
  return 0;
}

int cmd_diagnose(const std::string& data_path, int max_lag, const std::string& out_dir) {
  Dataset data = load_dataset_csv(data_path, &std::cerr);
  DiagnosticsReport report = check_assumptions(data);
  const OlsFit fit = fit_ols(data);
  if (max_lag >= 1 && max_lag < data.n() / 2) {
    report.martingale_stats = martingale_check(data.d, fit.residuals, max_lag);
  }

  std::cout << "lambda_min(W'W/n) = " << fmt6(report.lambda_min_w) << "\n";
  std::cout << "has_constant = " << (report.has_constant ? "yes" : "no") << "\n";
  std::cout << "d moments: mean " << fmt6(report.d_mean) << ", variance "
            << fmt6(report.d_variance) << ", 4th central " << fmt6(report.d_fourth_central)
            << "\n";
  for (const auto& note : report.notes) std::cout << "note: " << note << "\n";
  if (!report.martingale_stats.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : report.martingale_stats) {
      rows.push_back({std::to_string(s.lag), fmt6(s.statistic), fmt6(s.se),
                      std::abs(s.statistic) > 3.0 * s.se ? "yes" : "no"});
    }
    std::cout << io::render_table({"lag", "statistic", "se", "beyond_3se"}, rows);
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream csv;
    csv << "lag,statistic,se\n";
    for (const auto& s : report.martingale_stats) {
      csv << s.lag << ',' << io::format_value(s.statistic) << ',' << io::format_value(s.se)
          << "\n";
    }
    io::write_file(out_dir + "/diagnostics.csv", csv.str());
    io::write_file(out_dir + "/diagnostics.json", io::diagnostics_json(report));
    std::cout << "wrote " << out_dir << "/diagnostics.csv and diagnostics.json\n";
  }
  return 0;
}

int cmd_lemma_check(double rho, std::int64_t n, int seeds, std::uint64_t base_seed,
                    bool demean, const std::string& out_dir) {
  if (!(std::abs(rho) < 1.0)) throw ConfigError("lemma-check: need |rho| < 1");
  // Banded autocovariances, truncated where they fall below 1e-14 relative.
  std::vector<double> gamma{1.0};
  if (rho != 0.0) {
    double g = 1.0;
    while (std::abs(g * rho) > 1e-14) {
      g *= rho;
      gamma.push_back(g);
    }
  }

  std::vector<double> ratios;
  ratios.reserve(static_cast<std::size_t>(seeds));
  int within = 0;
  for (int s = 0; s < seeds; ++s) {
    Stream stream(derive_stream_seed(base_seed, static_cast<std::uint64_t>(s),
                                     static_cast<std::uint64_t>(StreamTag::Aux)));
    Eigen::VectorXd d(n);
    for (std::int64_t i = 0; i < n; ++i) d(i) = stream.normal();
    if (demean) d.array() -= d.mean();
    const double ratio = lemma_ratio(d, gamma);
    ratios.push_back(ratio);
    if (ratio >= 0.9 && ratio <= 1.1) ++within;
  }
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= static_cast<double>(seeds);
  double lo = ratios[0], hi = ratios[0];
  for (double r : ratios) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  std::cout << "ratio over " << seeds << " seeds (n=" << n << ", rho=" << rho
            << "): mean " << fmt6(mean) << ", min " << fmt6(lo) << ", max " << fmt6(hi)
            << ", share in [0.9,1.1] " << fmt6(static_cast<double>(within) / seeds) << "\n";

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream csv;
    csv << "seed,ratio\n";
    for (std::size_t s = 0; s < ratios.size(); ++s) {
      csv << s << ',' << io::format_value(ratios[s]) << "\n";
    }
    io::write_file(out_dir + "/lemma_ratios.csv", csv.str());
    std::cout << "wrote " << out_dir << "/lemma_ratios.csv\n";
  }
  return 0;
}

int cmd_list_presets(bool full) {
  for (const auto& name : dgp::preset_names()) {
    std::cout << name << "  -  " << dgp::preset_description(name) << "\n";
    if (full) std::cout << config::serialize_scenario(dgp::scenario_preset(name)) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OLS/2SLS standard errors under random assignment: estimators, "
               "oracles, and a Monte Carlo coverage engine"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo scenario");
  std::string preset, config_path, methods, out_dir;
  std::vector<std::string> overrides, asserts;
  std::int64_t reps = 4000, n_override = 0;
  std::uint64_t seed = 1;
  int threads = 0;
  bool per_rep = false;
  sim->add_option("--preset", preset, "built-in scenario name");
  sim->add_option("--config", config_path, "scenario config file");
  sim->add_option("--set", overrides, "override a config key (key=value, repeatable)");
  sim->add_option("--n", n_override, "sample size override");
  sim->add_option("--R", reps, "number of replications");
  sim->add_option("--seed", seed, "base seed");
  sim->add_option("--threads,--parallelism", threads,
                  "worker threads (default: RANDSE_THREADS or hardware)");
  sim->add_option("--methods", methods, "comma-separated method list override");
  sim->add_option("--out", out_dir, "directory for summary.csv / summary.json");
  sim->add_flag("--per-rep", per_rep, "also write per-replication CSV");
  sim->add_option("--assert", asserts,
                  "fail (exit 3) unless a summary statistic lies in range; forms: "
                  "coverage:<method>:<lo>:<hi>, var-ratio:<method>:<lo>:<hi>, "
                  "oracle-match:<k-sigmas>");

  // estimate
  auto* est = app.add_subcommand("estimate", "standard-error table for a CSV dataset");
  std::string data_path, est_methods, est_out;
  int bandwidth = -1;
  bool small_sample = false, dof_adjust = false, t_crit = false;
  double level = 0.95;
  est->add_option("--data", data_path, "input CSV (columns y,d,w1..wk[,group][,v])")
      ->required();
  est->add_option("--methods", est_methods, "comma-separated methods (default: all applicable)");
  est->add_option("--bandwidth", bandwidth, "lag window for the hac method");
  est->add_flag("--cluster-small-sample", small_sample, "G/(G-1)*(n-1)/(n-1-k) factor");
  est->add_flag("--dof", dof_adjust, "divide s^2 by n-1-d_w instead of n");
  est->add_option("--level", level, "confidence level (default 0.95)");
  est->add_flag("--t-crit", t_crit, "Student-t critical values instead of normal");
  est->add_option("--out", est_out, "directory for estimates.csv / estimates.json");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "design and score diagnostics for a CSV dataset");
  std::string diag_path, diag_out;
  int max_lag = 10;
  diag->add_option("--data", diag_path, "input CSV")->required();
  diag->add_option("--max-lag", max_lag, "lags for the score products (default 10)");
  diag->add_option("--out", diag_out, "directory for diagnostics.csv");

  // lemma-check
  auto* lemma = app.add_subcommand(
      "lemma-check", "finite-n quadratic-form ratio under a banded AR(1) covariance");
  double rho = 0.6;
  std::int64_t lemma_n = 5000;
  int lemma_seeds = 200;
  std::uint64_t lemma_seed = 1;
  bool demean = false;
  std::string lemma_out;
  lemma->add_option("--rho", rho, "AR(1) coefficient of the covariance (default 0.6)");
  lemma->add_option("--n", lemma_n, "sample size (default 5000)");
  lemma->add_option("--seeds", lemma_seeds, "number of seeds (default 200)");
  lemma->add_option("--seed", lemma_seed, "base seed");
  lemma->add_flag("--demean", demean, "demean d before the ratio (default: raw)");
  lemma->add_option("--out", lemma_out, "directory for lemma_ratios.csv");

  // list-presets
  auto* list = app.add_subcommand("list-presets", "show built-in scenarios");
  bool full = false;
  list->add_flag("--full", full, "also print each preset's config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(preset, config_path, overrides, n_override, reps, seed, threads,
                          methods, out_dir, per_rep, asserts);
    }
    if (est->parsed()) {
      return cmd_estimate(data_path, est_methods, bandwidth, small_sample, dof_adjust, level,
                          t_crit, est_out);
    }
    if (diag->parsed()) return cmd_diagnose(diag_path, max_lag, diag_out);
    if (lemma->parsed()) {
      return cmd_lemma_check(rho, lemma_n, lemma_seeds, lemma_seed, demean, lemma_out);
    }
    if (list->parsed()) return cmd_list_presets(full);
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
