#include "randse/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "randse/config.hpp"
#include "randse/errors.hpp"
#include "randse/version.hpp"

namespace randse::io {

std::string format_value(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

const char* theorem_name(Theorem t) {
  switch (t) {
    case Theorem::T1_StrongExog: return "strong_exog";
    case Theorem::T2_CondHetero: return "cond_hetero";
    case Theorem::T3_GroupStrongExog: return "group_strong_exog";
    case Theorem::T4_GroupHetero: return "group_hetero";
    case Theorem::TE_PotentialOutcomes: return "potential_outcomes";
  }
  return "?";
}

}  // namespace

std::string scenario_result_csv(const mc::ScenarioResult& result) {
  std::ostringstream out;
  out << "method,beta_mean,beta_sd,mean_se,mean_var,coverage,mc_se_coverage,"
         "rejection_rate,variance_ratio,oracle_asy_var,empirical_asy_var,"
         "empirical_asy_var_mc_se,n,R,included,failed,degenerate,seed,spec_hash\n";
  for (const auto& m : result.methods) {
    out << method_name(m.method) << ',' << format_value(result.beta_mean) << ','
        << format_value(result.beta_sd) << ',' << format_value(m.mean_se) << ','
        << format_value(m.mean_var) << ',' << format_value(m.coverage) << ','
        << format_value(m.mc_se_of_coverage) << ',' << format_value(m.rejection_rate) << ','
        << format_value(m.variance_ratio) << ',' << format_value(result.oracle_asy_var) << ','
        << format_value(result.empirical_asy_var) << ','
        << format_value(result.empirical_asy_var_mc_se) << ',' << result.n << ','
        << result.requested << ',' << result.included << ',' << result.failed << ','
        << result.degenerate << ',' << result.base_seed << ',' << result.spec_hash << "\n";
  }
  return out.str();
}

std::string scenario_result_json(const mc::ScenarioResult& result,
                                 const dgp::ScenarioSpec& spec) {
  nlohmann::json doc;
  doc["metadata"] = {
      {"spec_hash", result.spec_hash},
      {"seed", result.base_seed},
      {"derivation_version", kDerivationVersion},
      {"library_version", kLibraryVersion},
  };
  doc["scenario"] = config::serialize_scenario(spec);
  doc["summary"] = {
      {"n", result.n},
      {"R", result.requested},
      {"included", result.included},
      {"failed", result.failed},
      {"degenerate", result.degenerate},
      {"beta_mean", result.beta_mean},
      {"beta_sd", result.beta_sd},
      {"oracle_theorem", theorem_name(result.oracle_theorem)},
      {"oracle_asy_var", result.oracle_asy_var},
      {"empirical_asy_var", result.empirical_asy_var},
      {"empirical_asy_var_mc_se", result.empirical_asy_var_mc_se},
      {"variance_ratio", result.variance_ratio},
  };
  doc["methods"] = nlohmann::json::array();
  for (const auto& m : result.methods) {
    doc["methods"].push_back({
        {"method", method_name(m.method)},
        {"mean_se", m.mean_se},
        {"mean_var", m.mean_var},
        {"coverage", m.coverage},
        {"mc_se_of_coverage", m.mc_se_of_coverage},
        {"rejection_rate", m.rejection_rate},
        {"variance_ratio", m.variance_ratio},
    });
  }
  return doc.dump(2) + "\n";
}

std::string replications_csv(const std::vector<mc::ReplicationRecord>& records) {
  std::ostringstream out;
  out << "rep,beta_hat,method,se,ci_lo,ci_hi,covered,rejected_at_5pct,degenerate,failed,"
         "error\n";
  for (const auto& r : records) {
    if (r.failed) {
      std::string message = r.error;
      for (char& c : message) {
        if (c == ',' || c == '\n') c = ';';
      }
      out << r.rep_index << ",,,,,,,,,1," << message << "\n";
      continue;
    }
    for (const auto& m : r.methods) {
      out << r.rep_index << ',' << format_value(r.beta_hat) << ',' << method_name(m.method)
          << ',' << format_value(m.se) << ',' << format_value(m.ci_lo) << ','
          << format_value(m.ci_hi) << ',' << (m.covered ? 1 : 0) << ','
          << (m.rejected_at_5pct ? 1 : 0) << ',' << (m.degenerate ? 1 : 0) << ",0,\n";
    }
  }
  return out.str();
}

std::string estimates_csv(const std::vector<EstimateRow>& rows) {
  std::ostringstream out;
  out << "method,beta_hat,se,ci_lo,ci_hi\n";
  for (const auto& r : rows) {
    out << r.method << ',' << format_value(r.beta_hat) << ',' << format_value(r.se) << ','
        << format_value(r.ci_lo) << ',' << format_value(r.ci_hi) << "\n";
  }
  return out.str();
}

std::string estimates_json(const std::vector<EstimateRow>& rows, Eigen::Index n) {
  nlohmann::json doc;
  doc["metadata"] = {
      {"n", n},
      {"library_version", kLibraryVersion},
  };
  doc["estimates"] = nlohmann::json::array();
  for (const auto& r : rows) {
    doc["estimates"].push_back({
        {"method", r.method},
        {"beta_hat", r.beta_hat},
        {"se", r.se},
        {"ci_lo", r.ci_lo},
        {"ci_hi", r.ci_hi},
    });
  }
  return doc.dump(2) + "\n";
}

std::string diagnostics_json(const DiagnosticsReport& report) {
  nlohmann::json doc;
  doc["lambda_min_w"] = report.lambda_min_w;
  doc["has_constant"] = report.has_constant;
  doc["d_moments"] = {
      {"mean", report.d_mean},
      {"variance", report.d_variance},
      {"fourth_central", report.d_fourth_central},
  };
  doc["martingale_stats"] = nlohmann::json::array();
  for (const auto& s : report.martingale_stats) {
    doc["martingale_stats"].push_back(
        {{"lag", s.lag}, {"statistic", s.statistic}, {"se", s.se}});
  }
  doc["notes"] = report.notes;
  return doc.dump(2) + "\n";
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(header.size());
  for (std::size_t j = 0; j < header.size(); ++j) widths[j] = header[j].size();
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size() && j < widths.size(); ++j) {
      widths[j] = std::max(widths[j], row[j].size());
    }
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      out << row[j] << std::string(widths[j] - row[j].size() + 2, ' ');
    }
    out << "\n";
  };
  emit(header);
  for (std::size_t j = 0; j < header.size(); ++j) {
    out << std::string(widths[j], '-') << "  ";
  }
  out << "\n";
  for (const auto& row : rows) emit(row);
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
}

}  // namespace randse::io
