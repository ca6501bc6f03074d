#pragma once

// CSV / JSON serialization of aggregated results. Doubles are written with
// 17 significant digits; line endings are LF.

#include "qici/config.hpp"
#include "qici/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace qici {

inline constexpr const char* kVersion = "1.0.0";

struct SweepEntry {
  Variant variant = Variant::ICI;
  double comm_rate = 0.0;
  AggregateReport report;
};

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline const char* kCsvHeader = "variant,comm_rate,agent,step,metric,count,value\n";

/// Per (agent, step): RMSE over the trials in which the cell was valid.
inline void write_rmse_csv(std::ostream& out, std::span<const SweepEntry> entries) {
  out << kCsvHeader;
  for (const auto& e : entries) {
    const AggregateReport& r = e.report;
    const std::string prefix = to_string(e.variant) + "," + format_double(e.comm_rate) + ",";
    for (int a = 0; a < r.agents; ++a) {
      for (int k = 0; k < r.steps; ++k) {
        const std::size_t c = r.cell(k, a);
        const long n = r.count[c];
        const double pos = n > 0 ? std::sqrt(r.pos_sq_sum[c] / n) : std::nan("");
        const double ori = n > 0 ? std::sqrt(r.ori_sq_sum[c] / n) * kRadToDeg : std::nan("");
        const std::string cell = prefix + std::to_string(a) + "," + std::to_string(k + 1) + ",";
        out << cell << "pos_rmse_m," << n << ',' << format_double(pos) << '\n';
        out << cell << "ori_rmse_deg," << n << ',' << format_double(ori) << '\n';
      }
    }
  }
}

/// Per step: NEES averaged over trials and agents.
inline void write_nees_csv(std::ostream& out, std::span<const SweepEntry> entries) {
  out << kCsvHeader;
  for (const auto& e : entries) {
    const AggregateReport& r = e.report;
    const std::string prefix = to_string(e.variant) + "," + format_double(e.comm_rate) + ",network,";
    for (int k = 0; k < r.steps; ++k) {
      out << prefix << (k + 1) << ",mean_nees," << r.nees_count[k] << ',' << format_double(r.mean_nees[k]) << '\n';
    }
  }
}

inline nlohmann::json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline nlohmann::json numbers(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

inline nlohmann::json report_json(std::span<const SweepEntry> entries) {
  using nlohmann::json;
  json list = json::array();
  json table = json::array();
  for (const auto& e : entries) {
    const AggregateReport& r = e.report;
    const double agent_trials = static_cast<double>(r.trials) * r.agents;
    list.push_back(json{
        {"variant", to_string(e.variant)},
        {"comm_rate", e.comm_rate},
        {"trials", r.trials},
        {"agents", r.agents},
        {"steps", r.steps},
        {"network_prmse_m", number_or_null(r.network_prmse)},
        {"network_ormse_deg", number_or_null(r.network_ormse_deg)},
        {"median_trial_prmse_m", number_or_null(r.median_trial_prmse)},
        {"agent_prmse_m", numbers(r.agent_prmse)},
        {"agent_ormse_deg", numbers(r.agent_ormse_deg)},
        {"agent_cells", r.agent_cells},
        {"trial_prmse_m", numbers(r.trial_prmse)},
        {"nees_dof", r.dof},
        {"mean_abs_nees_deviation", number_or_null(r.mean_abs_nees_deviation)},
        {"nees_band",
         {{"lower", r.band.lower}, {"upper", r.band.upper}, {"confidence", r.band.confidence},
          {"samples", r.band.samples}}},
        {"mean_nees", numbers(r.mean_nees)},
        {"divergence_events", r.divergence_events},
        {"trials_with_divergence", r.trials_with_divergence},
        {"excluded_cells", r.excluded_cells},
        {"fusion_fallbacks", r.diagnostics.fusion_fallbacks},
        {"linearization_failures", r.diagnostics.linearization_failures},
    });
    table.push_back(json{
        {"variant", to_string(e.variant)},
        {"comm_rate", e.comm_rate},
        {"position_m", number_or_null(r.network_prmse)},
        {"orientation_deg", number_or_null(r.network_ormse_deg)},
        {"divergence_rate", agent_trials > 0 ? r.divergence_events / agent_trials : 0.0},
    });
  }
  return json{{"entries", list}, {"table", table}};
}

inline nlohmann::json meta_json(const RunConfig& rc, const std::string& command) {
  return nlohmann::json{{"command", command},
                        {"seed", rc.scenario.seed},
                        {"config_digest", config_digest(rc)},
                        {"version", kVersion},
                        {"config", to_json(rc)}};
}

/// One parsed row of rmse.csv / nees.csv.
struct CsvRow {
  std::string variant;
  double comm_rate = 0.0;
  std::string agent;
  int step = 0;
  std::string metric;
  long count = 0;
  double value = 0.0;
};

inline std::vector<CsvRow> read_csv(std::istream& in) {
  std::vector<CsvRow> rows;
  std::string line;
  if (!std::getline(in, line) || line + "\n" != kCsvHeader) throw std::runtime_error("unexpected CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 7) throw std::runtime_error("malformed CSV row: " + line);
    CsvRow r;
    r.variant = f[0];
    r.comm_rate = std::stod(f[1]);
    r.agent = f[2];
    r.step = std::stoi(f[3]);
    r.metric = f[4];
    r.count = std::stol(f[5]);
    r.value = f[6] == "nan" ? std::nan("") : std::stod(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace qici
