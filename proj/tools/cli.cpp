#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>
#include <utility>

namespace qici::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::vector<double> parse_rates(const std::string& s) {
  std::vector<double> rates;
  for (const auto& t : split(s)) {
    std::size_t used = 0;
    double r = 0.0;
    try {
      r = std::stod(t, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad communication rate '" + t + "'");
    }
    if (used != t.size() || !(r >= 0.0 && r <= 1.0)) throw ConfigError("bad communication rate '" + t + "'");
    rates.push_back(r);
  }
  if (rates.empty()) throw ConfigError("no communication rates given");
  return rates;
}

std::vector<Variant> parse_variants(const std::string& s) {
  std::vector<Variant> vs;
  try {
    for (const auto& t : split(s)) vs.push_back(variant_from_string(t));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (vs.empty()) throw ConfigError("no variants given");
  return vs;
}

AggregateReport simulate_cell(const Scenario& base, Variant v, double rate, int trials, int threads) {
  Scenario sc = base;
  sc.comm_rate = rate;
  auto summaries = for_each_trial(sc, v, trials, threads, [](int, TrialRecord&& r) { return summarize(r); });
  return aggregate(summaries);
}

/// Removes the files written so far unless disarmed.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {
    created_dir_ = !fs::exists(dir_);
    fs::create_directories(dir_);
  }
  ~OutputGuard() {
    if (done_) return;
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    if (created_dir_) fs::remove(dir_, ec);
  }
  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    files_.push_back(p);
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << content;
    f.close();
    if (!f) throw std::runtime_error("failed to write " + p.string());
  }
  void commit() { done_ = true; }

 private:
  fs::path dir_;
  bool created_dir_ = false;
  bool done_ = false;
  std::vector<fs::path> files_;
};

void write_outputs(const fs::path& dir, const RunConfig& rc, const std::string& command,
                   const std::vector<SweepEntry>& entries) {
  OutputGuard guard(dir);
  std::ostringstream rmse, nees;
  write_rmse_csv(rmse, entries);
  write_nees_csv(nees, entries);
  guard.write("rmse.csv", rmse.str());
  guard.write("nees.csv", nees.str());
  guard.write("report.json", report_json(entries).dump(2) + "\n");
  guard.write("meta.json", meta_json(rc, command).dump(2) + "\n");
  guard.commit();
}

void print_table(std::ostream& out, const std::vector<SweepEntry>& entries) {
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %9s %14s %16s %11s\n", "variant", "comm_rate", "position_m",
                "orientation_deg", "divergence");
  out << line;
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-12s %8.0f%% %14.6f %16.6f %11d\n", to_string(e.variant).c_str(),
                  100.0 * e.comm_rate, e.report.network_prmse, e.report.network_ormse_deg,
                  e.report.divergence_events);
    out << line;
  }
}

}  // namespace

std::vector<SweepEntry> sweep(const RunConfig& rc, const std::vector<Variant>& variants,
                              const std::vector<double>& rates, int threads) {
  std::map<std::pair<int, double>, AggregateReport> cache;
  std::vector<SweepEntry> entries;
  for (Variant v : variants) {
    for (double rate : rates) {
      Variant run_as = v;
      double run_rate = rate;
      if (v == Variant::CENTRALIZED) {
        run_rate = 0.0;
      } else if (v == Variant::NONE || rate == 0.0) {
        run_as = Variant::NONE;
        run_rate = 0.0;
      }
      const auto key = std::make_pair(static_cast<int>(run_as), run_rate);
      auto it = cache.find(key);
      if (it == cache.end()) {
        it = cache.emplace(key, simulate_cell(rc.scenario, run_as, run_rate, rc.trials, threads)).first;
      }
      entries.push_back(SweepEntry{v, rate, it->second});
    }
  }
  return entries;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed 3-D target tracking simulator (ICI / CI / centralized)", "qici"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", variant_name, rates_arg, variants_arg;
  std::optional<double> comm_rate;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool print_config = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Scenario JSON file")->required();
    sub->add_option("--trials", trials, "Monte-Carlo trials (overrides config)");
    sub->add_option("--seed", seed, "Scenario seed (overrides config)");
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--threads", threads, "Worker threads")->capture_default_str();
  };
  CLI::App* simulate = app.add_subcommand("simulate", "One variant at one communication rate");
  add_common(simulate);
  simulate->add_option("--variant", variant_name, "ici | ci | centralized | none")->required();
  simulate->add_option("--comm-rate", comm_rate, "Communication rate in [0, 1] (overrides config)");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Grid of variants x communication rates");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--rates", rates_arg, "Comma-separated rates, e.g. 0,0.2,0.4");
  sweep_cmd->add_option("--variants", variants_arg, "Comma-separated variants");

  CLI::App* self = app.add_subcommand("selftest", "Run built-in property checks");
  self->add_flag("--print-config", print_config, "Print the default configuration and exit");

  std::vector<std::string> storage{"qici"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (self->parsed()) {
      if (print_config) {
        out << to_json(RunConfig{}).dump(2) << "\n";
        return 0;
      }
      return selftest(out) ? 0 : 1;
    }
    if (threads < 1) throw ConfigError("--threads must be >= 1");
    RunConfig rc = load_config(config_path);
    if (trials) {
      if (*trials < 1) throw ConfigError("--trials must be >= 1");
      rc.trials = *trials;
    }
    if (seed) rc.scenario.seed = *seed;

    std::vector<SweepEntry> entries;
    std::string command;
    if (simulate->parsed()) {
      Variant v;
      try {
        v = variant_from_string(variant_name);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      if (comm_rate) {
        if (!(*comm_rate >= 0.0 && *comm_rate <= 1.0)) throw ConfigError("--comm-rate outside [0, 1]");
        rc.scenario.comm_rate = *comm_rate;
      }
      rc.comm_rates = {rc.scenario.comm_rate};
      rc.variants = {v};
      command = "simulate";
    } else {
      if (!rates_arg.empty()) rc.comm_rates = parse_rates(rates_arg);
      if (!variants_arg.empty()) rc.variants = parse_variants(variants_arg);
      command = "sweep";
    }
    entries = sweep(rc, rc.variants, rc.comm_rates, threads);
    write_outputs(out_dir, rc, command, entries);
    print_table(out, entries);
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qici::cli
