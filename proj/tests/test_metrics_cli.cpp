#include "common.hpp"

#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace qici;
using namespace qici::test;
namespace fs = std::filesystem;

namespace {

TrialSummary constant_summary(int agents, int steps, double pos, double ori) {
  TrialSummary s;
  s.agents = agents;
  s.steps = steps;
  const std::size_t cells = static_cast<std::size_t>(agents) * steps;
  s.pos_sq.assign(cells, pos * pos);
  s.ori_sq.assign(cells, ori * ori);
  s.nees.assign(cells, 9.0);
  s.valid.assign(cells, 1);
  s.nees_valid.assign(cells, 1);
  s.divergence_step.assign(agents, -1);
  return s;
}

RunConfig tiny_config() {
  RunConfig rc;
  rc.scenario.steps = 40;
  rc.trials = 2;
  rc.comm_rates = {0.0, 0.5};
  rc.variants = {Variant::ICI, Variant::CENTRALIZED};
  return rc;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("qici_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string write_config(const fs::path& dir, const nlohmann::json& j, const std::string& name = "config.json") {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p.string();
}

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (out_text) *out_text = out.str();
  return code;
}

}  // namespace

TEST(StepMetrics, ZeroErrorAndIdentityCovariance) {
  Rng rng(121);
  const TargetState x = random_state(rng);
  const StepMetrics m = step_metrics(Estimate{x, Mat9::Identity()}, x);
  EXPECT_EQ(m.pos_err, 0.0);
  EXPECT_EQ(m.ori_err, 0.0);
  EXPECT_EQ(m.nees, 0.0);
  EXPECT_TRUE(m.nees_valid);
}

TEST(StepMetrics, PositionOffset) {
  TargetState truth;
  Estimate e{truth, 0.25 * Mat9::Identity()};
  e.state.p = Vec3(0.3, 0.4, 0.0);
  const StepMetrics m = step_metrics(e, truth);
  EXPECT_DOUBLE_EQ(m.pos_err, 0.5);
  EXPECT_NEAR(m.nees, 0.25 / 0.25, 1e-14);
}

TEST(StepMetrics, YawError) {
  TargetState truth;
  Estimate e{truth, Mat9::Identity()};
  e.state.q = Quaternion::from_axis_angle(Vec3::UnitZ(), 0.1);
  EXPECT_NEAR(step_metrics(e, truth).ori_err, 0.1, 1e-3);
  EXPECT_NEAR(step_metrics(e, truth).ori_err * kRadToDeg, 5.7296, 0.06);
}

TEST(StepMetrics, NeesOfConsistentEstimatorAveragesDof) {
  Rng rng(122);
  const Mat9 P = 1e-4 * random_spd<9>(rng, 0.5);
  const Eigen::LLT<Mat9> llt(P);
  const Mat9 L = llt.matrixL();
  std::normal_distribution<double> n(0.0, 1.0);
  const int draws = 100000;
  double sum = 0.0;
  const TargetState truth = random_state(rng);
  for (int i = 0; i < draws; ++i) {
    Vec9 w;
    for (int c = 0; c < 9; ++c) w[c] = n(rng);
    sum += step_metrics(Estimate{boxplus(truth, L * w), P}, truth).nees;
  }
  EXPECT_NEAR(sum / draws, 9.0, 3 * std::sqrt(18.0 / draws));
}

TEST(StepMetrics, NonPositiveCovarianceFlagsNees) {
  TargetState x;
  Estimate e{x, Mat9::Zero()};
  EXPECT_FALSE(step_metrics(e, x).nees_valid);
}

TEST(NeesBand, ReferenceQuantiles) {
  // chi-square(9N) quantiles at 2.5% and 97.5%, divided by N.
  const ChiSquareBand b400 = nees_band(9, 400);
  EXPECT_NEAR(b400.lower, 8.588984691837199, 1e-9);
  EXPECT_NEAR(b400.upper, 9.420486459159026, 1e-9);
  const ChiSquareBand b50 = nees_band(9, 50);
  EXPECT_NEAR(b50.lower, 7.862353756984602, 1e-9);
  EXPECT_NEAR(b50.upper, 10.213394226490855, 1e-9);
  const ChiSquareBand b1 = nees_band(9, 1);
  EXPECT_NEAR(b1.lower, 2.7003894999803584, 1e-9);
  EXPECT_NEAR(b1.upper, 19.02276779864163, 1e-9);
  EXPECT_THROW(nees_band(0, 1), std::invalid_argument);
}

TEST(Aggregate, SingleTrialSingleStep) {
  const AggregateReport r = aggregate(std::vector<TrialSummary>{constant_summary(1, 1, 0.3, 0.01)});
  EXPECT_DOUBLE_EQ(r.network_prmse, 0.3);
  EXPECT_DOUBLE_EQ(r.median_trial_prmse, 0.3);
  EXPECT_NEAR(r.network_ormse_deg, 0.01 * kRadToDeg, 1e-14);
  EXPECT_DOUBLE_EQ(r.mean_abs_nees_deviation, 0.0);
}

TEST(Aggregate, ConstantErrorGivesThatRmse) {
  std::vector<TrialSummary> trials;
  for (int t = 0; t < 5; ++t) trials.push_back(constant_summary(4, 30, 0.7, 0.1));
  const AggregateReport r = aggregate(trials);
  EXPECT_NEAR(r.network_prmse, 0.7, 1e-14);
  for (double a : r.agent_prmse) EXPECT_NEAR(a, 0.7, 1e-14);
  EXPECT_NEAR(r.network_ormse_deg, 0.1 * kRadToDeg, 1e-12);
  EXPECT_EQ(r.band.samples, 20);
}

TEST(Aggregate, NetworkPrmseIsMeanOfAgentRmse) {
  TrialSummary s = constant_summary(2, 2, 0.0, 0.0);
  s.pos_sq = {1.0, 4.0, 1.0, 4.0};  // agent 0 error 1, agent 1 error 2
  const AggregateReport r = aggregate(std::vector<TrialSummary>{s});
  EXPECT_DOUBLE_EQ(r.agent_prmse[0], 1.0);
  EXPECT_DOUBLE_EQ(r.agent_prmse[1], 2.0);
  EXPECT_DOUBLE_EQ(r.network_prmse, 1.5);
}

TEST(Aggregate, MedianOverTrialsAndDivergence) {
  std::vector<TrialSummary> trials{constant_summary(2, 3, 1.0, 0.0), constant_summary(2, 3, 5.0, 0.0),
                                   constant_summary(2, 3, 2.0, 0.0)};
  trials[1].divergence_step[0] = 2;
  trials[1].valid[trials[1].cell(2, 0)] = 0;
  const AggregateReport r = aggregate(trials);
  EXPECT_DOUBLE_EQ(r.median_trial_prmse, 2.0);
  EXPECT_EQ(r.divergence_events, 1);
  EXPECT_EQ(r.trials_with_divergence, 1);
  EXPECT_EQ(r.excluded_cells, 1);
  EXPECT_EQ(r.count[r.cell(2, 0)], 2);
}

TEST(Median, DropsNonFiniteValues) {
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_DOUBLE_EQ(median({std::nan(""), 1.0, 3.0}), 2.0);
  EXPECT_TRUE(std::isnan(median({})));
}

TEST(Aggregate, RecordsAndSummariesAgree) {
  Scenario sc;
  sc.steps = 60;
  const auto records = run_monte_carlo(sc, Variant::ICI, 2);
  const AggregateReport a = aggregate(records);
  std::vector<TrialSummary> s{summarize(records[0]), summarize(records[1])};
  const AggregateReport b = aggregate(s);
  EXPECT_EQ(a.network_prmse, b.network_prmse);
  EXPECT_EQ(a.mean_nees, b.mean_nees);
  EXPECT_THROW(aggregate(std::vector<TrialSummary>{}), std::invalid_argument);
}

TEST(CsvReport, RoundTripReproducesRmse) {
  const RunConfig rc = tiny_config();
  const auto entries = cli::sweep(rc, rc.variants, rc.comm_rates, 1);
  std::stringstream rmse, nees;
  write_rmse_csv(rmse, entries);
  write_nees_csv(nees, entries);
  const auto rows = read_csv(rmse);
  const auto nees_rows = read_csv(nees);

  for (const auto& e : entries) {
    std::map<std::string, std::pair<double, long>> pos, ori;
    for (const auto& row : rows) {
      if (row.variant != to_string(e.variant) || row.comm_rate != e.comm_rate) continue;
      auto& acc = row.metric == "pos_rmse_m" ? pos[row.agent] : ori[row.agent];
      acc.first += row.count * row.value * row.value;
      acc.second += row.count;
    }
    ASSERT_EQ(static_cast<int>(pos.size()), e.report.agents);
    double network = 0.0;
    for (int a = 0; a < e.report.agents; ++a) {
      const auto& p = pos[std::to_string(a)];
      const auto& o = ori[std::to_string(a)];
      const double prmse = std::sqrt(p.first / p.second);
      EXPECT_NEAR(prmse, e.report.agent_prmse[a], 1e-9 * e.report.agent_prmse[a]);
      EXPECT_NEAR(std::sqrt(o.first / o.second), e.report.agent_ormse_deg[a], 1e-9 * e.report.agent_ormse_deg[a]);
      network += prmse;
    }
    EXPECT_NEAR(network / e.report.agents, e.report.network_prmse, 1e-9 * e.report.network_prmse);

    int k = 0;
    for (const auto& row : nees_rows) {
      if (row.variant != to_string(e.variant) || row.comm_rate != e.comm_rate) continue;
      EXPECT_EQ(row.value, e.report.mean_nees[k]);
      ++k;
    }
    EXPECT_EQ(k, e.report.steps);
  }
}

TEST(CsvReport, FormatDoubleRoundTrips) {
  Rng rng(123);
  std::normal_distribution<double> n(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = n(rng);
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Sweep, ReusesRateIndependentRuns) {
  const RunConfig rc = tiny_config();
  const auto entries = cli::sweep(rc, {Variant::ICI, Variant::CI, Variant::CENTRALIZED}, {0.0, 0.5}, 1);
  ASSERT_EQ(entries.size(), 6u);
  EXPECT_EQ(entries[0].report.network_prmse, entries[2].report.network_prmse);
  EXPECT_EQ(entries[4].report.network_prmse, entries[5].report.network_prmse);
  EXPECT_NE(entries[1].report.network_prmse, entries[3].report.network_prmse);
  EXPECT_EQ(entries[4].report.agents, 1);
}

TEST(Config, JsonRoundTrip) {
  RunConfig rc = tiny_config();
  rc.scenario.trajectory.preset = TrajectoryPreset::B;
  rc.scenario.cameras[3].max_off_axis = 0.7;
  const RunConfig back = config_from_json(to_json(rc));
  EXPECT_EQ(to_json(back), to_json(rc));
  EXPECT_EQ(config_digest(back), config_digest(rc));
  EXPECT_LE((back.scenario.cameras[2].R_cg - rc.scenario.cameras[2].R_cg).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  nlohmann::json j = to_json(tiny_config());
  j["bogus"] = 1;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(tiny_config());
  j["dt"] = -1.0;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(tiny_config());
  j["variants"] = {"kalman"};
  EXPECT_THROW(config_from_json(j), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/qici.json"), ConfigError);
}

TEST(Cli, SimulateWritesAllOutputs) {
  TempDir dir;
  const std::string cfg = write_config(dir.path(), to_json(tiny_config()));
  const fs::path out = dir.path() / "out";
  std::string text;
  EXPECT_EQ(run_cli({"simulate", "--config", cfg, "--variant", "ici", "--comm-rate", "0.5", "--out", out.string()}, &text), 0);
  for (const char* f : {"rmse.csv", "nees.csv", "report.json", "meta.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  std::ifstream meta(out / "meta.json");
  const auto j = nlohmann::json::parse(meta);
  EXPECT_EQ(j["command"], "simulate");
  EXPECT_EQ(j["config_digest"].get<std::string>().size(), 16u);
  EXPECT_NE(text.find("ici"), std::string::npos);
  std::ifstream rmse(out / "rmse.csv");
  EXPECT_EQ(read_csv(rmse).size(), 8u * 40 * 2);
}

TEST(Cli, MissingConfigIsUsageError) {
  TempDir dir;
  const fs::path out = dir.path() / "out";
  EXPECT_EQ(run_cli({"simulate", "--variant", "ici", "--out", out.string()}), 2);
  EXPECT_EQ(run_cli({"simulate", "--config", (dir.path() / "absent.json").string(), "--variant", "ici", "--out", out.string()}), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, BadConfigLeavesNoOutputs) {
  TempDir dir;
  nlohmann::json j = to_json(tiny_config());
  j["steps"] = 0;
  const std::string cfg = write_config(dir.path(), j);
  const fs::path out = dir.path() / "out";
  EXPECT_EQ(run_cli({"sweep", "--config", cfg, "--out", out.string()}), 2);
  EXPECT_FALSE(fs::exists(out));
  const std::string good = write_config(dir.path(), to_json(tiny_config()), "good.json");
  EXPECT_EQ(run_cli({"simulate", "--config", good, "--variant", "kalman", "--out", out.string()}), 2);
  EXPECT_EQ(run_cli({"simulate", "--config", good, "--variant", "ici", "--comm-rate", "1.5", "--out", out.string()}), 2);
  EXPECT_EQ(run_cli({"sweep", "--config", good, "--rates", "0,abc", "--out", out.string()}), 2);
  EXPECT_EQ(run_cli({"sweep", "--config", good, "--threads", "0", "--out", out.string()}), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, SweepRowsPerVariantAndRate) {
  TempDir dir;
  const std::string cfg = write_config(dir.path(), to_json(tiny_config()));
  const fs::path out = dir.path() / "out";
  ASSERT_EQ(run_cli({"sweep", "--config", cfg, "--variants", "ici,ci,centralized", "--rates", "0,0.4", "--out", out.string()}), 0);
  std::ifstream rmse(out / "rmse.csv");
  std::map<std::pair<std::string, double>, int> rows;
  for (const auto& r : read_csv(rmse)) ++rows[{r.variant, r.comm_rate}];
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ((rows[{"ici", 0.4}]), 8 * 40 * 2);
  EXPECT_EQ((rows[{"centralized", 0.4}]), 40 * 2);
  std::ifstream report(out / "report.json");
  const auto j = nlohmann::json::parse(report);
  EXPECT_EQ(j["table"].size(), 6u);
  EXPECT_EQ(j["entries"][0]["trials"], 2);
}

TEST(Cli, PrintConfigParses) {
  std::string text;
  ASSERT_EQ(run_cli({"selftest", "--print-config"}, &text), 0);
  const RunConfig rc = config_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(to_json(rc), to_json(RunConfig{}));
}

TEST(Cli, SelftestPasses) {
  std::string text;
  EXPECT_EQ(run_cli({"selftest"}, &text), 0);
  EXPECT_EQ(text.find("FAIL"), std::string::npos) << text;
}

TEST(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run_cli({}), 2); }
