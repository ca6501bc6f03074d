#pragma once

// Error metrics (RMSE, NEES) and their aggregation over Monte-Carlo trials.
// Everything here reads TrialRecords only.

#include "qici/simnet.hpp"
#include "qici/state.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qici {

inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

struct StepMetrics {
  double pos_err = 0.0;  ///< [m]
  double ori_err = 0.0;  ///< [rad]
  double nees = 0.0;
  bool nees_valid = true;  ///< false when P could not be factorized
};

inline StepMetrics step_metrics(const Estimate& est, const TargetState& truth) {
  const ErrorState e = error_between(est.state, truth);
  StepMetrics m;
  m.pos_err = position_part(e).norm();
  m.ori_err = theta_part(e).norm();
  Eigen::LLT<Mat9> llt(symmetrized(est.P));
  if (!est.P.allFinite() || llt.info() != Eigen::Success ||
      !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    m.nees_valid = false;
    m.nees = 0.0;
  } else {
    m.nees = e.dot(llt.solve(e));
  }
  return m;
}

struct ChiSquareBand {
  double lower = 0.0;
  double upper = 0.0;
  double confidence = 0.95;
  int dof = 0;      ///< per sample
  int samples = 0;  ///< number of NEES values averaged
};

/// Two-sided band for the average of `samples` independent chi-square(dof)
/// variables.
inline ChiSquareBand nees_band(int dof, int samples, double confidence = 0.95) {
  if (dof < 1 || samples < 1) throw std::invalid_argument("chi-square band needs dof, samples >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence outside (0, 1)");
  const boost::math::chi_squared dist(static_cast<double>(dof) * samples);
  const double tail = 0.5 * (1.0 - confidence);
  ChiSquareBand b;
  b.lower = boost::math::quantile(dist, tail) / samples;
  b.upper = boost::math::quantile(boost::math::complement(dist, tail)) / samples;
  b.confidence = confidence;
  b.dof = dof;
  b.samples = samples;
  return b;
}

/// Sufficient statistics of one trial; small enough to keep for every trial.
struct TrialSummary {
  int agents = 0;
  int steps = 0;
  std::vector<double> pos_sq, ori_sq;    ///< steps x agents, squared errors
  std::vector<double> nees;              ///< steps x agents
  std::vector<std::uint8_t> valid;       ///< steps x agents: counted in RMSE
  std::vector<std::uint8_t> nees_valid;  ///< steps x agents
  std::vector<int> divergence_step;      ///< per agent, -1 if never
  Diagnostics diagnostics;

  std::size_t cell(int step, int agent) const { return static_cast<std::size_t>(step) * agents + agent; }

  /// Position RMSE of the trial, averaged over agents with at least one
  /// valid cell; NaN when there are none.
  double network_pos_rmse() const { return network_rmse(pos_sq); }
  double network_ori_rmse() const { return network_rmse(ori_sq); }

 private:
  double network_rmse(const std::vector<double>& sq) const {
    double total = 0.0;
    int used = 0;
    for (int a = 0; a < agents; ++a) {
      double s = 0.0;
      long n = 0;
      for (int k = 0; k < steps; ++k) {
        if (valid[cell(k, a)]) {
          s += sq[cell(k, a)];
          ++n;
        }
      }
      if (n > 0) {
        total += std::sqrt(s / n);
        ++used;
      }
    }
    return used > 0 ? total / used : std::numeric_limits<double>::quiet_NaN();
  }
};

inline TrialSummary summarize(const TrialRecord& r) {
  TrialSummary s;
  s.agents = r.agents;
  s.steps = r.steps;
  const std::size_t cells = static_cast<std::size_t>(r.steps) * r.agents;
  s.pos_sq.assign(cells, 0.0);
  s.ori_sq.assign(cells, 0.0);
  s.nees.assign(cells, 0.0);
  s.valid.assign(cells, 0);
  s.nees_valid.assign(cells, 0);
  s.divergence_step = r.divergence_step;
  s.diagnostics = r.diagnostics;
  for (int k = 0; k < r.steps; ++k) {
    for (int a = 0; a < r.agents; ++a) {
      if (r.is_diverged(k, a)) continue;
      const StepMetrics m = step_metrics(r.posterior(k, a), r.truth[k]);
      if (!std::isfinite(m.pos_err) || !std::isfinite(m.ori_err)) continue;
      const std::size_t c = s.cell(k, a);
      s.pos_sq[c] = m.pos_err * m.pos_err;
      s.ori_sq[c] = m.ori_err * m.ori_err;
      s.valid[c] = 1;
      if (m.nees_valid && std::isfinite(m.nees)) {
        s.nees[c] = m.nees;
        s.nees_valid[c] = 1;
      }
    }
  }
  return s;
}

/// Aggregate over the trials of one (variant, comm rate) cell.
struct AggregateReport {
  int trials = 0;
  int agents = 0;
  int steps = 0;
  int dof = kErrorDim;

  // Per agent and step, pooled over trials.
  std::vector<double> pos_sq_sum, ori_sq_sum;  ///< steps x agents
  std::vector<long> count;                     ///< steps x agents
  // Per step, pooled over trials and agents.
  std::vector<double> nees_sum;
  std::vector<long> nees_count;

  std::vector<double> agent_prmse;      ///< [m]
  std::vector<double> agent_ormse_deg;  ///< [deg]
  std::vector<long> agent_cells;
  double network_prmse = 0.0;      ///< mean of agent_prmse
  double network_ormse_deg = 0.0;  ///< mean of agent_ormse_deg
  std::vector<double> trial_prmse;      ///< per trial network PRMSE, trial order
  double median_trial_prmse = 0.0;
  std::vector<double> mean_nees;        ///< per step
  double mean_abs_nees_deviation = 0.0; ///< mean over steps of |mean_nees - dof|
  ChiSquareBand band;
  int divergence_events = 0;            ///< agent-trials that diverged
  int trials_with_divergence = 0;
  long excluded_cells = 0;
  Diagnostics diagnostics;

  std::size_t cell(int step, int agent) const { return static_cast<std::size_t>(step) * agents + agent; }
};

inline double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Recomputes the derived fields from the pooled sums.
inline void finalize(AggregateReport& r) {
  r.agent_prmse.assign(r.agents, 0.0);
  r.agent_ormse_deg.assign(r.agents, 0.0);
  r.agent_cells.assign(r.agents, 0);
  r.network_prmse = 0.0;
  r.network_ormse_deg = 0.0;
  int used = 0;
  for (int a = 0; a < r.agents; ++a) {
    double ps = 0.0, os = 0.0;
    long n = 0;
    for (int k = 0; k < r.steps; ++k) {
      ps += r.pos_sq_sum[r.cell(k, a)];
      os += r.ori_sq_sum[r.cell(k, a)];
      n += r.count[r.cell(k, a)];
    }
    r.agent_cells[a] = n;
    if (n == 0) {
      r.agent_prmse[a] = r.agent_ormse_deg[a] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    r.agent_prmse[a] = std::sqrt(ps / n);
    r.agent_ormse_deg[a] = std::sqrt(os / n) * kRadToDeg;
    r.network_prmse += r.agent_prmse[a];
    r.network_ormse_deg += r.agent_ormse_deg[a];
    ++used;
  }
  if (used > 0) {
    r.network_prmse /= used;
    r.network_ormse_deg /= used;
  } else {
    r.network_prmse = r.network_ormse_deg = std::numeric_limits<double>::quiet_NaN();
  }
  r.mean_nees.assign(r.steps, std::numeric_limits<double>::quiet_NaN());
  double dev = 0.0;
  int dev_n = 0;
  for (int k = 0; k < r.steps; ++k) {
    if (r.nees_count[k] == 0) continue;
    r.mean_nees[k] = r.nees_sum[k] / r.nees_count[k];
    dev += std::abs(r.mean_nees[k] - r.dof);
    ++dev_n;
  }
  r.mean_abs_nees_deviation = dev_n > 0 ? dev / dev_n : std::numeric_limits<double>::quiet_NaN();
  r.median_trial_prmse = median(r.trial_prmse);
  r.band = nees_band(r.dof, std::max(1, r.trials * r.agents));
}

/// Order-independent fold of trial summaries (given in trial order).
inline AggregateReport aggregate(const std::vector<TrialSummary>& trials) {
  if (trials.empty()) throw std::invalid_argument("aggregate needs at least one trial");
  AggregateReport r;
  r.trials = static_cast<int>(trials.size());
  r.agents = trials.front().agents;
  r.steps = trials.front().steps;
  const std::size_t cells = static_cast<std::size_t>(r.steps) * r.agents;
  r.pos_sq_sum.assign(cells, 0.0);
  r.ori_sq_sum.assign(cells, 0.0);
  r.count.assign(cells, 0);
  r.nees_sum.assign(r.steps, 0.0);
  r.nees_count.assign(r.steps, 0);
  for (const auto& t : trials) {
    if (t.agents != r.agents || t.steps != r.steps) throw std::invalid_argument("trials differ in shape");
    for (std::size_t c = 0; c < cells; ++c) {
      if (!t.valid[c]) {
        ++r.excluded_cells;
        continue;
      }
      r.pos_sq_sum[c] += t.pos_sq[c];
      r.ori_sq_sum[c] += t.ori_sq[c];
      ++r.count[c];
      if (t.nees_valid[c]) {
        const int k = static_cast<int>(c / r.agents);
        r.nees_sum[k] += t.nees[c];
        ++r.nees_count[k];
      }
    }
    int events = 0;
    for (int s : t.divergence_step) events += s >= 0 ? 1 : 0;
    r.divergence_events += events;
    r.trials_with_divergence += events > 0 ? 1 : 0;
    r.diagnostics += t.diagnostics;
    r.trial_prmse.push_back(t.network_pos_rmse());
  }
  finalize(r);
  return r;
}

inline AggregateReport aggregate(const std::vector<TrialRecord>& records) {
  std::vector<TrialSummary> s;
  s.reserve(records.size());
  for (const auto& r : records) s.push_back(summarize(r));
  return aggregate(s);
}

}  // namespace qici
