#pragma once

// Simulation study: bias and RMSE of the MCMC and ML estimators on Model 1
// data, plus one-step VaR and ES accuracy against each replicate's truth.

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "rgtw/estimate.hpp"
#include "rgtw/forecast.hpp"
#include "rgtw/model.hpp"

namespace rgtw {

struct StudyConfig {
  std::size_t n = 3000;
  std::size_t reps = 100;
  std::uint64_t seed = 2016;
  double alpha = 0.01;
  McmcConfig mcmc = McmcConfig::shortened();
  std::vector<Estimator> estimators{Estimator::Mcmc, Estimator::Ml};
  /// Skip estimation and use the true parameters (pipeline check).
  bool inject_truth = false;
  std::size_t threads = 1;

  void validate() const {
    if (reps < 1) throw InputError("simulation study needs reps >= 1");
    if (n < 100) throw InputError("simulation study needs n >= 100");
    if (!(alpha > 0.0 && alpha < 0.5)) throw InputError("alpha must lie in (0, 0.5)");
    if (estimators.empty()) throw InputError("simulation study needs at least one estimator");
    mcmc.validate();
  }
};

struct ReplicationResult {
  std::size_t rep_id = 0;
  Estimator estimator = Estimator::Mcmc;
  std::vector<double> theta;
  double var_next = 0.0;
  double es_next = 0.0;
  double true_var_next = 0.0;
  double true_es_next = 0.0;
  bool failed = false;
  bool warning = false;
  std::string error;
  double seconds = 0.0;
};

/// Simulates replicate `rep` and fits it with every configured estimator.
inline std::vector<ReplicationResult> run_replicate(std::size_t rep, const StudyConfig& cfg) {
  const RgParams truth = model1_params();
  const ModelKind kind = ModelKind::RgTWG;
  std::mt19937_64 rng(derive_seed(cfg.seed, rep));
  const auto path = simulate(truth, cfg.n, rng);
  const ModelData data{path.r, path.x, initial_variance(path.r)};
  const auto true_ve = var_es(truth.innovation(), path.h[cfg.n], cfg.alpha);

  std::vector<ReplicationResult> out;
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    ReplicationResult res;
    res.rep_id = rep;
    res.estimator = cfg.estimators[e];
    res.true_var_next = true_ve.var;
    res.true_es_next = true_ve.es;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (cfg.inject_truth) {
        res.theta = truth.to_vector();
      } else {
        McmcConfig mc = cfg.mcmc;
        mc.seed = derive_seed(derive_seed(cfg.seed, rep), 1000 + e);
        const auto fit = fit_model(kind, data, res.estimator, default_start(kind), mc);
        if (!std::isfinite(fit.loglik)) throw NumericalError("fit ended at an inadmissible point");
        res.theta = fit.theta;
        res.warning = fit.warning;
      }
      // The true variance path is used for the truth; the fitted one is filtered.
      const double h_next = cfg.inject_truth ? path.h[cfg.n] : one_step_variance(kind, res.theta, data);
      const auto ve = var_es(model_innovation(kind, res.theta), h_next, cfg.alpha);
      res.var_next = ve.var;
      res.es_next = ve.es;
    } catch (const std::exception& ex) {
      res.failed = true;
      res.error = ex.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(res));
  }
  return out;
}

/// All replicates, ordered by (rep_id, estimator) regardless of thread count.
inline std::vector<ReplicationResult> run_replicates(const StudyConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<ReplicationResult>> per_rep(cfg.reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.reps; r = next++) per_rep[r] = run_replicate(r, cfg);
  };
  const std::size_t nt = std::max<std::size_t>(1, std::min(cfg.threads, cfg.reps));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < nt; ++i) pool.emplace_back(worker);
  }
  std::vector<ReplicationResult> out;
  for (auto& v : per_rep) {
    for (auto& r : v) out.push_back(std::move(r));
  }
  return out;
}

struct SummaryRow {
  std::string name;
  double truth = 0.0;
  /// Indexed like StudyConfig::estimators.
  std::vector<double> mean;
  std::vector<double> rmse;
};

struct StudySummary {
  std::vector<Estimator> estimators;
  std::vector<SummaryRow> rows;  // parameters, then VaR and ES
  std::vector<std::size_t> used;
  std::vector<std::size_t> failures;
  std::vector<std::size_t> warnings;

  const SummaryRow& row(std::string_view name) const {
    for (const auto& r : rows) {
      if (r.name == name) return r;
    }
    throw InputError("no summary row '" + std::string(name) + "'");
  }
  std::size_t column(Estimator e) const {
    for (std::size_t i = 0; i < estimators.size(); ++i) {
      if (estimators[i] == e) return i;
    }
    throw InputError("estimator not in summary");
  }
};

/// Mean and RMSE per parameter and estimator; failed replicates are excluded
/// and counted. VaR and ES truth is the mean of the per-replicate truths and
/// their RMSE is taken against each replicate's own truth.
inline StudySummary summarize(const std::vector<ReplicationResult>& results,
                              const std::vector<Estimator>& estimators) {
  const auto names = parameter_names(ModelKind::RgTWG);
  const auto truth = model1_params().to_vector();
  const std::size_t E = estimators.size();
  StudySummary s;
  s.estimators = estimators;
  s.used.assign(E, 0);
  s.failures.assign(E, 0);
  s.warnings.assign(E, 0);
  for (std::size_t j = 0; j < names.size() + 2; ++j) {
    SummaryRow row;
    row.name = j < names.size() ? names[j] : (j == names.size() ? "VaR" : "ES");
    row.truth = j < names.size() ? truth[j] : 0.0;
    row.mean.assign(E, 0.0);
    row.rmse.assign(E, 0.0);
    s.rows.push_back(std::move(row));
  }
  const std::size_t iv = names.size();
  const std::size_t ie = names.size() + 1;
  std::vector<double> var_truth_sum(E, 0.0);
  std::vector<double> es_truth_sum(E, 0.0);
  for (const auto& r : results) {
    std::size_t e = E;
    for (std::size_t i = 0; i < E; ++i) {
      if (estimators[i] == r.estimator) e = i;
    }
    if (e == E) continue;
    if (r.failed) {
      ++s.failures[e];
      continue;
    }
    ++s.used[e];
    if (r.warning) ++s.warnings[e];
    for (std::size_t j = 0; j < names.size(); ++j) {
      s.rows[j].mean[e] += r.theta[j];
      s.rows[j].rmse[e] += (r.theta[j] - truth[j]) * (r.theta[j] - truth[j]);
    }
    s.rows[iv].mean[e] += r.var_next;
    s.rows[iv].rmse[e] += (r.var_next - r.true_var_next) * (r.var_next - r.true_var_next);
    s.rows[ie].mean[e] += r.es_next;
    s.rows[ie].rmse[e] += (r.es_next - r.true_es_next) * (r.es_next - r.true_es_next);
    var_truth_sum[e] += r.true_var_next;
    es_truth_sum[e] += r.true_es_next;
  }
  for (std::size_t e = 0; e < E; ++e) {
    const double k = static_cast<double>(s.used[e]);
    for (auto& row : s.rows) {
      row.mean[e] = k > 0 ? row.mean[e] / k : std::numeric_limits<double>::quiet_NaN();
      row.rmse[e] = k > 0 ? std::sqrt(row.rmse[e] / k) : std::numeric_limits<double>::quiet_NaN();
    }
  }
  // Every estimator sees the same replicates, so take the truth from the first one with data.
  for (std::size_t e = 0; e < E; ++e) {
    if (s.used[e] > 0) {
      s.rows[iv].truth = var_truth_sum[e] / static_cast<double>(s.used[e]);
      s.rows[ie].truth = es_truth_sum[e] / static_cast<double>(s.used[e]);
      break;
    }
  }
  return s;
}

inline StudySummary run_study(const StudyConfig& cfg) {
  return summarize(run_replicates(cfg), cfg.estimators);
}

/// One row per parameter: true value, then mean and RMSE per estimator, then
/// per-estimator failure counts.
inline void write_summary_csv(std::ostream& os, const StudySummary& s) {
  os << "parameter,true";
  for (auto e : s.estimators) os << ',' << estimator_name(e) << "_mean," << estimator_name(e) << "_rmse";
  for (auto e : s.estimators) os << ',' << estimator_name(e) << "_failures";
  os << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& row : s.rows) {
    os << row.name << ',' << num(row.truth);
    for (std::size_t e = 0; e < s.estimators.size(); ++e) os << ',' << num(row.mean[e]) << ',' << num(row.rmse[e]);
    for (std::size_t e = 0; e < s.estimators.size(); ++e) os << ',' << s.failures[e];
    os << '\n';
  }
}

/// Per-replicate rows for auditing the summary.
inline void write_replicates_csv(std::ostream& os, const std::vector<ReplicationResult>& results) {
  os << "rep,estimator,failed,warning";
  for (const auto& n : parameter_names(ModelKind::RgTWG)) os << ',' << n;
  os << ",var_next,es_next,true_var_next,true_es_next\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  const std::size_t np = parameter_names(ModelKind::RgTWG).size();
  for (const auto& r : results) {
    os << r.rep_id << ',' << estimator_name(r.estimator) << ',' << (r.failed ? 1 : 0) << ',' << (r.warning ? 1 : 0);
    for (std::size_t j = 0; j < np; ++j) os << ',' << (r.failed ? "" : num(r.theta[j]));
    for (double v : {r.var_next, r.es_next, r.true_var_next, r.true_es_next}) os << ',' << (r.failed ? "" : num(v));
    os << '\n';
  }
}

}  // namespace rgtw
