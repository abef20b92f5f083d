// rgtw: command-line front end for measures, simulation, estimation,
// forecasting, backtesting and the simulation study.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "rgtw/backtest.hpp"
#include "rgtw/estimate.hpp"
#include "rgtw/forecast.hpp"
#include "rgtw/io.hpp"
#include "rgtw/measures.hpp"
#include "rgtw/model.hpp"
#include "rgtw/simstudy.hpp"
#include "rgtw/synthetic.hpp"

namespace fs = std::filesystem;
using rgtw::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitInput = 2;

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string manifest_path(const std::string& explicit_path, const std::string& out) {
  return explicit_path.empty() ? out + ".manifest.json" : explicit_path;
}

void write_manifest(const std::string& path, const rgtw::io::Manifest& m) {
  rgtw::io::write_file(path, m.to_json().dump(2) + "\n");
}

std::vector<double> parse_alpha_list(const std::vector<double>& alphas) {
  if (alphas.empty()) throw rgtw::InputError("at least one alpha is required");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 0.5)) throw rgtw::InputError("alpha must lie in (0, 0.5), got " + rgtw::io::fmt(a));
  }
  return alphas;
}

// ---------------------------------------------------------------------------
// measures

struct MeasuresArgs {
  std::string intraday, fine, daily, out = "measures.csv", manifest;
  std::size_t scaling_window = 66, coarse_len = 0;
  double min_bar_fraction = 0.8;

  json config() const {
    json j;
    j["intraday"] = intraday;
    if (!fine.empty()) j["fine"] = fine;
    j["daily"] = daily;
    j["scaling-window"] = scaling_window;
    j["coarse-len"] = coarse_len;
    j["min-bar-fraction"] = min_bar_fraction;
    j["out"] = out;
    return j;
  }
};

int cmd_measures(const MeasuresArgs& a) {
  Stopwatch sw;
  const auto coarse = rgtw::io::read_intraday_bars(rgtw::io::read_csv(a.intraday));
  const auto fine = a.fine.empty() ? coarse : rgtw::io::read_intraday_bars(rgtw::io::read_csv(a.fine));
  const auto daily = rgtw::io::read_daily_bars(rgtw::io::read_csv(a.daily));
  rgtw::MeasureOptions opt;
  opt.scaling_window = a.scaling_window;
  opt.coarse_len = a.coarse_len;
  opt.min_bar_fraction = a.min_bar_fraction;
  const auto table = rgtw::compute_measures(coarse, fine, daily, opt);
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << '\n';
  rgtw::io::write_file(a.out, rgtw::io::measures_csv(table));

  rgtw::io::Manifest m;
  m.command = "measures";
  m.config = a.config();
  m.add_input(a.intraday);
  if (!a.fine.empty()) m.add_input(a.fine);
  m.add_input(a.daily);
  m.add_output(a.out);
  m.timings["total"] = sw.seconds();
  write_manifest(manifest_path(a.manifest, a.out), m);
  std::cerr << "measures: " << table.days.size() << " days written to " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string model = "model1", params, out = "series.csv", intraday, start_date = "2015-01-05", manifest;
  std::size_t n = 1000, fine_bars = 390, coarse_factor = 5;
  std::uint64_t seed = 7;

  json config() const {
    json j;
    j["model"] = model;
    if (!params.empty()) j["params"] = params;
    j["n"] = n;
    j["seed"] = seed;
    j["out"] = out;
    if (!intraday.empty()) {
      j["intraday"] = intraday;
      j["fine-bars"] = fine_bars;
      j["coarse-factor"] = coarse_factor;
    }
    j["start-date"] = start_date;
    return j;
  }
};

int cmd_simulate(const SimulateArgs& a) {
  Stopwatch sw;
  rgtw::io::Manifest m;
  m.command = "simulate";
  m.config = a.config();
  m.seeds["seed"] = a.seed;

  rgtw::ModelKind kind = rgtw::ModelKind::RgTWG;
  std::vector<double> theta;
  if (!a.params.empty()) {
    const auto p = rgtw::io::read_params(a.params);
    kind = p.model;
    theta = p.theta;
    m.add_input(a.params);
  } else if (a.model == "model1") {
    theta = rgtw::model1_params().to_vector();
  } else {
    throw rgtw::InputError("simulate needs --model model1 or a --params file");
  }
  const rgtw::Date start = rgtw::parse_date(a.start_date);

  if (!a.intraday.empty()) {
    if (!rgtw::is_realized(kind)) throw rgtw::InputError("intraday simulation needs a realized-GARCH model");
    rgtw::SyntheticOptions so;
    so.days = a.n;
    so.fine_per_day = a.fine_bars;
    so.coarse_factor = a.coarse_factor;
    so.start = start;
    so.seed = a.seed;
    const auto mk = rgtw::simulate_market(rgtw::RgParams::from_vector(kind, theta), so);
    const fs::path dir(a.intraday);
    rgtw::io::write_file(dir / "fine.csv", rgtw::io::intraday_csv(mk.fine));
    rgtw::io::write_file(dir / "coarse.csv", rgtw::io::intraday_csv(mk.coarse));
    rgtw::io::write_file(dir / "daily.csv", rgtw::io::daily_csv(mk.daily));
    for (const char* f : {"fine.csv", "coarse.csv", "daily.csv"}) m.add_output(dir / f);
    m.timings["total"] = sw.seconds();
    write_manifest(manifest_path(a.manifest, (dir / "market").string()), m);
    std::cerr << "simulate: " << mk.daily.size() << " intraday days written to " << dir.string() << '\n';
    return kExitOk;
  }

  std::mt19937_64 rng(a.seed);
  std::vector<rgtw::Date> days;
  rgtw::Date d = start;
  for (std::size_t t = 0; t < a.n; ++t) {
    days.push_back(d);
    d = rgtw::next_business_day(d);
  }
  std::string text;
  if (rgtw::is_realized(kind)) {
    const auto path = rgtw::simulate(rgtw::RgParams::from_vector(kind, theta), a.n, rng);
    text = rgtw::io::series_csv(days, path.r, path.x, path.h);
  } else {
    const auto path = rgtw::simulate_garch(rgtw::GarchParams::from_vector(kind, theta), a.n, rng);
    std::vector<double> sq(a.n);
    for (std::size_t t = 0; t < a.n; ++t) sq[t] = path.r[t] * path.r[t];
    text = rgtw::io::series_csv(days, path.r, sq, path.h);
  }
  rgtw::io::write_file(a.out, text);
  m.add_output(a.out);
  m.timings["total"] = sw.seconds();
  write_manifest(manifest_path(a.manifest, a.out), m);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string input, measure = "subrv", model = "RG-TWG", estimator = "mcmc", out = "params.json", chain_out,
                     manifest;
  std::uint64_t seed = 1;
  std::size_t last = 0;
  bool full_scale = false;

  json config() const {
    json j;
    j["input"] = input;
    j["measure"] = measure;
    j["model"] = model;
    j["estimator"] = estimator;
    j["seed"] = seed;
    j["last"] = last;
    j["full-scale"] = full_scale;
    j["out"] = out;
    if (!chain_out.empty()) j["chain-out"] = chain_out;
    return j;
  }
};

std::string chain_csv(const rgtw::Chain& chain, const std::vector<std::string>& names) {
  std::string s = "iter,block";
  s += ",accepted";
  for (const auto& n : names) s += ',' + n;
  s += ",logpost\n";
  for (std::size_t i = 0; i < chain.size(); ++i) {
    for (std::size_t b = 0; b < chain.block_map.size(); ++b) {
      const auto st = chain.state_after(i, b);
      s += std::to_string(i) + ',' + std::to_string(b) + ',' +
           std::to_string(chain.accepted(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)));
      for (Eigen::Index j = 0; j < st.size(); ++j) s += ',' + rgtw::io::fmt(st[j]);
      s += ',' + rgtw::io::fmt(chain.block_logpost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b))) +
           '\n';
    }
  }
  return s;
}

int cmd_estimate(const EstimateArgs& a) {
  Stopwatch sw;
  const auto kind = rgtw::parse_model_kind(a.model);
  const auto est = rgtw::parse_estimator(a.estimator);
  auto series = rgtw::io::read_realized_series(rgtw::io::read_csv(a.input), rgtw::parse_measure_kind(a.measure));
  std::size_t first = 0;
  if (a.last > 0) {
    if (a.last > series.size()) throw rgtw::InputError("--last exceeds the series length");
    first = series.size() - a.last;
  }
  const std::span<const double> r(series.returns.data() + first, series.size() - first);
  const std::span<const double> x(series.measure.data() + first, series.size() - first);
  const rgtw::ModelData data{r, x, rgtw::initial_variance(r)};
  rgtw::McmcConfig cfg = a.full_scale ? rgtw::McmcConfig{} : rgtw::McmcConfig::shortened();
  cfg.seed = a.seed;
  const auto fit = rgtw::fit_model(kind, data, est, rgtw::default_start(kind), cfg, true);

  const auto names = rgtw::parameter_names(kind);
  json j = rgtw::io::params_json(kind, fit.theta);
  j["estimator"] = std::string(rgtw::estimator_name(est));
  j["measure"] = std::string(rgtw::to_string(series.kind));
  j["observations"] = r.size();
  j["loglik"] = fit.loglik;
  j["warning"] = fit.warning;
  if (est == rgtw::Estimator::Mcmc && fit.chain) {
    const auto post = rgtw::posterior_point(*fit.chain);
    json p;
    for (std::size_t i = 0; i < names.size(); ++i) {
      p[names[i]] = {{"mean", post.mean[i]}, {"sd", post.sd[i]}, {"q025", post.q025[i]}, {"q975", post.q975[i]}};
    }
    j["posterior"] = p;
    json epochs = json::array();
    for (const auto& e : fit.chain->epochs) {
      epochs.push_back({{"begin", e.begin}, {"end", e.end}, {"independent", e.independent},
                        {"acceptance", e.acceptance}, {"sd_change", e.sd_change}});
    }
    j["epochs"] = epochs;
    j["converged"] = fit.chain->converged;
    if (!a.chain_out.empty()) rgtw::io::write_file(a.chain_out, chain_csv(*fit.chain, names));
  }
  rgtw::io::write_file(a.out, j.dump(2) + "\n");

  rgtw::io::Manifest m;
  m.command = "estimate";
  m.config = a.config();
  m.seeds["seed"] = a.seed;
  m.add_input(a.input);
  m.add_output(a.out);
  if (!a.chain_out.empty() && est == rgtw::Estimator::Mcmc) m.add_output(a.chain_out);
  m.timings["total"] = sw.seconds();
  write_manifest(manifest_path(a.manifest, a.out), m);
  if (fit.warning) std::cerr << "warning: estimation flagged (non-convergence or no improvement on the start)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// forecast

struct ForecastArgs {
  std::string input, measure = "subrv", estimator = "mcmc", params, out = "forecasts.csv", plot_data, manifest;
  std::vector<std::string> models{"RG-TWG"};
  std::vector<double> alphas{0.01};
  std::size_t window = 1000, refit_every = 1;
  std::uint64_t seed = 1;
  bool full_scale = false, combine = false;

  json config() const {
    json j;
    j["input"] = input;
    j["measure"] = measure;
    j["model"] = models;
    j["alpha"] = alphas;
    j["window"] = window;
    j["estimator"] = estimator;
    if (!params.empty()) j["params"] = params;
    j["refit-every"] = refit_every;
    j["seed"] = seed;
    j["full-scale"] = full_scale;
    j["combine"] = combine;
    j["out"] = out;
    if (!plot_data.empty()) j["emit-plot-data"] = plot_data;
    return j;
  }
};

int cmd_forecast(const ForecastArgs& a) {
  Stopwatch sw;
  rgtw::io::Manifest m;
  m.command = "forecast";
  m.config = a.config();
  m.seeds["seed"] = a.seed;
  m.add_input(a.input);

  const auto series = rgtw::io::read_realized_series(rgtw::io::read_csv(a.input), rgtw::parse_measure_kind(a.measure));
  const auto alphas = parse_alpha_list(a.alphas);
  std::vector<rgtw::ModelKind> kinds;
  std::optional<rgtw::io::ParamFile> fixed;
  if (!a.params.empty()) {
    fixed = rgtw::io::read_params(a.params);
    m.add_input(a.params);
    kinds.push_back(fixed->model);
  } else {
    for (const auto& s : a.models) kinds.push_back(rgtw::parse_model_kind(s));
  }
  const auto est = rgtw::parse_estimator(a.estimator);

  std::vector<rgtw::ForecastRecord> all;
  std::vector<std::vector<rgtw::ForecastRecord>> per_model;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    rgtw::RollingOptions o;
    o.model = kinds[i];
    o.window = a.window;
    o.alphas = alphas;
    o.refit_every = a.refit_every;
    o.mcmc = a.full_scale ? rgtw::McmcConfig{} : rgtw::McmcConfig::shortened();
    o.seed = rgtw::derive_seed(a.seed, i);
    if (fixed) {
      o.mode = rgtw::FitMode::Fixed;
      o.theta = fixed->theta;
    } else {
      o.mode = est == rgtw::Estimator::Mcmc ? rgtw::FitMode::Mcmc : rgtw::FitMode::Ml;
    }
    Stopwatch msw;
    auto res = rgtw::rolling_forecast(series, o);
    const std::string label = rgtw::model_label(kinds[i], series.kind);
    m.timings[label] = msw.seconds();
    if (res.failures > 0) std::cerr << "warning: " << label << ": " << res.failures << " window fits failed\n";
    per_model.push_back(res.records);
    all.insert(all.end(), res.records.begin(), res.records.end());
  }
  if (a.combine) {
    for (auto method : {rgtw::CombineMethod::Mean, rgtw::CombineMethod::Median, rgtw::CombineMethod::Min,
                        rgtw::CombineMethod::Max}) {
      auto c = rgtw::combine(per_model, method);
      all.insert(all.end(), c.begin(), c.end());
    }
  }
  rgtw::io::write_file(a.out, rgtw::io::forecast_csv(all));
  m.add_output(a.out);
  if (!a.plot_data.empty()) {
    rgtw::io::write_file(a.plot_data, rgtw::io::plot_data_csv(all));
    m.add_output(a.plot_data);
  }
  m.timings["total"] = sw.seconds();
  write_manifest(manifest_path(a.manifest, a.out), m);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// backtest

struct BacktestArgs {
  std::vector<std::string> inputs;
  std::string out = "report.json", table, manifest;
  double mcs_confidence = 0.9;
  std::size_t block_len = 21, n_boot = 5000;
  std::uint64_t seed = 12345;
  bool combine = false;

  json config() const {
    json j;
    j["input"] = inputs;
    j["combine"] = combine;
    j["mcs-confidence"] = mcs_confidence;
    j["block-len"] = block_len;
    j["n-boot"] = n_boot;
    j["seed"] = seed;
    j["out"] = out;
    if (!table.empty()) j["table"] = table;
    return j;
  }
};

json test_json(const rgtw::TestResult& r) {
  json j;
  j["stat"] = r.stat;
  j["pvalue"] = r.pvalue;
  j["reject_5pct"] = r.reject(0.05);
  j["status"] = std::string(rgtw::to_string(r.status));
  return j;
}

template <class F>
json guarded_test(F&& f) {
  try {
    return test_json(f());
  } catch (const rgtw::InputError& e) {
    json j;
    j["stat"] = nullptr;
    j["pvalue"] = nullptr;
    j["reject_5pct"] = false;
    j["status"] = std::string("not computed: ") + e.what();
    return j;
  }
}

int cmd_backtest(const BacktestArgs& a) {
  Stopwatch sw;
  rgtw::io::Manifest m;
  m.command = "backtest";
  m.config = a.config();
  m.seeds["seed"] = a.seed;
  if (a.inputs.empty()) throw rgtw::InputError("backtest needs at least one --input file");
  std::vector<rgtw::ForecastRecord> recs;
  for (const auto& in : a.inputs) {
    auto r = rgtw::io::read_forecasts(rgtw::io::read_csv(in));
    recs.insert(recs.end(), r.begin(), r.end());
    m.add_input(in);
  }
  std::vector<double> alphas;
  for (const auto& r : recs) {
    if (std::find(alphas.begin(), alphas.end(), r.alpha) == alphas.end()) alphas.push_back(r.alpha);
  }
  std::sort(alphas.begin(), alphas.end());

  json report;
  report["groups"] = json::array();
  std::string table =
      "alpha,model,m,vrate,esrate,uc_p,cc_p,ind_p,dq1_p,dq4_p,vqr_p,joint_loss,loss_rank,implied_es_level,mcs_r_p,"
      "mcs_sq_p\n";
  auto pfield = [](const json& t) { return t["pvalue"].is_null() ? std::string() : rgtw::io::fmt(t["pvalue"].get<double>()); };

  for (double alpha : alphas) {
    auto groups = rgtw::group_by_model(recs, alpha);
    if (a.combine && groups.size() > 1) {
      std::vector<std::vector<rgtw::ForecastRecord>> seqs;
      for (const auto& g : groups) {
        if (g.first.rfind("FC-", 0) != 0) seqs.push_back(g.second);
      }
      for (auto method : {rgtw::CombineMethod::Mean, rgtw::CombineMethod::Median, rgtw::CombineMethod::Min,
                          rgtw::CombineMethod::Max}) {
        const std::string label = rgtw::combine_label(method);
        const bool present = std::any_of(groups.begin(), groups.end(), [&](const auto& g) { return g.first == label; });
        if (!present) groups.emplace_back(label, rgtw::combine(seqs, method));
      }
    }
    json g;
    g["alpha"] = alpha;
    g["models"] = json::array();
    std::vector<double> totals;
    std::vector<json> tests;
    for (const auto& [name, seq] : groups) {
      const auto v = rgtw::violations(seq);
      json mj;
      mj["model"] = name;
      mj["m"] = seq.size();
      mj["vrate"] = rgtw::vrate(seq);
      mj["esrate"] = rgtw::esrate(seq);
      mj["uc"] = guarded_test([&] { return rgtw::uc_test(v); });
      mj["cc"] = guarded_test([&] { return rgtw::cc_test(v); });
      mj["ind"] = guarded_test([&] { return rgtw::ind_test(v); });
      mj["dq1"] = guarded_test([&] { return rgtw::dq_test(seq, 1); });
      mj["dq4"] = guarded_test([&] { return rgtw::dq_test(seq, 4); });
      mj["vqr"] = guarded_test([&] { return rgtw::vqr_test(seq); });
      const auto jl = rgtw::joint_loss(seq);
      mj["joint_loss"] = jl.total;
      mj["implied_es_level"] = rgtw::implied_es_level(seq);
      mj["flagged_days"] = std::count_if(seq.begin(), seq.end(), [](const auto& r) { return r.flagged; });
      totals.push_back(jl.total);
      g["models"].push_back(mj);
    }
    // Rank 1 is the smallest total joint loss.
    for (std::size_t i = 0; i < totals.size(); ++i) {
      std::size_t rank = 1;
      for (std::size_t k = 0; k < totals.size(); ++k) {
        if (totals[k] < totals[i] || (totals[k] == totals[i] && k < i)) ++rank;
      }
      g["models"][i]["loss_rank"] = rank;
    }
    std::map<std::string, std::pair<double, double>> mcs_p;
    g["mcs"] = json::array();
    if (groups.size() >= 2) {
      const std::size_t T = groups.front().second.size();
      Eigen::MatrixXd L(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(groups.size()));
      std::vector<std::string> names;
      for (std::size_t j = 0; j < groups.size(); ++j) {
        const auto& seq = groups[j].second;
        if (seq.size() != T) throw rgtw::InputError("forecast alignment error: models differ in length at alpha " + rgtw::io::fmt(alpha));
        for (std::size_t t = 0; t < T; ++t) {
          if (seq[t].day != groups.front().second[t].day) {
            throw rgtw::InputError("forecast alignment error at " + rgtw::format_date(seq[t].day));
          }
        }
        const auto jl = rgtw::joint_loss(seq);
        for (std::size_t t = 0; t < T; ++t) L(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = jl.per_day[t];
        names.push_back(groups[j].first);
      }
      for (auto method : {rgtw::McsMethod::R, rgtw::McsMethod::SQ}) {
        const auto res = rgtw::mcs(L, names, method, a.mcs_confidence, {a.block_len, a.n_boot, a.seed});
        json mj;
        mj["method"] = std::string(rgtw::to_string(method));
        mj["confidence"] = a.mcs_confidence;
        mj["included"] = json::array();
        mj["pvalues"] = json::object();
        for (std::size_t j = 0; j < names.size(); ++j) {
          if (res.included[j]) mj["included"].push_back(names[j]);
          mj["pvalues"][names[j]] = res.pvalues[j];
          auto& slot = mcs_p[names[j]];
          (method == rgtw::McsMethod::R ? slot.first : slot.second) = res.pvalues[j];
        }
        g["mcs"].push_back(mj);
      }
    }
    for (const auto& mj : g["models"]) {
      const std::string name = mj["model"].get<std::string>();
      table += rgtw::io::fmt(alpha) + ',' + name + ',' + std::to_string(mj["m"].get<std::size_t>()) + ',' +
               rgtw::io::fmt(mj["vrate"].get<double>()) + ',' + rgtw::io::fmt(mj["esrate"].get<double>()) + ',' +
               pfield(mj["uc"]) + ',' + pfield(mj["cc"]) + ',' + pfield(mj["ind"]) + ',' + pfield(mj["dq1"]) + ',' +
               pfield(mj["dq4"]) + ',' + pfield(mj["vqr"]) + ',' + rgtw::io::fmt(mj["joint_loss"].get<double>()) +
               ',' + std::to_string(mj["loss_rank"].get<std::size_t>()) + ',' +
               rgtw::io::fmt(mj["implied_es_level"].get<double>()) + ',';
      const auto it = mcs_p.find(name);
      if (it != mcs_p.end()) table += rgtw::io::fmt(it->second.first) + ',' + rgtw::io::fmt(it->second.second);
      else table += ',';
      table += '\n';
    }
    report["groups"].push_back(g);
  }
  rgtw::io::write_file(a.out, report.dump(2) + "\n");
  m.add_output(a.out);
  if (!a.table.empty()) {
    rgtw::io::write_file(a.table, table);
    m.add_output(a.table);
  }
  m.timings["total"] = sw.seconds();
  write_manifest(manifest_path(a.manifest, a.out), m);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simstudy

struct SimstudyArgs {
  std::size_t n = 3000, reps = 100, threads = 1;
  std::uint64_t seed = 2016;
  std::vector<std::string> estimators{"mcmc", "ml"};
  double alpha = 0.01;
  bool full_scale = false, inject_truth = false;
  std::string out = "simstudy.csv", replicates_out, manifest;

  json config() const {
    json j;
    j["n"] = n;
    j["reps"] = reps;
    j["seed"] = seed;
    j["threads"] = threads;
    j["estimator"] = estimators;
    j["alpha"] = alpha;
    j["full-scale"] = full_scale;
    j["inject-truth"] = inject_truth;
    j["out"] = out;
    if (!replicates_out.empty()) j["replicates-out"] = replicates_out;
    return j;
  }
};

int cmd_simstudy(const SimstudyArgs& a) {
  Stopwatch sw;
  rgtw::StudyConfig c;
  c.n = a.n;
  c.reps = a.reps;
  c.seed = a.seed;
  c.threads = a.threads;
  c.alpha = a.alpha;
  c.inject_truth = a.inject_truth;
  c.mcmc = a.full_scale ? rgtw::McmcConfig{} : rgtw::McmcConfig::shortened();
  c.estimators.clear();
  for (const auto& e : a.estimators) c.estimators.push_back(rgtw::parse_estimator(e));
  const auto results = rgtw::run_replicates(c);
  const auto summary = rgtw::summarize(results, c.estimators);
  std::ostringstream os;
  rgtw::write_summary_csv(os, summary);
  rgtw::io::write_file(a.out, os.str());

  rgtw::io::Manifest m;
  m.command = "simstudy";
  m.config = a.config();
  m.seeds["seed"] = a.seed;
  m.add_output(a.out);
  if (!a.replicates_out.empty()) {
    std::ostringstream rs;
    rgtw::write_replicates_csv(rs, results);
    rgtw::io::write_file(a.replicates_out, rs.str());
    m.add_output(a.replicates_out);
  }
  for (std::size_t e = 0; e < c.estimators.size(); ++e) {
    if (summary.failures[e] > 0) {
      std::cerr << "warning: " << rgtw::estimator_name(c.estimators[e]) << ": " << summary.failures[e]
                << " failed replicates excluded\n";
    }
  }
  m.timings["total"] = sw.seconds();
  write_manifest(manifest_path(a.manifest, a.out), m);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stw table

struct StwTableArgs {
  std::vector<double> lambda1{0.6}, k1{1.1}, alphas{0.005, 0.01, 0.025, 0.05};
  std::string out;
};

int cmd_stw_table(const StwTableArgs& a) {
  std::string s = "lambda1,k1,alpha,mu,quantile,es,es_level\n";
  for (double l : a.lambda1) {
    for (double k : a.k1) {
      const auto inn = rgtw::Innovation::stw(l, k);
      const double mu = inn.stw_params().mu();
      for (double al : a.alphas) {
        const auto ve = rgtw::var_es(inn, 1.0, al);
        s += rgtw::io::fmt(l) + ',' + rgtw::io::fmt(k) + ',' + rgtw::io::fmt(al) + ',' + rgtw::io::fmt(mu) + ',' +
             rgtw::io::fmt(ve.var) + ',' + rgtw::io::fmt(ve.es) + ',' + rgtw::io::fmt(inn.cdf(ve.es)) + '\n';
      }
    }
  }
  if (a.out.empty()) std::cout << s;
  else rgtw::io::write_file(a.out, s);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// --config: a flat JSON object (or a manifest's "config" member) replayed as
// flags; flags given on the command line take precedence.

std::string json_token(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return rgtw::io::fmt(v.get<double>());
  return v.dump();
}

std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  json j = rgtw::io::parse_json(rgtw::io::read_file(path), path);
  if (j.contains("config") && j["config"].is_object()) {
    if (j.contains("command") && j["command"].is_string() && (args.size() < 2 || args[1].rfind("-", 0) == 0)) {
      args.insert(args.begin() + 1, j["command"].get<std::string>());
    }
    j = j["config"];
  }
  if (!j.is_object()) throw rgtw::InputError(path + ": config must be a JSON object");
  std::vector<std::string> extra;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& s) {
      return s == flag || s.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& e : value) joined += (joined.empty() ? "" : ",") + json_token(e);
      extra.push_back(flag + "=" + joined);
    } else if (!value.is_null()) {
      extra.push_back(flag + "=" + json_token(value));
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

int run(int argc, char** argv) {
  CLI::App app{"Realized-GARCH models with two-sided Weibull returns: measures, estimation, risk forecasts"};
  app.require_subcommand(1);
  app.set_version_flag("--version", RGTW_VERSION);
  int rc = kExitOk;

  MeasuresArgs ma;
  auto* sm = app.add_subcommand("measures", "Daily returns and realized measures from intraday bars");
  sm->add_option("--intraday", ma.intraday, "Coarse-grid intraday CSV (date,interval,open,high,low,close)")->required();
  sm->add_option("--fine", ma.fine, "Fine-grid intraday CSV for sub-sampling (default: the coarse file)");
  sm->add_option("--daily", ma.daily, "Daily CSV (date,open,high,low,close)")->required();
  sm->add_option("--scaling-window", ma.scaling_window, "Trailing days q in the scaling ratio")->capture_default_str();
  sm->add_option("--coarse-len", ma.coarse_len, "Coarse intervals per day (0: modal count)")->capture_default_str();
  sm->add_option("--min-bar-fraction", ma.min_bar_fraction, "Drop days below this share of the modal bar count")
      ->capture_default_str();
  sm->add_option("--out", ma.out, "Output CSV (date,measure_kind,value)")->capture_default_str();
  sm->add_option("--manifest", ma.manifest, "Manifest path (default: <out>.manifest.json)");
  sm->callback([&] { rc = cmd_measures(ma); });

  SimulateArgs sa;
  auto* ss = app.add_subcommand("simulate", "Simulate a daily series or synthetic intraday bars");
  ss->add_option("--model", sa.model, "Built-in parameter set (model1)")->capture_default_str();
  ss->add_option("--params", sa.params, "Parameter JSON to simulate instead of a built-in set");
  ss->add_option("--n", sa.n, "Number of days")->capture_default_str();
  ss->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  ss->add_option("--out", sa.out, "Output CSV (date,return,measure,h)")->capture_default_str();
  ss->add_option("--intraday", sa.intraday, "Write fine.csv, coarse.csv and daily.csv into this directory instead");
  ss->add_option("--fine-bars", sa.fine_bars, "Fine bars per day")->capture_default_str();
  ss->add_option("--coarse-factor", sa.coarse_factor, "Fine bars per coarse bar")->capture_default_str();
  ss->add_option("--start-date", sa.start_date, "First date")->capture_default_str();
  ss->add_option("--manifest", sa.manifest, "Manifest path");
  ss->callback([&] { rc = cmd_simulate(sa); });

  EstimateArgs ea;
  auto* se = app.add_subcommand("estimate", "Fit a model by adaptive MCMC or maximum likelihood");
  se->add_option("--input", ea.input, "Measures CSV or date,return,measure CSV")->required();
  se->add_option("--measure", ea.measure, "rv, rr, scrv, scrr, subrv, subrr")->capture_default_str();
  se->add_option("--model", ea.model, "RG-GG, RG-tG, RG-TWG, G-t, G-TW")->capture_default_str();
  se->add_option("--estimator", ea.estimator, "mcmc or ml")->capture_default_str();
  se->add_option("--seed", ea.seed, "Random seed")->capture_default_str();
  se->add_option("--last", ea.last, "Use only the last N observations (0: all)")->capture_default_str();
  se->add_flag("--full-scale", ea.full_scale, "Full-length MCMC epochs");
  se->add_option("--out", ea.out, "Parameter JSON")->capture_default_str();
  se->add_option("--chain-out", ea.chain_out, "Chain CSV (one row per block update)");
  se->add_option("--manifest", ea.manifest, "Manifest path");
  se->callback([&] { rc = cmd_estimate(ea); });

  ForecastArgs fa;
  auto* sf = app.add_subcommand("forecast", "Rolling one-step VaR and ES forecasts");
  sf->add_option("--input", fa.input, "Measures CSV or date,return,measure CSV")->required();
  sf->add_option("--measure", fa.measure, "rv, rr, scrv, scrr, subrv, subrr")->capture_default_str();
  sf->add_option("--model", fa.models, "Model ids, comma separated")->delimiter(',')->capture_default_str();
  sf->add_option("--alpha", fa.alphas, "VaR levels, comma separated")->delimiter(',')->capture_default_str();
  sf->add_option("--window", fa.window, "Rolling window length")->capture_default_str();
  sf->add_option("--estimator", fa.estimator, "mcmc or ml")->capture_default_str();
  sf->add_option("--params", fa.params, "Fixed parameter JSON (no re-estimation)");
  sf->add_option("--refit-every", fa.refit_every, "Refit every N days (0: fit once)")->capture_default_str();
  sf->add_option("--seed", fa.seed, "Random seed")->capture_default_str();
  sf->add_flag("--full-scale", fa.full_scale, "Full-length MCMC epochs in every window");
  sf->add_flag("--combine", fa.combine, "Append FC-Mean, FC-Med, FC-Min and FC-Max");
  sf->add_option("--out", fa.out, "Forecast CSV")->capture_default_str();
  sf->add_option("--emit-plot-data", fa.plot_data, "Tidy return/VaR/ES CSV for plotting");
  sf->add_option("--manifest", fa.manifest, "Manifest path");
  sf->callback([&] { rc = cmd_forecast(fa); });

  BacktestArgs ba;
  auto* sb = app.add_subcommand("backtest", "Violation tests, joint loss and model confidence sets");
  sb->add_option("--input", ba.inputs, "Forecast CSV files")->delimiter(',')->required();
  sb->add_flag("--combine", ba.combine, "Add forecast combinations across the input models");
  sb->add_option("--mcs-confidence", ba.mcs_confidence, "MCS confidence level")->capture_default_str();
  sb->add_option("--block-len", ba.block_len, "Moving-block bootstrap length")->capture_default_str();
  sb->add_option("--n-boot", ba.n_boot, "Bootstrap draws")->capture_default_str();
  sb->add_option("--seed", ba.seed, "Bootstrap seed")->capture_default_str();
  sb->add_option("--out", ba.out, "Report JSON")->capture_default_str();
  sb->add_option("--table", ba.table, "Companion CSV table");
  sb->add_option("--manifest", ba.manifest, "Manifest path");
  sb->callback([&] { rc = cmd_backtest(ba); });

  SimstudyArgs sta;
  auto* sst = app.add_subcommand("simstudy", "Bias and RMSE of MCMC and ML on simulated Model 1 data");
  sst->add_option("--n", sta.n, "Observations per replicate")->capture_default_str();
  sst->add_option("--reps", sta.reps, "Replicates (full scale: 5000)")->capture_default_str();
  sst->add_option("--seed", sta.seed, "Random seed")->capture_default_str();
  sst->add_option("--threads", sta.threads, "Worker threads")->capture_default_str();
  sst->add_option("--estimator", sta.estimators, "Estimators, comma separated")->delimiter(',')->capture_default_str();
  sst->add_option("--alpha", sta.alpha, "VaR level for the forecast rows")->capture_default_str();
  sst->add_flag("--full-scale", sta.full_scale, "Full-length MCMC and 5000 replicates unless --reps is given");
  sst->add_flag("--inject-truth", sta.inject_truth, "Skip estimation and use the true parameters");
  sst->add_option("--out", sta.out, "Summary CSV")->capture_default_str();
  sst->add_option("--replicates-out", sta.replicates_out, "Per-replicate CSV");
  sst->add_option("--manifest", sta.manifest, "Manifest path");
  sst->callback([&] {
    if (sta.full_scale && sst->count("--reps") == 0) sta.reps = 5000;
    rc = cmd_simstudy(sta);
  });

  StwTableArgs ta;
  auto* stw = app.add_subcommand("stw", "Standardized two-sided Weibull utilities");
  stw->require_subcommand(1);
  auto* stt = stw->add_subcommand("table", "Quantile and ES table of the shifted STW distribution");
  stt->add_option("--lambda1", ta.lambda1, "Left scale values")->delimiter(',')->capture_default_str();
  stt->add_option("--k1", ta.k1, "Shape values")->delimiter(',')->capture_default_str();
  stt->add_option("--alpha", ta.alphas, "Levels")->delimiter(',')->capture_default_str();
  stt->add_option("--out", ta.out, "Output CSV (default: stdout)");
  stt->callback([&] { rc = cmd_stw_table(ta); });

  std::vector<std::string> args(argv, argv + argc);
  args = expand_config(std::move(args));
  std::vector<const char*> cargs;
  for (const auto& s : args) cargs.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const rgtw::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const rgtw::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const rgtw::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
