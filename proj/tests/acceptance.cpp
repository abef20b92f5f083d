// Acceptance suite. Prints one PASS/FAIL line per criterion; run with a list
// of criterion numbers (default: all). Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "rgtw/backtest.hpp"
#include "rgtw/io.hpp"
#include "rgtw/simstudy.hpp"
#include "rgtw/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. STW correctness

constexpr double kNormTol = 1e-8;
constexpr double kVarTol = 1e-6;
constexpr double kRoundTripTol = 1e-10;
constexpr double kEsTol = 1e-8;

Outcome stw_suite() {
  double norm_err = 0.0, var_err = 0.0, trip_err = 0.0, es_err = 0.0;
  std::size_t cells = 0;
  for (double k1 : {0.8, 1.1, 1.5, 2.0, 3.0}) {
    std::vector<double> l1s;
    for (double l1 = 0.3; l1 < k1 - 1e-12; l1 += 0.25) l1s.push_back(l1);
    l1s.push_back(k1);
    for (double l1 : l1s) {
      ++cells;
      const rgtw::StwParams p(l1, k1);
      auto moment = [&](int k) {
        return oracle::integrate_real_line([&](double x) { return std::pow(x, k) * rgtw::stw_pdf(x, p); });
      };
      const double m0 = moment(0), m1 = moment(1), m2 = moment(2);
      norm_err = std::max(norm_err, std::abs(m0 - 1.0));
      var_err = std::max(var_err, std::abs(m2 - m1 * m1 - 1.0));
      for (double a : {0.001, 0.0035, 0.01, 0.5, 0.99}) {
        trip_err = std::max(trip_err, std::abs(rgtw::stw_cdf(rgtw::stw_quantile(a, p), p) - a));
      }
      for (double a : {0.0035, 0.01, 0.05}) {
        if (a >= p.negative_mass()) continue;
        const double var = rgtw::stw_quantile(a, p);
        const double tail = oracle::integrate_below([&](double x) { return x * rgtw::stw_pdf(x, p); }, var);
        es_err = std::max(es_err, std::abs(a * rgtw::stw_es(a, p) - tail));
      }
    }
  }
  Outcome o;
  o.pass = norm_err <= kNormTol && var_err <= kVarTol && trip_err <= kRoundTripTol && es_err <= kEsTol;
  o.detail = std::to_string(cells) + " grid cells; max |int f - 1| = " + num(norm_err) + " (tol " + num(kNormTol) +
             "), max |var - 1| = " + num(var_err) + " (tol " + num(kVarTol) + "), max |F(Q(a)) - a| = " +
             num(trip_err) + " (tol " + num(kRoundTripTol) + "), max ES identity error = " + num(es_err) +
             " (tol " + num(kEsTol) + ")";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Simulation study at desk scale

constexpr double kBetaLo = 0.73, kBetaHi = 0.77;
constexpr double kLambdaLo = 0.57, kLambdaHi = 0.63;
constexpr double kKLo = 1.07, kKHi = 1.13;

Outcome simulation_study() {
  rgtw::StudyConfig cfg;
  cfg.n = 3000;
  cfg.reps = 100;
  cfg.seed = 2016;
  cfg.threads = std::max(1u, std::thread::hardware_concurrency());
  const auto s = rgtw::run_study(cfg);
  const std::size_t mc = s.column(rgtw::Estimator::Mcmc);
  const std::size_t ml = s.column(rgtw::Estimator::Ml);
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  const double beta = s.row("beta").mean[mc];
  const double lambda1 = s.row("lambda1").mean[mc];
  const double k1 = s.row("k1").mean[mc];
  bool pass = in(beta, kBetaLo, kBetaHi) && in(lambda1, kLambdaLo, kLambdaHi) && in(k1, kKLo, kKHi);
  std::string detail = "MCMC means beta " + num(beta) + ", lambda1 " + num(lambda1) + ", k1 " + num(k1) + "; RMSE mcmc/ml";
  for (const char* name : {"beta", "gamma", "sigma_eps", "lambda1", "k1"}) {
    const auto& row = s.row(name);
    pass = pass && row.rmse[mc] < row.rmse[ml];
    detail += std::string(" ") + name + " " + num(row.rmse[mc], 3) + "/" + num(row.rmse[ml], 3);
  }
  detail += "; failures mcmc " + std::to_string(s.failures[mc]) + ", ml " + std::to_string(s.failures[ml]);
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 3. Calibration of true-parameter rolling forecasts

constexpr std::size_t kCalibReps = 200;
constexpr std::size_t kCalibDays = 2000;
constexpr std::size_t kCalibWindow = 500;
constexpr double kCalibAlpha = 0.01;
constexpr double kRejectLo = 0.02, kRejectHi = 0.10;
/// Share of replicates whose VRate must lie within 3 binomial SE of alpha.
constexpr double kVrateCoverage = 0.97;

Outcome calibration() {
  const auto truth = rgtw::model1_params();
  const double se = std::sqrt(kCalibAlpha * (1.0 - kCalibAlpha) / static_cast<double>(kCalibDays));
  std::size_t uc = 0, cc = 0, dq = 0, within = 0, hits = 0;
  for (std::size_t rep = 0; rep < kCalibReps; ++rep) {
    std::mt19937_64 rng(rgtw::derive_seed(2025, rep));
    const auto path = rgtw::simulate(truth, kCalibWindow + kCalibDays, rng);
    rgtw::RealizedSeries s;
    s.kind = rgtw::MeasureKind::SubRV;
    rgtw::Date d = rgtw::parse_date("2000-01-03");
    for (std::size_t t = 0; t < path.r.size(); ++t) {
      s.days.push_back(d);
      d = rgtw::next_business_day(d);
    }
    s.returns = path.r;
    // The measurement equation can produce small negative values; realized measures are nonnegative.
    s.measure = path.x;
    for (auto& x : s.measure) x = std::max(x, 0.0);
    rgtw::RollingOptions o;
    o.window = kCalibWindow;
    o.alphas = {kCalibAlpha};
    o.mode = rgtw::FitMode::Fixed;
    o.theta = truth.to_vector();
    const auto res = rgtw::rolling_forecast(s, o);
    const auto v = rgtw::violations(res.records);
    uc += rgtw::uc_test(v).reject(0.05);
    cc += rgtw::cc_test(v).reject(0.05);
    dq += rgtw::dq_test(res.records, 1).reject(0.05);
    const double vr = rgtw::vrate(res.records);
    within += std::abs(vr - kCalibAlpha) <= 3.0 * se;
    hits += static_cast<std::size_t>(std::lround(vr * static_cast<double>(res.records.size())));
  }
  const double n = static_cast<double>(kCalibReps);
  const double pooled = static_cast<double>(hits) / (n * static_cast<double>(kCalibDays));
  const double pooled_se = se / std::sqrt(n);
  const double r_uc = uc / n, r_cc = cc / n, r_dq = dq / n, cover = within / n;
  auto ok = [](double r) { return r >= kRejectLo && r <= kRejectHi; };
  Outcome o;
  o.pass = ok(r_uc) && ok(r_cc) && ok(r_dq) && cover >= kVrateCoverage &&
           std::abs(pooled - kCalibAlpha) <= 3.0 * pooled_se;
  o.detail = "rejection at 5%: UC " + num(r_uc) + ", CC " + num(r_cc) + ", DQ1 " + num(r_dq) + " (band [" +
             num(kRejectLo) + ", " + num(kRejectHi) + "]); VRate within 3 SE in " + std::to_string(within) + "/" +
             std::to_string(kCalibReps) + " replicates (need " + num(kVrateCoverage) + "); pooled VRate " +
             num(pooled) + " vs 3 SE band " + num(3.0 * pooled_se);
  return o;
}

// ---------------------------------------------------------------------------
// 4. Joint-loss strict consistency

constexpr std::size_t kLossDays = 1'000'000;

Outcome joint_loss_consistency() {
  const auto truth = rgtw::model1_params();
  const double alpha = 0.01;
  const auto inn = truth.innovation();
  std::mt19937_64 rng(417);
  std::normal_distribution<double> noise;
  // Model 1 variance recursion with the measure floored at zero so a million
  // days stay positive; returns are calibrated given h either way. The path is
  // divided by its stationary mean (about 3.6) to put returns on a unit scale,
  // where exp(ES) does not swamp the ES term of the loss.
  std::vector<double> y(kLossDays), scale(kLossDays);
  const double h_bar = rgtw::stationary_variance(truth);
  double h = h_bar;
  for (std::size_t t = 0; t < kLossDays; ++t) {
    const double z = inn.sample(rng);
    scale[t] = std::sqrt(h / h_bar);
    y[t] = scale[t] * z;
    const double x = truth.xi + truth.phi * h + truth.tau1 * z + truth.tau2 * (z * z - 1.0) +
                     truth.sigma_eps * noise(rng);
    h = truth.omega + truth.beta * h + truth.gamma * std::max(x, 0.0);
  }
  const auto ve = rgtw::var_es(inn, 1.0, alpha);
  std::vector<double> base(kLossDays);
  for (std::size_t t = 0; t < kLossDays; ++t) {
    base[t] = rgtw::joint_loss_day(y[t], scale[t] * ve.var, scale[t] * ve.es, alpha);
  }
  // Mean and standard error of the paired daily loss difference against the true pair.
  auto gap = [&](double dv, double de) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t t = 0; t < kLossDays; ++t) {
      const double d = rgtw::joint_loss_day(y[t], scale[t] * ve.var + dv, scale[t] * ve.es + de, alpha) - base[t];
      s += d;
      s2 += d * d;
    }
    const double n = static_cast<double>(kLossDays);
    const double mean = s / n;
    return std::pair{mean, std::sqrt((s2 / n - mean * mean) / n)};
  };
  double closest = std::numeric_limits<double>::infinity();
  double closest_se = 0.0;
  std::string closest_cell;
  bool pass = true;
  for (double dv : {-0.2, -0.1, 0.0, 0.1, 0.2}) {
    for (double de : {-0.2, -0.1, 0.0, 0.1, 0.2}) {
      if (dv == 0.0 && de == 0.0) continue;
      const auto [g, se] = gap(dv, de);
      if (g < closest) {
        closest = g;
        closest_se = se;
        closest_cell = "(" + num(dv) + ", " + num(de) + ")";
      }
      pass = pass && g > 0.0;
    }
  }
  double best = 0.0;
  for (double v : base) best += v;
  best /= static_cast<double>(kLossDays);
  return {pass, "true pair mean loss " + num(best, 6) + "; smallest competitor gap " + num(closest) + " (paired SE " +
                    num(closest_se) + ") at (dVaR, dES) = " + closest_cell + " over 24 grid competitors, " +
                    std::to_string(kLossDays) + " days"};
}

// ---------------------------------------------------------------------------
// 5. Sub-sampled measures against offset enumeration

// Offsets j = 1..nk in the same order as the library, each grid summed left to right.
double enumerate_rv(const std::vector<rgtw::IntradayBar>& bars, std::size_t coarse_len) {
  const std::size_t nk = bars.size() / coarse_len;
  std::vector<double> p{std::log(bars.front().open)};
  for (const auto& b : bars) p.push_back(std::log(b.close));
  double total = 0.0;
  for (std::size_t j = 1; j <= nk; ++j) {
    std::vector<std::size_t> grid{0};
    for (std::size_t t = j; t <= bars.size(); t += nk) grid.push_back(t);
    double rv = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double d = p[grid[i]] - p[grid[i - 1]];
      rv += d * d;
    }
    total += rv;
  }
  return total / static_cast<double>(nk);
}

double enumerate_rr(const std::vector<rgtw::IntradayBar>& bars, std::size_t coarse_len) {
  const std::size_t nk = bars.size() / coarse_len;
  double total = 0.0;
  for (std::size_t j = 1; j <= nk; ++j) {
    std::vector<std::size_t> grid{0};
    for (std::size_t t = j; t <= bars.size(); t += nk) grid.push_back(t);
    double rr = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      double h = bars[grid[i - 1]].high, l = bars[grid[i - 1]].low;
      for (std::size_t k = grid[i - 1]; k < grid[i]; ++k) {
        h = std::max(h, bars[k].high);
        l = std::min(l, bars[k].low);
      }
      const double r = std::log(h) - std::log(l);
      rr += r * r;
    }
    total += rr;
  }
  return total / (4.0 * std::log(2.0) * static_cast<double>(nk));
}

Outcome measures_oracle() {
  rgtw::SyntheticOptions opt;
  opt.days = 40;
  opt.fine_per_day = 390;
  opt.coarse_factor = 5;
  opt.seed = 55;
  const auto mk = rgtw::simulate_market(rgtw::model1_params(), opt);
  std::map<rgtw::Date, std::vector<rgtw::IntradayBar>> days;
  for (const auto& b : mk.fine) days[b.day].push_back(b);
  std::size_t mismatches = 0, checks = 0, degenerate = 0;
  for (const auto& [d, bars] : days) {
    for (std::size_t m : {78u, 26u, 390u}) {
      ++checks;
      if (rgtw::subsampled_rv(bars, m) != enumerate_rv(bars, m)) ++mismatches;
      if (rgtw::subsampled_rr(bars, m) != enumerate_rr(bars, m)) ++mismatches;
    }
    if (rgtw::subsampled_rv(bars, 390) != rgtw::realized_variance(bars) ||
        rgtw::subsampled_rr(bars, 390) != rgtw::realized_range(bars)) {
      ++degenerate;
    }
  }
  return {mismatches == 0 && degenerate == 0,
          std::to_string(days.size()) + " days of 390 bars, coarse lengths 78/26/390: " + std::to_string(mismatches) +
              " bitwise mismatches in " + std::to_string(2 * checks) + " comparisons; nk = 1 degeneracy failures " +
              std::to_string(degenerate)};
}

// ---------------------------------------------------------------------------
// 6. MCS sanity

constexpr std::size_t kMcsSeeds = 100;
constexpr double kMcsExclusion = 0.95;

Outcome mcs_sanity() {
  const std::size_t T = 500, M = 5;
  const std::vector<std::string> names{"m1", "m2", "m3", "m4", "dominated"};
  std::size_t out_r = 0, out_sq = 0;
  for (std::size_t seed = 0; seed < kMcsSeeds; ++seed) {
    std::mt19937_64 rng(rgtw::derive_seed(606, seed));
    std::normal_distribution<double> nd;
    Eigen::MatrixXd L(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(M));
    for (Eigen::Index t = 0; t < L.rows(); ++t) {
      for (Eigen::Index j = 0; j < L.cols(); ++j) L(t, j) = nd(rng) + (j == 4 ? 0.5 : 0.0);
    }
    const rgtw::BootstrapOptions boot{21, 1000, rgtw::derive_seed(607, seed)};
    out_r += !rgtw::mcs(L, names, rgtw::McsMethod::R, 0.9, boot).included[4];
    out_sq += !rgtw::mcs(L, names, rgtw::McsMethod::SQ, 0.9, boot).included[4];
  }
  const double n = static_cast<double>(kMcsSeeds);
  return {out_r / n >= kMcsExclusion && out_sq / n >= kMcsExclusion,
          "dominated model excluded from the 90% set in " + std::to_string(out_r) + "/" + std::to_string(kMcsSeeds) +
              " seeds (R) and " + std::to_string(out_sq) + "/" + std::to_string(kMcsSeeds) + " (SQ), need " +
              num(kMcsExclusion)};
}

// ---------------------------------------------------------------------------
// 7. End-to-end reproducibility through the CLI

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + RGTW_CLI + "\" " + args + " 2>> \"" + log.string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "rgtw_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "stderr.txt";
  const fs::path fx = fs::path(RGTW_FIXTURES) / "golden";
  auto p = [&](const char* name) { return (dir / name).string(); };
  std::vector<std::string> problems;
  auto step = [&](const std::string& args) {
    if (cli(args, log) != 0) problems.push_back("command failed: " + args);
  };

  // Golden fixture through the measures stage.
  step("measures --intraday " + (fx / "coarse.csv").string() + " --fine " + (fx / "fine.csv").string() +
       " --daily " + (fx / "daily.csv").string() + " --scaling-window 2 --out " + p("golden.csv"));
  if (problems.empty() && rgtw::io::read_file(p("golden.csv")) != rgtw::io::read_file(fx / "measures.golden.csv")) {
    problems.push_back("golden measures differ from the fixture");
  }

  // Full chain on a synthetic market long enough to estimate and backtest.
  step("simulate --model model1 --seed 11 --intraday " + p("mkt") + " --n 330 --fine-bars 78 --coarse-factor 6");
  step("measures --intraday " + p("mkt/coarse.csv") + " --fine " + p("mkt/fine.csv") + " --daily " +
       p("mkt/daily.csv") + " --scaling-window 22 --out " + p("meas.csv"));
  step("estimate --input " + p("meas.csv") + " --measure subrv --estimator ml --out " + p("params.json"));
  step("forecast --input " + p("meas.csv") + " --measure subrv --model RG-TWG,RG-GG --alpha 0.01,0.05 --window 200"
       " --estimator ml --refit-every 40 --seed 3 --out " + p("fc.csv"));
  step("backtest --input " + p("fc.csv") + " --n-boot 300 --out " + p("report.json") + " --table " + p("table.csv"));

  const std::vector<std::pair<std::string, std::string>> stages{
      {"meas.csv", "meas.csv.manifest.json"},
      {"params.json", "params.json.manifest.json"},
      {"fc.csv", "fc.csv.manifest.json"},
      {"report.json", "report.json.manifest.json"}};
  std::size_t replayed = 0;
  if (problems.empty()) {
    for (const auto& [out, manifest] : stages) {
      const std::string again = "replay_" + out;
      step("--config " + p(manifest.c_str()) + " --out " + p(again.c_str()) + " --manifest " + p((again + ".m").c_str()));
      if (!fs::exists(p(again.c_str())) || rgtw::io::read_file(p(again.c_str())) != rgtw::io::read_file(p(out.c_str()))) {
        problems.push_back(out + " not reproduced from its manifest");
      } else {
        ++replayed;
      }
      // The recorded output hash must match the bytes on disk.
      const auto j = nlohmann::json::parse(rgtw::io::read_file(p(manifest.c_str())));
      if (j["outputs"][0]["fnv1a64"] != rgtw::io::fnv1a64(rgtw::io::read_file(p(out.c_str())))) {
        problems.push_back(out + " hash differs from its manifest");
      }
    }
  }
  Outcome o;
  o.pass = problems.empty();
  o.detail = "golden fixture byte-identical; " + std::to_string(replayed) + "/" + std::to_string(stages.size()) +
             " pipeline stages (measures, estimate, forecast, backtest) byte-identical on manifest replay";
  for (const auto& s : problems) o.detail += "; " + s;
  if (!o.pass) o.detail += " (see " + log.string() + ")";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "STW correctness suite", stw_suite},
      {2, "simulation study, MCMC vs ML", simulation_study},
      {3, "calibration of true-parameter forecasts", calibration},
      {4, "joint-loss strict consistency", joint_loss_consistency},
      {5, "sub-sampled measures oracle equivalence", measures_oracle},
      {6, "MCS excludes a dominated model", mcs_sanity},
      {7, "end-to-end CLI reproducibility", cli_reproducibility},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  bool all_pass = true;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << c.id << " [" << (o.pass ? "PASS" : "FAIL") << "] " << c.name << ": " << o.detail
              << " (" << num(secs, 3) << " s)" << std::endl;
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
