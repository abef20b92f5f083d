#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "rgtw/model.hpp"

using rgtw::RgParams;

namespace {

// Shifted STW log-density written out from the one-sided Weibull laws, with
// b_p and mu computed here rather than taken from the library.
double literal_stw_shifted_logpdf(double z, double l1, double k) {
  const double l2 = k - l1;
  const double g1 = std::tgamma(1.0 + 1.0 / k);
  const double g2 = std::tgamma(1.0 + 2.0 / k);
  const double m1 = (l2 * l2 - l1 * l1) / k * g1;
  const double bp = std::sqrt((std::pow(l1, 3) + std::pow(l2, 3)) / k * g2 - m1 * m1);
  const double x = z + m1 / bp;
  const double scale = x < 0.0 ? l1 : l2;
  const double u = std::abs(bp * x) / scale;
  return std::log(bp * std::pow(u, k - 1.0) * std::exp(-std::pow(u, k)));
}

double literal_twg_loglik(const RgParams& p, const std::vector<double>& r,
                          const std::vector<double>& x, double h1) {
  double ll = 0.0;
  double h = h1;
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (t > 0) h = p.omega + p.beta * h + p.gamma * x[t - 1];
    const double z = r[t] / std::sqrt(h);
    const double e = x[t] - p.xi - p.phi * h - p.tau1 * z - p.tau2 * (z * z - 1.0);
    ll += literal_stw_shifted_logpdf(z, p.lambda1, p.k1) - 0.5 * std::log(h);
    ll += -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(p.sigma_eps * p.sigma_eps) -
          e * e / (2.0 * p.sigma_eps * p.sigma_eps);
  }
  return ll;
}

RgParams gg_params() {
  RgParams p = rgtw::model1_params();
  p.dist = rgtw::InnovationKind::Gaussian;
  return p;
}

}  // namespace

TEST(Model1, ParametersAreAdmissible) {
  const auto p = rgtw::model1_params();
  EXPECT_TRUE(rgtw::admissible(p));
  EXPECT_NEAR(p.beta + p.gamma * p.phi, 0.9875, 1e-15);
  EXPECT_NEAR(rgtw::stationary_variance(p), 3.6, 1e-12);
}

TEST(Filter, DegenerateRecursion) {
  RgParams p = rgtw::model1_params();
  p.beta = 0.0;
  p.gamma = 0.0;
  const std::vector<double> r{0.3, -0.2, 1.0, 0.1};
  const std::vector<double> x{1.0, 5.0, 0.2, 0.4};
  const auto s = rgtw::filter(p, r, x, 2.5);
  EXPECT_EQ(s.h[0], 2.5);
  for (std::size_t t = 1; t < r.size(); ++t) EXPECT_EQ(s.h[t], p.omega);
}

TEST(Filter, ThreeStepHandRecursion) {
  const auto p = rgtw::model1_params();
  const std::vector<double> r{0.5, -1.2, 0.3};
  const std::vector<double> x{1.1, 2.0, 0.7};
  const auto s = rgtw::filter(p, r, x, 2.0);
  const double h[] = {2.0, 1.795, 1.86625};
  const double z[] = {0.35355339059327373, -0.895672045034491, 0.21960202693606298};
  const double e[] = {-0.8754289321881344, 0.1807919908541848, -1.149509960465967};
  for (int t = 0; t < 3; ++t) {
    EXPECT_NEAR(s.h[t], h[t], 1e-14);
    EXPECT_NEAR(s.z[t], z[t], 1e-14);
    EXPECT_NEAR(s.eps[t], e[t], 1e-14);
  }
}

TEST(Filter, VarianceBoundedBelowByOmega) {
  std::mt19937_64 rng(21);
  const auto p = rgtw::model1_params();
  const auto path = rgtw::simulate(p, 2000, rng);
  const auto s = rgtw::filter(p, path.r, path.x, 0.01);
  for (std::size_t t = 1; t < s.h.size(); ++t) {
    if (path.x[t - 1] >= 0.0) EXPECT_GE(s.h[t], p.omega);
  }
}

TEST(Filter, RecoversSimulatedState) {
  std::mt19937_64 rng(22);
  const auto p = rgtw::model1_params();
  const auto path = rgtw::simulate(p, 500, rng);
  const auto s = rgtw::filter(p, path.r, path.x, path.h[0]);
  for (std::size_t t = 0; t < 500; ++t) {
    EXPECT_NEAR(s.h[t], path.h[t], 1e-10 * path.h[t]);
    EXPECT_NEAR(s.z[t], path.z[t], 1e-10);
  }
}

TEST(Filter, BitReproducible) {
  std::mt19937_64 rng(23);
  const auto p = rgtw::model1_params();
  const auto path = rgtw::simulate(p, 300, rng);
  const auto a = rgtw::filter(p, path.r, path.x, 3.0);
  const auto b = rgtw::filter(p, path.r, path.x, 3.0);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.eps, b.eps);
}

TEST(Filter, OverflowNamesIndex) {
  RgParams p = rgtw::model1_params();
  const std::vector<double> r{0.1, 0.1, 0.1};
  const std::vector<double> x{1.0, 1e308, 1.0};
  p.gamma = 10.0;
  try {
    rgtw::filter(p, r, x, 1.0);
    FAIL() << "expected an error";
  } catch (const rgtw::NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("t=2"), std::string::npos) << e.what();
  }
}

TEST(Loglik, GaussianPlugIn) {
  RgParams p = gg_params();
  p.omega = 0.5;
  p.beta = 0.25;
  p.gamma = 0.25;
  p.xi = 0.5;
  p.phi = 0.5;
  p.tau1 = 0.3;
  p.tau2 = 0.0;
  p.sigma_eps = 1.0;
  const std::size_t n = 17;
  const std::vector<double> r(n, 0.0);
  const std::vector<double> x(n, 1.0);
  EXPECT_NEAR(rgtw::loglik(p, r, x, 1.0), -static_cast<double>(n) * std::log(2.0 * std::numbers::pi),
              1e-12);
}

TEST(Loglik, GaussianMatchesLiteralFormula) {
  std::mt19937_64 rng(24);
  const auto truth = rgtw::model1_params();
  const auto path = rgtw::simulate(truth, 800, rng);
  RgParams p = gg_params();
  p.tau1 = 0.07;
  p.sigma_eps = 0.8;
  const double h1 = rgtw::initial_variance(path.r);
  // -1/2 sum [log 2pi + log h + r^2/h] - 1/2 sum [log 2pi + log s^2 + e^2/s^2]
  double ref = 0.0;
  double h = h1;
  for (std::size_t t = 0; t < path.r.size(); ++t) {
    if (t > 0) h = p.omega + p.beta * h + p.gamma * path.x[t - 1];
    const double z = path.r[t] / std::sqrt(h);
    const double u = path.x[t] - p.xi - p.phi * h - p.tau1 * z - p.tau2 * (z * z - 1.0);
    ref += -0.5 * (std::log(2.0 * std::numbers::pi) + std::log(h) + path.r[t] * path.r[t] / h);
    ref += -0.5 * (std::log(2.0 * std::numbers::pi) + std::log(p.sigma_eps * p.sigma_eps) +
                   u * u / (p.sigma_eps * p.sigma_eps));
  }
  EXPECT_NEAR(rgtw::loglik(p, path.r, path.x, h1), ref, 1e-9 * std::abs(ref));
}

TEST(Loglik, TwgMatchesDualImplementation) {
  std::mt19937_64 rng(25);
  const auto p = rgtw::model1_params();
  const auto path = rgtw::simulate(p, 3000, rng);
  const double h1 = rgtw::initial_variance(path.r);
  const double ref = literal_twg_loglik(p, path.r, path.x, h1);
  EXPECT_NEAR(rgtw::loglik(p, path.r, path.x, h1), ref, 1e-10 * std::abs(ref));
}

TEST(Loglik, StudentTMatchesBoostDensity) {
  std::mt19937_64 rng(26);
  RgParams p = gg_params();
  p.dist = rgtw::InnovationKind::StudentT;
  p.nu = 6.5;
  const auto path = rgtw::simulate(p, 500, rng);
  const auto s = rgtw::filter(p, path.r, path.x, 2.0);
  const boost::math::students_t_distribution<double> t(p.nu);
  const double c = std::sqrt(p.nu / (p.nu - 2.0));
  double ref = 0.0;
  for (std::size_t i = 0; i < s.z.size(); ++i) {
    ref += std::log(c * boost::math::pdf(t, c * s.z[i])) - 0.5 * std::log(s.h[i]);
  }
  EXPECT_NEAR(rgtw::loglik_parts(p, path.r, path.x, 2.0).returns, ref, 1e-9 * std::abs(ref));
}

TEST(Loglik, DecompositionIsFinite) {
  std::mt19937_64 rng(27);
  const auto p = rgtw::model1_params();
  const auto path = rgtw::simulate(p, 1000, rng);
  const auto parts = rgtw::loglik_parts(p, path.r, path.x, 3.6);
  EXPECT_TRUE(std::isfinite(parts.returns));
  EXPECT_TRUE(std::isfinite(parts.measurement));
  EXPECT_EQ(parts.total(), rgtw::loglik(p, path.r, path.x, 3.6));
}

TEST(Loglik, SentinelForConstraintViolations) {
  const std::vector<double> r{0.1, -0.3, 0.2};
  const std::vector<double> x{1.0, 1.2, 0.8};
  const auto base = rgtw::model1_params();
  std::vector<RgParams> bad(8, base);
  bad[0].omega = -0.1;
  bad[1].beta = 0.99;   // persistence above one
  bad[2].gamma = 0.0;
  bad[3].sigma_eps = 0.0;
  bad[4].lambda1 = 1.2;  // lambda1 > k1
  bad[5].lambda1 = 0.0;
  bad[6].omega = 0.01;
  bad[6].xi = -1.0;      // omega + gamma xi < 0
  bad[7].dist = rgtw::InnovationKind::StudentT;
  bad[7].nu = 1.5;
  for (const auto& p : bad) {
    EXPECT_NO_THROW({
      const double ll = rgtw::loglik(p, r, x, 1.0);
      EXPECT_EQ(ll, rgtw::kRejectLogLik);
    });
  }
}

TEST(Loglik, PeaksNearTruthOnAverage) {
  const auto truth = rgtw::model1_params();
  RgParams off = truth;
  off.beta = 0.5;
  std::mt19937_64 rng(28);
  double diff = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto path = rgtw::simulate(truth, 1000, rng);
    const double h1 = rgtw::initial_variance(path.r);
    diff += rgtw::loglik(truth, path.r, path.x, h1) - rgtw::loglik(off, path.r, path.x, h1);
  }
  EXPECT_GT(diff / 50.0, 0.0);
}

TEST(InitialVariance, UsesFirstFiftyReturns) {
  std::vector<double> r(80, 0.0);
  for (int i = 0; i < 50; ++i) r[i] = (i % 2 == 0) ? 1.0 : -1.0;
  for (int i = 50; i < 80; ++i) r[i] = 100.0;
  EXPECT_NEAR(rgtw::initial_variance(r), 50.0 / 49.0, 1e-14);
  EXPECT_EQ(rgtw::initial_variance(std::vector<double>(10, 0.0)), 1.0);
}

TEST(Simulate, NoiselessMeasurement) {
  RgParams p = rgtw::model1_params();
  p.tau1 = 0.0;
  p.tau2 = 0.0;
  p.sigma_eps = 0.0;
  std::mt19937_64 rng(29);
  const auto path = rgtw::simulate(p, 200, rng);
  for (std::size_t t = 0; t < 200; ++t) EXPECT_EQ(path.x[t], p.xi + p.phi * path.h[t]);
}

TEST(Simulate, InnovationMomentsAndStationaryMean) {
  const auto p = rgtw::model1_params();
  std::mt19937_64 rng(30);
  constexpr std::size_t n = 1'000'000;
  const auto path = rgtw::simulate(p, n, rng);
  double zm = 0.0;
  double zs = 0.0;
  double hm = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    zm += path.z[t];
    zs += path.z[t] * path.z[t];
    hm += path.h[t];
  }
  zm /= n;
  EXPECT_NEAR(zs / n - zm * zm, 1.0, 0.01);
  EXPECT_NEAR(hm / n, rgtw::stationary_variance(p), 0.05 * rgtw::stationary_variance(p));
}

TEST(Simulate, DeterministicForSeed) {
  const auto p = rgtw::model1_params();
  std::mt19937_64 a(31);
  std::mt19937_64 b(31);
  EXPECT_EQ(rgtw::simulate(p, 100, a).r, rgtw::simulate(p, 100, b).r);
}

TEST(Innovation, MeanZeroUnitVarianceByQuadrature) {
  const std::vector<rgtw::Innovation> inns{rgtw::Innovation::gaussian(), rgtw::Innovation::student_t(5.0),
                                           rgtw::Innovation::stw(0.6, 1.1),
                                           rgtw::Innovation::stw(1.4, 2.0)};
  for (const auto& inn : inns) {
    // Split the real line at the density's kink, which sits at -mu for STW.
    const double c = inn.kind() == rgtw::InnovationKind::Stw ? -inn.stw_params().mu() : 0.0;
    auto f = [&](double x) { return std::exp(inn.logpdf(x + c)); };
    const double m0 = oracle::integrate_real_line(f);
    const double m1 = oracle::integrate_real_line([&](double x) { return (x + c) * f(x); });
    const double m2 = oracle::integrate_real_line([&](double x) { return (x + c) * (x + c) * f(x); });
    EXPECT_NEAR(m0, 1.0, 1e-8);
    EXPECT_NEAR(m1, 0.0, 1e-8);
    EXPECT_NEAR(m2, 1.0, 1e-6);
  }
}

TEST(Innovation, QuantileAndTailMeanByQuadrature) {
  const std::vector<rgtw::Innovation> inns{rgtw::Innovation::gaussian(), rgtw::Innovation::student_t(5.0),
                                           rgtw::Innovation::stw(0.6, 1.1)};
  for (const auto& inn : inns) {
    for (double a : {0.01, 0.025}) {
      const double q = inn.quantile(a);
      EXPECT_NEAR(inn.cdf(q), a, 1e-10);
      auto f = [&](double z) { return z * std::exp(inn.logpdf(z)); };
      EXPECT_NEAR(inn.tail_mean(a), oracle::integrate_below(f, q) / a, 1e-7);
    }
  }
}

TEST(Garch, GaussianPlugIn) {
  rgtw::GarchParams p;
  p.omega = 1.0;
  p.dist = rgtw::InnovationKind::Gaussian;
  const std::vector<double> r(25, 0.0);
  EXPECT_NEAR(rgtw::garch_loglik(p, r, 1.0), -12.5 * std::log(2.0 * std::numbers::pi), 1e-12);
}

TEST(Garch, TwMatchesDualImplementation) {
  rgtw::GarchParams p;
  p.omega = 0.05;
  p.alpha = 0.08;
  p.beta = 0.9;
  p.dist = rgtw::InnovationKind::Stw;
  p.lambda1 = 0.6;
  p.k1 = 1.1;
  std::mt19937_64 rng(32);
  const auto path = rgtw::simulate_garch(p, 3000, rng);
  double ref = 0.0;
  double h = 1.3;
  for (std::size_t t = 0; t < path.r.size(); ++t) {
    if (t > 0) h = p.omega + p.alpha * path.r[t - 1] * path.r[t - 1] + p.beta * h;
    ref += literal_stw_shifted_logpdf(path.r[t] / std::sqrt(h), p.lambda1, p.k1) - 0.5 * std::log(h);
  }
  EXPECT_NEAR(rgtw::garch_loglik(p, path.r, 1.3), ref, 1e-10 * std::abs(ref));
}

TEST(Garch, SentinelForConstraintViolations) {
  rgtw::GarchParams p;
  p.omega = 0.1;
  p.alpha = 0.5;
  p.beta = 0.6;
  p.nu = 5.0;
  const std::vector<double> r{0.1, 0.2};
  EXPECT_EQ(rgtw::garch_loglik(p, r, 1.0), rgtw::kRejectLogLik);
}

TEST(ModelRegistry, NamesVectorsAndBlocks) {
  using rgtw::ModelKind;
  for (auto k : {ModelKind::RgGG, ModelKind::RgTG, ModelKind::RgTWG, ModelKind::GarchT,
                 ModelKind::GarchTW}) {
    EXPECT_EQ(rgtw::parse_model_kind(rgtw::model_name(k)), k);
    const auto names = rgtw::parameter_names(k);
    std::vector<int> seen(names.size(), 0);
    for (const auto& b : rgtw::parameter_blocks(k)) {
      for (auto i : b) ++seen[i];
    }
    for (int s : seen) EXPECT_EQ(s, 1);
  }
  const auto p = rgtw::model1_params();
  const auto v = p.to_vector();
  const auto q = RgParams::from_vector(ModelKind::RgTWG, v);
  EXPECT_EQ(q.to_vector(), v);
  EXPECT_EQ(rgtw::parameter_names(ModelKind::RgTWG)[3], "lambda1");
  EXPECT_THROW(rgtw::parse_model_kind("EGARCH"), rgtw::InputError);
}
