#pragma once

// Synthetic intraday OHLC data: Brownian log-prices whose daily variance
// follows a simulated realized-GARCH variance path.

#include <cmath>
#include <random>
#include <vector>

#include "rgtw/calendar.hpp"
#include "rgtw/measures.hpp"
#include "rgtw/model.hpp"

namespace rgtw {

struct SyntheticMarket {
  std::vector<IntradayBar> fine;
  std::vector<IntradayBar> coarse;
  std::vector<DailyBar> daily;
  std::vector<double> h;  // daily variance in percent-squared units
};

struct SyntheticOptions {
  std::size_t days = 250;
  std::size_t fine_per_day = 390;
  /// Fine bars per coarse bar.
  std::size_t coarse_factor = 5;
  double start_price = 100.0;
  Date start = Date{std::chrono::year{2015}, std::chrono::January, std::chrono::day{5}};
  std::uint64_t seed = 1;
};

/// Bars over `days + 1` business days; the first day only anchors the first
/// daily return. The variance path comes from simulating `p`.
inline SyntheticMarket simulate_market(const RgParams& p, const SyntheticOptions& opt) {
  if (opt.days < 1 || opt.fine_per_day < 2 || opt.coarse_factor < 1 ||
      opt.fine_per_day % opt.coarse_factor != 0) {
    throw InputError("synthetic market needs days >= 1 and a fine grid divisible by the coarse factor");
  }
  std::mt19937_64 rng(opt.seed);
  const auto path = simulate(p, opt.days + 1, rng);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);

  SyntheticMarket m;
  m.h.assign(path.h.begin(), path.h.begin() + static_cast<std::ptrdiff_t>(opt.days + 1));
  double logp = std::log(opt.start_price);
  Date day = opt.start;
  const std::size_t n_coarse = opt.fine_per_day / opt.coarse_factor;
  for (std::size_t t = 0; t <= opt.days; ++t) {
    const double step_var = m.h[t] / 1e4 / static_cast<double>(opt.fine_per_day);
    const double step_sd = std::sqrt(step_var);
    const std::size_t first = m.fine.size();
    for (std::size_t i = 0; i < opt.fine_per_day; ++i) {
      const double a = logp;
      const double b = a + step_sd * nd(rng);
      const double d2 = (b - a) * (b - a);
      // Bridge extremes given the endpoints.
      const double hi = 0.5 * (a + b + std::sqrt(d2 - 2.0 * step_var * std::log(1.0 - ud(rng))));
      const double lo = 0.5 * (a + b - std::sqrt(d2 - 2.0 * step_var * std::log(1.0 - ud(rng))));
      m.fine.push_back({day, static_cast<int>(i + 1), std::exp(a), std::exp(std::max({hi, a, b})),
                        std::exp(std::min({lo, a, b})), std::exp(b)});
      logp = b;
    }
    for (std::size_t c = 0; c < n_coarse; ++c) {
      IntradayBar bar{day, static_cast<int>(c + 1), 0.0, 0.0, 0.0, 0.0};
      const auto& f0 = m.fine[first + c * opt.coarse_factor];
      bar.open = f0.open;
      bar.high = f0.high;
      bar.low = f0.low;
      for (std::size_t k = 0; k < opt.coarse_factor; ++k) {
        const auto& f = m.fine[first + c * opt.coarse_factor + k];
        bar.high = std::max(bar.high, f.high);
        bar.low = std::min(bar.low, f.low);
        bar.close = f.close;
      }
      m.coarse.push_back(bar);
    }
    DailyBar d{day, m.fine[first].open, m.fine[first].high, m.fine[first].low, m.fine.back().close};
    for (std::size_t i = first; i < m.fine.size(); ++i) {
      d.high = std::max(d.high, m.fine[i].high);
      d.low = std::min(d.low, m.fine[i].low);
    }
    m.daily.push_back(d);
    day = next_business_day(day);
  }
  return m;
}

}  // namespace rgtw
