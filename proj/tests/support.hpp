#pragma once

#include <random>
#include <vector>

#include "p2p/errors.hpp"
#include "p2p/market_model.hpp"
#include "p2p/param_select.hpp"

namespace p2p::testing {

// lane a=1 b=2, one EV a=1 b=0
inline MarketInstance unit_instance(double ev_upper = 10.0, double lane_lower = -10.0) {
  MarketInstance m;
  m.wcdl = {1.0, 2.0};
  m.evs = {{1.0, 0.0}};
  const std::vector<double> upper{ev_upper};
  m.bounds = TradeBounds::charging(upper, lane_lower);
  return m;
}

inline MarketInstance two_ev_instance() {
  MarketInstance m;
  m.wcdl = {0.0009, 30.0};
  m.evs = {{0.2, 27.5}, {0.25, 28.0}};
  const std::vector<double> upper{15.0, 15.0};
  m.bounds = TradeBounds::charging(upper, -700.0);
  return m;
}

// Exact rational solution of two_ev_instance, evaluated with Python fractions.
inline constexpr double kTwoEvPrice = 29.981698244221803;
inline constexpr double kTwoEvEnergy[2] = {6.2042456105545085, 3.963396488443607};
inline constexpr double kTwoEvLane = -10.167642098998115;

struct SelectedMarket {
  MarketInstance instance;
  double low = 0.0;
  double high = 0.0;
};

// A market whose parameters come out of the local selection rules applied to
// a random negotiated range, random caps and a random selling limit.
inline SelectedMarket selected_market(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> low_d(15.0, 30.0), width_d(0.5, 8.0), cap_d(2.0, 25.0), k_d(0.5, 3.0);
  for (;;) {
    const double low = low_d(rng);
    const PriceRange range(low, low + width_d(rng));
    std::vector<double> caps(n);
    double sum = 0.0;
    for (auto& c : caps) sum += (c = cap_d(rng));
    const double lane_lower = -sum * k_d(rng);

    SelectedMarket out;
    out.low = range.low();
    out.high = range.high();
    out.instance.bounds = TradeBounds::charging(caps, lane_lower);
    for (std::size_t i = 0; i < n; ++i) {
      CostParams p;
      p.b = select_b(range, Role::ev, rng);
      p.a = select_a_ev(range, caps[i], rng);
      out.instance.evs.push_back(p);
    }
    out.instance.wcdl.b = select_b(range, Role::wcdl, rng);
    try {
      out.instance.wcdl.a = select_a_l(range, out.instance.wcdl.b, sum, lane_lower, rng);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmptyInterval) continue;
      throw;
    }
    return out;
  }
}

}  // namespace p2p::testing
