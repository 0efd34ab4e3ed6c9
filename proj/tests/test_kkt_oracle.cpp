#include <cmath>
#include <random>

#include "doctest.h"
#include "p2p/kkt_oracle.hpp"
#include "support.hpp"

using namespace p2p;
using p2p::testing::unit_instance;

TEST_CASE("interior unit case matches closed form") {
  const auto m = unit_instance(10.0, -10.0);
  const auto sol = solve_qp_activeset(m);
  CHECK(sol.active_set.empty());
  CHECK(sol.result.ev_energies[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.result.lane_energy == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(sol.result.price == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(verify_kkt(sol, m).within(1e-9));
}

TEST_CASE("upper EV box binds") {
  const auto m = unit_instance(0.1, -10.0);
  const auto sol = solve_qp_activeset(m);
  CHECK(sol.result.ev_energies[0] == doctest::Approx(0.1).epsilon(1e-12));
  REQUIRE(sol.active_set.size() == 1);
  CHECK(sol.active_set.ev[0] == BoundState::upper);
  // 2E^2 - 2E has slope 0.4 - 2 at the cap
  CHECK(sol.multipliers.ev_upper[0] == doctest::Approx(1.6).epsilon(1e-12));
  CHECK(sol.multipliers.pair_price[0] == doctest::Approx(1.8).epsilon(1e-12));

  const auto rep = verify_kkt(sol, m);
  CHECK(rep.complementarity <= kOracleTolerance);
  CHECK(rep.within(1e-9));
  CHECK_FALSE(rep.reduced.has_value());
}

TEST_CASE("lane selling limit binds") {
  auto m = unit_instance(10.0, -0.2);
  const auto sol = solve_qp_activeset(m);
  CHECK(sol.active_set.lane == BoundState::lower);
  CHECK(sol.result.lane_energy == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(sol.multipliers.lane_lower > 0.0);
  CHECK(verify_kkt(sol, m).within(1e-9));
}

TEST_CASE("two-EV instance matches frozen exact values") {
  const auto m = p2p::testing::two_ev_instance();
  const auto sol = solve_qp_activeset(m);
  CHECK(sol.active_set.empty());
  CHECK(std::abs(sol.result.price - p2p::testing::kTwoEvPrice) < 1e-6);
  CHECK(std::abs(sol.result.ev_energies[0] - p2p::testing::kTwoEvEnergy[0]) < 1e-6);
  CHECK(std::abs(sol.result.ev_energies[1] - p2p::testing::kTwoEvEnergy[1]) < 1e-6);
  CHECK(std::abs(sol.result.lane_energy - p2p::testing::kTwoEvLane) < 1e-6);
  CHECK(std::abs(sol.result.price - clearing_price(m)) < 1e-6);
}

TEST_CASE("closed-form interior solution satisfies KKT") {
  const auto m = p2p::testing::two_ev_instance();
  const auto closed = optimal_energies(m, clearing_price(m));
  const auto rep = verify_kkt(from_closed_form(closed, m), m);
  CHECK(rep.within(1e-9));
  REQUIRE(rep.reduced.has_value());
  CHECK(*rep.reduced <= 1e-9);
}

TEST_CASE("perturbed price shows up as stationarity residual") {
  const auto m = p2p::testing::two_ev_instance();
  auto sol = from_closed_form(optimal_energies(m, clearing_price(m)), m);
  for (auto& p : sol.multipliers.pair_price) p += 0.1;
  CHECK(verify_kkt(sol, m).stationarity == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("size limit and infeasibility") {
  MarketInstance big;
  big.wcdl = {1.0, 2.0};
  big.evs.assign(kOracleMaxEvs + 1, {1.0, 0.0});
  const std::vector<double> caps(kOracleMaxEvs + 1, 1.0);
  big.bounds = TradeBounds::charging(caps, -10.0);
  try {
    solve_qp_activeset(big);
    FAIL("expected SizeExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SizeExceeded);
  }
}

TEST_CASE("discharging program mirrors the charging one") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = p2p::testing::selected_market(rng, 1 + trial % 4).instance;
    const auto up = solve_qp_activeset(m);
    const auto down = solve_qp_activeset(to_discharging(m));
    CHECK(down.result.price == doctest::Approx(up.result.price).epsilon(1e-10));
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(down.result.ev_energies[i] == doctest::Approx(-up.result.ev_energies[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("oracle objective beats a feasible grid") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + trial % 2;
    const auto m = p2p::testing::selected_market(rng, n).instance;
    const auto sol = solve_qp_activeset(m);
    const int steps = 60;
    const double u0 = m.bounds.ev[0].upper;
    const double u1 = n > 1 ? m.bounds.ev[1].upper : 0.0;
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; j <= (n > 1 ? steps : 0); ++j) {
        std::vector<double> x{u0 * i / steps};
        if (n > 1) x.push_back(u1 * j / steps);
        double sum = 0.0;
        for (double v : x) sum += v;
        if (-sum < m.bounds.lane.lower) continue;
        CHECK(sol.objective <= total_cost(m, x, -sum) + 1e-9);
      }
    }
  }
}
