#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <variant>

#include "doctest.h"
#include "p2p/kkt_oracle.hpp"
#include "p2p/scenario.hpp"
#include "p2p/trading_protocol.hpp"

using namespace p2p;

namespace {

SessionConfig small_session(std::size_t n, std::uint64_t seed) {
  ScenarioConfig c = scaled_scenario(n, seed);
  return make_session_config(c);
}

bool same_outcome(const SessionResult& a, const SessionResult& b) {
  auto strip = [](nlohmann::json j) {
    j.erase("timings_s");
    return j;
  };
  if (strip(result_to_json(a, {}, true)) != strip(result_to_json(b, {}, true))) return false;
  if (a.final_states != b.final_states || a.peer_prices != b.peer_prices) return false;
  if (a.wire_log.size() != b.wire_log.size()) return false;
  for (std::size_t i = 0; i < a.wire_log.size(); ++i) {
    const auto& x = a.wire_log[i];
    const auto& y = b.wire_log[i];
    if (x.phase != y.phase || x.sender != y.sender || x.round != y.round) return false;
    if (x.payload.index() != y.payload.index()) return false;
    const bool equal = std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          const auto& q = std::get<T>(y.payload);
          if constexpr (std::is_same_v<T, MaxEnergy>) return p.ev_upper == q.ev_upper;
          else if constexpr (std::is_same_v<T, RangeBounds>) return p.low == q.low && p.high == q.high;
          else return p.value == q.value;
        },
        x.payload);
    if (!equal) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("reference session clears with every constraint satisfied") {
  auto cfg = make_session_config(scaled_scenario(50, 2020));
  cfg.lane_params = CostParams{0.0009, 30.0};
  const auto r = run_trading_session(cfg);
  REQUIRE(r.done());
  CHECK(r.validation->ok());
  double bmax = 0.0;
  for (const auto& p : r.ev_params) bmax = std::max(bmax, p.b);
  CHECK(bmax < r.clearing->price);
  CHECK(r.clearing->price < 30.0);
  for (double e : r.clearing->ev_energies) {
    CHECK(e > 0.0);
    CHECK(e < 15.0);
  }
  CHECK(r.clearing->lane_energy > -700.0);
  CHECK(r.clearing->lane_energy < 0.0);
  CHECK(std::abs(r.clearing->price - clearing_price(*r.instance)) <= 1e-6);
  CHECK(r.peer_price_spread() <= 1e-6);
  CHECK(std::abs(r.clearing->imbalance()) <= kBalanceTolerance);
  CHECK(r.lane_schedule_gap() <= 1e-6);
}

TEST_CASE("energy caps are clamped to one full pass") {
  auto cfg = small_session(3, 1);
  cfg.evs[0].max_energy = 40.0;
  const auto r = run_trading_session(cfg);
  REQUIRE(r.done());
  CHECK(r.ev_upper[0] == doctest::Approx(20.52).epsilon(1e-12));
  CHECK(r.ev_upper[1] == 15.0);
  CHECK(r.sum_ev_upper == doctest::Approx(50.52).epsilon(1e-12));
}

TEST_CASE("forced unit case matches the closed form") {
  auto cfg = small_session(1, 3);
  cfg.lane_params = CostParams{1.0, 2.0};
  cfg.ev_params = {CostParams{1.0, 0.0}};
  cfg.lane_lower = -10.0;
  const auto r = run_trading_session(cfg);
  REQUIRE(r.done());
  CHECK(r.clearing->price == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.clearing->ev_energies[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.clearing->lane_energy == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("one iteration budget fails during price negotiation") {
  auto cfg = small_session(4, 5);
  for (auto& ev : cfg.evs) ev.initial_range = cfg.lane_range;
  cfg.max_iter = 1;
  const auto r = run_trading_session(cfg);
  CHECK(r.phase == Phase::Failed);
  REQUIRE(r.failure.has_value());
  CHECK(r.failure->phase == Phase::PriceNegotiation);
  CHECK(r.failure->code == ErrorCode::NotConverged);
  CHECK(r.range_iterations == 1);
  CHECK_FALSE(r.clearing.has_value());
}

TEST_CASE("range negotiation failure is attributed to its phase") {
  auto cfg = small_session(4, 5);
  cfg.max_iter = 1;
  const auto r = run_trading_session(cfg);
  REQUIRE(r.failure.has_value());
  CHECK(r.failure->phase == Phase::RangeNegotiation);
}

TEST_CASE("empty lane window fails parameter selection") {
  auto cfg = small_session(4, 5);
  cfg.lane_lower = -1.0;
  const auto r = run_trading_session(cfg);
  REQUIRE(r.failure.has_value());
  CHECK(r.failure->phase == Phase::ParamSelection);
  CHECK(r.failure->code == ErrorCode::EmptyInterval);
}

TEST_CASE("forced parameters that break the price bounds fail at clearing") {
  auto cfg = small_session(2, 5);
  cfg.lane_params = CostParams{0.5, 29.5};
  cfg.ev_params = {CostParams{0.2, 29.9}, CostParams{0.2, 27.0}};
  const auto r = run_trading_session(cfg);
  REQUIRE(r.failure.has_value());
  CHECK(r.failure->phase == Phase::Clearing);
  CHECK(r.failure->code == ErrorCode::ValidationFailed);
  REQUIRE(r.validation.has_value());
  CHECK_FALSE(r.validation->ok());
}

TEST_CASE("config errors throw before any phase runs") {
  auto cfg = small_session(2, 5);
  cfg.lane_lower = 5.0;
  CHECK_THROWS_AS(run_trading_session(cfg), Error);
  cfg = small_session(2, 5);
  cfg.evs.clear();
  CHECK_THROWS_AS(run_trading_session(cfg), Error);
}

TEST_CASE("identical configs give identical sessions") {
  const auto cfg = small_session(10, 78);
  const auto a = run_trading_session(cfg);
  const auto b = run_trading_session(cfg);
  REQUIRE(a.done());
  CHECK(same_outcome(a, b));
  const auto c = run_trading_session(small_session(10, 79));
  CHECK_FALSE(same_outcome(a, c));
}

TEST_CASE("phases advance in order and failure is terminal") {
  const auto r = run_trading_session(small_session(3, 9));
  const std::vector<Phase> expected{Phase::MaxEnergyExchange, Phase::RangeNegotiation, Phase::ParamSelection,
                                    Phase::PriceNegotiation, Phase::Clearing, Phase::Done};
  CHECK(r.phase_history == expected);

  PeerState p;
  p.advance(Phase::RangeNegotiation);
  CHECK_THROWS_AS(p.advance(Phase::MaxEnergyExchange), std::logic_error);
  CHECK_THROWS_AS(p.advance(Phase::RangeNegotiation), std::logic_error);
  p.advance(Phase::Failed);
  CHECK_THROWS_AS(p.advance(Phase::Done), std::logic_error);
  CHECK_THROWS_AS(p.advance(Phase::Failed), std::logic_error);
}

TEST_CASE("wire log audit") {
  SUBCASE("two EVs: delivery counts") {
    const auto r = run_trading_session(small_session(2, 21));
    REQUIRE(r.done());
    const auto rep = inspect_wire_log(r);
    CHECK(rep.max_energy_messages == 2);
    CHECK(rep.range_deliveries == 2 * 2 * r.range_iterations);
    CHECK(rep.price_deliveries == 2 * 2 * r.price_iterations);
    CHECK(rep.counts_match());
    std::size_t masked = 0;
    for (const auto& m : r.wire_log) masked += std::holds_alternative<Masked>(m.payload);
    CHECK(masked == 3 * r.price_iterations);
  }

  SUBCASE("seeded runs hide every initial state and leak no coefficient") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto r = run_trading_session(small_session(50, seed));
      REQUIRE(r.done());
      const auto rep = inspect_wire_log(r);
      CHECK(rep.mask_hides_init.size() == 51);
      CHECK(rep.masks_hide_inits());
      CHECK(rep.coefficient_leaks == 0);
      CHECK(rep.ok());
    }
  }

  SUBCASE("silent masks expose initial states") {
    auto cfg = small_session(5, 4);
    cfg.zero_noise = true;
    const auto r = run_trading_session(cfg);
    REQUIRE(r.done());
    const auto rep = inspect_wire_log(r);
    CHECK_FALSE(rep.masks_hide_inits());
    CHECK(std::none_of(rep.mask_hides_init.begin(), rep.mask_hides_init.end(), [](bool b) { return b; }));
  }

  SUBCASE("audit needs selected parameters") {
    auto cfg = small_session(3, 4);
    cfg.max_iter = 1;
    const auto r = run_trading_session(cfg);
    CHECK_THROWS_AS(inspect_wire_log(r), Error);
  }
}

TEST_CASE("sessions agree with the oracle") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = run_trading_session(small_session(1 + seed % 5, seed));
    REQUIRE(r.done());
    CHECK(std::abs(r.clearing->price - clearing_price(*r.instance)) <= 1e-6);
    const auto sol = solve_qp_activeset(*r.instance);
    CHECK(sol.active_set.empty());
    for (std::size_t i = 0; i < r.n_evs; ++i) {
      CHECK(std::abs(sol.result.ev_energies[i] - r.clearing->ev_energies[i]) <= 1e-6);
    }
  }
}

TEST_CASE("discharging session mirrors the trade") {
  auto cfg = small_session(6, 12);
  const auto up = run_trading_session(cfg);
  cfg.direction = Direction::discharging;
  const auto down = run_trading_session(cfg);
  REQUIRE(up.done());
  REQUIRE(down.done());
  CHECK(down.clearing->price == up.clearing->price);
  for (std::size_t i = 0; i < 6; ++i) CHECK(down.clearing->ev_energies[i] == -up.clearing->ev_energies[i]);
  CHECK(down.clearing->lane_energy == -up.clearing->lane_energy);
  CHECK(down.validation->ok());
}

TEST_CASE("trace rows cover every peer in every round") {
  auto cfg = small_session(4, 6);
  std::vector<TraceRecord> rows;
  cfg.trace = [&rows](const TraceRecord& r) { rows.push_back(r); };
  const auto r = run_trading_session(cfg);
  REQUIRE(r.done());
  CHECK(rows.size() == (r.range_iterations + r.price_iterations + 1) * 5);

  std::size_t last_iter = 0;
  Phase last_phase = Phase::RangeNegotiation;
  for (const auto& row : rows) {
    if (row.phase != last_phase) {
      CHECK(row.phase > last_phase);
      last_phase = row.phase;
      last_iter = 0;
    }
    CHECK(row.iteration >= last_iter);
    last_iter = row.iteration;
  }
  const auto& clearing = rows.back();
  CHECK(clearing.phase == Phase::Clearing);
  REQUIRE(clearing.lambda_est.has_value());
  CHECK(*clearing.lambda_est == doctest::Approx(r.clearing->price).epsilon(1e-8));
}
