#pragma once

// Round-based simulation of one negotiation session between a lane and its
// EVs: energy caps, price-range consensus, local cost selection, masked price
// consensus, then clearing.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "p2p/consensus.hpp"
#include "p2p/errors.hpp"
#include "p2p/market_model.hpp"
#include "p2p/param_select.hpp"
#include "p2p/types.hpp"
#include "p2p/wpt_energy.hpp"

namespace p2p {

enum class Phase {
  Init,
  MaxEnergyExchange,
  RangeNegotiation,
  ParamSelection,
  PriceNegotiation,
  Clearing,
  Done,
  Failed,
};

const char* to_string(Phase phase) noexcept;

/// One row of the session trace. Range rows carry [low, high] in c1/c2,
/// price rows the true consensus state, clearing rows the final state with
/// the peer's own price estimate and energy.
struct TraceRecord {
  Phase phase = Phase::Init;
  std::size_t iteration = 0;
  PeerId peer = 0;
  double c1 = 0.0;
  double c2 = 0.0;
  std::optional<double> lambda_est;
  std::optional<double> energy;
};

using TraceSink = std::function<void(const TraceRecord&)>;

struct MaxEnergy {
  double ev_upper = 0.0;
};
struct RangeBounds {
  double low = 0.0;
  double high = 0.0;
};
struct Masked {
  Vec2 value{0.0, 0.0};
};

/// A value placed on the wire. MaxEnergy goes EV -> lane; the other kinds are
/// broadcast to every neighbor of the sender.
struct Message {
  Phase phase = Phase::Init;
  PeerId sender = 0;
  std::size_t round = 0;
  std::variant<MaxEnergy, RangeBounds, Masked> payload;
};

struct EvSetup {
  EvWptSpec wpt;
  PriceBounds initial_range;
  double max_energy = 0.0;  // requested cap, clamped to one full pass
};

struct SessionConfig {
  LaneSpec lane;
  PriceBounds lane_range;
  double lane_lower = 0.0;  // most the lane may sell, as a negative energy
  std::vector<EvSetup> evs;
  Direction direction = Direction::charging;
  double eps_range = 1e-6;
  double eps_price = 1e-10;
  std::size_t max_iter = 100000;
  std::uint64_t seed = 0;

  // Debug hooks. Forced parameters bypass local selection; a silent mask
  // sends true states.
  std::optional<CostParams> lane_params;
  std::vector<std::optional<CostParams>> ev_params;
  bool zero_noise = false;

  TraceSink trace;
};

struct PeerState {
  PeerId id = 0;
  Role role = Role::ev;
  Phase phase = Phase::Init;
  PriceBounds desired_range;
  double energy_limit = 0.0;  // EV cap, or the lane's selling limit
  std::optional<CostParams> params;

  /// Moves forward only; Failed is terminal.
  void advance(Phase next);
};

struct PhaseFailure {
  Phase phase = Phase::Init;
  ErrorCode code = ErrorCode::InvalidParameter;
  std::string message;
};

struct PhaseTimings {
  double max_energy_s = 0.0;
  double range_s = 0.0;
  double selection_s = 0.0;
  double price_s = 0.0;
  double clearing_s = 0.0;

  double total_s() const noexcept { return max_energy_s + range_s + selection_s + price_s + clearing_s; }
};

struct SessionResult {
  Phase phase = Phase::Init;  // Done or Failed once the session returns
  std::optional<PhaseFailure> failure;
  std::vector<Phase> phase_history;

  std::size_t n_evs = 0;
  Direction direction = Direction::charging;
  std::vector<double> ev_upper;  // caps after clamping
  double sum_ev_upper = 0.0;
  double lane_lower = 0.0;

  std::optional<PriceBounds> negotiated_range;
  std::size_t range_iterations = 0;

  // Selection bounds each peer applied.
  std::vector<double> ev_a_floor;
  std::optional<LaneQuadraticWindow> lane_a_window;

  // Private to each peer; only exported by the CLI under a debug flag.
  std::optional<CostParams> lane_params;
  std::vector<CostParams> ev_params;
  std::vector<double> alphas;

  std::size_t price_iterations = 0;
  std::vector<Vec2> final_states;
  std::vector<double> peer_prices;  // each peer's own estimate, lane first

  std::optional<MarketInstance> instance;
  std::optional<ClearingResult> clearing;  // settled pairwise at the lane's price
  std::optional<double> lane_self_schedule;  // the lane's own optimum at that price

  /// |lane_self_schedule - clearing lane energy|: what the consensus error in
  /// the price costs the lane.
  double lane_schedule_gap() const noexcept;
  std::optional<ValidationReport> validation;

  std::vector<Message> wire_log;
  PhaseTimings timings;

  bool done() const noexcept { return phase == Phase::Done; }
  double peer_price_spread() const noexcept;
};

/// Runs every phase in order. Config errors throw; protocol failures come
/// back as phase == Failed with the failing phase and cause.
SessionResult run_trading_session(const SessionConfig& config);

struct WireReport {
  std::size_t max_energy_messages = 0;
  std::size_t range_deliveries = 0;
  std::size_t range_expected = 0;
  std::size_t price_deliveries = 0;
  std::size_t price_expected = 0;
  std::vector<bool> mask_hides_init;  // per peer, lane first
  std::size_t coefficient_leaks = 0;  // post-selection payloads equal to some a or b

  bool counts_match() const noexcept;
  bool masks_hide_inits() const noexcept;
  bool ok() const noexcept { return counts_match() && masks_hide_inits() && coefficient_leaks == 0; }
};

/// Audits the wire log of a session that reached price negotiation. Throws
/// InvalidParameter otherwise.
WireReport inspect_wire_log(const SessionResult& result);

}  // namespace p2p
