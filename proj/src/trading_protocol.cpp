#include "p2p/trading_protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <type_traits>
#include <variant>

#include "p2p/privacy_mask.hpp"
#include "p2p/rng.hpp"

namespace p2p {

const char* to_string(Phase phase) noexcept {
  switch (phase) {
    case Phase::Init: return "init";
    case Phase::MaxEnergyExchange: return "max_energy";
    case Phase::RangeNegotiation: return "range";
    case Phase::ParamSelection: return "selection";
    case Phase::PriceNegotiation: return "price";
    case Phase::Clearing: return "clearing";
    case Phase::Done: return "done";
    case Phase::Failed: return "failed";
  }
  return "unknown";
}

void PeerState::advance(Phase next) {
  if (phase == Phase::Failed || (next != Phase::Failed && next <= phase)) {
    throw std::logic_error(std::string("peer phase cannot move from ") + to_string(phase) + " to " +
                           to_string(next));
  }
  phase = next;
}

double SessionResult::peer_price_spread() const noexcept {
  if (peer_prices.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(peer_prices.begin(), peer_prices.end());
  return *hi - *lo;
}

double SessionResult::lane_schedule_gap() const noexcept {
  if (!clearing || !lane_self_schedule) return 0.0;
  return std::abs(*lane_self_schedule - clearing->lane_energy);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void validate_config(const SessionConfig& cfg) {
  if (cfg.evs.empty()) throw Error(ErrorCode::InvalidParameter, "session needs at least one EV");
  cfg.lane.validate();
  if (!(cfg.lane_lower < 0.0)) throw Error(ErrorCode::InvalidParameter, "lane_lower must be negative");
  if (!(cfg.eps_range > 0.0) || !(cfg.eps_price > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "consensus tolerances must be positive");
  }
  if (cfg.max_iter < 1) throw Error(ErrorCode::InvalidParameter, "max_iter must be at least 1");
  if (!cfg.ev_params.empty() && cfg.ev_params.size() != cfg.evs.size()) {
    throw Error(ErrorCode::InvalidParameter, "forced EV parameters must cover every EV");
  }
  for (const auto& ev : cfg.evs) {
    ev.wpt.validate();
    if (!(ev.max_energy > 0.0)) throw Error(ErrorCode::InvalidParameter, "EV energy caps must be positive");
  }
}

class Session {
 public:
  explicit Session(const SessionConfig& cfg)
      : cfg_(cfg),
        n_(cfg.evs.size()),
        topology_(Topology::star(n_)),
        weights_(metropolis_weights(topology_)) {
    peers_.resize(n_ + 1);
    for (PeerId id = 0; id <= n_; ++id) {
      peers_[id].id = id;
      peers_[id].role = id == kLanePeer ? Role::wcdl : Role::ev;
      peers_[id].desired_range = id == kLanePeer ? cfg.lane_range : cfg.evs[id - 1].initial_range;
    }
    result_.n_evs = n_;
    result_.direction = cfg.direction;
  }

  SessionResult run() {
    try {
      step(Phase::MaxEnergyExchange, &PhaseTimings::max_energy_s, [this] { exchange_max_energy(); });
      step(Phase::RangeNegotiation, &PhaseTimings::range_s, [this] { negotiate_range(); });
      step(Phase::ParamSelection, &PhaseTimings::selection_s, [this] { select_parameters(); });
      step(Phase::PriceNegotiation, &PhaseTimings::price_s, [this] { negotiate_price(); });
      step(Phase::Clearing, &PhaseTimings::clearing_s, [this] { clear(); });
      enter(Phase::Done);
    } catch (const Error& e) {
      result_.failure = PhaseFailure{result_.phase, e.code(), e.what()};
      enter(Phase::Failed);
    }
    return std::move(result_);
  }

 private:
  template <typename Body>
  void step(Phase phase, double PhaseTimings::*slot, Body&& body) {
    enter(phase);
    const auto start = Clock::now();
    body();
    result_.timings.*slot = seconds_since(start);
  }

  void enter(Phase phase) {
    for (auto& p : peers_) p.advance(phase);
    result_.phase = phase;
    result_.phase_history.push_back(phase);
  }

  void emit(const TraceRecord& rec) const {
    if (cfg_.trace) cfg_.trace(rec);
  }

  void exchange_max_energy() {
    result_.ev_upper.resize(n_);
    for (PeerId id = 1; id <= n_; ++id) {
      const auto& ev = cfg_.evs[id - 1];
      const double cap = std::min(ev.max_energy, full_pass_charge(cfg_.lane, ev.wpt));
      peers_[id].energy_limit = cap;
      result_.ev_upper[id - 1] = cap;
      result_.wire_log.push_back({Phase::MaxEnergyExchange, id, 0, MaxEnergy{cap}});
    }
    // The lane accumulates in arrival order.
    for (double cap : result_.ev_upper) result_.sum_ev_upper += cap;
    peers_[kLanePeer].energy_limit = cfg_.lane_lower;
    result_.lane_lower = cfg_.lane_lower;
  }

  void negotiate_range() {
    std::vector<PriceBounds> ranges;
    ranges.reserve(peers_.size());
    for (const auto& p : peers_) ranges.push_back(p.desired_range);

    auto observer = [this](std::size_t k, std::span<const Vec2> sent, std::span<const Vec2> updated) {
      for (PeerId i = 0; i < sent.size(); ++i) {
        result_.wire_log.push_back({Phase::RangeNegotiation, i, k - 1, RangeBounds{sent[i][0], sent[i][1]}});
      }
      for (PeerId i = 0; i < updated.size(); ++i) {
        emit({Phase::RangeNegotiation, k, i, updated[i][0], updated[i][1], std::nullopt, std::nullopt});
      }
    };
    const auto run = price_range_consensus(ranges, weights_, cfg_.eps_range, cfg_.max_iter, observer);
    result_.range_iterations = run.iterations;
    // The lane coordinates termination and its converged range is the one
    // every peer adopts.
    result_.negotiated_range = run.common;
  }

  void select_parameters() {
    const PriceRange range(result_.negotiated_range->low, result_.negotiated_range->high);
    result_.ev_params.resize(n_);
    result_.ev_a_floor.resize(n_);
    for (PeerId id = 1; id <= n_; ++id) {
      auto& peer = peers_[id];
      auto rng = make_stream(cfg_.seed, Stream::cost_selection, id);
      result_.ev_a_floor[id - 1] = ev_quadratic_floor(range, peer.energy_limit);
      CostParams params;
      if (!cfg_.ev_params.empty() && cfg_.ev_params[id - 1]) {
        params = *cfg_.ev_params[id - 1];
      } else {
        params.b = select_b(range, Role::ev, rng);
        params.a = select_a_ev(range, peer.energy_limit, rng);
      }
      peer.params = params;
      result_.ev_params[id - 1] = params;
    }

    auto& lane = peers_[kLanePeer];
    auto rng = make_stream(cfg_.seed, Stream::cost_selection, kLanePeer);
    CostParams params;
    if (cfg_.lane_params) {
      params = *cfg_.lane_params;
      if (params.b > range.mid()) {
        result_.lane_a_window = lane_quadratic_window(range, params.b, result_.sum_ev_upper, cfg_.lane_lower);
      }
    } else {
      params.b = select_b(range, Role::wcdl, rng);
      result_.lane_a_window = lane_quadratic_window(range, params.b, result_.sum_ev_upper, cfg_.lane_lower);
      params.a = select_a_l(range, params.b, result_.sum_ev_upper, cfg_.lane_lower, rng);
    }
    lane.params = params;
    result_.lane_params = params;
  }

  void negotiate_price() {
    ConsensusState init;
    init.x.reserve(peers_.size());
    for (const auto& p : peers_) init.x.push_back({p.params->b / p.params->a, 1.0 / p.params->a});

    result_.alphas = draw_distinct_alphas(peers_.size(), derive_seed(cfg_.seed, Stream::alpha, kLanePeer));
    std::vector<NoiseGenerator> gens;
    gens.reserve(peers_.size());
    for (PeerId id = 0; id < peers_.size(); ++id) {
      gens.push_back(cfg_.zero_noise ? NoiseGenerator::silent(result_.alphas[id])
                                     : NoiseGenerator(result_.alphas[id], derive_seed(cfg_.seed, Stream::noise, id)));
    }

    RoundObserver observer;
    if (cfg_.trace) {
      observer = [this](std::size_t k, std::span<const Vec2>, std::span<const Vec2> updated) {
        for (PeerId i = 0; i < updated.size(); ++i) {
          const double est = updated[i][1] > 0.0 ? updated[i][0] / updated[i][1] : std::nan("");
          emit({Phase::PriceNegotiation, k, i, updated[i][0], updated[i][1], est, std::nullopt});
        }
      };
    }
    auto run = run_secure_consensus(init, weights_, gens, cfg_.eps_price, cfg_.max_iter, observer);
    result_.price_iterations = run.iterations;
    result_.final_states = std::move(run.state.x);
    result_.wire_log.reserve(result_.wire_log.size() + run.wire_log.size());
    for (const auto& m : run.wire_log) {
      result_.wire_log.push_back({Phase::PriceNegotiation, m.sender, m.round, Masked{m.value}});
    }
  }

  void clear() {
    result_.peer_prices.reserve(peers_.size());
    for (const auto& x : result_.final_states) result_.peer_prices.push_back(price_from_state(x));

    MarketInstance instance;
    instance.wcdl = *result_.lane_params;
    instance.evs = result_.ev_params;
    instance.bounds = TradeBounds::charging(result_.ev_upper, cfg_.lane_lower);
    if (cfg_.direction == Direction::discharging) instance = to_discharging(instance);
    result_.instance = instance;

    const double lane_price = result_.peer_prices[kLanePeer];
    if (cfg_.trace) {
      for (PeerId i = 0; i < peers_.size(); ++i) {
        const auto& params = *peers_[i].params;
        const double own = result_.peer_prices[i];
        const double energy = instance.sign() * (own - params.b) / (2.0 * params.a);
        emit({Phase::Clearing, 1, i, result_.final_states[i][0], result_.final_states[i][1], own, energy});
      }
    }

    // Each EV buys its own optimum at the lane's price and the lane is the
    // counterparty of every pair, so the lane's delivery is the pairwise sum.
    ClearingResult clearing;
    clearing.price = lane_price;
    const double s = instance.sign();
    for (const auto& ev : instance.evs) clearing.ev_energies.push_back(s * (lane_price - ev.b) / (2.0 * ev.a));
    for (double e : clearing.ev_energies) clearing.lane_energy -= e;
    result_.lane_self_schedule = s * (lane_price - instance.wcdl.b) / (2.0 * instance.wcdl.a);
    result_.clearing = std::move(clearing);
    result_.validation = validate_clearing(*result_.clearing, instance);
    if (!result_.validation->ok()) {
      throw Error(ErrorCode::ValidationFailed, "clearing violates trade limits: " + result_.validation->summary());
    }
  }

  const SessionConfig& cfg_;
  std::size_t n_;
  Topology topology_;
  WeightMatrix weights_;
  std::vector<PeerState> peers_;
  SessionResult result_;
};

}  // namespace

SessionResult run_trading_session(const SessionConfig& config) {
  validate_config(config);
  return Session(config).run();
}

bool WireReport::counts_match() const noexcept {
  return range_deliveries == range_expected && price_deliveries == price_expected;
}

bool WireReport::masks_hide_inits() const noexcept {
  return std::all_of(mask_hides_init.begin(), mask_hides_init.end(), [](bool b) { return b; });
}

WireReport inspect_wire_log(const SessionResult& result) {
  if (!result.lane_params || result.ev_params.size() != result.n_evs) {
    throw Error(ErrorCode::InvalidParameter, "wire log audit needs a session that reached price negotiation");
  }
  const std::size_t n = result.n_evs;
  const auto topology = Topology::star(n);

  std::vector<CostParams> params;
  params.push_back(*result.lane_params);
  params.insert(params.end(), result.ev_params.begin(), result.ev_params.end());
  std::vector<Vec2> inits;
  std::vector<double> secrets;
  for (const auto& p : params) {
    inits.push_back({p.b / p.a, 1.0 / p.a});
    secrets.push_back(p.a);
    secrets.push_back(p.b);
  }
  auto leaks = [&secrets](double v) { return std::find(secrets.begin(), secrets.end(), v) != secrets.end(); };

  WireReport rep;
  rep.range_expected = 2 * n * result.range_iterations;
  rep.price_expected = 2 * n * result.price_iterations;
  rep.mask_hides_init.assign(n + 1, true);

  for (const auto& m : result.wire_log) {
    std::visit(
        [&](const auto& payload) {
          using T = std::decay_t<decltype(payload)>;
          if constexpr (std::is_same_v<T, MaxEnergy>) {
            ++rep.max_energy_messages;
          } else if constexpr (std::is_same_v<T, RangeBounds>) {
            rep.range_deliveries += topology.degree(m.sender);
          } else {
            rep.price_deliveries += topology.degree(m.sender);
            if (payload.value == inits[m.sender]) rep.mask_hides_init[m.sender] = false;
            // Everything after selection is a masked value.
            if (leaks(payload.value[0]) || leaks(payload.value[1])) ++rep.coefficient_leaks;
          }
        },
        m.payload);
  }
  return rep;
}

}  // namespace p2p
