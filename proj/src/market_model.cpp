#include "p2p/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "p2p/errors.hpp"

namespace p2p {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }
bool nonnegative_finite(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void CostParams::validate() const {
  if (!positive_finite(a) || !nonnegative_finite(b)) {
    std::ostringstream os;
    os << "cost parameters need a > 0 and b >= 0 (a=" << a << ", b=" << b << ")";
    throw Error(ErrorCode::InvalidParameter, os.str());
  }
}

const char* to_string(Direction d) noexcept {
  return d == Direction::charging ? "charging" : "discharging";
}

TradeBounds TradeBounds::charging(std::span<const double> ev_upper, double lane_lower) {
  TradeBounds bounds;
  bounds.ev.reserve(ev_upper.size());
  for (double upper : ev_upper) bounds.ev.push_back({0.0, upper});
  bounds.lane = {lane_lower, 0.0};
  return bounds;
}

void MarketInstance::validate() const {
  if (evs.empty()) throw Error(ErrorCode::InvalidParameter, "market needs at least one EV");
  wcdl.validate();
  for (const auto& ev : evs) ev.validate();
  if (bounds.ev.size() != evs.size()) {
    throw Error(ErrorCode::InvalidParameter, "one energy interval is required per EV");
  }
  const bool charging = direction == Direction::charging;
  for (const auto& box : bounds.ev) {
    const bool ok = charging ? (box.lower == 0.0 && positive_finite(box.upper))
                             : (box.upper == 0.0 && positive_finite(-box.lower));
    if (!ok) throw Error(ErrorCode::InvalidParameter, "EV energy interval inconsistent with direction");
  }
  const bool lane_ok = charging ? (bounds.lane.upper == 0.0 && positive_finite(-bounds.lane.lower))
                                : (bounds.lane.lower == 0.0 && positive_finite(bounds.lane.upper));
  if (!lane_ok) throw Error(ErrorCode::InvalidParameter, "lane energy interval inconsistent with direction");
}

double ClearingResult::imbalance() const noexcept {
  return std::accumulate(ev_energies.begin(), ev_energies.end(), lane_energy);
}

double balance_tolerance(const MarketInstance& instance, double price) noexcept {
  double scale = std::abs(price);
  double sensitivity = 0.5 / instance.wcdl.a;
  scale = std::max(scale, std::abs(instance.wcdl.b));
  for (const auto& ev : instance.evs) {
    scale = std::max(scale, std::abs(ev.b));
    sensitivity += 0.5 / ev.a;
  }
  const double steps = static_cast<double>(instance.size() + 4);
  return std::max(kBalanceTolerance, steps * std::numeric_limits<double>::epsilon() * scale * sensitivity);
}

double cost_eval(const CostParams& params, double energy) noexcept {
  return params.a * energy * energy + params.b * energy;
}

double directed_cost(const CostParams& params, Direction direction, double energy) noexcept {
  return cost_eval(params, direction == Direction::charging ? energy : -energy);
}

double total_cost(const MarketInstance& instance, std::span<const double> ev_energies,
                  double lane_energy) {
  double cost = directed_cost(instance.wcdl, instance.direction, lane_energy);
  for (std::size_t i = 0; i < instance.size(); ++i) {
    cost += directed_cost(instance.evs[i], instance.direction, ev_energies[i]);
  }
  return cost;
}

double clearing_price(const MarketInstance& instance) {
  double weighted = instance.wcdl.b / instance.wcdl.a;
  double weight = 1.0 / instance.wcdl.a;
  for (const auto& ev : instance.evs) {
    weighted += ev.b / ev.a;
    weight += 1.0 / ev.a;
  }
  return weighted / weight;
}

ClearingResult optimal_energies(const MarketInstance& instance, double price) {
  const double s = instance.sign();
  ClearingResult result;
  result.price = price;
  result.ev_energies.reserve(instance.size());
  for (const auto& ev : instance.evs) {
    result.ev_energies.push_back(s * (price - ev.b) / (2.0 * ev.a));
  }
  result.lane_energy = s * (price - instance.wcdl.b) / (2.0 * instance.wcdl.a);

  const double residual = result.imbalance();
  if (!(std::abs(residual) <= balance_tolerance(instance, price))) {
    std::ostringstream os;
    os << "traded energies do not balance at price " << price << " (residual " << residual
       << " kWh)";
    throw Error(ErrorCode::BalanceViolation, os.str());
  }
  return result;
}

MarketInstance to_discharging(const MarketInstance& instance) {
  if (instance.direction == Direction::discharging) {
    throw Error(ErrorCode::AlreadyDischarging, "instance is already in the discharging direction");
  }
  MarketInstance mirrored = instance;
  mirrored.direction = Direction::discharging;
  for (auto& box : mirrored.bounds.ev) box = {-box.upper, 0.0};
  mirrored.bounds.lane = {0.0, -instance.bounds.lane.lower};
  return mirrored;
}

bool ValidationReport::ok() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::vector<ConstraintCheck> ValidationReport::failures() const {
  std::vector<ConstraintCheck> out;
  std::copy_if(checks.begin(), checks.end(), std::back_inserter(out),
               [](const auto& c) { return !c.passed; });
  return out;
}

std::string ValidationReport::summary() const {
  const auto failed = failures();
  if (failed.empty()) return "all " + std::to_string(checks.size()) + " checks passed";
  std::ostringstream os;
  os << failed.size() << " of " << checks.size() << " checks failed:";
  for (const auto& f : failed) {
    os << ' ' << f.name;
    if (f.ev) os << '[' << *f.ev << ']';
    os << '=' << f.value;
  }
  return os.str();
}

ValidationReport validate_clearing(const ClearingResult& result, const MarketInstance& instance) {
  ValidationReport report;
  const bool charging = instance.direction == Direction::charging;
  const std::size_t n = std::min(result.ev_energies.size(), instance.size());

  const double residual = result.imbalance();
  report.checks.push_back({"balance", std::nullopt, std::abs(residual) <= balance_tolerance(instance, result.price) &&
                                                        result.ev_energies.size() == instance.size(),
                           residual});

  for (std::size_t i = 0; i < n; ++i) {
    const double e = result.ev_energies[i];
    const auto& box = instance.bounds.ev[i];
    // Strictly in the trading direction, inclusive at the far limit.
    report.checks.push_back({"ev_direction", i, charging ? e > 0.0 : e < 0.0, e});
    report.checks.push_back({"ev_limit", i, charging ? e <= box.upper : e >= box.lower, e});
  }

  const double lane = result.lane_energy;
  report.checks.push_back({"lane_direction", std::nullopt, charging ? lane < 0.0 : lane > 0.0, lane});
  report.checks.push_back({"lane_limit", std::nullopt,
                           charging ? lane >= instance.bounds.lane.lower
                                    : lane <= instance.bounds.lane.upper,
                           lane});

  double ev_b_max = instance.evs.empty() ? 0.0 : instance.evs.front().b;
  for (const auto& ev : instance.evs) ev_b_max = std::max(ev_b_max, ev.b);
  report.checks.push_back({"price_floor", std::nullopt, ev_b_max < result.price, result.price - ev_b_max});
  report.checks.push_back({"price_ceiling", std::nullopt, result.price < instance.wcdl.b,
                           instance.wcdl.b - result.price});
  return report;
}

}  // namespace p2p
