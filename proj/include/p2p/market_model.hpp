#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace p2p {

/// Quadratic cost a*E^2 + b*E held privately by one peer.
struct CostParams {
  double a = 0.0;
  double b = 0.0;

  /// Throws InvalidParameter unless a > 0 and b >= 0 (both finite).
  void validate() const;

  bool operator==(const CostParams&) const = default;
};

enum class Direction { charging, discharging };

const char* to_string(Direction d) noexcept;

struct EnergyInterval {
  double lower = 0.0;
  double upper = 0.0;

  bool operator==(const EnergyInterval&) const = default;
};

/// Box limits on traded energy. In the charging direction every EV box is
/// [0, ev_upper] and the lane box is [lane_lower, 0]; discharging mirrors both.
struct TradeBounds {
  std::vector<EnergyInterval> ev;
  EnergyInterval lane;

  static TradeBounds charging(std::span<const double> ev_upper, double lane_lower);

  bool operator==(const TradeBounds&) const = default;
};

/// One lane trading with n EVs.
struct MarketInstance {
  CostParams wcdl;
  std::vector<CostParams> evs;
  TradeBounds bounds;
  Direction direction = Direction::charging;

  std::size_t size() const noexcept { return evs.size(); }

  // +1 when charging, -1 when discharging. Multiplies every linear
  // coefficient once the program is written in the lane's sign convention.
  double sign() const noexcept { return direction == Direction::charging ? 1.0 : -1.0; }

  void validate() const;
};

struct ClearingResult {
  double price = 0.0;
  std::vector<double> ev_energies;
  double lane_energy = 0.0;

  /// lane_energy + sum(ev_energies)
  double imbalance() const noexcept;
};

inline constexpr double kBalanceTolerance = 1e-9;

/// kBalanceTolerance, or the rounding floor of `price` carried through every
/// 1/(2a) when that is larger. Only a nearly flat cost curve gets there.
double balance_tolerance(const MarketInstance& instance, double price) noexcept;

double cost_eval(const CostParams& params, double energy) noexcept;

/// Cost of `energy` for a peer trading in `direction`. Discharging peers
/// evaluate the mirrored energy so the same positive parameters apply.
double directed_cost(const CostParams& params, Direction direction, double energy) noexcept;

/// Social cost of a trade vector: sum of EV costs plus the lane cost.
double total_cost(const MarketInstance& instance, std::span<const double> ev_energies,
                  double lane_energy);

/// Weighted mean of all linear coefficients with weights 1/a.
double clearing_price(const MarketInstance& instance);

/// Energies at `price`; throws BalanceViolation when they do not balance
/// within balance_tolerance.
ClearingResult optimal_energies(const MarketInstance& instance, double price);

/// Mirror a charging instance into the discharging one. Throws
/// AlreadyDischarging for a discharging input.
MarketInstance to_discharging(const MarketInstance& instance);

struct ConstraintCheck {
  std::string name;
  std::optional<std::size_t> ev;  // index into ev_energies, if per-EV
  bool passed = false;
  double value = 0.0;  // the quantity that was tested
};

struct ValidationReport {
  std::vector<ConstraintCheck> checks;

  bool ok() const noexcept;
  std::vector<ConstraintCheck> failures() const;
  std::string summary() const;
};

ValidationReport validate_clearing(const ClearingResult& result, const MarketInstance& instance);

}  // namespace p2p
