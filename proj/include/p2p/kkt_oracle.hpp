#pragma once

// Exhaustive active-set solver for the single-lane clearing program. It is
// deliberately unrelated to the closed-form price so the two can check each
// other; it is only meant for a handful of EVs.

#include <cstddef>
#include <optional>
#include <vector>

#include "p2p/market_model.hpp"

namespace p2p {

inline constexpr std::size_t kOracleMaxEvs = 12;
inline constexpr double kOracleTolerance = 1e-8;

/// Lagrange multipliers in the lane's sign convention. Inequality
/// multipliers are reported as nonnegative magnitudes.
struct KktMultipliers {
  std::vector<double> pair_price;  // one per EV-lane pair, sign-free
  double lane_lower = 0.0;         // lane energy >= lane.lower
  double lane_upper = 0.0;         // lane energy <= lane.upper
  std::vector<double> ev_lower;    // EV energy >= box.lower
  std::vector<double> ev_upper;    // EV energy <= box.upper
};

enum class BoundState : unsigned char { free, lower, upper };

struct ActiveSet {
  std::vector<BoundState> ev;
  BoundState lane = BoundState::free;

  std::size_t size() const noexcept;
  bool empty() const noexcept { return size() == 0; }
};

struct OracleSolution {
  ClearingResult result;
  KktMultipliers multipliers;
  ActiveSet active_set;
  double objective = 0.0;
};

/// Enumerates every combination of binding box constraints (3^(n+1)
/// candidates) and keeps the feasible, dual-feasible one with the lowest
/// objective. Throws SizeExceeded for n > kOracleMaxEvs and Infeasible when
/// no candidate qualifies.
OracleSolution solve_qp_activeset(const MarketInstance& instance, double tol = kOracleTolerance);

/// Wraps a closed-form result as a KKT point with all inequality multipliers
/// zero and every pair price equal to the clearing price.
OracleSolution from_closed_form(const ClearingResult& result, const MarketInstance& instance);

struct KktReport {
  double stationarity = 0.0;     // max |dL/dE| over EV and lane-pair variables
  double primal = 0.0;           // max balance or box violation
  double dual = 0.0;             // max negative part of inequality multipliers
  double complementarity = 0.0;  // max |multiplier * slack|
  double price_spread = 0.0;     // max pair price - min pair price
  std::optional<double> reduced; // interior points only: residual of the multiplier-free system

  double worst() const noexcept;
  bool within(double tol) const noexcept { return worst() <= tol; }
};

KktReport verify_kkt(const OracleSolution& solution, const MarketInstance& instance,
                     double tol = kOracleTolerance);

}  // namespace p2p
