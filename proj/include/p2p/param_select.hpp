#pragma once

#include <random>

namespace p2p {

/// Negotiated price range [low, high] with low < high.
class PriceRange {
 public:
  /// Throws DegenerateRange unless low < high (both finite).
  PriceRange(double low, double high);

  double low() const noexcept { return low_; }
  double high() const noexcept { return high_; }
  double mid() const noexcept { return mid_; }
  double width() const noexcept { return high_ - low_; }

 private:
  double low_;
  double high_;
  double mid_;
};

enum class Role { ev, wcdl };

struct SelectionOutcome {
  Role role = Role::ev;
  double b = 0.0;
  double a = 0.0;
};

/// Linear coefficient: EVs draw from [low, mid), the lane from (mid, high].
double select_b(const PriceRange& range, Role role, std::mt19937_64& rng);

/// Smallest EV quadratic coefficient that keeps the EV below its energy cap:
/// (high - low) / (2 * ev_upper). Throws NonpositiveBound for ev_upper <= 0.
double ev_quadratic_floor(const PriceRange& range, double ev_upper);

/// Drawn uniformly from (floor, 10 * floor].
double select_a_ev(const PriceRange& range, double ev_upper, std::mt19937_64& rng);

/// Admissible open interval for the lane's quadratic coefficient.
struct LaneQuadraticWindow {
  double raw_lower = 0.0;  // may be negative, in which case the lower limit is vacuous
  double lower = 0.0;      // max(raw_lower, 0)
  double upper = 0.0;

  bool empty() const noexcept { return !(lower < upper); }
};

/// upper = (b_l - mid) / sum_ev_upper keeps every EV buying;
/// raw_lower = width/2 * (-1/lane_lower - 1/sum_ev_upper) keeps the lane
/// above its selling limit. Throws InvalidParameter if b_l <= mid,
/// sum_ev_upper <= 0 or lane_lower >= 0.
LaneQuadraticWindow lane_quadratic_window(const PriceRange& range, double b_l, double sum_ev_upper,
                                          double lane_lower);

/// Drawn uniformly from the open window. Throws EmptyInterval when the
/// window is empty.
double select_a_l(const PriceRange& range, double b_l, double sum_ev_upper, double lane_lower,
                  std::mt19937_64& rng);

}  // namespace p2p
