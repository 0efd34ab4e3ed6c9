#include "p2p/param_select.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "p2p/errors.hpp"

namespace p2p {

namespace {

// Uniform on the open interval (lo, hi); assumes lo < hi.
double uniform_open(double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  double v = dist(rng);
  while (!(v > lo && v < hi)) v = dist(rng);
  return v;
}

}  // namespace

PriceRange::PriceRange(double low, double high) : low_(low), high_(high), mid_(0.5 * (low + high)) {
  if (!std::isfinite(low) || !std::isfinite(high) || !(low < high)) {
    std::ostringstream os;
    os << "price range [" << low << ", " << high << "] has no interior";
    throw Error(ErrorCode::DegenerateRange, os.str());
  }
}

double select_b(const PriceRange& range, Role role, std::mt19937_64& rng) {
  if (role == Role::ev) {
    std::uniform_real_distribution<double> dist(range.low(), range.mid());
    double b = dist(rng);
    while (!(b >= range.low() && b < range.mid())) b = dist(rng);
    return b;
  }
  // high - U[0, high - mid) lies in (mid, high].
  std::uniform_real_distribution<double> dist(0.0, range.high() - range.mid());
  double b = range.high() - dist(rng);
  while (!(b > range.mid() && b <= range.high())) b = range.high() - dist(rng);
  return b;
}

double ev_quadratic_floor(const PriceRange& range, double ev_upper) {
  if (!(ev_upper > 0.0)) {
    std::ostringstream os;
    os << "EV energy cap must be positive (got " << ev_upper << ")";
    throw Error(ErrorCode::NonpositiveBound, os.str());
  }
  return range.width() / (2.0 * ev_upper);
}

double select_a_ev(const PriceRange& range, double ev_upper, std::mt19937_64& rng) {
  const double floor = ev_quadratic_floor(range, ev_upper);
  std::uniform_real_distribution<double> dist(floor, 10.0 * floor);
  double a = dist(rng);
  while (!(a > floor)) a = dist(rng);
  return a;
}

LaneQuadraticWindow lane_quadratic_window(const PriceRange& range, double b_l, double sum_ev_upper,
                                          double lane_lower) {
  if (!(b_l > range.mid())) throw Error(ErrorCode::InvalidParameter, "lane linear coefficient must exceed the range midpoint");
  if (!(sum_ev_upper > 0.0)) throw Error(ErrorCode::InvalidParameter, "sum of EV energy caps must be positive");
  if (!(lane_lower < 0.0)) throw Error(ErrorCode::InvalidParameter, "lane selling limit must be negative");

  LaneQuadraticWindow w;
  w.upper = (b_l - range.mid()) / sum_ev_upper;
  w.raw_lower = 0.5 * range.width() * (-1.0 / lane_lower - 1.0 / sum_ev_upper);
  w.lower = std::max(w.raw_lower, 0.0);
  return w;
}

double select_a_l(const PriceRange& range, double b_l, double sum_ev_upper, double lane_lower,
                  std::mt19937_64& rng) {
  const auto w = lane_quadratic_window(range, b_l, sum_ev_upper, lane_lower);
  if (w.empty()) {
    std::ostringstream os;
    os << "no lane quadratic coefficient fits (" << w.lower << ", " << w.upper
       << "); renegotiate the price range or energy limits";
    throw Error(ErrorCode::EmptyInterval, os.str());
  }
  return uniform_open(w.lower, w.upper, rng);
}

}  // namespace p2p
