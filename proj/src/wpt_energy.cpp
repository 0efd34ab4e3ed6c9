#include "p2p/wpt_energy.hpp"

#include <cmath>
#include <sstream>

#include "p2p/errors.hpp"

namespace p2p {

namespace {

bool efficiency(double eta) { return std::isfinite(eta) && eta > 0.0 && eta <= 1.0; }
bool positive(double v) { return std::isfinite(v) && v > 0.0; }

double traversal_hours(const LaneSpec& lane, const EvWptSpec& ev) {
  lane.validate();
  ev.validate();
  if (ev.segments_passed > lane.segment_count) {
    std::ostringstream os;
    os << "EV passes " << ev.segments_passed << " segments but the lane has " << lane.segment_count;
    throw Error(ErrorCode::SegmentOverflow, os.str());
  }
  return ev.segments_passed * lane.segment_length / lane.design_speed;
}

}  // namespace

void LaneSpec::validate() const {
  if (!positive(rated_power) || !efficiency(discharge_eff) || !efficiency(charge_eff) || segment_count <= 0 ||
      !positive(segment_length) || !positive(design_speed)) {
    throw Error(ErrorCode::InvalidParameter, "lane spec needs positive power, geometry and speed, efficiencies in (0, 1]");
  }
}

void EvWptSpec::validate() const {
  if (!efficiency(charge_eff) || !efficiency(discharge_eff) || !(discharge_power >= 0.0) || segments_passed < 0) {
    throw Error(ErrorCode::InvalidParameter, "EV spec needs efficiencies in (0, 1] and nonnegative power/segments");
  }
}

double charge_energy(const LaneSpec& lane, const EvWptSpec& ev) {
  const double hours = traversal_hours(lane, ev);
  return lane.rated_power * lane.discharge_eff * ev.charge_eff * hours;
}

double discharge_energy(const LaneSpec& lane, const EvWptSpec& ev) {
  const double hours = traversal_hours(lane, ev);
  return ev.discharge_power * ev.discharge_eff * lane.charge_eff * hours;
}

double full_pass_charge(const LaneSpec& lane, const EvWptSpec& ev) {
  EvWptSpec full = ev;
  full.segments_passed = lane.segment_count;
  return charge_energy(lane, full);
}

}  // namespace p2p
