#pragma once

namespace p2p {

/// Charging-discharging lane hardware. Power in kW, lengths in km, speed in km/h.
struct LaneSpec {
  double rated_power = 0.0;    // per transmitting segment
  double discharge_eff = 1.0;  // lane -> EV coil efficiency
  double charge_eff = 1.0;     // EV -> lane coil efficiency
  int segment_count = 0;
  double segment_length = 0.0;
  double design_speed = 0.0;

  void validate() const;
  bool operator==(const LaneSpec&) const = default;
};

struct EvWptSpec {
  double charge_eff = 1.0;
  double discharge_eff = 1.0;
  double discharge_power = 0.0;  // kW
  int segments_passed = 0;

  void validate() const;
  bool operator==(const EvWptSpec&) const = default;
};

/// Energy (kWh) an EV receives over its pass:
/// P_r * eta_lane_discharge * eta_ev_charge * n_i * segment_length / speed.
/// Throws SegmentOverflow if the EV passes more segments than the lane has.
double charge_energy(const LaneSpec& lane, const EvWptSpec& ev);

/// Energy (kWh) an EV delivers to the lane over its pass.
double discharge_energy(const LaneSpec& lane, const EvWptSpec& ev);

/// charge_energy over every segment of the lane: the most one EV can buy.
double full_pass_charge(const LaneSpec& lane, const EvWptSpec& ev);

}  // namespace p2p
