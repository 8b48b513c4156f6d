#pragma once

// Microwave gating schedules. Outside every segment the microwave is off;
// the laser is always on.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "spintorque/constants.hpp"
#include "spintorque/errors.hpp"
#include "spintorque/model.hpp"
#include "spintorque/spin.hpp"

namespace spintorque {

struct Segment {
  double t_start = 0.0;
  double t_end = std::numeric_limits<double>::infinity();
  bool microwave_on = true;
  std::optional<double> detuning;      // rad/s, replaces DriveParams::detuning
  std::optional<double> rabi;          // rad/s, replaces DriveParams::rabi_omega
  std::optional<double> detuning_end;  // rad/s; if set, detuning ramps linearly to this value at t_end

  bool operator==(const Segment&) const = default;
};

class Protocol {
 public:
  Protocol() = default;

  /// Segments must be time-ordered, non-overlapping, with t_start < t_end.
  explicit Protocol(std::vector<Segment> segments) : segments_(std::move(segments)) {
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      const auto& s = segments_[k];
      if (!(s.t_start < s.t_end) || std::isnan(s.t_start))
        throw ConfigError("protocol segment " + std::to_string(k) + " has t_start >= t_end");
      if (s.detuning_end && !std::isfinite(s.t_end))
        throw ConfigError("protocol segment " + std::to_string(k) + " ramps over an unbounded interval");
      if (k > 0 && s.t_start < segments_[k - 1].t_end)
        throw ConfigError("protocol segments " + std::to_string(k - 1) + " and " + std::to_string(k) +
                          " overlap or are out of order");
    }
  }

  static Protocol always_on() { return Protocol({Segment{}}); }
  static Protocol always_off() { return Protocol{}; }
  static Protocol switch_on_at(double t) {
    Segment s;
    s.t_start = t;
    return Protocol({s});
  }

  const std::vector<Segment>& segments() const { return segments_; }

  /// Drive seen by the spins at time t (rabi = 0 when gated off).
  DriveState at(double t, const DriveParams& base) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const Segment& s) { return v < s.t_start; });
    if (it == segments_.begin()) return {0.0, base.detuning};
    const Segment& s = *std::prev(it);
    if (t >= s.t_end || !s.microwave_on) return {0.0, s.detuning.value_or(base.detuning)};
    DriveState d{s.rabi.value_or(base.rabi_omega), s.detuning.value_or(base.detuning)};
    if (s.detuning_end) d.detuning += (*s.detuning_end - d.detuning) * (t - s.t_start) / (s.t_end - s.t_start);
    return d;
  }

  bool operator==(const Protocol&) const = default;

 private:
  std::vector<Segment> segments_;
};

/// Microwave gated on for `duty` of each libration period, `n_pulses` times,
/// then left off for the ring-down.
inline Protocol build_parametric_excitation(double omega_phi, int n_pulses, double duty) {
  if (!(omega_phi > 0)) throw ConfigError("parametric excitation needs omega_phi > 0");
  if (!(duty > 0 && duty <= 1)) throw ConfigError("parametric excitation duty must be in (0, 1]");
  const double period = constants::two_pi / omega_phi;
  std::vector<Segment> segs;
  for (int k = 0; k < n_pulses; ++k) {
    Segment s;
    s.t_start = k * period;
    s.t_end = s.t_start + duty * period;
    segs.push_back(s);
  }
  if (duty == 1.0 && n_pulses > 0) segs = {Segment{0.0, n_pulses * period, true, {}, {}, {}}};
  return Protocol(std::move(segs));
}

}  // namespace spintorque
