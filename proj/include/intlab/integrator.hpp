#ifndef INTLAB_INTEGRATOR_HPP
#define INTLAB_INTEGRATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "intlab/trace.hpp"

namespace intlab {

/// cmrr_db sentinel for a perfectly balanced difference stage (zero
/// common-mode response).
inline constexpr double ideal_cmrr_db = std::numeric_limits<double>::infinity();

/// Physical parameters of one difference-integrator channel.
struct IntegratorParams {
  double resistance = 20e3;       ///< input R, ohm
  double capacitance = 1e-6;      ///< feedback C, farad
  double offset_voltage = 0.0;    ///< input-referred op-amp offset, V
  double offset_current = 0.0;    ///< op-amp offset current, A
  double cmrr_db = ideal_cmrr_db; ///< common-mode rejection, dB
  double rail_voltage = 10.0;     ///< output hard-clamps at +/- this, V

  double rc() const { return resistance * capacitance; }
  bool ideal_cmrr() const { return std::isinf(cmrr_db); }
};

inline void validate(const IntegratorParams& p) {
  if (!(p.resistance > 0.0) || !std::isfinite(p.resistance))
    throw std::invalid_argument("IntegratorParams: resistance must be finite and > 0");
  if (!(p.capacitance > 0.0) || !std::isfinite(p.capacitance))
    throw std::invalid_argument("IntegratorParams: capacitance must be finite and > 0");
  if (!std::isfinite(p.offset_voltage))
    throw std::invalid_argument("IntegratorParams: offset_voltage must be finite");
  if (!std::isfinite(p.offset_current))
    throw std::invalid_argument("IntegratorParams: offset_current must be finite");
  if (std::isnan(p.cmrr_db) || p.cmrr_db < 0.0)
    throw std::invalid_argument("IntegratorParams: cmrr_db must be >= 0 (or +inf for ideal)");
  if (!(p.rail_voltage > 0.0) || !std::isfinite(p.rail_voltage))
    throw std::invalid_argument("IntegratorParams: rail_voltage must be finite and > 0");
}

// ---------------------------------------------------------------------------
// Named presets for the 20 ms channel (R = 20 kohm, C = 1 uF).
//
//   ideal       zero offsets, infinite CMRR; the textbook integrator
//   datasheet   op-amp typicals: 0.5 uV offset voltage, 20 pA offset current
//   calibrated  offsets tuned so a zero-input shot drifts 125 uV/s (50 mV in
//               400 s), matching the bench behaviour of the real channel
// ---------------------------------------------------------------------------

inline IntegratorParams preset_ideal() { return {}; }

inline IntegratorParams preset_datasheet() {
  IntegratorParams p;
  p.offset_voltage = 0.5e-6;
  p.offset_current = 20e-12;
  p.cmrr_db = 125.0;
  return p;
}

inline IntegratorParams preset_calibrated() {
  IntegratorParams p;
  p.offset_voltage = 2.0e-6;   // 2 uV / 20 ms    -> 100 uV/s
  p.offset_current = 25e-12;   // 25 pA / 1 uF    ->  25 uV/s
  p.cmrr_db = 125.0;
  return p;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"ideal", "datasheet", "calibrated"};
  return names;
}

inline IntegratorParams preset_by_name(std::string_view name) {
  if (name == "ideal") return preset_ideal();
  if (name == "datasheet") return preset_datasheet();
  if (name == "calibrated") return preset_calibrated();
  throw std::invalid_argument("unknown integrator preset: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Ideal integration
// ---------------------------------------------------------------------------

/// Drift-free, rail-free reference response: out[k] is the trapezoidal
/// cumulative integral of v_in up to t_k, scaled by -1/RC. out[0] = 0.
inline SignalTrace ideal_integrate(const SignalTrace& v_in, const IntegratorParams& p) {
  validate(p);
  validate(v_in);
  SignalTrace out;
  out.sample_rate = v_in.sample_rate;
  out.t_start = v_in.t_start;
  out.samples.resize(v_in.size());
  if (v_in.empty()) return out;

  const double scale = v_in.dt() / (2.0 * p.rc());
  double acc = 0.0;
  out.samples[0] = 0.0;
  for (std::size_t k = 1; k < v_in.size(); ++k) {
    acc -= scale * (v_in.samples[k - 1] + v_in.samples[k]);
    out.samples[k] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Common-mode response
// ---------------------------------------------------------------------------

/// Output drift rate produced by a common-mode voltage leaking through a
/// finite CMRR: v_cm / (RC * 10^(cmrr/20)). Exactly 0 for the ideal stage.
inline double common_mode_drift_rate(double v_cm, const IntegratorParams& p) {
  validate(p);
  if (!std::isfinite(v_cm)) throw std::invalid_argument("common_mode_drift_rate: v_cm must be finite");
  if (p.ideal_cmrr()) return 0.0;
  return v_cm / (p.rc() * std::pow(10.0, p.cmrr_db / 20.0));
}

/// CMRR from a measured output drift: 20*log10(v_cm / (drift * RC / window)).
/// A drift of exactly zero is beyond what the measurement can resolve and
/// comes back as nullopt rather than a number.
inline std::optional<double> compute_cmrr(double v_cm, double output_drift, double window_s,
                                          const IntegratorParams& p) {
  validate(p);
  if (!(v_cm > 0.0) || !std::isfinite(v_cm))
    throw std::invalid_argument("compute_cmrr: v_cm must be finite and > 0");
  if (!(window_s > 0.0) || !std::isfinite(window_s))
    throw std::invalid_argument("compute_cmrr: window must be finite and > 0");
  if (!(output_drift >= 0.0) || !std::isfinite(output_drift))
    throw std::invalid_argument("compute_cmrr: output drift must be finite and >= 0");
  if (output_drift == 0.0) return std::nullopt;
  return 20.0 * std::log10(v_cm / (output_drift * p.rc() / window_s));
}

// ---------------------------------------------------------------------------
// Channel simulation
// ---------------------------------------------------------------------------

enum class RunMode : std::uint8_t { Integrate, Hold };

/// Live accumulator of one channel. In Hold the output never moves; Reset
/// zeroes it and resumes integration.
struct IntegratorState {
  double output = 0.0;  ///< V
  RunMode mode = RunMode::Integrate;

  bool operator==(const IntegratorState&) const = default;
};

struct ModeEvent {
  enum class Action : std::uint8_t { Integrate, Hold, Reset };
  double time = 0.0;  ///< s, absolute trace time; applies from here onward
  Action action = Action::Integrate;
};

using ModeSchedule = std::vector<ModeEvent>;

struct SimResult {
  SignalTrace output;
  IntegratorState state;  ///< carries across runs (the channel keeps its charge)
};

namespace detail {

template <typename CommonModeAt>
SimResult simulate_impl(const SignalTrace& v_diff, CommonModeAt&& v_cm_at,
                        const IntegratorParams& p, const ModeSchedule& schedule,
                        IntegratorState initial) {
  validate(p);
  validate(v_diff);
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i].time < schedule[i - 1].time)
      throw std::invalid_argument("simulate: mode schedule times must be ascending");
  if (!std::isfinite(initial.output))
    throw std::invalid_argument("simulate: initial output must be finite");

  const double rc = p.rc();
  const double dt = v_diff.dt();
  const double offset_rate = p.offset_voltage / rc + p.offset_current / p.capacitance;
  const double cm_gain = p.ideal_cmrr() ? 0.0 : 1.0 / (rc * std::pow(10.0, p.cmrr_db / 20.0));
  const double rail = p.rail_voltage;

  SimResult res;
  res.output.sample_rate = v_diff.sample_rate;
  res.output.t_start = v_diff.t_start;
  res.output.samples.resize(v_diff.size());

  double acc = std::clamp(initial.output, -rail, rail);
  RunMode mode = initial.mode;
  std::size_t ev = 0;

  for (std::size_t k = 0; k < v_diff.size(); ++k) {
    if (k > 0 && mode == RunMode::Integrate) {
      // forward step over [t_{k-1}, t_k): drive plus the drift terms
      const double rate = -v_diff.samples[k - 1] / rc + offset_rate + cm_gain * v_cm_at(k - 1);
      acc = std::clamp(acc + rate * dt, -rail, rail);
    }
    const double t_k = v_diff.time_at(k);
    while (ev < schedule.size() && schedule[ev].time <= t_k) {
      switch (schedule[ev].action) {
        case ModeEvent::Action::Integrate: mode = RunMode::Integrate; break;
        case ModeEvent::Action::Hold: mode = RunMode::Hold; break;
        case ModeEvent::Action::Reset:
          acc = 0.0;
          mode = RunMode::Integrate;
          break;
      }
      ++ev;
    }
    res.output.samples[k] = acc;
  }
  res.state = {acc, mode};
  return res;
}

}  // namespace detail

/// Steps one channel through v_diff/v_cm sample by sample: Euler accumulation
/// of -v_diff/RC plus the offset and common-mode drift rates, hard-clamped at
/// the rails. Mode events take effect at their timestamp.
inline SimResult simulate(const SignalTrace& v_diff, const SignalTrace& v_cm,
                          const IntegratorParams& p, const ModeSchedule& schedule = {},
                          IntegratorState initial = {}) {
  validate(v_cm);
  if (v_cm.size() != v_diff.size() || v_cm.sample_rate != v_diff.sample_rate)
    throw std::invalid_argument("simulate: v_diff and v_cm must share rate and length");
  return detail::simulate_impl(
      v_diff, [&](std::size_t k) { return v_cm.samples[k]; }, p, schedule, initial);
}

/// Same, with a constant common-mode level (no second trace to allocate).
inline SimResult simulate(const SignalTrace& v_diff, double v_cm, const IntegratorParams& p,
                          const ModeSchedule& schedule = {}, IntegratorState initial = {}) {
  if (!std::isfinite(v_cm)) throw std::invalid_argument("simulate: v_cm must be finite");
  return detail::simulate_impl(
      v_diff, [=](std::size_t) { return v_cm; }, p, schedule, initial);
}

}  // namespace intlab

#endif
