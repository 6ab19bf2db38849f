#ifndef INTLAB_SHOT_HPP
#define INTLAB_SHOT_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "intlab/drift.hpp"
#include "intlab/integrator.hpp"
#include "intlab/trace.hpp"

namespace intlab {

enum class ShotSource { ZeroInput, StandardSignal, Pulse, ProbeSynthetic };

inline const char* to_string(ShotSource s) {
  switch (s) {
    case ShotSource::ZeroInput: return "zero-input";
    case ShotSource::StandardSignal: return "standard-signal";
    case ShotSource::Pulse: return "pulse";
    case ShotSource::ProbeSynthetic: return "probe-synthetic";
  }
  return "?";
}

inline ShotSource shot_source_from(const std::string& name) {
  if (name == "zero-input") return ShotSource::ZeroInput;
  if (name == "standard-signal") return ShotSource::StandardSignal;
  if (name == "pulse") return ShotSource::Pulse;
  if (name == "probe-synthetic") return ShotSource::ProbeSynthetic;
  throw std::invalid_argument("unknown shot source: " + name);
}

/// One simulated acquisition window through the full chain:
/// source -> integrator channel -> (optional) real-time drift correction.
struct ShotConfig {
  double duration_s = 400.0;
  double sample_rate_hz = 1000.0;
  ShotSource source = ShotSource::ZeroInput;
  double common_mode_v = 0.0;
  IntegratorParams params = preset_calibrated();

  bool correct_with_reference = false;
  std::optional<DriftFit> reference_fit;   ///< required when correcting
  bool subtract_intercept = true;

  double noise_rms_v = 0.0;   ///< acquisition-chain noise added at the output tap
  std::uint64_t seed = 1;

  PulseSpec pulse{2.5, 1.0, {+1}};   ///< for ShotSource::Pulse
  double probe_flux_vs = 0.05;       ///< for ShotSource::ProbeSynthetic

  std::optional<double> normalized_limit;  ///< pass/fail threshold, V*s per 1000 s
};

struct ShotReport {
  DriftMetric raw;
  std::optional<DriftMetric> corrected;
  bool is_cmrr_measurement = false;
  std::optional<double> cmrr_db;  ///< empty while is_cmrr_measurement: below the floor
  std::optional<bool> pass;       ///< against normalized_limit when configured
};

struct ShotOutcome {
  SignalTrace raw;
  SignalTrace corrected;  ///< equals raw when correction is off
  ShotReport report;
};

/// Drift spans under this are treated as "no measurable drift" when the
/// harness reports CMRR; matches the instrument's practical resolution.
inline constexpr double cmrr_drift_floor_v = 1e-3;

namespace detail {

inline SignalTrace shot_source_trace(const ShotConfig& cfg) {
  const auto n = static_cast<std::size_t>(std::floor(cfg.duration_s * cfg.sample_rate_hz + 1e-9));
  if (n == 0) throw std::invalid_argument("run_shot: duration too short for the sample rate");

  SignalTrace src;
  switch (cfg.source) {
    case ShotSource::ZeroInput:
      src.sample_rate = cfg.sample_rate_hz;
      src.samples.assign(n, 0.0);
      return src;
    case ShotSource::StandardSignal: src = gen_standard_signal(cfg.sample_rate_hz); break;
    case ShotSource::Pulse: src = gen_pulse_signal(cfg.pulse, cfg.sample_rate_hz); break;
    case ShotSource::ProbeSynthetic:
      return gen_probe_signal(cfg.sample_rate_hz, cfg.duration_s, cfg.probe_flux_vs);
  }
  src.samples.resize(n, 0.0);  // pad with idle input (or clip) to the shot window
  return src;
}

}  // namespace detail

inline ShotOutcome run_shot(const ShotConfig& cfg) {
  validate(cfg.params);
  if (!(cfg.duration_s > 0.0) || !std::isfinite(cfg.duration_s))
    throw std::invalid_argument("run_shot: duration must be finite and > 0");
  if (!(cfg.sample_rate_hz > 0.0) || !std::isfinite(cfg.sample_rate_hz))
    throw std::invalid_argument("run_shot: sample rate must be finite and > 0");
  if (!std::isfinite(cfg.common_mode_v))
    throw std::invalid_argument("run_shot: common-mode voltage must be finite");
  if (cfg.correct_with_reference && !cfg.reference_fit)
    throw std::invalid_argument("run_shot: correction requested but no reference fit given");

  const SignalTrace src = detail::shot_source_trace(cfg);
  SimResult sim = simulate(src, cfg.common_mode_v, cfg.params);

  ShotOutcome out;
  out.raw = cfg.noise_rms_v > 0.0 ? add_noise(sim.output, cfg.noise_rms_v, cfg.seed)
                                  : std::move(sim.output);
  out.corrected = cfg.correct_with_reference
                      ? correct(out.raw, *cfg.reference_fit, /*causal=*/true, cfg.subtract_intercept)
                      : out.raw;

  out.report.raw = normalized_drift(out.raw, cfg.params);
  if (cfg.correct_with_reference)
    out.report.corrected = normalized_drift(out.corrected, cfg.params);

  // a zero-differential shot with common mode applied doubles as a CMRR test
  if (cfg.source == ShotSource::ZeroInput && cfg.common_mode_v != 0.0) {
    out.report.is_cmrr_measurement = true;
    const double span = out.report.raw.span;
    if (span >= cmrr_drift_floor_v && out.raw.size() >= 2)
      out.report.cmrr_db = compute_cmrr(std::fabs(cfg.common_mode_v), span,
                                        out.raw.last_time() - out.raw.t_start, cfg.params);
  }

  if (cfg.normalized_limit) {
    const DriftMetric& judged = out.report.corrected ? *out.report.corrected : out.report.raw;
    out.report.pass = judged.normalized <= *cfg.normalized_limit;
  }
  return out;
}

/// Measures CMRR the way the bench does: zero differential input, constant
/// common-mode level, drift span over the window. Spans under `floor_v`
/// report as nullopt ("no measurable drift"); pass 0 to disable the floor.
inline std::optional<double> cmrr_test(double v_cm, double window_s, const IntegratorParams& params,
                                       double sample_rate_hz = 100.0,
                                       double floor_v = cmrr_drift_floor_v) {
  validate(params);
  if (!(v_cm >= 0.0) || !std::isfinite(v_cm))
    throw std::invalid_argument("cmrr_test: v_cm must be finite and >= 0");
  if (!(window_s > 0.0) || !std::isfinite(window_s))
    throw std::invalid_argument("cmrr_test: window must be finite and > 0");
  if (v_cm == 0.0) return std::nullopt;  // nothing to reject, nothing to measure

  ShotConfig cfg;
  cfg.duration_s = window_s;
  cfg.sample_rate_hz = sample_rate_hz;
  cfg.source = ShotSource::ZeroInput;
  cfg.common_mode_v = v_cm;
  cfg.params = params;
  const ShotOutcome shot = run_shot(cfg);

  const double span = shot.report.raw.span;
  if (span < floor_v || shot.raw.size() < 2) return std::nullopt;
  return compute_cmrr(std::fabs(v_cm), span, shot.raw.last_time() - shot.raw.t_start, params);
}

}  // namespace intlab

#endif
