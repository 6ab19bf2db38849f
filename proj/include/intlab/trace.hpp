#ifndef INTLAB_TRACE_HPP
#define INTLAB_TRACE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace intlab {

/// Uniformly sampled voltage time series; the common currency between the
/// signal generator, the integrator simulation and the drift correction.
/// Samples are always finite -- generators and filters enforce it.
struct SignalTrace {
  double sample_rate = 0.0;      ///< Hz, > 0
  double t_start = 0.0;          ///< s
  std::vector<double> samples;   ///< V

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double dt() const { return 1.0 / sample_rate; }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  double time_at(std::size_t k) const { return t_start + static_cast<double>(k) / sample_rate; }
  double last_time() const { return time_at(samples.size() - 1); }

  bool operator==(const SignalTrace&) const = default;
};

inline void validate(const SignalTrace& tr) {
  if (!(tr.sample_rate > 0.0) || !std::isfinite(tr.sample_rate))
    throw std::invalid_argument("SignalTrace: sample_rate must be finite and > 0");
  if (!std::isfinite(tr.t_start))
    throw std::invalid_argument("SignalTrace: t_start must be finite");
  for (double v : tr.samples)
    if (!std::isfinite(v)) throw std::invalid_argument("SignalTrace: non-finite sample");
}

/// Piecewise-constant test pulse: one lobe of `width` seconds per polarity
/// entry, followed by a zero tail of one lobe width.
struct PulseSpec {
  double amplitude = 2.5;          ///< V
  double width = 0.010;            ///< s per lobe
  std::vector<int> polarity{+1};   ///< entries are +1 or -1
};

inline void validate(const PulseSpec& spec) {
  if (!std::isfinite(spec.amplitude))
    throw std::invalid_argument("PulseSpec: amplitude must be finite");
  if (!(spec.width > 0.0) || !std::isfinite(spec.width))
    throw std::invalid_argument("PulseSpec: width must be finite and > 0");
  if (spec.polarity.empty())
    throw std::invalid_argument("PulseSpec: polarity sequence must not be empty");
  for (int p : spec.polarity)
    if (p != 1 && p != -1) throw std::invalid_argument("PulseSpec: polarity entries must be +1 or -1");
}

namespace detail {

// Lobe boundaries snap to whole samples. The guard term absorbs cases like
// 0.01 * 1e5 landing a hair under the integer.
inline std::size_t samples_per_lobe(double width, double sample_rate) {
  return static_cast<std::size_t>(std::floor(width * sample_rate + 1e-9));
}

}  // namespace detail

/// Piecewise-constant pulse train per `spec`, plus a zero tail of one lobe
/// width. Requires at least 10 samples per lobe.
inline SignalTrace gen_pulse_signal(const PulseSpec& spec, double sample_rate) {
  validate(spec);
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw std::invalid_argument("gen_pulse_signal: sample_rate must be finite and > 0");
  const std::size_t lobe = detail::samples_per_lobe(spec.width, sample_rate);
  if (lobe < 10)
    throw std::invalid_argument("gen_pulse_signal: fewer than 10 samples per lobe at this rate");

  SignalTrace out;
  out.sample_rate = sample_rate;
  out.samples.reserve(lobe * (spec.polarity.size() + 1));
  for (int p : spec.polarity)
    out.samples.insert(out.samples.end(), lobe, p > 0 ? spec.amplitude : -spec.amplitude);
  out.samples.insert(out.samples.end(), lobe, 0.0);
  return out;
}

inline constexpr double standard_signal_amplitude_v = 2.5;
inline constexpr double standard_signal_lobe_s = 0.010;

/// The controller's built-in calibration signal: +2.5 V for 10 ms immediately
/// followed by -2.5 V for 10 ms, then zero. Total area is exactly 0 V*s.
/// Needs >= 10 kHz so each lobe carries at least 100 samples.
inline SignalTrace gen_standard_signal(double sample_rate) {
  if (!(sample_rate >= 10'000.0))
    throw std::invalid_argument(
        "gen_standard_signal: sample_rate below 10 kHz cannot resolve the 10 ms lobes");
  return gen_pulse_signal(
      {standard_signal_amplitude_v, standard_signal_lobe_s, {+1, -1}}, sample_rate);
}

/// Demo waveform shaped like a plasma-current flux swing: the returned trace
/// is the analytic time derivative of a smoothstep ramp / flat-top / ramp-down
/// flux of `peak_flux_vs` volt-seconds, so integrating it reproduces the flux
/// shape. Demo use only; calibration paths never touch it.
inline SignalTrace gen_probe_signal(double sample_rate, double duration_s, double peak_flux_vs) {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw std::invalid_argument("gen_probe_signal: sample_rate must be finite and > 0");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw std::invalid_argument("gen_probe_signal: duration must be finite and > 0");
  if (!std::isfinite(peak_flux_vs))
    throw std::invalid_argument("gen_probe_signal: peak flux must be finite");

  // Flux ramps up over [0.1 0.3]*D, holds, ramps down over [0.7 0.9]*D.
  const double t_up0 = 0.1 * duration_s, t_up1 = 0.3 * duration_s;
  const double t_dn0 = 0.7 * duration_s, t_dn1 = 0.9 * duration_s;
  const double ramp = t_up1 - t_up0;
  auto smoothstep_rate = [&](double t, double lo, double hi) {
    const double x = (t - lo) / (hi - lo);
    return 6.0 * x * (1.0 - x) / ramp;  // d/dt of 3x^2-2x^3 over the ramp
  };

  SignalTrace out;
  out.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(std::floor(duration_s * sample_rate + 1e-9));
  out.samples.resize(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = out.time_at(k);
    if (t >= t_up0 && t < t_up1)
      out.samples[k] = peak_flux_vs * smoothstep_rate(t, t_up0, t_up1);
    else if (t >= t_dn0 && t < t_dn1)
      out.samples[k] = -peak_flux_vs * smoothstep_rate(t, t_dn0, t_dn1);
  }
  return out;
}

namespace detail {

/// Deterministic Gaussian stream: mt19937_64 uniforms through Box-Muller.
/// Bit-reproducible for a fixed seed on any platform, unlike
/// std::normal_distribution whose algorithm is implementation-defined.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit_open();  // (0,1], keeps log() finite
    const double u2 = next_unit_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double next_unit_open() { return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace detail

/// Adds zero-mean Gaussian noise of the given RMS. Deterministic for a fixed
/// seed; rms = 0 returns the input bit-identically.
inline SignalTrace add_noise(const SignalTrace& tr, double rms, std::uint64_t seed) {
  validate(tr);
  if (!(rms >= 0.0) || !std::isfinite(rms))
    throw std::invalid_argument("add_noise: rms must be finite and >= 0");
  if (rms == 0.0) return tr;

  SignalTrace out = tr;
  detail::NormalSampler gauss(seed);
  for (double& v : out.samples) v += rms * gauss();
  return out;
}

}  // namespace intlab

#endif
