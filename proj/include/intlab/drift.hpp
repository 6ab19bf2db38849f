#ifndef INTLAB_DRIFT_HPP
#define INTLAB_DRIFT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "intlab/integrator.hpp"
#include "intlab/trace.hpp"

namespace intlab {

/// Least-squares line fitted to a reference shot. `intercept` is the line
/// value at t = 0 (absolute trace time), so the correction is simply
/// v - (intercept + slope * t) for any later sample.
struct DriftFit {
  double slope = 0.0;          ///< V/s
  double intercept = 0.0;      ///< V at t = 0
  double rms_residual = 0.0;   ///< V
  double t_lo = 0.0;           ///< fit window, s
  double t_hi = 0.0;

  bool operator==(const DriftFit&) const = default;
};

namespace detail {

/// Kahan-compensated accumulator; long reference shots (10^6 samples) would
/// otherwise eat the 1e-12 slope recovery budget in rounding alone.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

/// Ordinary least squares over the samples with t_lo <= t <= t_hi.
/// Two-pass centered, compensated sums keep exact-line recovery at 1e-12
/// relative even on 400 s windows.
inline DriftFit fit_drift_slope(const SignalTrace& ref, double t_lo, double t_hi) {
  validate(ref);
  if (!(t_lo <= t_hi) || !std::isfinite(t_lo) || !std::isfinite(t_hi))
    throw std::invalid_argument("fit_drift_slope: bad window");
  if (ref.empty() || t_hi < ref.t_start || t_lo > ref.last_time())
    throw std::invalid_argument("fit_drift_slope: window lies outside the trace");

  std::size_t k_lo = ref.size(), k_hi = 0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const double t = ref.time_at(k);
    if (t >= t_lo && t <= t_hi) {
      k_lo = std::min(k_lo, k);
      k_hi = std::max(k_hi, k);
    }
  }
  if (k_lo >= ref.size() || k_hi < k_lo + 1)
    throw std::invalid_argument("fit_drift_slope: window holds fewer than 2 samples");

  const std::size_t n = k_hi - k_lo + 1;
  detail::KahanSum t_sum, v_sum;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    t_sum.add(ref.time_at(k));
    v_sum.add(ref.samples[k]);
  }
  const double t_mean = t_sum.value() / static_cast<double>(n);
  const double v_mean = v_sum.value() / static_cast<double>(n);

  detail::KahanSum stv, stt;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const double dtc = ref.time_at(k) - t_mean;
    stv.add(dtc * (ref.samples[k] - v_mean));
    stt.add(dtc * dtc);
  }

  DriftFit fit;
  fit.slope = stv.value() / stt.value();
  fit.intercept = v_mean - fit.slope * t_mean;
  fit.t_lo = t_lo;
  fit.t_hi = t_hi;

  detail::KahanSum ss;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const double r = ref.samples[k] - (fit.intercept + fit.slope * ref.time_at(k));
    ss.add(r * r);
  }
  fit.rms_residual = std::sqrt(ss.value() / static_cast<double>(n));
  return fit;
}

/// Fit over the whole shot.
inline DriftFit fit_drift_slope(const SignalTrace& ref) {
  if (ref.empty()) throw std::invalid_argument("fit_drift_slope: empty trace");
  return fit_drift_slope(ref, ref.t_start, ref.last_time());
}

inline void validate(const DriftFit& fit) {
  if (!std::isfinite(fit.slope) || !std::isfinite(fit.intercept))
    throw std::invalid_argument("DriftFit: non-finite coefficients");
}

/// Streamable form of the correction: holds the fitted line and rectifies one
/// sample at a time, which is all a real-time consumer gets to do mid-shot.
class CausalCorrector {
 public:
  explicit CausalCorrector(const DriftFit& fit, bool subtract_intercept = true)
      : slope_(fit.slope), base_(subtract_intercept ? fit.intercept : 0.0) {
    validate(fit);
  }

  double apply(double t, double v) const { return v - (base_ + slope_ * t); }

 private:
  double slope_;
  double base_;
};

/// Removes the fitted drift line from a trace. `causal` routes every sample
/// through the streaming corrector; both paths apply the same affine map and
/// produce bit-identical output.
inline SignalTrace correct(const SignalTrace& tr, const DriftFit& fit, bool causal = true,
                           bool subtract_intercept = true) {
  validate(tr);
  validate(fit);
  SignalTrace out = tr;
  if (causal) {
    CausalCorrector c(fit, subtract_intercept);
    for (std::size_t k = 0; k < out.size(); ++k)
      out.samples[k] = c.apply(out.time_at(k), out.samples[k]);
  } else {
    const double base = subtract_intercept ? fit.intercept : 0.0;
    for (std::size_t k = 0; k < out.size(); ++k)
      out.samples[k] = out.samples[k] - (base + fit.slope * out.time_at(k));
  }
  return out;
}

/// Drift figure of merit: output span scaled by RC, normalized to 1000 s.
struct DriftMetric {
  double span = 0.0;        ///< max - min over the trace, V
  double normalized = 0.0;  ///< span * RC * (1000 s / duration), V*s per 1000 s
};

inline DriftMetric normalized_drift(const SignalTrace& tr, const IntegratorParams& p) {
  validate(p);
  validate(tr);
  if (tr.empty()) throw std::invalid_argument("normalized_drift: empty trace");
  const auto [lo, hi] = std::minmax_element(tr.samples.begin(), tr.samples.end());
  DriftMetric m;
  m.span = *hi - *lo;
  m.normalized = m.span * p.rc() * (1000.0 / tr.duration());
  return m;
}

}  // namespace intlab

#endif
