#ifndef INTLAB_TEST_HELPERS_HPP
#define INTLAB_TEST_HELPERS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "intlab/trace.hpp"

namespace testutil {

inline intlab::SignalTrace constant_trace(double value, std::size_t n, double rate,
                                          double t_start = 0.0) {
  intlab::SignalTrace tr;
  tr.sample_rate = rate;
  tr.t_start = t_start;
  tr.samples.assign(n, value);
  return tr;
}

inline intlab::SignalTrace linear_trace(double intercept, double slope, std::size_t n, double rate,
                                        double t_start = 0.0) {
  intlab::SignalTrace tr;
  tr.sample_rate = rate;
  tr.t_start = t_start;
  tr.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) tr.samples[k] = intercept + slope * tr.time_at(k);
  return tr;
}

inline intlab::SignalTrace random_trace(std::mt19937_64& rng, std::size_t n, double rate,
                                        double amplitude = 1.0) {
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  intlab::SignalTrace tr;
  tr.sample_rate = rate;
  tr.samples.resize(n);
  for (auto& v : tr.samples) v = dist(rng);
  return tr;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  return m;
}

}  // namespace testutil

#endif
