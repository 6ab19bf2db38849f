#ifndef INTLAB_CSV_HPP
#define INTLAB_CSV_HPP

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "intlab/errors.hpp"
#include "intlab/trace.hpp"

namespace intlab {

inline constexpr const char* trace_csv_header = "t_s,v_V";

/// Streams a trace as CSV: the "t_s,v_V" header, then one row per sample at
/// full double precision, so an import reproduces every sample bit-exactly.
inline void export_trace(const SignalTrace& tr, std::ostream& os) {
  validate(tr);
  os << trace_csv_header << '\n';
  char row[80];
  for (std::size_t k = 0; k < tr.size(); ++k) {
    std::snprintf(row, sizeof row, "%.17g,%.17g\n", tr.time_at(k), tr.samples[k]);
    os << row;
  }
  if (!os) throw IoError("export_trace: stream write failed");
}

inline void export_trace(const SignalTrace& tr, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("export_trace: cannot open '" + path + "': " + std::strerror(errno));
  export_trace(tr, os);
  os.flush();
  if (!os) throw IoError("export_trace: write failed for '" + path + "'");
}

namespace detail {

inline bool parse_csv_row(const std::string& line, double& t, double& v) {
  const char* s = line.c_str();
  char* end = nullptr;
  t = std::strtod(s, &end);
  if (end == s || *end != ',') return false;
  s = end + 1;
  v = std::strtod(s, &end);
  if (end == s) return false;
  while (*end == ' ' || *end == '\r') ++end;
  return *end == '\0';
}

// Sample rate comes back from the row spacing; integer rates (the usual case
// here) snap exactly so a round trip reproduces the original value.
inline double infer_rate(double t_first, double t_last, std::size_t n) {
  const double raw = static_cast<double>(n - 1) / (t_last - t_first);
  const double snapped = std::round(raw);
  if (snapped > 0.0 && std::fabs(raw - snapped) <= 1e-9 * raw) return snapped;
  return raw;
}

}  // namespace detail

/// Reads a trace written by export_trace. The sample rate is inferred from
/// the time column (snapping to integer Hz when within 1e-9 relative) unless
/// an explicit rate is handed in; a single-row file needs the explicit rate.
inline SignalTrace import_trace(std::istream& is, const std::string& origin = "<stream>",
                                std::optional<double> sample_rate = std::nullopt) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("import_trace: '" + origin + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != trace_csv_header)
    throw IoError("import_trace: '" + origin + "' does not start with '" +
                  std::string(trace_csv_header) + "'");

  SignalTrace tr;
  double t_first = 0.0, t_prev = 0.0, t_last = 0.0;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    double t = 0.0, v = 0.0;
    if (!detail::parse_csv_row(line, t, v) || !std::isfinite(t) || !std::isfinite(v))
      throw IoError("import_trace: bad row " + std::to_string(row + 2) + " in '" + origin + "'");
    if (row > 0 && !(t > t_prev))
      throw IoError("import_trace: time column not increasing at row " + std::to_string(row + 2) +
                    " in '" + origin + "'");
    if (row == 0) t_first = t;
    t_prev = t_last = t;
    tr.samples.push_back(v);
    ++row;
  }

  tr.t_start = row ? t_first : 0.0;
  if (sample_rate) {
    if (!(*sample_rate > 0.0)) throw std::invalid_argument("import_trace: sample_rate must be > 0");
    tr.sample_rate = *sample_rate;
  } else if (row >= 2) {
    tr.sample_rate = detail::infer_rate(t_first, t_last, row);
  } else {
    throw IoError("import_trace: cannot infer sample rate from " + std::to_string(row) +
                  " row(s) in '" + origin + "'; pass an explicit rate");
  }
  return tr;
}

inline SignalTrace import_trace(const std::string& path,
                                std::optional<double> sample_rate = std::nullopt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("import_trace: cannot open '" + path + "': " + std::strerror(errno));
  return import_trace(is, path, sample_rate);
}

}  // namespace intlab

#endif
