#ifndef INTLAB_CONTROLLER_HPP
#define INTLAB_CONTROLLER_HPP

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "intlab/errors.hpp"
#include "intlab/integrator.hpp"
#include "intlab/protocol.hpp"
#include "intlab/trace.hpp"
#include "intlab/util.hpp"

namespace intlab {

enum class ControllerMode : std::uint8_t {
  Normal = 0,
  Hold = 1,
  StandardSignalTest = 2,
  PulseSignalTest = 3,
};

/// Gain code -> amplifier multiplier. The codes address the analog-switch
/// channels; the multiplier set is configuration, not hardware truth.
using GainTable = std::map<std::uint8_t, double>;

inline GainTable default_gain_table() {
  return {{0, 1.0}, {1, 2.0}, {2, 4.0}, {3, 5.0}, {4, 8.0}, {5, 10.0}, {6, 16.0}, {7, 20.0}};
}

struct NetSettings {
  IpAddress ip{192, 168, 1, 100};
  IpAddress mask{255, 255, 255, 0};
  IpAddress gateway{192, 168, 1, 1};

  bool operator==(const NetSettings&) const = default;
};

/// Everything the controller persists across power cycles. Live integrator
/// accumulators are deliberately not part of this; charge does not survive a
/// power cycle.
struct ControllerState {
  std::array<std::uint8_t, channel_count> gains{};  ///< codes 0..7
  ControllerMode mode = ControllerMode::Normal;
  NetSettings net{};
  GainTable gain_table = default_gain_table();

  bool operator==(const ControllerState&) const = default;
};

// ---------------------------------------------------------------------------
// Parameter store: the 8 Kbit EEPROM twin. Single binary file, 2-byte
// little-endian version header, payload capped at 1024 bytes.
// ---------------------------------------------------------------------------

inline constexpr std::size_t store_capacity_bytes = 1024;
inline constexpr std::uint16_t store_version = 1;

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  double f64() {
    auto b = take(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v = 0;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > data_.size()) throw StoreError("parameter store payload truncated");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Fixed little-endian layout: gains[8], mode, ip/mask/gateway octets, then
/// the gain table as a u16 count plus (code, f64 multiplier) entries.
/// Throws StoreOverflow beyond 1024 bytes -- the EEPROM is full.
inline std::vector<std::uint8_t> serialize_state(const ControllerState& st) {
  std::vector<std::uint8_t> out;
  out.reserve(128);
  out.insert(out.end(), st.gains.begin(), st.gains.end());
  out.push_back(static_cast<std::uint8_t>(st.mode));
  for (const IpAddress* a : {&st.net.ip, &st.net.mask, &st.net.gateway})
    out.insert(out.end(), a->begin(), a->end());
  detail::put_u16(out, static_cast<std::uint16_t>(st.gain_table.size()));
  for (const auto& [code, mult] : st.gain_table) {
    out.push_back(code);
    detail::put_f64(out, mult);
  }
  if (out.size() > store_capacity_bytes)
    throw StoreOverflow("state needs " + std::to_string(out.size()) +
                        " bytes; parameter store holds " + std::to_string(store_capacity_bytes));
  return out;
}

inline ControllerState deserialize_state(std::span<const std::uint8_t> payload) {
  detail::ByteReader rd(payload);
  ControllerState st;
  for (auto& g : st.gains) {
    g = rd.u8();
    if (g > max_gain_code) throw StoreError("stored gain code out of range");
  }
  const std::uint8_t mode = rd.u8();
  if (mode > static_cast<std::uint8_t>(ControllerMode::PulseSignalTest))
    throw StoreError("stored mode byte out of range");
  st.mode = static_cast<ControllerMode>(mode);
  for (IpAddress* a : {&st.net.ip, &st.net.mask, &st.net.gateway})
    for (auto& octet : *a) octet = rd.u8();
  const std::uint16_t entries = rd.u16();
  st.gain_table.clear();
  for (std::uint16_t i = 0; i < entries; ++i) {
    const std::uint8_t code = rd.u8();
    const double mult = rd.f64();
    if (!std::isfinite(mult)) throw StoreError("stored gain multiplier not finite");
    st.gain_table[code] = mult;
  }
  if (!rd.done()) throw StoreError("trailing bytes after parameter store payload");
  return st;
}

/// File-backed parameter store. Writes go through a temp file + rename so a
/// simulated power cycle never sees a half-written image.
class ParamStore {
 public:
  explicit ParamStore(std::string path) : path_(std::move(path)) {}

  const std::string& path() const { return path_; }

  bool exists() const {
    std::ifstream is(path_, std::ios::binary);
    return is.good();
  }

  void save(const ControllerState& st) const {
    const auto payload = serialize_state(st);
    const std::string tmp = path_ + ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) throw IoError("ParamStore: cannot open '" + tmp + "': " + std::strerror(errno));
      const std::uint8_t header[2] = {static_cast<std::uint8_t>(store_version & 0xff),
                                      static_cast<std::uint8_t>(store_version >> 8)};
      os.write(reinterpret_cast<const char*>(header), 2);
      os.write(reinterpret_cast<const char*>(payload.data()),
               static_cast<std::streamsize>(payload.size()));
      os.flush();
      if (!os) throw IoError("ParamStore: write failed for '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path_.c_str()) != 0)
      throw IoError("ParamStore: rename to '" + path_ + "' failed: " + std::strerror(errno));
  }

  ControllerState load() const {
    std::ifstream is(path_, std::ios::binary);
    if (!is) throw IoError("ParamStore: cannot open '" + path_ + "': " + std::strerror(errno));
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 2) throw StoreError("parameter store image shorter than its header");
    const std::uint16_t version = static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
    if (version != store_version)
      throw StoreError("parameter store version " + std::to_string(version) + " not supported");
    if (bytes.size() - 2 > store_capacity_bytes)
      throw StoreError("parameter store image exceeds capacity");
    return deserialize_state(std::span<const std::uint8_t>(bytes).subspan(2));
  }

 private:
  std::string path_;
};

/// save -> load, the simulated power cycle.
inline ControllerState store_roundtrip(const ControllerState& st, const ParamStore& store) {
  store.save(st);
  return store.load();
}

// ---------------------------------------------------------------------------
// Channel bank
// ---------------------------------------------------------------------------

/// Eight integrator channels sharing one parameter set; holds the live
/// accumulators between commands. Test runs report integrator-output
/// quantities -- the remote-control amplifier sits downstream of this tap.
class ChannelBank {
 public:
  struct TestResult {
    double plateau = 0.0;  ///< sample of largest magnitude during the run, V
    double final_value = 0.0;
  };

  explicit ChannelBank(IntegratorParams params = preset_ideal(),
                       double test_sample_rate = 100e3, double test_noise_rms = 0.0,
                       std::uint64_t seed = 1)
      : params_(params), test_rate_(test_sample_rate), noise_rms_(test_noise_rms), seed_(seed) {
    validate(params_);
  }

  const IntegratorParams& params() const { return params_; }
  double test_sample_rate() const { return test_rate_; }
  std::array<IntegratorState, channel_count>& states() { return states_; }
  const std::array<IntegratorState, channel_count>& states() const { return states_; }

  void reset_all() {
    for (auto& s : states_) s = IntegratorState{};
  }

  void hold_all() {
    for (auto& s : states_) s.mode = RunMode::Hold;
  }

  bool any_held() const {
    for (const auto& s : states_)
      if (s.mode == RunMode::Hold) return true;
    return false;
  }

  /// Integrates a stimulus on every channel from its current accumulator.
  std::array<TestResult, channel_count> run_test(const SignalTrace& stimulus) {
    std::array<TestResult, channel_count> out{};
    for (int ch = 0; ch < channel_count; ++ch) {
      auto sim = simulate(stimulus, 0.0, params_, {}, states_[static_cast<std::size_t>(ch)]);
      if (noise_rms_ > 0.0) sim.output = add_noise(sim.output, noise_rms_, next_seed());
      states_[static_cast<std::size_t>(ch)] = sim.state;
      auto& r = out[static_cast<std::size_t>(ch)];
      for (double v : sim.output.samples)
        if (std::fabs(v) > std::fabs(r.plateau)) r.plateau = v;
      r.final_value = sim.output.samples.empty() ? sim.state.output : sim.output.samples.back();
    }
    return out;
  }

 private:
  std::uint64_t next_seed() { return seed_ = seed_ * 6364136223846793005ull + 1442695040888963407ull; }

  IntegratorParams params_;
  double test_rate_;
  double noise_rms_;
  std::uint64_t seed_;
  std::array<IntegratorState, channel_count> states_{};
};

// ---------------------------------------------------------------------------
// Command execution
// ---------------------------------------------------------------------------

struct ExecResult {
  Response response;
  bool session_end = false;  ///< QUIT was executed
  bool net_changed = false;  ///< a NET command took; new address on next listen
};

/// Ties controller state, the simulated channel bank and the parameter store
/// together and runs the instruction set against them. Every mutating command
/// persists before it commits, so a power cycle right after a reply can never
/// lose the acknowledged state.
class Controller {
 public:
  Controller(ControllerState st, ChannelBank bank, ParamStore store)
      : state_(std::move(st)), bank_(std::move(bank)), store_(std::move(store)) {}

  /// Loads state from the store when an image exists, otherwise starts from
  /// `fallback` and writes the first image.
  static Controller open(ChannelBank bank, ParamStore store,
                         ControllerState fallback = ControllerState{}) {
    ControllerState st = store.exists() ? store.load() : fallback;
    if (!store.exists()) store.save(st);
    return Controller(std::move(st), std::move(bank), std::move(store));
  }

  const ControllerState& state() const { return state_; }
  ChannelBank& bank() { return bank_; }
  const ParamStore& store() const { return store_; }

  ExecResult handle_line(std::string_view line) {
    auto parsed = parse_command(line);
    if (auto* err = std::get_if<CommandError>(&parsed))
      return {Response::error(err->code), false, false};
    return execute(std::get<Command>(parsed));
  }

  ExecResult execute(const Command& cmd) {
    try {
      return std::visit([&](const auto& c) { return run(c); }, cmd);
    } catch (const StoreError&) {
      return {Response::error(ErrCode::Store), false, false};
    } catch (const IoError&) {
      return {Response::error(ErrCode::Store), false, false};
    }
  }

 private:
  // Mutators stage a copy, persist it, then commit; a store failure leaves
  // the running state untouched.
  ExecResult commit(ControllerState next, bool net_changed = false) {
    store_.save(next);
    state_ = std::move(next);
    return {Response::success(), false, net_changed};
  }

  ExecResult run(const SetAllGains& c) {
    ControllerState next = state_;
    next.gains = c.gains;
    return commit(std::move(next));
  }

  ExecResult run(const SetModuleGain& c) {
    ControllerState next = state_;
    next.gains[c.module] = c.gain;
    return commit(std::move(next));
  }

  ExecResult run(const SetUniformGain& c) {
    ControllerState next = state_;
    next.gains.fill(c.gain);
    return commit(std::move(next));
  }

  ExecResult run(const ReadAll&) {
    std::string payload;
    for (int i = 0; i < channel_count; ++i) {
      if (i) payload += ';';
      payload += std::to_string(state_.gains[static_cast<std::size_t>(i)]);
    }
    return {Response::success(std::move(payload)), false, false};
  }

  ExecResult run(const Initialization&) {
    bank_.reset_all();
    ControllerState next = state_;
    next.mode = ControllerMode::Normal;
    return commit(std::move(next));
  }

  ExecResult run(const IntHold&) {
    bank_.hold_all();
    ControllerState next = state_;
    next.mode = ControllerMode::Hold;
    return commit(std::move(next));
  }

  ExecResult run(const StandardSignal&) {
    return run_signal_test(ControllerMode::StandardSignalTest,
                           gen_standard_signal(bank_.test_sample_rate()));
  }

  ExecResult run(const PulseSignal&) {
    // the 1 s calibration pulse; long-RC channels need it to build any output
    return run_signal_test(ControllerMode::PulseSignalTest,
                           gen_pulse_signal({2.5, 1.0, {+1}}, bank_.test_sample_rate()));
  }

  ExecResult run(const NetConfig& c) {
    ControllerState next = state_;
    next.net = {c.ip, c.mask, c.gateway};
    return commit(std::move(next), true);
  }

  ExecResult run(const Quit&) { return {Response::success(), true, false}; }

  ExecResult run_signal_test(ControllerMode test_mode, const SignalTrace& stimulus) {
    // A frozen integrator cannot run a calibration; Initialization releases it.
    if (state_.mode == ControllerMode::Hold || bank_.any_held())
      return {Response::error(ErrCode::Busy), false, false};

    state_.mode = test_mode;  // visible only to this command; auto-returns
    auto results = bank_.run_test(stimulus);
    state_.mode = ControllerMode::Normal;

    std::string payload;
    for (int ch = 0; ch < channel_count; ++ch) {
      if (ch) payload += ';';
      const auto& r = results[static_cast<std::size_t>(ch)];
      payload += format_double(r.plateau, "%.9g");
      payload += ',';
      payload += format_double(r.final_value, "%.9g");
    }
    return {Response::success(std::move(payload)), false, false};
  }

  ControllerState state_;
  ChannelBank bank_;
  ParamStore store_;
};

}  // namespace intlab

#endif
