#ifndef INTLAB_PROTOCOL_HPP
#define INTLAB_PROTOCOL_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "intlab/util.hpp"

namespace intlab {

// ---------------------------------------------------------------------------
// Controller instruction set. Newline-terminated ASCII, case-sensitive, one
// reply line per request:
//
//   ALLd;d;d;d;d;d;d;d    set the gain code of every channel (8 codes, 0..7)
//   READAll               read the gain codes back as "d;d;d;d;d;d;d;d"
//   RCd;d                 set one module slot: RC<module>;<gain>
//   INTEd                 set the same gain code on every channel
//   Initialization        zero all accumulators, return to normal mode
//   StandardSignal        integrate the bipolar calibration pulse; reply
//                         carries "plateau,final" per channel
//   PulseSignal           same with the 1 s single pulse
//   IntHold               freeze every channel accumulator
//   NETip;mask;gateway    store a new network configuration
//   QUIT                  end the control session
//
// Replies are "OK", "OK <payload>" or "ERR <code>" with code one of:
//   unknown  instruction not recognized
//   arity    argument count or argument syntax wrong
//   range    gain code or module index out of range
//   addr     malformed dotted-quad address
//   busy     command not allowed in the current mode (or session occupied)
//   store    parameter store failure
// ---------------------------------------------------------------------------

inline constexpr int channel_count = 8;
inline constexpr unsigned max_gain_code = 7;

using IpAddress = std::array<std::uint8_t, 4>;

/// Strict dotted quad: four decimal octets 0..255, no leading zeros.
inline std::optional<IpAddress> parse_dotted_quad(std::string_view s) {
  auto parts = split(s, '.');
  if (parts.size() != 4) return std::nullopt;
  IpAddress out{};
  for (int i = 0; i < 4; ++i) {
    const auto p = parts[static_cast<std::size_t>(i)];
    if (p.empty() || p.size() > 3) return std::nullopt;
    if (p.size() > 1 && p[0] == '0') return std::nullopt;
    unsigned v = 0;
    if (!parse_small_uint(p, 255, v) || v > 255) return std::nullopt;
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
  }
  return out;
}

inline std::string format_dotted_quad(const IpAddress& a) {
  return std::to_string(a[0]) + '.' + std::to_string(a[1]) + '.' + std::to_string(a[2]) + '.' +
         std::to_string(a[3]);
}

struct SetAllGains {
  std::array<std::uint8_t, channel_count> gains{};
};
struct ReadAll {};
struct SetModuleGain {
  std::uint8_t module = 0;
  std::uint8_t gain = 0;
};
struct SetUniformGain {
  std::uint8_t gain = 0;
};
struct Initialization {};
struct StandardSignal {};
struct PulseSignal {};
struct IntHold {};
struct NetConfig {
  IpAddress ip{}, mask{}, gateway{};
};
struct Quit {};

using Command = std::variant<SetAllGains, ReadAll, SetModuleGain, SetUniformGain, Initialization,
                             StandardSignal, PulseSignal, IntHold, NetConfig, Quit>;

enum class ErrCode : std::uint8_t { Unknown, Arity, Range, Addr, Busy, Store };

inline const char* to_string(ErrCode c) {
  switch (c) {
    case ErrCode::Unknown: return "unknown";
    case ErrCode::Arity: return "arity";
    case ErrCode::Range: return "range";
    case ErrCode::Addr: return "addr";
    case ErrCode::Busy: return "busy";
    case ErrCode::Store: return "store";
  }
  return "unknown";
}

struct CommandError {
  ErrCode code = ErrCode::Unknown;
};

/// Total over arbitrary bytes: every line comes back as either a Command or a
/// CommandError, never an exception.
using ParsedLine = std::variant<Command, CommandError>;

namespace detail {

// Gain fields are bare decimal digit strings; anything else is an arity
// error, a parsed value past the cap is a range error.
inline std::optional<ErrCode> parse_gain_field(std::string_view s, unsigned cap, std::uint8_t& out) {
  unsigned v = 0;
  if (!parse_small_uint(s, cap, v)) return ErrCode::Arity;
  if (v > cap) return ErrCode::Range;
  out = static_cast<std::uint8_t>(v);
  return std::nullopt;
}

}  // namespace detail

inline ParsedLine parse_command(std::string_view line, unsigned module_count = channel_count) {
  line = strip_cr(line);

  if (line == "READAll") return Command{ReadAll{}};
  if (line == "Initialization") return Command{Initialization{}};
  if (line == "StandardSignal") return Command{StandardSignal{}};
  if (line == "PulseSignal") return Command{PulseSignal{}};
  if (line == "IntHold") return Command{IntHold{}};
  if (line == "QUIT") return Command{Quit{}};

  if (line.starts_with("ALL")) {
    auto fields = split(line.substr(3), ';');
    if (fields.size() != channel_count) return CommandError{ErrCode::Arity};
    SetAllGains cmd;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (auto err = detail::parse_gain_field(fields[i], max_gain_code, cmd.gains[i]))
        return CommandError{*err};
    return Command{cmd};
  }

  if (line.starts_with("RC")) {
    auto fields = split(line.substr(2), ';');
    if (fields.size() != 2) return CommandError{ErrCode::Arity};
    SetModuleGain cmd;
    if (auto err = detail::parse_gain_field(fields[0], module_count ? module_count - 1 : 0,
                                            cmd.module))
      return CommandError{*err};
    if (auto err = detail::parse_gain_field(fields[1], max_gain_code, cmd.gain))
      return CommandError{*err};
    return Command{cmd};
  }

  if (line.starts_with("INTE")) {
    SetUniformGain cmd;
    if (auto err = detail::parse_gain_field(line.substr(4), max_gain_code, cmd.gain))
      return CommandError{*err};
    return Command{cmd};
  }

  if (line.starts_with("NET")) {
    auto rest = line.substr(3);
    if (rest.starts_with(' ')) rest.remove_prefix(1);  // both "NETa;b;c" and "NET a;b;c"
    auto fields = split(rest, ';');
    if (fields.size() != 3) return CommandError{ErrCode::Arity};
    NetConfig cmd;
    IpAddress* dst[3] = {&cmd.ip, &cmd.mask, &cmd.gateway};
    for (int i = 0; i < 3; ++i) {
      auto a = parse_dotted_quad(fields[static_cast<std::size_t>(i)]);
      if (!a) return CommandError{ErrCode::Addr};
      *dst[i] = *a;
    }
    return Command{cmd};
  }

  return CommandError{ErrCode::Unknown};
}

/// One reply line. Wire form: "OK", "OK <payload>" or "ERR <code>".
struct Response {
  bool ok = true;
  ErrCode code = ErrCode::Unknown;  ///< meaningful when !ok
  std::string payload;

  static Response success(std::string payload = "") { return {true, ErrCode::Unknown, std::move(payload)}; }
  static Response error(ErrCode c) { return {false, c, {}}; }

  std::string to_line() const {
    if (!ok) return std::string("ERR ") + to_string(code);
    if (payload.empty()) return "OK";
    return "OK " + payload;
  }

  bool operator==(const Response&) const = default;
};

/// Classifies a reply line the way the client sees it. Unparseable lines
/// count as protocol errors.
inline Response parse_response(std::string_view line) {
  line = strip_cr(line);
  if (line == "OK") return Response::success();
  if (line.starts_with("OK ")) return Response::success(std::string(line.substr(3)));
  if (line.starts_with("ERR ")) {
    const auto word = line.substr(4);
    for (ErrCode c : {ErrCode::Unknown, ErrCode::Arity, ErrCode::Range, ErrCode::Addr,
                      ErrCode::Busy, ErrCode::Store})
      if (word == to_string(c)) return Response::error(c);
  }
  return Response::error(ErrCode::Unknown);
}

}  // namespace intlab

#endif
