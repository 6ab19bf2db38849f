// intlab -- bench twin of an 8-channel analog integrator system: difference
// integrator simulation, reference-shot drift correction, and the
// controller's TCP instruction set.

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "intlab/intlab.hpp"

using nlohmann::json;

namespace {

// exit codes: 0 ok, 2 protocol error, 3 I/O error, 4 threshold failure
constexpr int exit_ok = 0;
constexpr int exit_protocol = 2;
constexpr int exit_io = 3;
constexpr int exit_threshold = 4;

struct Endpoint {
  std::string ip = "127.0.0.1";
  std::uint16_t port = 5025;
};

Endpoint parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
    throw CLI::ValidationError("address must be ip:port, got '" + s + "'");
  Endpoint ep;
  ep.ip = s.substr(0, colon);
  const long port = std::strtol(s.c_str() + colon + 1, nullptr, 10);
  if (port < 0 || port > 65535) throw CLI::ValidationError("port out of range in '" + s + "'");
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

// --- shared option bundles ---------------------------------------------------

struct ParamsOpts {
  std::string preset = "calibrated";
  std::optional<double> resistance, capacitance, offset_voltage, offset_current, cmrr_db, rail;

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "integrator preset: ideal, datasheet, calibrated")
        ->check(CLI::IsMember(intlab::preset_names()));
    cmd->add_option("--resistance", resistance, "input resistance override, ohm");
    cmd->add_option("--capacitance", capacitance, "feedback capacitance override, F");
    cmd->add_option("--offset-voltage", offset_voltage, "op-amp offset voltage override, V");
    cmd->add_option("--offset-current", offset_current, "op-amp offset current override, A");
    cmd->add_option("--cmrr-db", cmrr_db, "CMRR override, dB (inf = ideal)");
    cmd->add_option("--rail", rail, "output rail voltage override, V");
  }

  intlab::IntegratorParams resolve() const {
    intlab::IntegratorParams p = intlab::preset_by_name(preset);
    if (resistance) p.resistance = *resistance;
    if (capacitance) p.capacitance = *capacitance;
    if (offset_voltage) p.offset_voltage = *offset_voltage;
    if (offset_current) p.offset_current = *offset_current;
    if (cmrr_db) p.cmrr_db = *cmrr_db;
    if (rail) p.rail_voltage = *rail;
    intlab::validate(p);
    return p;
  }
};

// --- JSON forms --------------------------------------------------------------

json fit_to_json(const intlab::DriftFit& fit) {
  return {{"slope_v_per_s", fit.slope},
          {"intercept_v", fit.intercept},
          {"rms_residual_v", fit.rms_residual},
          {"t_lo_s", fit.t_lo},
          {"t_hi_s", fit.t_hi}};
}

intlab::DriftFit fit_from_json(const json& j) {
  intlab::DriftFit fit;
  fit.slope = j.at("slope_v_per_s").get<double>();
  fit.intercept = j.at("intercept_v").get<double>();
  fit.rms_residual = j.value("rms_residual_v", 0.0);
  fit.t_lo = j.value("t_lo_s", 0.0);
  fit.t_hi = j.value("t_hi_s", 0.0);
  return fit;
}

json metric_to_json(const intlab::DriftMetric& m) {
  return {{"span_v", m.span}, {"normalized_vs_per_1000s", m.normalized}};
}

json report_to_json(const intlab::ShotReport& rep) {
  json j;
  j["raw"] = metric_to_json(rep.raw);
  j["corrected"] = rep.corrected ? metric_to_json(*rep.corrected) : json(nullptr);
  if (rep.is_cmrr_measurement)
    j["cmrr_db"] = rep.cmrr_db ? json(*rep.cmrr_db) : json("beyond-measurable");
  else
    j["cmrr_db"] = nullptr;
  j["pass"] = rep.pass ? json(*rep.pass) : json(nullptr);
  return j;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw intlab::IoError("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw intlab::IoError("write failed for '" + path + "'");
}

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw intlab::IoError("cannot open '" + path + "'");
  json j;
  is >> j;
  return j;
}

intlab::GainTable gain_table_from_json(const json& j) {
  intlab::GainTable table;
  for (const auto& [key, value] : j.items()) {
    const int code = std::stoi(key);
    if (code < 0 || code > 255) throw intlab::StoreError("gain table code out of range: " + key);
    table[static_cast<std::uint8_t>(code)] = value.get<double>();
  }
  return table;
}

// --- serve -------------------------------------------------------------------

intlab::ControllerServer* g_server = nullptr;

int cmd_serve(const Endpoint& listen, const std::string& store_path,
              const std::string& gain_table_path, const ParamsOpts& params_opts,
              double test_rate, double test_noise, std::uint64_t seed) {
  intlab::ChannelBank bank(params_opts.resolve(), test_rate, test_noise, seed);
  intlab::ParamStore store(store_path);

  intlab::ControllerState initial;
  if (!gain_table_path.empty()) {
    const auto table = gain_table_from_json(read_json(gain_table_path));
    if (store.exists()) {
      auto st = store.load();
      st.gain_table = table;
      store.save(st);
    } else {
      initial.gain_table = table;
    }
  }
  auto controller = intlab::Controller::open(std::move(bank), std::move(store), initial);

  intlab::ControllerServer server({listen.ip, listen.port, 65536, /*quiet=*/false}, controller);
  server.bind();
  std::printf("listening on %s:%u\n", server.bound_ip().c_str(), server.port());
  std::printf("store: %s\n", store_path.c_str());
  std::fflush(stdout);

  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  server.serve_forever();
  g_server = nullptr;
  std::printf("server stopped\n");
  return exit_ok;
}

// --- send / trigger ----------------------------------------------------------

std::vector<std::string> read_script(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw intlab::IoError("cannot open script '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

int cmd_send(const Endpoint& addr, const std::string& command, const std::string& script,
             int timeout_ms) {
  std::vector<std::string> lines;
  if (!script.empty()) lines = read_script(script);
  if (!command.empty()) lines.push_back(command);
  if (lines.empty()) throw CLI::ValidationError("nothing to send: give a command or --script");

  intlab::ClientSession session(addr.ip, addr.port, timeout_ms);
  bool any_err = false;
  for (const auto& line : lines) {
    const std::string reply = session.send_line(line);
    std::printf("%s\n", reply.c_str());
    if (!intlab::parse_response(reply).ok) any_err = true;
  }
  return any_err ? exit_protocol : exit_ok;
}

int cmd_trigger(const std::string& store_path, const ParamsOpts& params_opts,
                const std::string& command, const std::string& script, const std::string& via) {
  std::vector<std::string> lines;
  if (!script.empty()) lines = read_script(script);
  if (!command.empty()) lines.push_back(command);
  if (lines.empty()) throw CLI::ValidationError("nothing to execute: give a command or --script");

  auto controller = intlab::Controller::open(intlab::ChannelBank(params_opts.resolve()),
                                             intlab::ParamStore(store_path));
  bool any_err = false;
  for (const auto& line : lines) {
    const auto res = controller.handle_line(line);
    std::printf("[%s] %s\n", via.c_str(), res.response.to_line().c_str());
    if (!res.response.ok) any_err = true;
    if (res.session_end) break;
  }
  return any_err ? exit_protocol : exit_ok;
}

// --- shots -------------------------------------------------------------------

intlab::ShotSource source_from_flag(const std::string& s) { return intlab::shot_source_from(s); }

int cmd_run_shot(const intlab::ShotConfig& cfg, const std::string& out_raw,
                 const std::string& out_corrected, const std::string& report_path) {
  const auto shot = intlab::run_shot(cfg);

  if (!out_raw.empty()) intlab::export_trace(shot.raw, out_raw);
  if (!out_corrected.empty()) intlab::export_trace(shot.corrected, out_corrected);

  json rep = report_to_json(shot.report);
  rep["duration_s"] = cfg.duration_s;
  rep["sample_rate_hz"] = cfg.sample_rate_hz;
  rep["source"] = intlab::to_string(cfg.source);
  rep["rc_s"] = cfg.params.rc();
  if (!report_path.empty()) write_json(rep, report_path);

  std::printf("raw:       span %.6g V, normalized %.6g uV*s / 1000 s\n", shot.report.raw.span,
              shot.report.raw.normalized * 1e6);
  if (shot.report.corrected)
    std::printf("corrected: span %.6g V, normalized %.6g uV*s / 1000 s\n",
                shot.report.corrected->span, shot.report.corrected->normalized * 1e6);
  if (shot.report.is_cmrr_measurement) {
    if (shot.report.cmrr_db)
      std::printf("cmrr:      %.2f dB\n", *shot.report.cmrr_db);
    else
      std::printf("cmrr:      beyond measurable (drift under the floor)\n");
  }
  if (shot.report.pass) {
    std::printf("threshold: %s\n", *shot.report.pass ? "pass" : "FAIL");
    if (!*shot.report.pass) return exit_threshold;
  }
  return exit_ok;
}

int cmd_fit_reference(const std::string& trace_path, std::optional<double> trace_rate,
                      intlab::ShotConfig sim_cfg, std::optional<std::pair<double, double>> window,
                      const std::string& out_path) {
  intlab::SignalTrace reference;
  if (!trace_path.empty()) {
    reference = intlab::import_trace(trace_path, trace_rate);
  } else {
    reference = intlab::run_shot(sim_cfg).raw;
  }

  const intlab::DriftFit fit = window
      ? intlab::fit_drift_slope(reference, window->first, window->second)
      : intlab::fit_drift_slope(reference);

  std::printf("slope:     %.9g V/s\n", fit.slope);
  std::printf("intercept: %.9g V\n", fit.intercept);
  std::printf("residual:  %.9g V rms\n", fit.rms_residual);
  if (!out_path.empty()) write_json(fit_to_json(fit), out_path);
  return exit_ok;
}

int cmd_cmrr_test(double vcm, double window, double rate, double floor_v,
                  const ParamsOpts& params_opts, const std::string& report_path) {
  const auto params = params_opts.resolve();
  const auto db = intlab::cmrr_test(vcm, window, params, rate, floor_v);

  json rep;
  rep["v_cm_v"] = vcm;
  rep["window_s"] = window;
  rep["cmrr_db"] = db ? json(*db) : json("beyond-measurable");
  if (!report_path.empty()) write_json(rep, report_path);

  if (db)
    std::printf("CMRR: %.2f dB (v_cm %.3g V over %.3g s)\n", *db, vcm, window);
  else
    std::printf("no measurable drift at v_cm %.3g V over %.3g s (floor %.3g V)\n", vcm, window,
                floor_v);
  return exit_ok;
}

int cmd_export(const std::string& source, double rate, double duration, double amplitude,
               double width, const std::string& polarity, double flux, double noise_rms,
               std::uint64_t seed, const std::string& out) {
  intlab::SignalTrace tr;
  if (source == "standard-signal") {
    tr = intlab::gen_standard_signal(rate);
  } else if (source == "pulse") {
    intlab::PulseSpec spec;
    spec.amplitude = amplitude;
    spec.width = width;
    spec.polarity.clear();
    for (char c : polarity) {
      if (c == '+') spec.polarity.push_back(+1);
      else if (c == '-') spec.polarity.push_back(-1);
      else throw CLI::ValidationError("--polarity takes only '+' and '-' characters");
    }
    tr = intlab::gen_pulse_signal(spec, rate);
  } else if (source == "probe-synthetic") {
    tr = intlab::gen_probe_signal(rate, duration, flux);
  } else {  // zero-input
    tr.sample_rate = rate;
    tr.samples.assign(static_cast<std::size_t>(duration * rate), 0.0);
  }
  if (noise_rms > 0.0) tr = intlab::add_noise(tr, noise_rms, seed);
  intlab::export_trace(tr, out);
  std::printf("wrote %zu samples to %s\n", tr.size(), out.c_str());
  return exit_ok;
}

int cmd_report(const std::string& raw_path, const std::string& corrected_path,
               const ParamsOpts& params_opts, std::optional<double> limit,
               const std::string& out_path) {
  const auto params = params_opts.resolve();
  const auto raw = intlab::import_trace(raw_path);
  intlab::ShotReport rep;
  rep.raw = intlab::normalized_drift(raw, params);
  if (!corrected_path.empty())
    rep.corrected = intlab::normalized_drift(intlab::import_trace(corrected_path), params);
  if (limit) {
    const auto& judged = rep.corrected ? *rep.corrected : rep.raw;
    rep.pass = judged.normalized <= *limit;
  }

  json j = report_to_json(rep);
  j["rc_s"] = params.rc();
  if (!out_path.empty()) write_json(j, out_path);

  std::printf("raw:       span %.6g V, normalized %.6g uV*s / 1000 s\n", rep.raw.span,
              rep.raw.normalized * 1e6);
  if (rep.corrected)
    std::printf("corrected: span %.6g V, normalized %.6g uV*s / 1000 s\n", rep.corrected->span,
                rep.corrected->normalized * 1e6);
  if (rep.pass && !*rep.pass) {
    std::printf("threshold: FAIL\n");
    return exit_threshold;
  }
  if (rep.pass) std::printf("threshold: pass\n");
  return exit_ok;
}

int cmd_plot(const std::vector<std::string>& csvs, std::string out) {
  if (out.empty()) out = csvs.front() + ".gp";
  std::ofstream os(out);
  if (!os) throw intlab::IoError("cannot open '" + out + "'");
  os << "set datafile separator ','\n"
     << "set xlabel 't (s)'\n"
     << "set ylabel 'V'\n"
     << "set grid\n"
     << "plot";
  for (std::size_t i = 0; i < csvs.size(); ++i)
    os << (i ? ", " : " ") << '\'' << csvs[i] << "' using 1:2 with lines title '" << csvs[i]
       << '\'';
  os << '\n' << "pause -1\n";
  if (!os) throw intlab::IoError("write failed for '" + out + "'");
  std::printf("gnuplot script: %s\n", out.c_str());
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intlab: analog integrator bench twin (simulation, drift correction, control)"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI file");

  // ---------------- serve ----------------
  auto* serve = app.add_subcommand("serve", "run the integrator controller service");
  std::string listen_s = "127.0.0.1:5025";
  std::string store_path = "intlab_params.bin";
  std::string gain_table_path;
  double test_rate = 100e3, test_noise = 0.0;
  std::uint64_t serve_seed = 1;
  ParamsOpts serve_params;
  serve_params.preset = "ideal";
  serve->add_option("--listen", listen_s, "listen address ip:port (port 0 picks one)");
  serve->add_option("--store", store_path, "parameter store file (the EEPROM twin)");
  serve->add_option("--gain-table", gain_table_path, "JSON gain table {code: multiplier}");
  serve->add_option("--test-rate", test_rate, "sample rate for signal tests, Hz")
      ->check(CLI::PositiveNumber);
  serve->add_option("--test-noise-rms", test_noise, "acquisition noise added to test runs, V rms");
  serve->add_option("--seed", serve_seed, "seed for the simulated acquisition noise");
  serve_params.attach(serve);

  // ---------------- send ----------------
  auto* send = app.add_subcommand("send", "send instruction(s) to a running controller");
  std::string addr_s = "127.0.0.1:5025";
  std::string send_command, send_script;
  int timeout_ms = 5000;
  send->add_option("--addr", addr_s, "controller address ip:port");
  send->add_option("command", send_command, "one instruction line, e.g. READAll");
  send->add_option("--script", send_script, "file with one instruction per line ('#' comments)");
  send->add_option("--timeout-ms", timeout_ms, "socket timeout");

  // ---------------- trigger ----------------
  auto* trigger = app.add_subcommand(
      "trigger", "execute instructions against the local store (debug entry points)");
  std::string trig_store = "intlab_params.bin";
  std::string trig_command, trig_script, trig_via = "hardware";
  ParamsOpts trig_params;
  trig_params.preset = "ideal";
  trigger->add_option("--store", trig_store, "parameter store file");
  trigger->add_option("command", trig_command, "one instruction line");
  trigger->add_option("--script", trig_script, "file with one instruction per line");
  trigger->add_option("--via", trig_via, "entry point to emulate: hardware or manual")
      ->check(CLI::IsMember({"hardware", "manual"}));
  trig_params.attach(trigger);

  // ---------------- run-shot ----------------
  auto* shot = app.add_subcommand("run-shot", "simulate one acquisition shot");
  double duration = 400.0, rate = 1000.0, common_mode = 0.0, noise_rms = 0.0;
  double pulse_amplitude = 2.5, pulse_width = 1.0, probe_flux = 0.05;
  std::string source = "zero-input", polarity = "+";
  std::uint64_t shot_seed = 1;
  bool do_correct = false, no_intercept = false;
  std::string fit_path, out_raw, out_corrected, report_path;
  std::optional<double> limit;
  ParamsOpts shot_params;
  shot->add_option("--duration", duration, "shot length, s")->check(CLI::PositiveNumber);
  shot->add_option("--rate", rate, "sample rate, Hz")->check(CLI::PositiveNumber);
  shot->add_option("--source", source, "differential input")
      ->check(CLI::IsMember({"zero-input", "standard-signal", "pulse", "probe-synthetic"}));
  shot->add_option("--common-mode", common_mode, "common-mode voltage on both inputs, V");
  shot->add_option("--noise-rms", noise_rms, "acquisition noise at the output tap, V rms");
  shot->add_option("--seed", shot_seed, "noise seed");
  shot->add_flag("--correct", do_correct, "apply a reference-shot drift correction");
  shot->add_option("--fit", fit_path, "drift fit JSON from fit-reference");
  shot->add_flag("--no-intercept", no_intercept, "correct with the slope only, keep the offset");
  shot->add_option("--pulse-amplitude", pulse_amplitude, "pulse source amplitude, V");
  shot->add_option("--pulse-width", pulse_width,
                   "pulse source lobe width, s (typical: 0.001..0.010 or 1.0)");
  shot->add_option("--polarity", polarity, "pulse lobes as +/- characters, e.g. +-");
  shot->add_option("--probe-flux", probe_flux, "probe source flux swing, V*s");
  shot->add_option("--out-raw", out_raw, "write the raw trace CSV here");
  shot->add_option("--out-corrected", out_corrected, "write the corrected trace CSV here");
  shot->add_option("--report", report_path, "write the shot report JSON here");
  shot->add_option("--limit-normalized", limit, "pass/fail threshold, V*s per 1000 s");
  shot_params.attach(shot);

  // ---------------- fit-reference ----------------
  auto* fitref = app.add_subcommand("fit-reference", "fit the drift line of a reference shot");
  std::string fit_trace;
  std::optional<double> fit_trace_rate;
  double fit_duration = 400.0, fit_rate = 1000.0, fit_noise = 0.0;
  std::uint64_t fit_seed = 1;
  std::string fit_window, fit_out = "fit.json";
  ParamsOpts fit_params;
  fitref->add_option("--trace", fit_trace, "reference trace CSV (otherwise simulate one)");
  fitref->add_option("--trace-rate", fit_trace_rate, "explicit sample rate for --trace, Hz");
  fitref->add_option("--duration", fit_duration, "simulated reference length, s")
      ->check(CLI::PositiveNumber);
  fitref->add_option("--rate", fit_rate, "simulated reference sample rate, Hz")
      ->check(CLI::PositiveNumber);
  fitref->add_option("--noise-rms", fit_noise, "simulated acquisition noise, V rms");
  fitref->add_option("--seed", fit_seed, "noise seed");
  fitref->add_option("--window", fit_window, "fit window 'lo:hi' in s (default: full shot)");
  fitref->add_option("--out", fit_out, "fit JSON output path");
  fit_params.attach(fitref);

  // ---------------- cmrr-test ----------------
  auto* cmrr = app.add_subcommand("cmrr-test", "measure CMRR from a zero-differential shot");
  double vcm = 1.5, cmrr_window = 100.0, cmrr_rate = 100.0, cmrr_floor = intlab::cmrr_drift_floor_v;
  std::string cmrr_report;
  ParamsOpts cmrr_params;
  cmrr_params.preset = "ideal";
  cmrr->add_option("--vcm", vcm, "common-mode voltage, V");
  cmrr->add_option("--window", cmrr_window, "measurement window, s")->check(CLI::PositiveNumber);
  cmrr->add_option("--rate", cmrr_rate, "sample rate, Hz")->check(CLI::PositiveNumber);
  cmrr->add_option("--floor", cmrr_floor, "drift measurability floor, V (0 disables)");
  cmrr->add_option("--report", cmrr_report, "write the result JSON here");
  cmrr_params.attach(cmrr);

  // ---------------- export ----------------
  auto* exp = app.add_subcommand("export", "generate a waveform and write it as CSV");
  std::string exp_source = "standard-signal", exp_polarity = "+", exp_out = "trace.csv";
  double exp_rate = 100e3, exp_duration = 1.0, exp_amp = 2.5, exp_width = 0.010, exp_flux = 0.05;
  double exp_noise = 0.0;
  std::uint64_t exp_seed = 1;
  exp->add_option("--source", exp_source, "waveform")
      ->check(CLI::IsMember({"standard-signal", "pulse", "probe-synthetic", "zero-input"}));
  exp->add_option("--rate", exp_rate, "sample rate, Hz")->check(CLI::PositiveNumber);
  exp->add_option("--duration", exp_duration, "duration for probe/zero sources, s")
      ->check(CLI::PositiveNumber);
  exp->add_option("--amplitude", exp_amp, "pulse amplitude, V");
  exp->add_option("--width", exp_width, "pulse lobe width, s (typical: 0.001..0.010 or 1.0)");
  exp->add_option("--polarity", exp_polarity, "pulse lobes as +/- characters");
  exp->add_option("--flux", exp_flux, "probe flux swing, V*s");
  exp->add_option("--noise-rms", exp_noise, "additive noise, V rms");
  exp->add_option("--seed", exp_seed, "noise seed");
  exp->add_option("--out", exp_out, "output CSV path");

  // ---------------- report ----------------
  auto* report = app.add_subcommand("report", "recompute drift metrics from exported CSVs");
  std::string rep_raw, rep_corrected, rep_out;
  std::optional<double> rep_limit;
  ParamsOpts rep_params;
  report->add_option("--raw", rep_raw, "raw trace CSV")->required();
  report->add_option("--corrected", rep_corrected, "corrected trace CSV");
  report->add_option("--limit-normalized", rep_limit, "pass/fail threshold, V*s per 1000 s");
  report->add_option("--out", rep_out, "report JSON output path");
  rep_params.attach(report);

  // ---------------- plot ----------------
  auto* plot = app.add_subcommand("plot", "emit a gnuplot script for exported CSVs");
  std::vector<std::string> plot_csvs;
  std::string plot_out;
  plot->add_option("--csv", plot_csvs, "trace CSV(s) to plot")->required();
  plot->add_option("--out", plot_out, "script path (default: <first csv>.gp)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve)
      return cmd_serve(parse_endpoint(listen_s), store_path, gain_table_path, serve_params,
                       test_rate, test_noise, serve_seed);

    if (*send) return cmd_send(parse_endpoint(addr_s), send_command, send_script, timeout_ms);

    if (*trigger) return cmd_trigger(trig_store, trig_params, trig_command, trig_script, trig_via);

    if (*shot) {
      intlab::ShotConfig cfg;
      cfg.duration_s = duration;
      cfg.sample_rate_hz = rate;
      cfg.source = source_from_flag(source);
      cfg.common_mode_v = common_mode;
      cfg.params = shot_params.resolve();
      cfg.noise_rms_v = noise_rms;
      cfg.seed = shot_seed;
      cfg.normalized_limit = limit;
      cfg.subtract_intercept = !no_intercept;
      cfg.pulse.amplitude = pulse_amplitude;
      cfg.pulse.width = pulse_width;
      cfg.pulse.polarity.clear();
      for (char c : polarity) cfg.pulse.polarity.push_back(c == '-' ? -1 : +1);
      cfg.probe_flux_vs = probe_flux;
      if (do_correct) {
        if (fit_path.empty())
          throw CLI::ValidationError("--correct needs --fit <file> from fit-reference");
        cfg.correct_with_reference = true;
        cfg.reference_fit = fit_from_json(read_json(fit_path));
      }
      return cmd_run_shot(cfg, out_raw, out_corrected, report_path);
    }

    if (*fitref) {
      intlab::ShotConfig cfg;
      cfg.duration_s = fit_duration;
      cfg.sample_rate_hz = fit_rate;
      cfg.params = fit_params.resolve();
      cfg.noise_rms_v = fit_noise;
      cfg.seed = fit_seed;
      std::optional<std::pair<double, double>> window;
      if (!fit_window.empty()) {
        const auto colon = fit_window.find(':');
        if (colon == std::string::npos)
          throw CLI::ValidationError("--window must be lo:hi in seconds");
        window = std::make_pair(std::strtod(fit_window.c_str(), nullptr),
                                std::strtod(fit_window.c_str() + colon + 1, nullptr));
      }
      return cmd_fit_reference(fit_trace, fit_trace_rate, cfg, window, fit_out);
    }

    if (*cmrr)
      return cmd_cmrr_test(vcm, cmrr_window, cmrr_rate, cmrr_floor, cmrr_params, cmrr_report);

    if (*exp)
      return cmd_export(exp_source, exp_rate, exp_duration, exp_amp, exp_width, exp_polarity,
                        exp_flux, exp_noise, exp_seed, exp_out);

    if (*report) return cmd_report(rep_raw, rep_corrected, rep_params, rep_limit, rep_out);

    if (*plot) return cmd_plot(plot_csvs, plot_out);
  } catch (const intlab::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_io;
  } catch (const intlab::StoreError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_io;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_io;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_protocol;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_protocol;
  }
  return exit_ok;
}
