#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "intlab/integrator.hpp"
#include "test_helpers.hpp"

using namespace intlab;

namespace {

// Independent oracle: exact integral of a piecewise-constant signal whose
// value changes only at sample instants (sample k holds on [t_k, t_{k+1})).
// Evaluated analytically segment by segment -- no shared code with
// ideal_integrate or simulate.
double exact_piecewise_integral(const SignalTrace& tr, std::size_t upto) {
  double area = 0.0;
  for (std::size_t k = 0; k + 1 <= upto && k + 1 < tr.samples.size() + 1; ++k) {
    if (k + 1 > upto) break;
    area += tr.samples[k] * tr.dt();
  }
  return area;
}

}  // namespace

TEST_SUITE_BEGIN("integrator");

TEST_CASE("presets") {
  CHECK(preset_ideal().rc() == doctest::Approx(0.020));
  CHECK(preset_datasheet().offset_voltage == 0.5e-6);
  CHECK(preset_datasheet().offset_current == 20e-12);
  CHECK(preset_calibrated().offset_voltage == 2.0e-6);
  CHECK(preset_calibrated().offset_current == 25e-12);
  CHECK(preset_ideal().ideal_cmrr());
  CHECK_FALSE(preset_calibrated().ideal_cmrr());
  CHECK(preset_by_name("datasheet").cmrr_db == 125.0);
  CHECK_THROWS_AS(preset_by_name("nope"), std::invalid_argument);
}

TEST_CASE("parameter validation") {
  IntegratorParams p;
  p.resistance = 0.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.capacitance = -1e-6;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.cmrr_db = -3.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.cmrr_db = std::nan("");
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.rail_voltage = 0.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("ideal integration of a 2.5 V, 10 ms step lands at -1.25 V") {
  // 1001 samples at 100 kHz: last sample sits exactly at t = 10 ms
  const auto v_in = testutil::constant_trace(2.5, 1001, 100e3);
  const auto out = ideal_integrate(v_in, preset_ideal());
  REQUIRE(out.size() == v_in.size());
  CHECK(out.samples.front() == 0.0);
  CHECK(out.samples.back() == doctest::Approx(-1.25).epsilon(1e-12));
}

TEST_CASE("ideal integration of zero input is identically zero") {
  const auto out = ideal_integrate(testutil::constant_trace(0.0, 5000, 50e3), preset_ideal());
  for (double v : out.samples) CHECK(v == 0.0);
}

TEST_CASE("ideal integration of the standard signal: plateau and return to zero") {
  const auto params = preset_ideal();
  const auto tr = gen_standard_signal(100e3);
  const auto out = ideal_integrate(tr, params);

  double plateau = 0.0;
  for (double v : out.samples) plateau = std::min(plateau, v);
  CHECK(plateau == doctest::Approx(-1.25).epsilon(2e-3));

  // back to zero within one trapezoid step
  const double step = 2.5 * tr.dt() / params.rc();
  CHECK(std::fabs(out.samples.back()) <= step);
}

TEST_CASE("ideal integration matches the exact piecewise-constant oracle") {
  std::mt19937_64 rng(333);
  const auto params = preset_ideal();
  for (int round = 0; round < 20; ++round) {
    // piecewise-constant trace: random level per 100-sample block
    SignalTrace tr;
    tr.sample_rate = 10e3;
    std::uniform_real_distribution<double> level(-2.5, 2.5);
    for (int block = 0; block < 30; ++block) {
      const double v = level(rng);
      tr.samples.insert(tr.samples.end(), 100, v);
    }
    const auto out = ideal_integrate(tr, params);
    // trapezoid equals the exact integral except within one step of each level
    // change; compare at block boundaries where both are exact
    for (std::size_t k = 100; k < tr.size(); k += 100) {
      const double expected = -exact_piecewise_integral(tr, k) / params.rc();
      // trapezoid smears the step across one sample: half a step of slack
      const double slack = 2.5 * tr.dt() / params.rc();
      CHECK(std::fabs(out.samples[k] - expected) <= slack);
    }
  }
}

TEST_CASE("common-mode drift rate reproduces the bench numbers") {
  IntegratorParams p = preset_ideal();
  p.cmrr_db = 125.0;

  const double rate = common_mode_drift_rate(1.5, p);
  CHECK(rate == doctest::Approx(4.2e-5).epsilon(0.01));       // ~4.2e-5 V/s
  CHECK(rate * 100.0 == doctest::Approx(4.2e-3).epsilon(0.01));  // ~4 mV in 100 s

  CHECK(common_mode_drift_rate(1.5, preset_ideal()) == 0.0);  // ideal stage
  CHECK(common_mode_drift_rate(0.0, p) == 0.0);
}

TEST_CASE("compute_cmrr: worked example, edge ratios, window scaling") {
  const auto p = preset_ideal();  // rc = 20 ms

  const auto db = compute_cmrr(1.5, 4e-3, 100.0, p);
  REQUIRE(db.has_value());
  CHECK(*db == doctest::Approx(125.46).epsilon(1e-3));
  CHECK(std::lround(*db) == 125);

  // equivalent input drift equal to v_cm -> ratio 1 -> 0 dB
  const double v_cm = 0.8;
  const double drift = v_cm * 50.0 / p.rc();  // over a 50 s window
  const auto zero_db = compute_cmrr(v_cm, drift, 50.0, p);
  REQUIRE(zero_db.has_value());
  CHECK(*zero_db == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  // doubling the window with fixed drift adds 20*log10(2)
  const auto a = compute_cmrr(1.5, 4e-3, 100.0, p);
  const auto b = compute_cmrr(1.5, 4e-3, 200.0, p);
  CHECK(*b - *a == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-9));
}

TEST_CASE("compute_cmrr: zero drift is beyond measurable, bad input throws") {
  const auto p = preset_ideal();
  CHECK_FALSE(compute_cmrr(1.5, 0.0, 100.0, p).has_value());
  CHECK_THROWS_AS(compute_cmrr(-1.0, 1e-3, 100.0, p), std::invalid_argument);
  CHECK_THROWS_AS(compute_cmrr(1.5, -1e-3, 100.0, p), std::invalid_argument);
  CHECK_THROWS_AS(compute_cmrr(1.5, 1e-3, 0.0, p), std::invalid_argument);
}

TEST_CASE("cmrr round trip: predicted drift recovers the configured value") {
  for (double cmrr : {20.0, 60.0, 90.0, 125.0, 140.0})
    for (double v_cm : {0.01, 0.13, 1.5, 10.0})
      for (double window : {1.0, 100.0, 1000.0}) {
        IntegratorParams p = preset_ideal();
        p.cmrr_db = cmrr;
        const double drift = common_mode_drift_rate(v_cm, p) * window;
        const auto back = compute_cmrr(v_cm, drift, window, p);
        REQUIRE(back.has_value());
        CHECK(std::fabs(*back - cmrr) < 1e-6);
      }
}

TEST_CASE("simulate with ideal parameters tracks ideal_integrate") {
  std::mt19937_64 rng(77);
  const auto params = preset_ideal();
  const auto tr = testutil::random_trace(rng, 4000, 10e3, 2.0);
  const auto euler = simulate(tr, 0.0, params);
  const auto trapz = ideal_integrate(tr, params);
  const double bound = 2.0 * tr.dt() / params.rc();  // rectangle-vs-trapezoid
  CHECK(testutil::max_abs_diff(euler.output.samples, trapz.samples) <= bound);
}

TEST_CASE("calibrated preset drifts 50 mV over a 400 s zero-input shot") {
  const auto params = preset_calibrated();
  const auto zeros = testutil::constant_trace(0.0, 400'000, 1000.0);
  const auto sim = simulate(zeros, 0.0, params);

  const double drift_rate = 2.0e-6 / params.rc() + 25e-12 / params.capacitance;
  CHECK(drift_rate == doctest::Approx(1.25e-4).epsilon(1e-12));
  CHECK(sim.output.samples.back() == doctest::Approx(0.05).epsilon(1e-3));

  // slope of the drift ramp
  const double measured =
      sim.output.samples.back() / (sim.output.last_time() - sim.output.t_start);
  CHECK(measured == doctest::Approx(1.25e-4).epsilon(1e-9));
}

TEST_CASE("hold freezes the output from the event time onward") {
  const auto params = preset_calibrated();
  const auto zeros = testutil::constant_trace(0.0, 2000, 100.0);  // 20 s
  const ModeSchedule sched = {{10.0, ModeEvent::Action::Hold}};
  const auto sim = simulate(zeros, 0.0, params, sched);

  const std::size_t k_hold = 1000;  // t = 10 s
  const double held = sim.output.samples[k_hold];
  CHECK(held > 0.0);  // it was drifting before the hold
  for (std::size_t k = k_hold; k < sim.output.size(); ++k)
    CHECK(sim.output.samples[k] == held);
  CHECK(sim.state.mode == RunMode::Hold);
}

TEST_CASE("reset zeroes the accumulator and resumes integration") {
  const auto params = preset_calibrated();
  const auto zeros = testutil::constant_trace(0.0, 2000, 100.0);
  const ModeSchedule sched = {{5.0, ModeEvent::Action::Hold}, {10.0, ModeEvent::Action::Reset}};
  const auto sim = simulate(zeros, 0.0, params, sched);

  CHECK(sim.output.samples[1000] == 0.0);               // zeroed exactly at t = 10 s
  CHECK(sim.output.samples[1500] > 0.0);                // integrating again
  CHECK(sim.state.mode == RunMode::Integrate);
}

TEST_CASE("output clamps at the rails and recovers when the drive reverses") {
  IntegratorParams params = preset_ideal();
  params.rail_voltage = 1.0;
  // +2.5 V for 20 ms wants -2.5 V of output; rail stops it at -1 V
  SignalTrace drive = testutil::constant_trace(2.5, 4000, 100e3);
  for (std::size_t k = 2000; k < 4000; ++k) drive.samples[k] = -2.5;  // then push back up

  const auto sim = simulate(drive, 0.0, params);
  double lowest = 0.0;
  for (double v : sim.output.samples) {
    CHECK(std::fabs(v) <= 1.0);
    lowest = std::min(lowest, v);
  }
  CHECK(lowest == -1.0);                      // hit the rail exactly
  CHECK(sim.output.samples.back() > 0.99);    // unwound and railed the other way
}

TEST_CASE("simulate is linear in the differential input while drift is off") {
  std::mt19937_64 rng(909);
  const auto params = preset_ideal();
  const auto x = testutil::random_trace(rng, 3000, 10e3, 0.5);
  const auto y = testutil::random_trace(rng, 3000, 10e3, 0.5);
  const double a = 1.7, b = -0.6;

  SignalTrace combo = x;
  for (std::size_t k = 0; k < combo.size(); ++k)
    combo.samples[k] = a * x.samples[k] + b * y.samples[k];

  const auto sim_combo = simulate(combo, 0.0, params);
  const auto sim_x = simulate(x, 0.0, params);
  const auto sim_y = simulate(y, 0.0, params);

  for (std::size_t k = 0; k < combo.size(); ++k) {
    const double expect = a * sim_x.output.samples[k] + b * sim_y.output.samples[k];
    CHECK(sim_combo.output.samples[k] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("state carries across split runs") {
  std::mt19937_64 rng(5150);
  const auto params = preset_calibrated();
  auto tr = testutil::random_trace(rng, 2000, 1000.0, 1.0);

  const auto whole = simulate(tr, 0.0, params);

  // split with a one-sample overlap: the second run starts on the boundary
  // sample so its first step integrates the same interval the whole run did
  SignalTrace first = tr, second = tr;
  first.samples.resize(1000);
  second.samples.erase(second.samples.begin(), second.samples.begin() + 999);
  second.t_start = tr.time_at(999);

  const auto sim1 = simulate(first, 0.0, params);
  const auto sim2 = simulate(second, 0.0, params, {}, sim1.state);

  CHECK(sim2.state.output == doctest::Approx(whole.state.output).epsilon(1e-12));
}

TEST_CASE("simulate rejects mismatched trace shapes") {
  const auto a = testutil::constant_trace(0.0, 100, 1000.0);
  const auto b = testutil::constant_trace(0.0, 99, 1000.0);
  const auto c = testutil::constant_trace(0.0, 100, 2000.0);
  CHECK_THROWS_AS(simulate(a, b, preset_ideal()), std::invalid_argument);
  CHECK_THROWS_AS(simulate(a, c, preset_ideal()), std::invalid_argument);
}

TEST_CASE("simulate rejects descending schedules") {
  const auto tr = testutil::constant_trace(0.0, 100, 1000.0);
  const ModeSchedule bad = {{0.05, ModeEvent::Action::Hold}, {0.01, ModeEvent::Action::Reset}};
  CHECK_THROWS_AS(simulate(tr, 0.0, preset_ideal(), bad), std::invalid_argument);
}

TEST_SUITE_END();
