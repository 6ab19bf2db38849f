// Integrates the controller's bipolar calibration pulse through a 20 ms
// channel and prints the plateau the bench uses to verify RC.

#include <cstdio>

#include "intlab/integrator.hpp"
#include "intlab/trace.hpp"

int main() {
  using namespace intlab;

  const double rate = 100e3;
  const auto stimulus = gen_standard_signal(rate);
  const auto params = preset_ideal();
  const auto sim = simulate(stimulus, 0.0, params);

  double plateau = 0.0;
  for (double v : sim.output.samples)
    if (std::fabs(v) > std::fabs(plateau)) plateau = v;

  std::printf("RC = %.0f ms channel, %.0f kHz test rate\n", params.rc() * 1e3, rate / 1e3);
  std::printf("plateau: %.6f V (expect -(2.5 V * 10 ms) / RC = -1.25 V)\n", plateau);
  std::printf("final:   %.3g V (a healthy channel returns to zero)\n",
              sim.output.samples.back());
  return 0;
}
