// Serial vs parallel timing for the rollout batches behind `sweep` and `ace`.
// Usage: bench_rollouts [horizon] [trials]

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>

#include "acefr/commands.hpp"

using namespace acefr;

namespace {

template <class Fn>
double seconds(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const double horizon = argc > 1 ? std::stod(argv[1]) : 10.0;
  const int trials = argc > 2 ? std::atoi(argv[2]) : 2;

  ExperimentConfig cfg;
  cfg.horizon = horizon;
  cfg.ace_horizon = horizon;
  cfg.ace_trials = trials;
  cfg.window_start = 0.0;
  cfg.window_end = horizon;
  const spacecraft::CaseStudy cs = case_from(cfg);
  SeededStream init = SeededStream(cfg.seed).split(2);
  const MlpController net = MlpController::glorot(cs.net_sizes, Activation::tanh, init, 0.9);

  std::cout << "threads " << max_threads() << ", horizon " << horizon << " s, trials " << trials
            << "\n";

  std::vector<SweepRow> serial_rows, parallel_rows;
  const double s_sweep = seconds([&] { serial_rows = sweep_pipeline(cfg, net, Execution::serial); });
  const double p_sweep =
      seconds([&] { parallel_rows = sweep_pipeline(cfg, net, Execution::parallel); });
  bool same = serial_rows.size() == parallel_rows.size();
  for (std::size_t i = 0; same && i < serial_rows.size(); ++i)
    same = serial_rows[i].mean_err == parallel_rows[i].mean_err;
  std::cout << "sweep  serial " << s_sweep << " s, parallel " << p_sweep << " s, speedup "
            << s_sweep / p_sweep << (same ? ", identical\n" : ", MISMATCH\n");

  AceReport serial_ace, parallel_ace;
  const double s_ace = seconds([&] { serial_ace = ace_pipeline(cfg, net, Execution::serial); });
  const double p_ace = seconds([&] { parallel_ace = ace_pipeline(cfg, net, Execution::parallel); });
  bool same_ace = serial_ace.selected_layer == parallel_ace.selected_layer;
  for (std::size_t i = 0; same_ace && i < serial_ace.per_layer.size(); ++i)
    same_ace = serial_ace.per_layer[i].estimate.ace == parallel_ace.per_layer[i].estimate.ace;
  std::cout << "ace    serial " << s_ace << " s, parallel " << p_ace << " s, speedup "
            << s_ace / p_ace << (same_ace ? ", identical\n" : ", MISMATCH\n");
  return same && same_ace ? 0 : 1;
}
