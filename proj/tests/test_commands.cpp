#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "acefr/commands.hpp"

using namespace acefr;

TEST_CASE("subcommands run end to end on a reduced configuration") {
  const auto dir = std::filesystem::temp_directory_path() / "acefr_test_commands";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ExperimentConfig cfg = parse_config(R"({
    "seed": 3,
    "integration": {"horizon": 12},
    "dataset": {"scenarios": 4, "horizon": 12, "fault_start_range": [2, 6], "write_csv": true},
    "train": {"epochs": 2},
    "ace": {"trials": 2, "horizon": 12},
    "sweep": {"window": [2, 12]}
  })");
  cfg.output_dir = dir.string();
  std::ostringstream out;

  // Selection must exist before an "ace" layer can be used.
  CHECK(cmd_train(cfg, out) == kExitOk);
  CHECK_THROWS_AS(cmd_run(cfg, out), ConfigError);
  CHECK(cmd_ace(cfg, out) == kExitOk);
  REQUIRE(recorded_selection(cfg).has_value());
  CHECK(cmd_run(cfg, out) == kExitOk);
  CHECK(cmd_sweep(cfg, out) == kExitOk);

  for (const char* f : {"weights.txt", "loss_history.csv", "dataset.csv", "ace_report.csv",
                        "ace_summary.txt", "selected_layer.txt", "trace_faulted.csv", "sweep.csv",
                        "resolved_config.json"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(dir / f));
  }
  std::ostringstream schema_out;
  CHECK(cmd_schema_check({(dir / "loss_history.csv").string(), (dir / "dataset.csv").string(),
                          (dir / "ace_report.csv").string(), (dir / "trace_faulted.csv").string(),
                          (dir / "sweep.csv").string()},
                         schema_out) == kExitOk);

  // The resolved config reproduces the run's settings.
  const ExperimentConfig back = load_config(dir / "resolved_config.json");
  CHECK(back.seed == 3);
  CHECK(back.dataset_scenarios == 4);

  // Same seed, same weights.
  const MlpController first = load_weights(dir / "weights.txt");
  CHECK(cmd_train(cfg, out) == kExitOk);
  const MlpController second = load_weights(dir / "weights.txt");
  for (int l = 1; l <= first.num_layers(); ++l) CHECK(first.weight(l) == second.weight(l));

  std::filesystem::resize_file(dir / "weights.txt", 100);
  CHECK_THROWS_AS(cmd_ace(cfg, out), WeightFormatError);
  std::filesystem::remove_all(dir);
}
