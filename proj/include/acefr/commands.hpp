#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "acefr/ace.hpp"
#include "acefr/config.hpp"
#include "acefr/spacecraft.hpp"
#include "acefr/trace_io.hpp"

namespace acefr {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitAcceptance = 4,
};

// Pipeline pieces shared by the subcommands.

spacecraft::Params params_from(const ExperimentConfig& cfg);
spacecraft::CaseStudy case_from(const ExperimentConfig& cfg);
spacecraft::CaseStudy case_from(const ExperimentConfig& cfg, spacecraft::Variant variant);

struct TrainOutcome {
  TrainingDataset data;
  TrainResult result;
};

TrainOutcome train_pipeline(const ExperimentConfig& cfg, Execution exec = Execution::parallel);

AceSettings ace_settings(const ExperimentConfig& cfg, Execution exec = Execution::parallel);
std::vector<OodScenario> ace_scenarios(const ExperimentConfig& cfg);
AceReport ace_pipeline(const ExperimentConfig& cfg, const MlpController& net,
                       Execution exec = Execution::parallel);

struct WindowStats {
  double mean = 0.0;
  double peak = 0.0;
};

/// Mean and peak of ||theta - theta_d|| over rows with start <= t <= end.
WindowStats window_stats(const SimTrace& trace, double start, double end);

/// One adaptive (or frozen, when layer is empty) rollout of the case study.
SimTrace run_case(const spacecraft::CaseStudy& cs, const MlpController& net,
                  std::optional<int> layer, bool project = true);

/// Rows for "none" and every layer 1..L on the configured variant.
std::vector<SweepRow> sweep_pipeline(const ExperimentConfig& cfg, const MlpController& net,
                                     Execution exec = Execution::parallel);
/// Best adapted layer by mean error; 0 if "none" wins.
int sweep_best_layer(const std::vector<SweepRow>& rows);

/// Layer recorded by the last ace command in the output directory.
std::optional<int> recorded_selection(const ExperimentConfig& cfg);

// Subcommands. Each writes its artifacts plus resolved_config.json into the
// output directory and returns an exit code.

int cmd_train(const ExperimentConfig& cfg, std::ostream& out);
int cmd_ace(const ExperimentConfig& cfg, std::ostream& out);
int cmd_run(const ExperimentConfig& cfg, std::ostream& out);
int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out);
int cmd_verify(const ExperimentConfig& cfg, std::ostream& out);
int cmd_schema_check(const std::vector<std::string>& files, std::ostream& out);

}  // namespace acefr
