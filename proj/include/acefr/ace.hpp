#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acefr/adapt.hpp"
#include "acefr/dnn.hpp"
#include "acefr/parallel.hpp"
#include "acefr/plant.hpp"

namespace acefr {

/// Returns a copy of `net` with W_layer replaced by W_layer + delta. No
/// spectral projection is applied.
MlpController intervene(const MlpController& net, int layer, const Mat& delta);

/// A fault / disturbance / trajectory combination held out from training.
struct OodScenario {
  std::string id;
  ClosedLoop loop;
  Vec x0;
  double horizon = 60.0;
  double dt = 0.005;
};

enum class AceMetric { error_norm, lyapunov_drift };
enum class ErrorStatistic { time_average, sup };

std::string_view metric_name(AceMetric metric);
AceMetric parse_metric(std::string_view name);

struct InterventionSpec {
  int layer = 1;
  double sigma = 0.0;
  int trials = 50;
  std::uint64_t base_seed = 0;
};

/// Closed-loop setup shared by every rollout of an estimate.
struct AceSettings {
  NetLoopConfig loop;  // adaptation is ignored: interventions probe the frozen net
  AceMetric metric = AceMetric::error_norm;
  ErrorStatistic statistic = ErrorStatistic::time_average;
  double max_discard_fraction = 0.2;
  Execution exec = Execution::parallel;
};

struct AceEstimate {
  double ace = 0.0;
  double std_error = 0.0;
  int pairs = 0;       // (trial, scenario) pairs that contributed
  int discarded = 0;   // pairs lost to integration faults
  int over_bound = 0;  // interventions that pushed ||W_l|| above 1
};

class AceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-rollout outcome: time-average (or sup) of ||e|| for the error metric,
/// time-average of e'P(x' - xd') for the drift metric. Throws on a failed
/// rollout.
double rollout_statistic(const MlpController& net, const OodScenario& scenario,
                         const AceSettings& settings);

/// Monte-Carlo estimate of E[stat(W_l + Delta)] - stat(W_l) with
/// Delta ~ N(0, sigma^2 I), paired against one baseline rollout per scenario.
AceEstimate estimate_ace(const MlpController& net, const std::vector<OodScenario>& scenarios,
                         const InterventionSpec& spec, const AceSettings& settings);

/// Same protocol with the Lyapunov drift statistic.
AceEstimate estimate_ace_lyapunov(const MlpController& net,
                                  const std::vector<OodScenario>& scenarios,
                                  const InterventionSpec& spec, AceSettings settings);

/// sigma_l = rho * ||W_l||_F / sqrt(n_l * n_{l-1}).
double layer_sigma(const MlpController& net, int layer, double rho);

struct LayerAce {
  int layer = 0;
  double sigma = 0.0;
  AceEstimate estimate;
  int trials = 0;
};

struct AceReport {
  std::vector<LayerAce> per_layer;
  int selected_layer = 1;
  AceMetric metric = AceMetric::error_norm;
  bool degenerate = false;  // every estimate equal; selection fell to the tie-break
};

/// Runs the estimate for every layer 1..L and selects the argmin (smallest
/// index on ties).
AceReport rank_layers(const MlpController& net, const std::vector<OodScenario>& scenarios,
                      double rho, int trials, std::uint64_t base_seed,
                      const AceSettings& settings);

/// Selection rule on its own.
int select_layer(const std::vector<LayerAce>& per_layer, bool* degenerate = nullptr);

void write_ace_csv(const AceReport& report, const std::filesystem::path& path);
std::string ace_summary(const AceReport& report);

}  // namespace acefr
