#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "acefr/ace.hpp"
#include "acefr/dnn.hpp"
#include "acefr/spacecraft.hpp"

namespace acefr {

/// Invalid or unreadable configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FdiMode { none, misestimated, exact };

struct ExperimentConfig {
  std::string variant = "faulted";
  std::uint64_t seed = 1;
  std::string output_dir = "acefr_out";

  double dt = 0.005;
  double horizon = 60.0;

  // Spacecraft.
  std::vector<double> inertia{1.0, 1.0, 0.8};
  double wheel_inertia = 0.01;
  double torque_max = 0.14;
  std::vector<double> kp{22.5, 18.0, 15.0};
  std::vector<double> kd{12.0, 9.0, 7.5};
  std::vector<double> x0_offset{0.02, -0.02, 0.01};

  // FDI; the default follows the variant.
  std::optional<FdiMode> fdi;

  // Network.
  std::vector<int> net_sizes{9, 15, 15, 15, 15, 3};
  std::string activation = "tanh";
  std::string weights = "weights.txt";
  std::string weight_encoding = "text";

  // Dataset.
  int dataset_scenarios = 200;
  int dataset_stride = 10;
  double dataset_horizon = 60.0;
  spacecraft::SamplerRanges sampler;
  bool write_dataset_csv = false;

  TrainHyper train;

  // ACE.
  int ace_trials = 50;
  double ace_rho = 0.1;
  std::string ace_metric = "error_norm";
  std::string ace_statistic = "time_average";
  double ace_horizon = 60.0;

  // Adaptation. layer 0 means "use the layer selected by the last ace run".
  bool adapt_enabled = true;
  int adapt_layer = 0;
  double adapt_gain = 1e6;
  double adapt_leakage = 0.1;
  bool adapt_project = true;

  // Sweep statistics window.
  double window_start = 10.0;
  double window_end = 50.0;

  std::filesystem::path out_path() const { return output_dir; }
  /// Relative artifact paths resolve against the output directory.
  std::filesystem::path resolve(const std::string& file) const;
  spacecraft::Variant case_variant() const { return spacecraft::parse_variant(variant); }
  FdiMode fdi_mode() const;
};

/// Parses and validates a JSON config. Unknown keys and out-of-range values
/// raise ConfigError naming the field path.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// All fields, defaults materialised.
std::string to_json(const ExperimentConfig& cfg);

void write_resolved_config(const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace acefr
