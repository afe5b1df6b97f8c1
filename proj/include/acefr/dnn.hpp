#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "acefr/controllers.hpp"
#include "acefr/numerics.hpp"
#include "acefr/parallel.hpp"
#include "acefr/plant.hpp"

namespace acefr {

enum class Activation { tanh, identity };

std::string_view activation_name(Activation act);
Activation parse_activation(std::string_view name);

/// Feed-forward compensator
///   z_0 = zeta, a_l = W_l z_{l-1} + b_l, z_l = phi(a_l)   (l = 1..L-1)
///   u_NN = -W_L z_{L-1}
/// Layers are indexed 1..L; the output layer has no bias.
class MlpController {
 public:
  MlpController() = default;
  /// All weights and biases zero.
  MlpController(std::vector<int> layer_sizes, Activation act);

  /// Uniform(+-sqrt(6 / (n_in + n_out))) weights, zero biases, each weight
  /// matrix projected to spectral norm <= spectral_bound.
  static MlpController glorot(std::vector<int> layer_sizes, Activation act,
                              SeededStream& stream, double spectral_bound);

  int num_layers() const { return static_cast<int>(weights_.size()); }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return act_; }

  const Mat& weight(int layer) const;
  Mat& weight(int layer);
  const Vec& bias(int layer) const;
  Vec& bias(int layer);

  /// Throws if any weight is non-finite or the dimension chain is broken.
  void validate() const;

 private:
  void check_layer(int layer) const;

  std::vector<int> sizes_;
  Activation act_ = Activation::tanh;
  std::vector<Mat> weights_;  // weights_[l-1] = W_l
  std::vector<Vec> biases_;   // biases_[l-1] = b_l, l < L
};

/// Activations of one forward pass. z[l] for l = 0..L-1; a[l] for
/// l = 1..L-1 (a[0] is unused and left empty).
struct ForwardCache {
  std::vector<Vec> z;
  std::vector<Vec> a;
  Vec output;
};

/// Replaces W_layer by the column-major matrix at `data` for one pass.
struct WeightOverride {
  int layer = 0;
  const double* data = nullptr;
};

/// zeta = [u_nom; e].
Vec make_input(const Vec& u_nom, const Vec& e);

/// Forward pass from a prepared input; the cache buffers are reused.
const Vec& forward(const MlpController& net, const Vec& zeta, ForwardCache& cache,
                   const WeightOverride& override_weights = {});

struct ForwardResult {
  Vec u_nn;
  ForwardCache cache;
};

ForwardResult forward(const MlpController& net, const Vec& e, const Vec& u_nom);

/// Largest-singular-value estimate per layer, indexed 0..L-1.
std::vector<double> layer_spectral_norms(const MlpController& net);

// ---------------------------------------------------------------------------
// Weight files.

class WeightFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WeightEncoding { text, binary };

/// Text header with sizes and activation, followed by every W_l (row-major)
/// and b_l. The binary encoding stores the matrices as little-endian
/// float64; the text encoding as shortest round-trip decimals.
void save_weights(const MlpController& net, const std::filesystem::path& path,
                  WeightEncoding encoding = WeightEncoding::text);
MlpController load_weights(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Behavioral-cloning dataset.

struct ScenarioMeta {
  int id = 0;
  std::string trajectory_id;
  FaultProfile fault;
  MatchedDisturbance disturbance;
  double fault_time = 0.0;
  Vec x0;
};

struct SampledScenario {
  ClosedLoop loop;
  Vec x0;
  ScenarioMeta meta;
};

using ScenarioSampler = std::function<SampledScenario(int index, SeededStream& stream)>;

struct DatasetSpec {
  int scenarios = 200;
  double horizon = 60.0;
  double dt = 0.005;
  int stride = 10;
  NominalGains gains;
  Mat output_map;  // empty: commands are actuator-space
  ScenarioSampler sampler;
  Execution exec = Execution::parallel;
};

/// Logged (e, u_nom, u_comp) triples, one column per sample.
struct TrainingDataset {
  Mat e;
  Mat u_nom;
  Mat u_comp;
  std::vector<int> scenario_id;
  std::vector<double> t;
  std::vector<ScenarioMeta> scenarios;
  int skipped = 0;
  std::vector<std::string> warnings;
  double max_relation_residual = 0.0;

  Eigen::Index size() const { return e.cols(); }
  /// Columns of zeta = [u_nom; e].
  Mat inputs() const;
};

/// Simulates spec.scenarios expert rollouts (u = u_nom + u_comp) and logs
/// every `stride`-th step. Failed scenarios are skipped and counted.
TrainingDataset generate_dataset(const DatasetSpec& spec, const SeededStream& stream);

void write_dataset_csv(const TrainingDataset& data, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Training.

struct TrainHyper {
  int epochs = 200;
  int batch = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double eps_sn = 0.01;
  double validation_fraction = 0.1;
  double lambda_e = 0.0;  // rollout-error weight; only 0 is trainable
};

struct EpochLoss {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  MlpController net;
  std::vector<EpochLoss> history;
  double initial_validation_loss = 0.0;
  double final_validation_loss = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(long step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<Mat> d_weight;  // index l-1
  std::vector<Vec> d_bias;    // index l-1, l < L
};

/// Mean over columns of ||u_NN(zeta_i) - target_i||^2.
double imitation_loss(const MlpController& net, const Mat& inputs, const Mat& targets);

/// Analytic gradient of imitation_loss.
LossGradient imitation_gradient(const MlpController& net, const Mat& inputs,
                                const Mat& targets);

/// Mini-batch gradient descent with momentum on the imitation loss; every
/// weight matrix is projected to spectral norm <= 1 - eps_sn after each step.
TrainResult train(MlpController net, const TrainingDataset& data,
                  const TrainHyper& hyper, SeededStream stream);

}  // namespace acefr
