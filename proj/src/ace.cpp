#include "acefr/ace.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace acefr {

MlpController intervene(const MlpController& net, int layer, const Mat& delta) {
  const Mat& w = net.weight(layer);
  if (delta.rows() != w.rows() || delta.cols() != w.cols()) {
    std::ostringstream msg;
    msg << "intervene: delta is " << delta.rows() << "x" << delta.cols() << " but W" << layer
        << " is " << w.rows() << "x" << w.cols();
    throw std::invalid_argument(msg.str());
  }
  MlpController out = net;
  out.weight(layer) += delta;
  return out;
}

std::string_view metric_name(AceMetric metric) {
  return metric == AceMetric::error_norm ? "error_norm" : "lyapunov_drift";
}

AceMetric parse_metric(std::string_view name) {
  if (name == "error_norm") return AceMetric::error_norm;
  if (name == "lyapunov_drift") return AceMetric::lyapunov_drift;
  throw std::invalid_argument("unknown ACE metric '" + std::string(name) + "'");
}

double rollout_statistic(const MlpController& net, const OodScenario& scenario,
                         const AceSettings& settings) {
  NetLoopConfig cfg = settings.loop;
  cfg.adapt.reset();
  NetPolicy policy(net, cfg);
  double acc = 0.0;
  std::size_t rows = 0;
  const bool drift = settings.metric == AceMetric::lyapunov_drift;
  const bool sup = settings.statistic == ErrorStatistic::sup;
  const SimStatus st = simulate_closed_loop(
      scenario.loop, policy, scenario.x0, scenario.horizon, scenario.dt,
      [&](const TraceRow& r) {
        if (drift) {
          acc += r.V0_dot;
        } else if (sup) {
          acc = std::max(acc, r.err_norm);
        } else {
          acc += r.err_norm;
        }
        ++rows;
      });
  if (!st.ok) throw std::runtime_error("rollout failed in scenario " + scenario.id + ": " + st.failure);
  if (rows == 0) return 0.0;
  if (!drift && sup) return acc;
  return acc / static_cast<double>(rows);
}

namespace {

struct PairOutcome {
  std::optional<double> diff;
  bool over_bound = false;
};

SeededStream pair_stream(std::uint64_t base_seed, int layer, int trial, std::size_t scenario) {
  return SeededStream(base_seed)
      .split(static_cast<std::uint64_t>(layer))
      .split(static_cast<std::uint64_t>(trial))
      .split(scenario);
}

// Estimates for several layers at once so every rollout shares one batch
// and the baselines are computed a single time.
std::vector<AceEstimate> estimate_layers(const MlpController& net,
                                         const std::vector<OodScenario>& scenarios,
                                         const std::vector<int>& layers,
                                         const std::vector<double>& sigmas, int trials,
                                         std::uint64_t base_seed, const AceSettings& settings) {
  if (scenarios.empty()) throw std::invalid_argument("ACE: no scenarios");
  if (trials < 1) throw std::invalid_argument("ACE: trials must be >= 1");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!(sigmas[i] >= 0.0)) throw std::invalid_argument("ACE: sigma must be >= 0");
    net.weight(layers[i]);  // range check
  }
  const std::size_t ns = scenarios.size();
  const std::vector<double> baseline = run_indexed<double>(
      ns, [&](std::size_t s) { return rollout_statistic(net, scenarios[s], settings); },
      settings.exec);

  const std::size_t per_layer = static_cast<std::size_t>(trials) * ns;
  const std::size_t total = per_layer * layers.size();
  const std::vector<PairOutcome> outcomes = run_indexed<PairOutcome>(
      total,
      [&](std::size_t idx) {
        const std::size_t li = idx / per_layer;
        const std::size_t rem = idx % per_layer;
        const int trial = static_cast<int>(rem / ns);
        const std::size_t s = rem % ns;
        const int layer = layers[li];
        const Mat& w = net.weight(layer);
        SeededStream stream = pair_stream(base_seed, layer, trial, s);
        const Mat delta = stream.gaussian_matrix(w.rows(), w.cols(), sigmas[li]);
        const MlpController perturbed = intervene(net, layer, delta);
        PairOutcome out;
        out.over_bound = spectral_norm(perturbed.weight(layer)).value >= 1.0;
        try {
          out.diff = rollout_statistic(perturbed, scenarios[s], settings) - baseline[s];
        } catch (const std::runtime_error&) {
          out.diff.reset();
        }
        return out;
      },
      settings.exec);

  std::vector<AceEstimate> result(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    AceEstimate& est = result[li];
    double sum = 0.0;
    std::vector<double> diffs;
    for (std::size_t k = 0; k < per_layer; ++k) {
      const PairOutcome& o = outcomes[li * per_layer + k];
      if (o.over_bound) ++est.over_bound;
      if (!o.diff) {
        ++est.discarded;
        continue;
      }
      diffs.push_back(*o.diff);
      sum += *o.diff;
    }
    if (static_cast<double>(est.discarded) >
        settings.max_discard_fraction * static_cast<double>(per_layer)) {
      std::ostringstream msg;
      msg << "ACE: layer " << layers[li] << " discarded " << est.discarded << " of " << per_layer
          << " rollouts";
      throw AceError(msg.str());
    }
    est.pairs = static_cast<int>(diffs.size());
    est.ace = sum / static_cast<double>(diffs.size());
    if (diffs.size() > 1) {
      double ss = 0.0;
      for (double d : diffs) ss += (d - est.ace) * (d - est.ace);
      const double var = ss / static_cast<double>(diffs.size() - 1);
      est.std_error = std::sqrt(var / static_cast<double>(diffs.size()));
    }
  }
  return result;
}

}  // namespace

AceEstimate estimate_ace(const MlpController& net, const std::vector<OodScenario>& scenarios,
                         const InterventionSpec& spec, const AceSettings& settings) {
  return estimate_layers(net, scenarios, {spec.layer}, {spec.sigma}, spec.trials, spec.base_seed,
                         settings)
      .front();
}

AceEstimate estimate_ace_lyapunov(const MlpController& net,
                                  const std::vector<OodScenario>& scenarios,
                                  const InterventionSpec& spec, AceSettings settings) {
  settings.metric = AceMetric::lyapunov_drift;
  return estimate_ace(net, scenarios, spec, settings);
}

double layer_sigma(const MlpController& net, int layer, double rho) {
  const Mat& w = net.weight(layer);
  return rho * w.norm() / std::sqrt(static_cast<double>(w.rows() * w.cols()));
}

int select_layer(const std::vector<LayerAce>& per_layer, bool* degenerate) {
  if (per_layer.empty()) throw std::invalid_argument("select_layer: empty report");
  std::size_t best = 0;
  bool all_equal = true;
  for (std::size_t i = 1; i < per_layer.size(); ++i) {
    const double v = per_layer[i].estimate.ace;
    if (v != per_layer[0].estimate.ace) all_equal = false;
    const double b = per_layer[best].estimate.ace;
    if (v < b || (v == b && per_layer[i].layer < per_layer[best].layer)) best = i;
  }
  if (degenerate) *degenerate = per_layer.size() > 1 && all_equal;
  return per_layer[best].layer;
}

AceReport rank_layers(const MlpController& net, const std::vector<OodScenario>& scenarios,
                      double rho, int trials, std::uint64_t base_seed,
                      const AceSettings& settings) {
  if (net.num_layers() < 1) throw std::invalid_argument("rank_layers: empty network");
  if (!(rho >= 0.0)) throw std::invalid_argument("rank_layers: rho must be >= 0");
  std::vector<int> layers;
  std::vector<double> sigmas;
  for (int l = 1; l <= net.num_layers(); ++l) {
    layers.push_back(l);
    sigmas.push_back(layer_sigma(net, l, rho));
  }
  const std::vector<AceEstimate> est =
      estimate_layers(net, scenarios, layers, sigmas, trials, base_seed, settings);
  AceReport report;
  report.metric = settings.metric;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    report.per_layer.push_back(LayerAce{layers[i], sigmas[i], est[i], trials});
  }
  report.selected_layer = select_layer(report.per_layer, &report.degenerate);
  return report;
}

void write_ace_csv(const AceReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_ace_csv: cannot open " + path.string());
  os << "layer,metric,ace,std_error,trials\n" << std::setprecision(17);
  for (const LayerAce& row : report.per_layer) {
    os << row.layer << ',' << metric_name(report.metric) << ',' << row.estimate.ace << ','
       << row.estimate.std_error << ',' << row.trials << '\n';
  }
}

std::string ace_summary(const AceReport& report) {
  std::ostringstream os;
  os << "ACE (" << metric_name(report.metric) << ")\n";
  os << "layer      sigma          ace    std_error  pairs  discarded  over_bound\n";
  for (const LayerAce& row : report.per_layer) {
    os << std::setw(5) << row.layer << std::setw(11) << std::setprecision(4) << std::scientific
       << row.sigma << std::setw(13) << row.estimate.ace << std::setw(13) << row.estimate.std_error
       << std::defaultfloat << std::setw(7) << row.estimate.pairs << std::setw(11)
       << row.estimate.discarded << std::setw(12) << row.estimate.over_bound << '\n';
  }
  os << "selected layer: " << report.selected_layer;
  if (report.degenerate) os << " (warning: all estimates equal, tie-break to smallest index)";
  os << '\n';
  return os.str();
}

}  // namespace acefr
