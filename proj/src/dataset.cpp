#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "acefr/dnn.hpp"

namespace acefr {

Mat TrainingDataset::inputs() const {
  Mat zeta(u_nom.rows() + e.rows(), e.cols());
  zeta.topRows(u_nom.rows()) = u_nom;
  zeta.bottomRows(e.rows()) = e;
  return zeta;
}

namespace {

struct ScenarioSamples {
  std::vector<Vec> e, u_nom, u_comp;
  std::vector<double> t;
  ScenarioMeta meta;
  bool ok = true;
  std::string failure;
  double residual = 0.0;
};

// Residual of the compensator's defining relation for one logged sample.
double relation_residual(const SampledScenario& sc, const Mat& output_map, const TraceRow& row) {
  const int m = sc.loop.plant.m;
  const Vec eta = sc.loop.fault.effectiveness_at(row.t, m);
  const Vec d_hat = sc.loop.disturbance.evaluate(row.t, m);
  if (output_map.size() == 0) {
    const Vec beta = eta - Vec::Ones(m);
    return (row.u_nn + beta.cwiseProduct(row.u_nom + row.u_nn) + d_hat).norm();
  }
  const Mat g = sc.loop.plant.g(row.x);
  const Vec lhs = g * (eta.cwiseProduct(output_map * (row.u_nom + row.u_nn)) + d_hat);
  const Vec rhs = g * (output_map * row.u_nom);
  return (lhs - rhs).norm() / std::max(1.0, rhs.norm());
}

}  // namespace

TrainingDataset generate_dataset(const DatasetSpec& spec, const SeededStream& stream) {
  if (spec.scenarios < 1) throw std::invalid_argument("generate_dataset: need at least one scenario");
  if (spec.stride < 1) throw std::invalid_argument("generate_dataset: stride must be >= 1");
  if (!spec.sampler) throw std::invalid_argument("generate_dataset: no scenario sampler");

  auto one = [&](std::size_t i) {
    ScenarioSamples out;
    SeededStream child = stream.split(i);
    const SampledScenario sc = spec.sampler(static_cast<int>(i), child);
    out.meta = sc.meta;
    CompensatedPolicy expert(spec.gains, sc.loop.fault, sc.loop.disturbance, spec.output_map);
    std::size_t k = 0;
    const SimStatus status = simulate_closed_loop(
        sc.loop, expert, sc.x0, spec.horizon, spec.dt, [&](const TraceRow& row) {
          if (k++ % static_cast<std::size_t>(spec.stride) != 0) return;
          out.e.push_back(row.e);
          out.u_nom.push_back(row.u_nom);
          out.u_comp.push_back(row.u_nn);
          out.t.push_back(row.t);
          out.residual = std::max(out.residual, relation_residual(sc, spec.output_map, row));
        });
    out.ok = status.ok;
    out.failure = status.failure;
    return out;
  };
  std::vector<ScenarioSamples> parts =
      run_indexed<ScenarioSamples>(static_cast<std::size_t>(spec.scenarios), one, spec.exec);

  TrainingDataset data;
  std::size_t total = 0;
  Eigen::Index ne = 0, nu = 0;
  for (const ScenarioSamples& p : parts) {
    if (!p.ok) continue;
    total += p.t.size();
    if (!p.e.empty()) {
      ne = p.e.front().size();
      nu = p.u_nom.front().size();
    }
  }
  data.e.resize(ne, static_cast<Eigen::Index>(total));
  data.u_nom.resize(nu, static_cast<Eigen::Index>(total));
  data.u_comp.resize(nu, static_cast<Eigen::Index>(total));
  Eigen::Index col = 0;
  for (const ScenarioSamples& p : parts) {
    if (!p.ok) {
      ++data.skipped;
      data.warnings.push_back("scenario " + std::to_string(p.meta.id) + " skipped: " + p.failure);
      continue;
    }
    for (std::size_t s = 0; s < p.t.size(); ++s, ++col) {
      data.e.col(col) = p.e[s];
      data.u_nom.col(col) = p.u_nom[s];
      data.u_comp.col(col) = p.u_comp[s];
      data.scenario_id.push_back(p.meta.id);
      data.t.push_back(p.t[s]);
    }
    data.max_relation_residual = std::max(data.max_relation_residual, p.residual);
    data.scenarios.push_back(p.meta);
  }
  if (data.max_relation_residual > 1e-9) {
    std::ostringstream msg;
    msg << "generate_dataset: compensator relation residual " << data.max_relation_residual;
    throw std::runtime_error(msg.str());
  }
  return data;
}

void write_dataset_csv(const TrainingDataset& data, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_dataset_csv: cannot open " + path.string());
  for (Eigen::Index i = 0; i < data.e.rows(); ++i) os << "e_" << i + 1 << ',';
  for (Eigen::Index i = 0; i < data.u_nom.rows(); ++i) os << "unom_" << i + 1 << ',';
  for (Eigen::Index i = 0; i < data.u_comp.rows(); ++i) os << "ucomp_" << i + 1 << ',';
  os << "scenario_id,t\n";
  os << std::setprecision(17);
  for (Eigen::Index c = 0; c < data.size(); ++c) {
    for (Eigen::Index i = 0; i < data.e.rows(); ++i) os << data.e(i, c) << ',';
    for (Eigen::Index i = 0; i < data.u_nom.rows(); ++i) os << data.u_nom(i, c) << ',';
    for (Eigen::Index i = 0; i < data.u_comp.rows(); ++i) os << data.u_comp(i, c) << ',';
    os << data.scenario_id[static_cast<std::size_t>(c)] << ','
       << data.t[static_cast<std::size_t>(c)] << '\n';
  }
}

}  // namespace acefr
