#include "acefr/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace acefr {

namespace {

SeededStream root_stream(const ExperimentConfig& cfg) { return SeededStream(cfg.seed); }

WeightEncoding encoding_of(const ExperimentConfig& cfg) {
  return cfg.weight_encoding == "binary" ? WeightEncoding::binary : WeightEncoding::text;
}

MlpController load_net(const ExperimentConfig& cfg) {
  const auto path = cfg.resolve(cfg.weights);
  if (!std::filesystem::exists(path)) {
    throw ConfigError("weight file " + path.string() + " not found; run `acefr train` first");
  }
  MlpController net = load_weights(path);
  if (net.layer_sizes() != cfg.net_sizes) {
    throw ConfigError("weight file " + path.string() + " does not match net.sizes");
  }
  return net;
}

int resolve_layer(const ExperimentConfig& cfg) {
  if (cfg.adapt_layer > 0) return cfg.adapt_layer;
  const std::optional<int> sel = recorded_selection(cfg);
  if (!sel) {
    throw ConfigError("adapt.layer is \"ace\" but no selection was recorded; run `acefr ace` first");
  }
  return *sel;
}

}  // namespace

spacecraft::Params params_from(const ExperimentConfig& cfg) {
  spacecraft::Params p = spacecraft::Params::defaults();
  p.inertia = Eigen::Vector3d(cfg.inertia[0], cfg.inertia[1], cfg.inertia[2]).asDiagonal();
  p.wheel_inertia = cfg.wheel_inertia;
  p.torque_max = cfg.torque_max;
  p.kp = Eigen::Vector3d(cfg.kp[0], cfg.kp[1], cfg.kp[2]).asDiagonal();
  p.kd = Eigen::Vector3d(cfg.kd[0], cfg.kd[1], cfg.kd[2]).asDiagonal();
  p.validate();
  return p;
}

spacecraft::CaseStudy case_from(const ExperimentConfig& cfg, spacecraft::Variant variant) {
  spacecraft::CaseStudy cs = spacecraft::build_case_study(variant, params_from(cfg));
  cs.horizon = cfg.horizon;
  cs.dt = cfg.dt;
  const spacecraft::TrajectorySample s0 = spacecraft::desired_trajectory(0.0);
  cs.x0 << s0.theta + Eigen::Vector3d(cfg.x0_offset[0], cfg.x0_offset[1], cfg.x0_offset[2]),
      s0.theta_dot;
  cs.net_sizes = cfg.net_sizes;
  cs.adapt_gain = cfg.adapt_gain;
  cs.leakage = cfg.adapt_leakage;
  FdiMode mode = cfg.fdi_mode();
  if (cfg.fdi == std::nullopt) {
    mode = variant == spacecraft::Variant::faulted_with_fdi ? FdiMode::misestimated : FdiMode::none;
  }
  switch (mode) {
    case FdiMode::none:
      cs.fdi.reset();
      break;
    case FdiMode::misestimated:
      cs.fdi = spacecraft::case_fdi_schedule();
      break;
    case FdiMode::exact:
      cs.fdi = spacecraft::exact_fdi(cs.loop.fault);
      break;
  }
  return cs;
}

spacecraft::CaseStudy case_from(const ExperimentConfig& cfg) {
  return case_from(cfg, cfg.case_variant());
}

TrainOutcome train_pipeline(const ExperimentConfig& cfg, Execution exec) {
  const spacecraft::Params params = params_from(cfg);
  DatasetSpec spec = spacecraft::default_dataset_spec(params);
  spec.scenarios = cfg.dataset_scenarios;
  spec.stride = cfg.dataset_stride;
  spec.horizon = cfg.dataset_horizon;
  spec.dt = cfg.dt;
  spec.sampler = spacecraft::make_training_sampler(params, cfg.sampler, cfg.dataset_horizon);
  spec.exec = exec;

  TrainOutcome out;
  out.data = generate_dataset(spec, root_stream(cfg).split(1));
  SeededStream init = root_stream(cfg).split(2);
  MlpController net = MlpController::glorot(cfg.net_sizes, parse_activation(cfg.activation), init,
                                            1.0 - cfg.train.eps_sn);
  out.result = train(std::move(net), out.data, cfg.train, root_stream(cfg).split(3));
  return out;
}

AceSettings ace_settings(const ExperimentConfig& cfg, Execution exec) {
  const spacecraft::CaseStudy cs = case_from(cfg, spacecraft::Variant::faulted);
  AceSettings s;
  s.loop.gains = cs.gains;
  s.loop.output_map = cs.output_map;
  s.metric = parse_metric(cfg.ace_metric);
  s.statistic = cfg.ace_statistic == "sup" ? ErrorStatistic::sup : ErrorStatistic::time_average;
  s.exec = exec;
  return s;
}

std::vector<OodScenario> ace_scenarios(const ExperimentConfig& cfg) {
  std::vector<OodScenario> sc = spacecraft::ood_scenarios(params_from(cfg), cfg.ace_horizon, cfg.dt);
  const spacecraft::TrajectorySample s0 = spacecraft::desired_trajectory(0.0);
  for (OodScenario& o : sc) {
    o.x0 << s0.theta + Eigen::Vector3d(cfg.x0_offset[0], cfg.x0_offset[1], cfg.x0_offset[2]),
        s0.theta_dot;
  }
  return sc;
}

AceReport ace_pipeline(const ExperimentConfig& cfg, const MlpController& net, Execution exec) {
  const std::uint64_t base_seed = root_stream(cfg).split(4).next_u64();
  return rank_layers(net, ace_scenarios(cfg), cfg.ace_rho, cfg.ace_trials, base_seed,
                     ace_settings(cfg, exec));
}

WindowStats window_stats(const SimTrace& trace, double start, double end) {
  WindowStats ws;
  std::size_t n = 0;
  for (const TraceRow& r : trace.rows) {
    if (r.t < start || r.t > end) continue;
    ws.mean += r.track_norm;
    ws.peak = std::max(ws.peak, r.track_norm);
    ++n;
  }
  if (n > 0) ws.mean /= static_cast<double>(n);
  return ws;
}

SimTrace run_case(const spacecraft::CaseStudy& cs, const MlpController& net,
                  std::optional<int> layer, bool project) {
  NetLoopConfig lc = cs.loop_config(net, layer);
  if (lc.adapt) lc.adapt->project_each_step = project;
  return run_adaptive_closed_loop(cs.loop, net, lc, cs.x0, cs.horizon, cs.dt);
}

std::vector<SweepRow> sweep_pipeline(const ExperimentConfig& cfg, const MlpController& net,
                                     Execution exec) {
  const spacecraft::CaseStudy cs = case_from(cfg);
  const int L = net.num_layers();
  return run_indexed<SweepRow>(
      static_cast<std::size_t>(L + 1),
      [&](std::size_t i) {
        std::optional<int> layer;
        if (i > 0) layer = static_cast<int>(i);
        const SimTrace tr = run_case(cs, net, layer, cfg.adapt_project);
        SweepRow row;
        row.candidate = layer ? std::to_string(*layer) : "none";
        row.window_start = cfg.window_start;
        row.window_end = cfg.window_end;
        const WindowStats ws = window_stats(tr, cfg.window_start, cfg.window_end);
        row.mean_err = ws.mean;
        row.peak_err = ws.peak;
        row.final_w_frob = tr.rows.empty() ? 0.0 : tr.rows.back().w_frob;
        row.ok = tr.ok;
        if (!tr.ok) row.mean_err = row.peak_err = INFINITY;
        return row;
      },
      exec);
}

int sweep_best_layer(const std::vector<SweepRow>& rows) {
  int best = 0;
  double best_err = INFINITY;
  for (const SweepRow& r : rows) {
    if (r.mean_err < best_err) {
      best_err = r.mean_err;
      best = r.candidate == "none" ? 0 : std::stoi(r.candidate);
    }
  }
  return best;
}

std::optional<int> recorded_selection(const ExperimentConfig& cfg) {
  std::ifstream is(cfg.resolve("selected_layer.txt"));
  int layer = 0;
  if (is >> layer && layer > 0) return layer;
  return std::nullopt;
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
  const auto dir = cfg.out_path();
  write_resolved_config(cfg, dir);
  const TrainOutcome t = train_pipeline(cfg);
  save_weights(t.result.net, cfg.resolve(cfg.weights), encoding_of(cfg));
  write_loss_csv(t.result.history, dir / "loss_history.csv");
  if (cfg.write_dataset_csv) write_dataset_csv(t.data, dir / "dataset.csv");
  {
    std::ofstream os(dir / "dataset_summary.txt");
    os << "samples " << t.data.size() << "\nscenarios " << t.data.scenarios.size()
       << "\nskipped " << t.data.skipped << "\nmax_relation_residual "
       << t.data.max_relation_residual << "\n";
    for (const std::string& w : t.data.warnings) os << "warning " << w << "\n";
  }
  for (const std::string& w : t.data.warnings) out << "warning: " << w << "\n";
  out << "dataset: " << t.data.size() << " samples from " << t.data.scenarios.size()
      << " scenarios (" << t.data.skipped << " skipped)\n";
  out << std::setprecision(6) << "validation loss: initial " << t.result.initial_validation_loss
      << ", final " << t.result.final_validation_loss << "\n";
  out << "weights written to " << cfg.resolve(cfg.weights).string() << "\n";
  return kExitOk;
}

int cmd_ace(const ExperimentConfig& cfg, std::ostream& out) {
  const auto dir = cfg.out_path();
  write_resolved_config(cfg, dir);
  const MlpController net = load_net(cfg);
  const AceReport report = ace_pipeline(cfg, net);
  write_ace_csv(report, dir / "ace_report.csv");
  const std::string summary = ace_summary(report);
  std::ofstream(dir / "ace_summary.txt") << summary;
  std::ofstream(dir / "selected_layer.txt") << report.selected_layer << "\n";
  out << summary;
  return kExitOk;
}

int cmd_run(const ExperimentConfig& cfg, std::ostream& out) {
  const auto dir = cfg.out_path();
  write_resolved_config(cfg, dir);
  const MlpController net = load_net(cfg);
  const spacecraft::CaseStudy cs = case_from(cfg);
  std::optional<int> layer;
  if (cfg.adapt_enabled) layer = resolve_layer(cfg);
  const SimTrace tr = run_case(cs, net, layer, cfg.adapt_project);
  const std::string name = "trace_" + std::string(spacecraft::variant_name(cs.variant)) + ".csv";
  write_trace_csv(tr, dir / name);
  const WindowStats after = window_stats(tr, 5.0, cs.horizon);
  out << "variant " << spacecraft::variant_name(cs.variant) << ", adapted layer "
      << (layer ? std::to_string(*layer) : "none") << "\n";
  out << std::setprecision(6) << "max ||theta err|| after 5 s: " << after.peak
      << ", mean: " << after.mean << "\n";
  out << "trace written to " << (dir / name).string() << " (" << tr.rows.size() << " rows)\n";
  if (!tr.ok) {
    out << "integration failure: " << tr.failure << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out) {
  const auto dir = cfg.out_path();
  write_resolved_config(cfg, dir);
  const MlpController net = load_net(cfg);
  const std::vector<SweepRow> rows = sweep_pipeline(cfg, net);
  write_sweep_csv(rows, dir / "sweep.csv");
  out << "candidate  mean_err      peak_err\n" << std::scientific << std::setprecision(4);
  for (const SweepRow& r : rows) {
    out << std::setw(9) << r.candidate << "  " << r.mean_err << "  " << r.peak_err
        << (r.ok ? "" : "  (failed)") << "\n";
  }
  const int best = sweep_best_layer(rows);
  out << "best: " << (best == 0 ? "none" : std::to_string(best)) << "\n";
  for (const SweepRow& r : rows) {
    if (!r.ok) return kExitNumerical;
  }
  return kExitOk;
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& out) {
  const auto dir = cfg.out_path();
  write_resolved_config(cfg, dir);
  const MlpController net = load_net(cfg);
  const int layer = resolve_layer(cfg);
  bool all = true;
  auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    out << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    all = all && ok;
  };

  const spacecraft::CaseStudy free_cs = case_from(cfg, spacecraft::Variant::fault_free);
  for (const std::optional<int> l : {std::optional<int>{}, std::optional<int>{layer}}) {
    SimTrace tr;
    if (l) {
      tr = run_case(free_cs, net, l, cfg.adapt_project);
    } else {
      NominalPolicy nominal(free_cs.gains, pseudo_inverse(free_cs.output_map));
      tr = simulate_closed_loop(free_cs.loop, nominal, free_cs.x0, free_cs.horizon, free_cs.dt);
    }
    const double peak = window_stats(tr, 5.0 + 1e-9, free_cs.horizon).peak;
    std::ostringstream d;
    d << "max ||theta err|| after 5 s = " << peak << " (bound 0.017)";
    report(tr.ok && peak < 0.017, l ? "fault-free bound, adapted" : "fault-free bound, nominal",
           d.str());
  }

  ExperimentConfig faulted = cfg;
  faulted.variant = "faulted";
  faulted.fdi = FdiMode::none;
  const std::vector<SweepRow> rows = sweep_pipeline(faulted, net);
  const int best = sweep_best_layer(rows);
  {
    std::ostringstream d;
    d << "ACE layer " << layer << ", sweep best " << (best == 0 ? "none" : std::to_string(best));
    report(best == layer, "ACE-sweep agreement", d.str());
  }
  return all ? kExitOk : kExitAcceptance;
}

int cmd_schema_check(const std::vector<std::string>& files, std::ostream& out) {
  bool all = true;
  for (const std::string& f : files) {
    const SchemaReport rep = schema_check(f);
    if (rep.ok) {
      out << "ok " << f << " [" << rep.kind << ", " << rep.rows << " rows]\n";
    } else {
      out << "invalid " << f << ": " << rep.message << "\n";
      all = false;
    }
  }
  return all ? kExitOk : kExitAcceptance;
}

}  // namespace acefr
