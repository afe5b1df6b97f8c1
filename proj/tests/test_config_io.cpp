#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "acefr/commands.hpp"
#include "acefr/config.hpp"
#include "acefr/trace_io.hpp"

using namespace acefr;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("acefr_test_" + name);
}

void check_config_error(const std::string& text, const std::string& field) {
  try {
    parse_config(text);
    FAIL("expected ConfigError for " << text);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(field) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("empty config yields the defaults") {
  const ExperimentConfig c = parse_config("{}");
  CHECK(c.variant == "faulted");
  CHECK(c.net_sizes == std::vector<int>{9, 15, 15, 15, 15, 3});
  CHECK(c.train.epochs == 200);
  CHECK(c.train.learning_rate == 1e-3);
  CHECK(c.ace_trials == 50);
  CHECK(c.adapt_layer == 0);
  CHECK(c.window_start == 10.0);
  CHECK(c.window_end == 50.0);
}

TEST_CASE("config values are read and range-checked") {
  const ExperimentConfig c = parse_config(R"({
    "variant": "fault_free", "seed": 9, "fdi": "exact",
    "train": {"epochs": 3, "batch": 32},
    "adapt": {"layer": 2, "gain": 10},
    "sweep": {"window": [5, 20]}
  })");
  CHECK(c.variant == "fault_free");
  CHECK(c.seed == 9);
  CHECK(c.fdi_mode() == FdiMode::exact);
  CHECK(c.train.epochs == 3);
  CHECK(c.adapt_layer == 2);
  CHECK(c.window_end == 20.0);

  check_config_error(R"({"trian": {}})", "trian");
  check_config_error(R"({"train": {"epoch": 3}})", "train.epoch");
  check_config_error(R"({"train": {"learning_rate": -1}})", "train.learning_rate");
  check_config_error(R"({"train": {"lambda_e": 0.5}})", "train.lambda_e");
  check_config_error(R"({"variant": "sideways"})", "variant");
  check_config_error(R"({"adapt": {"layer": 9}})", "adapt.layer");
  check_config_error(R"({"spacecraft": {"inertia": [1, 2]}})", "spacecraft.inertia");
  check_config_error(R"({"sweep": {"window": [30, 20]}})", "sweep.window");
  check_config_error(R"({"integration": {"dt": 0}})", "integration.dt");
  check_config_error("{not json", "JSON");
}

TEST_CASE("resolved config round-trips") {
  ExperimentConfig c = parse_config(R"({"seed": 4, "ace": {"rho": 0.2}, "adapt": {"layer": 3}})");
  const ExperimentConfig back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.ace_rho == 0.2);
  CHECK(back.adapt_layer == 3);
}

TEST_CASE("case study follows the configured FDI mode") {
  ExperimentConfig c = parse_config(R"({"variant": "faulted_with_fdi"})");
  spacecraft::CaseStudy cs = case_from(c);
  REQUIRE(cs.fdi.has_value());
  CHECK(cs.fdi->at(15.0, 4).eta_hat[2] == doctest::Approx(0.6));

  c.fdi = FdiMode::exact;
  cs = case_from(c);
  REQUIRE(cs.fdi.has_value());
  CHECK(cs.fdi->at(30.0, 4).eta_hat[1] == doctest::Approx(0.25));

  c.fdi = FdiMode::none;
  CHECK_FALSE(case_from(c).fdi.has_value());
}

TEST_CASE("schema check recognises every output and flags corruption") {
  const auto trace_path = temp_path("trace.csv");
  const spacecraft::CaseStudy cs = spacecraft::build_case_study(spacecraft::Variant::faulted);
  const MlpController zero(cs.net_sizes, Activation::tanh);
  SimTrace tr = run_case(cs, zero, std::nullopt);
  tr.rows.resize(50);
  write_trace_csv(tr, trace_path);
  SchemaReport rep = schema_check(trace_path);
  CHECK(rep.ok);
  CHECK(rep.kind == "trace/1");
  CHECK(rep.rows == 50);

  spacecraft::CaseStudy fdi = spacecraft::build_case_study(spacecraft::Variant::faulted_with_fdi);
  SimTrace tf = run_case(fdi, zero, std::nullopt);
  tf.rows.resize(20);
  write_trace_csv(tf, trace_path);
  rep = schema_check(trace_path);
  CHECK(rep.ok);
  CHECK(rep.kind == "trace_fdi/1");

  std::vector<SweepRow> rows(2);
  rows[0].candidate = "none";
  rows[1].candidate = "1";
  const auto sweep_path = temp_path("sweep.csv");
  write_sweep_csv(rows, sweep_path);
  rep = schema_check(sweep_path);
  CHECK(rep.ok);
  CHECK(rep.kind == "sweep/1");

  const auto loss_path = temp_path("loss.csv");
  write_loss_csv({{0, 1.0, 2.0}, {1, 0.5, 1.0}}, loss_path);
  CHECK(schema_check(loss_path).kind == "loss/1");

  TrainingDataset data;
  data.e = Mat::Ones(2, 3);
  data.u_nom = Mat::Ones(1, 3);
  data.u_comp = Mat::Zero(1, 3);
  data.scenario_id = {0, 0, 1};
  data.t = {0.0, 0.1, 0.0};
  const auto data_path = temp_path("dataset.csv");
  write_dataset_csv(data, data_path);
  rep = schema_check(data_path);
  CHECK(rep.ok);
  CHECK(rep.kind == "dataset/1");

  std::ofstream(loss_path) << "epoch,train_loss,validation_loss\n0,1,nan\n";
  rep = schema_check(loss_path);
  CHECK_FALSE(rep.ok);
  CHECK(rep.message.find("validation_loss") != std::string::npos);

  std::ofstream(loss_path) << "epoch,train_loss,validation_loss\n0,1\n";
  CHECK_FALSE(schema_check(loss_path).ok);

  std::ofstream(trace_path) << "time,theta\n0,1\n";
  CHECK_FALSE(schema_check(trace_path).ok);

  for (const auto& p : {trace_path, sweep_path, loss_path, data_path}) std::filesystem::remove(p);
}

TEST_CASE("window statistics and sweep selection") {
  SimTrace tr;
  for (int k = 0; k < 10; ++k) {
    TraceRow r;
    r.t = k;
    r.track_norm = k;
    tr.rows.push_back(r);
  }
  const WindowStats ws = window_stats(tr, 2.0, 4.0);
  CHECK(ws.mean == 3.0);
  CHECK(ws.peak == 4.0);

  std::vector<SweepRow> rows(3);
  rows[0].candidate = "none";
  rows[0].mean_err = 1.0;
  rows[1].candidate = "1";
  rows[1].mean_err = 0.5;
  rows[2].candidate = "2";
  rows[2].mean_err = 0.7;
  CHECK(sweep_best_layer(rows) == 1);
  rows[0].mean_err = 0.1;
  CHECK(sweep_best_layer(rows) == 0);
}
