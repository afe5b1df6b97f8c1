#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "acefr/dnn.hpp"
#include "acefr/plant.hpp"

namespace acefr {

/// Column names of the spacecraft trace CSV (schema trace/1). eta_hat
/// columns are present only when an FDI estimate drives the controller.
std::vector<std::string> trace_columns(bool with_eta_hat);

/// e_norm holds ||theta - theta_d||; tau_w are wheel torques after saturation.
void write_trace_csv(const SimTrace& trace, const std::filesystem::path& path);

struct SweepRow {
  std::string candidate;  // "none" or the adapted layer index
  double window_start = 0.0;
  double window_end = 0.0;
  double mean_err = 0.0;
  double peak_err = 0.0;
  double final_w_frob = 0.0;
  bool ok = true;
};

std::vector<std::string> sweep_columns();
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

std::vector<std::string> loss_columns();
void write_loss_csv(const std::vector<EpochLoss>& history, const std::filesystem::path& path);

struct SchemaReport {
  bool ok = false;
  std::string kind;     // trace/1, trace_fdi/1, ace/1, sweep/1, loss/1, dataset/1
  std::string message;  // first problem found, empty when ok
  std::size_t rows = 0;
};

/// Identifies an output CSV by its header and validates every row.
SchemaReport schema_check(const std::filesystem::path& path);

}  // namespace acefr
