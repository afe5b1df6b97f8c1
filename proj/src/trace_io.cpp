#include "acefr/trace_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace acefr {

std::vector<std::string> trace_columns(bool with_eta_hat) {
  std::vector<std::string> cols{"t"};
  auto add = [&](const char* stem, int n) {
    for (int i = 1; i <= n; ++i) cols.push_back(stem + std::to_string(i));
  };
  add("theta", 3);
  add("thetad", 3);
  add("omega", 3);
  cols.push_back("e_norm");
  add("unom", 3);
  add("unn", 3);
  add("tau_w", 4);
  add("eta", 4);
  if (with_eta_hat) add("eta_hat", 4);
  cols.push_back("w_frob");
  cols.push_back("V0");
  return cols;
}

namespace {

void write_header(std::ostream& os, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
}

void put(std::ostream& os, const Vec& v, Eigen::Index from, Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) os << ',' << v[from + i];
}

}  // namespace

void write_trace_csv(const SimTrace& trace, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_trace_csv: cannot open " + path.string());
  const bool fdi = !trace.rows.empty() && trace.rows.front().eta_hat.size() > 0;
  write_header(os, trace_columns(fdi));
  os << std::setprecision(17);
  for (const TraceRow& r : trace.rows) {
    if (r.x.size() != 6 || r.u_nom.size() != 3 || r.u_total.size() != 4) {
      throw std::invalid_argument("write_trace_csv: rows do not match the spacecraft layout");
    }
    os << r.t;
    put(os, r.x, 0, 3);
    put(os, r.x_d, 0, 3);
    put(os, r.x, 3, 3);
    os << ',' << r.track_norm;
    put(os, r.u_nom, 0, 3);
    put(os, r.u_nn, 0, 3);
    put(os, r.u_total, 0, 4);
    put(os, r.eta, 0, 4);
    if (fdi) put(os, r.eta_hat, 0, 4);
    os << ',' << r.w_frob << ',' << r.V0 << '\n';
  }
}

std::vector<std::string> sweep_columns() {
  return {"candidate", "window_start", "window_end", "mean_theta_err",
          "peak_theta_err", "final_w_frob", "ok"};
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_sweep_csv: cannot open " + path.string());
  write_header(os, sweep_columns());
  os << std::setprecision(17);
  for (const SweepRow& r : rows) {
    os << r.candidate << ',' << r.window_start << ',' << r.window_end << ',' << r.mean_err << ','
       << r.peak_err << ',' << r.final_w_frob << ',' << (r.ok ? 1 : 0) << '\n';
  }
}

std::vector<std::string> loss_columns() { return {"epoch", "train_loss", "validation_loss"}; }

void write_loss_csv(const std::vector<EpochLoss>& history, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_loss_csv: cannot open " + path.string());
  write_header(os, loss_columns());
  os << std::setprecision(17);
  for (const EpochLoss& e : history) {
    os << e.epoch << ',' << e.train_loss << ',' << e.validation_loss << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_number(const std::string& s, double& v) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_dataset_header(const std::vector<std::string>& h) {
  if (h.size() < 5 || h[h.size() - 2] != "scenario_id" || h.back() != "t") return false;
  std::size_t i = 0;
  for (const char* stem : {"e_", "unom_", "ucomp_"}) {
    int k = 1;
    bool any = false;
    while (i < h.size() - 2 && h[i] == stem + std::to_string(k)) {
      ++i;
      ++k;
      any = true;
    }
    if (!any) return false;
  }
  return i == h.size() - 2;
}

}  // namespace

SchemaReport schema_check(const std::filesystem::path& path) {
  SchemaReport rep;
  std::ifstream is(path);
  if (!is) {
    rep.message = "cannot open " + path.string();
    return rep;
  }
  std::string line;
  if (!std::getline(is, line)) {
    rep.message = "empty file";
    return rep;
  }
  const std::vector<std::string> header = split_csv(line);
  std::vector<std::size_t> text_columns;
  int time_col = -1;
  if (header == trace_columns(false)) {
    rep.kind = "trace/1";
    time_col = 0;
  } else if (header == trace_columns(true)) {
    rep.kind = "trace_fdi/1";
    time_col = 0;
  } else if (header == std::vector<std::string>{"layer", "metric", "ace", "std_error", "trials"}) {
    rep.kind = "ace/1";
    text_columns = {1};
  } else if (header == sweep_columns()) {
    rep.kind = "sweep/1";
    text_columns = {0};
  } else if (header == loss_columns()) {
    rep.kind = "loss/1";
  } else if (is_dataset_header(header)) {
    rep.kind = "dataset/1";
  } else {
    rep.message = "unrecognised header: " + line;
    return rep;
  }

  double prev_t = -INFINITY;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != header.size()) {
      rep.message = "line " + std::to_string(lineno) + ": expected " +
                    std::to_string(header.size()) + " fields, found " +
                    std::to_string(fields.size());
      return rep;
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (std::find(text_columns.begin(), text_columns.end(), c) != text_columns.end()) continue;
      double v = 0.0;
      if (!parse_number(fields[c], v) || !std::isfinite(v)) {
        rep.message = "line " + std::to_string(lineno) + ": column '" + header[c] +
                      "' is not a finite number ('" + fields[c] + "')";
        return rep;
      }
      if (static_cast<int>(c) == time_col) {
        if (!(v > prev_t)) {
          rep.message = "line " + std::to_string(lineno) + ": t is not strictly increasing";
          return rep;
        }
        prev_t = v;
      }
    }
    ++rep.rows;
  }
  rep.ok = true;
  return rep;
}

}  // namespace acefr
