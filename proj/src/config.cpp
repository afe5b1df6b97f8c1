#include "acefr/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace acefr {

using nlohmann::json;

std::filesystem::path ExperimentConfig::resolve(const std::string& file) const {
  const std::filesystem::path p(file);
  return p.is_absolute() ? p : out_path() / p;
}

FdiMode ExperimentConfig::fdi_mode() const {
  if (fdi) return *fdi;
  return case_variant() == spacecraft::Variant::faulted_with_fdi ? FdiMode::misestimated
                                                                  : FdiMode::none;
}

namespace {

std::string_view fdi_name(FdiMode m) {
  switch (m) {
    case FdiMode::none:
      return "none";
    case FdiMode::misestimated:
      return "misestimated";
    case FdiMode::exact:
      return "exact";
  }
  return "none";
}

// Walks one JSON object, remembering its path for diagnostics and rejecting
// keys that were never read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(join(it.key()), "unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config field '" + path + "': " + what);
  }

  void real(const std::string& key, double& out, double lo, double hi, bool lo_open = false) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number()) fail(join(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi || (lo_open && x == lo)) {
      std::ostringstream msg;
      msg << "value " << x << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
      fail(join(key), msg.str());
    }
    out = x;
  }

  void integer(const std::string& key, int& out, long lo, long hi) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer()) fail(join(key), "expected an integer");
    const long x = v.get<long>();
    if (x < lo || x > hi) {
      fail(join(key), "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
    }
    out = static_cast<int>(x);
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_boolean()) fail(join(key), "expected true or false");
    out = v.get<bool>();
  }

  void text(const std::string& key, std::string& out, const std::vector<std::string>& allowed = {}) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_string()) fail(join(key), "expected a string");
    const std::string s = v.get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      std::string opts;
      for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
      fail(join(key), "'" + s + "' is not one of {" + opts + "}");
    }
    out = s;
  }

  void reals(const std::string& key, std::vector<double>& out, std::size_t count, double lo,
             double hi, bool lo_open = false) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_array() || v.size() != count) {
      fail(join(key), "expected an array of " + std::to_string(count) + " numbers");
    }
    std::vector<double> vals;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = join(key) + "[" + std::to_string(i) + "]";
      if (!v[i].is_number()) fail(p, "expected a number");
      const double x = v[i].get<double>();
      if (!std::isfinite(x) || x < lo || x > hi || (lo_open && x == lo)) {
        std::ostringstream msg;
        msg << "value " << x << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
        fail(p, msg.str());
      }
      vals.push_back(x);
    }
    out = vals;
  }

  void range(const std::string& key, double& lo_out, double& hi_out, double lo, double hi,
             bool lo_open = false) {
    std::vector<double> v{lo_out, hi_out};
    reals(key, v, 2, lo, hi, lo_open);
    if (!(v[0] <= v[1])) fail(join(key), "lower end exceeds upper end");
    lo_out = v[0];
    hi_out = v[1];
  }

  Section child(const std::string& key) { return Section(at(key), join(key)); }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_config(const json& root, ExperimentConfig& c) {
  Section top(root, "");
  top.text("variant", c.variant, {"fault_free", "faulted", "faulted_with_fdi"});
  if (top.has("seed")) {
    const json& s = top.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      Section::fail("seed", "expected a nonnegative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  top.text("output_dir", c.output_dir);
  if (top.has("integration")) {
    Section s = top.child("integration");
    s.real("dt", c.dt, 0.0, 1.0, true);
    s.real("horizon", c.horizon, 0.0, 1e5, true);
  }
  if (top.has("spacecraft")) {
    Section s = top.child("spacecraft");
    s.reals("inertia", c.inertia, 3, 0.0, 1e6, true);
    s.real("wheel_inertia", c.wheel_inertia, 0.0, 1e3);
    s.real("torque_max", c.torque_max, 0.0, 1e3, true);
    s.reals("kp", c.kp, 3, 0.0, 1e6, true);
    s.reals("kd", c.kd, 3, 0.0, 1e6, true);
    s.reals("x0_offset", c.x0_offset, 3, -1.0, 1.0);
  }
  if (top.has("fdi")) {
    std::string mode;
    top.text("fdi", mode, {"none", "misestimated", "exact"});
    c.fdi = mode == "none" ? FdiMode::none
                           : mode == "exact" ? FdiMode::exact : FdiMode::misestimated;
  }
  if (top.has("net")) {
    Section s = top.child("net");
    if (s.has("sizes")) {
      const json& v = s.at("sizes");
      if (!v.is_array() || v.size() < 2) Section::fail("net.sizes", "expected at least two sizes");
      std::vector<int> sizes;
      for (const json& x : v) {
        if (!x.is_number_integer() || x.get<long>() < 1 || x.get<long>() > 4096) {
          Section::fail("net.sizes", "sizes must be integers in [1, 4096]");
        }
        sizes.push_back(x.get<int>());
      }
      c.net_sizes = sizes;
    }
    s.text("activation", c.activation, {"tanh", "identity"});
    s.text("weights", c.weights);
    s.text("encoding", c.weight_encoding, {"text", "binary"});
  }
  if (top.has("dataset")) {
    Section s = top.child("dataset");
    s.integer("scenarios", c.dataset_scenarios, 1, 100000);
    s.integer("stride", c.dataset_stride, 1, 1000000);
    s.real("horizon", c.dataset_horizon, 0.0, 1e5, true);
    s.range("eta_range", c.sampler.eta_lo, c.sampler.eta_hi, 0.05, 1.0);
    s.range("fault_start_range", c.sampler.fault_start_lo, c.sampler.fault_start_hi, 0.0, 1e5);
    s.real("disturbance_amplitude_max", c.sampler.dist_amp_max, 0.0, 10.0);
    s.range("disturbance_frequency_range", c.sampler.dist_freq_lo, c.sampler.dist_freq_hi, 0.0,
            1e3);
    s.real("attitude_error", c.sampler.attitude_error, 0.0, 0.5);
    s.boolean("write_csv", c.write_dataset_csv);
  }
  if (top.has("train")) {
    Section s = top.child("train");
    s.integer("epochs", c.train.epochs, 0, 100000);
    s.integer("batch", c.train.batch, 1, 1 << 20);
    s.real("learning_rate", c.train.learning_rate, 0.0, 10.0, true);
    s.real("momentum", c.train.momentum, 0.0, 0.999);
    s.real("eps_sn", c.train.eps_sn, 0.0, 0.5, true);
    s.real("validation_fraction", c.train.validation_fraction, 0.0, 0.9);
    s.real("lambda_e", c.train.lambda_e, 0.0, 0.0);
  }
  if (top.has("ace")) {
    Section s = top.child("ace");
    s.integer("trials", c.ace_trials, 1, 1000000);
    s.real("rho", c.ace_rho, 0.0, 10.0);
    s.text("metric", c.ace_metric, {"error_norm", "lyapunov_drift"});
    s.text("statistic", c.ace_statistic, {"time_average", "sup"});
    s.real("horizon", c.ace_horizon, 0.0, 1e5, true);
  }
  if (top.has("adapt")) {
    Section s = top.child("adapt");
    s.boolean("enabled", c.adapt_enabled);
    if (s.has("layer")) {
      const json& v = s.at("layer");
      if (v.is_string() && v.get<std::string>() == "ace") {
        c.adapt_layer = 0;
      } else {
        s.integer("layer", c.adapt_layer, 1, 1000);
      }
    }
    s.real("gain", c.adapt_gain, 0.0, 1e9);
    s.real("leakage", c.adapt_leakage, 0.0, 1e3);
    s.boolean("project", c.adapt_project);
  }
  if (top.has("sweep")) {
    Section s = top.child("sweep");
    s.range("window", c.window_start, c.window_end, 0.0, 1e5);
  }
  if (c.adapt_layer > static_cast<int>(c.net_sizes.size()) - 1) {
    Section::fail("adapt.layer", "exceeds the number of weight layers");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& ex) {
    throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
  }
  ExperimentConfig cfg;
  try {
    read_config(root, cfg);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string to_json(const ExperimentConfig& c) {
  json j;
  j["variant"] = c.variant;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["integration"] = {{"dt", c.dt}, {"horizon", c.horizon}};
  j["spacecraft"] = {{"inertia", c.inertia},       {"wheel_inertia", c.wheel_inertia},
                     {"torque_max", c.torque_max}, {"kp", c.kp},
                     {"kd", c.kd},                 {"x0_offset", c.x0_offset}};
  j["fdi"] = std::string(fdi_name(c.fdi_mode()));
  j["net"] = {{"sizes", c.net_sizes},
              {"activation", c.activation},
              {"weights", c.weights},
              {"encoding", c.weight_encoding}};
  j["dataset"] = {
      {"scenarios", c.dataset_scenarios},
      {"stride", c.dataset_stride},
      {"horizon", c.dataset_horizon},
      {"eta_range", {c.sampler.eta_lo, c.sampler.eta_hi}},
      {"fault_start_range", {c.sampler.fault_start_lo, c.sampler.fault_start_hi}},
      {"disturbance_amplitude_max", c.sampler.dist_amp_max},
      {"disturbance_frequency_range", {c.sampler.dist_freq_lo, c.sampler.dist_freq_hi}},
      {"attitude_error", c.sampler.attitude_error},
      {"write_csv", c.write_dataset_csv}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch", c.train.batch},
                {"learning_rate", c.train.learning_rate},
                {"momentum", c.train.momentum},
                {"eps_sn", c.train.eps_sn},
                {"validation_fraction", c.train.validation_fraction},
                {"lambda_e", c.train.lambda_e}};
  j["ace"] = {{"trials", c.ace_trials},
              {"rho", c.ace_rho},
              {"metric", c.ace_metric},
              {"statistic", c.ace_statistic},
              {"horizon", c.ace_horizon}};
  json layer = c.adapt_layer == 0 ? json("ace") : json(c.adapt_layer);
  j["adapt"] = {{"enabled", c.adapt_enabled},
                {"layer", layer},
                {"gain", c.adapt_gain},
                {"leakage", c.adapt_leakage},
                {"project", c.adapt_project}};
  j["sweep"] = {{"window", {c.window_start, c.window_end}}};
  return j.dump(2) + "\n";
}

void write_resolved_config(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "resolved_config.json");
  if (!os) throw std::runtime_error("cannot write resolved config in " + dir.string());
  os << to_json(cfg);
}

}  // namespace acefr
