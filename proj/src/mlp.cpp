#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "acefr/dnn.hpp"

namespace acefr {

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

MlpController::MlpController(std::vector<int> layer_sizes, Activation act)
    : sizes_(std::move(layer_sizes)), act_(act) {
  if (sizes_.size() < 2) {
    throw std::invalid_argument("MlpController: need at least input and output sizes");
  }
  for (int s : sizes_) {
    if (s <= 0) throw std::invalid_argument("MlpController: layer sizes must be positive");
  }
  const int L = static_cast<int>(sizes_.size()) - 1;
  for (int l = 1; l <= L; ++l) {
    weights_.push_back(Mat::Zero(sizes_[l], sizes_[l - 1]));
    if (l < L) biases_.push_back(Vec::Zero(sizes_[l]));
  }
}

MlpController MlpController::glorot(std::vector<int> layer_sizes, Activation act,
                                    SeededStream& stream, double spectral_bound) {
  MlpController net(std::move(layer_sizes), act);
  for (int l = 1; l <= net.num_layers(); ++l) {
    Mat& w = net.weight(l);
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = stream.uniform(-limit, limit);
    }
    w = project_spectral(w, spectral_bound);
  }
  return net;
}

void MlpController::check_layer(int layer) const {
  if (layer < 1 || layer > num_layers()) {
    throw std::out_of_range("MlpController: layer index " + std::to_string(layer) +
                            " outside 1.." + std::to_string(num_layers()));
  }
}

const Mat& MlpController::weight(int layer) const {
  check_layer(layer);
  return weights_[static_cast<std::size_t>(layer - 1)];
}

Mat& MlpController::weight(int layer) {
  check_layer(layer);
  return weights_[static_cast<std::size_t>(layer - 1)];
}

const Vec& MlpController::bias(int layer) const {
  check_layer(layer);
  if (layer == num_layers()) throw std::out_of_range("MlpController: output layer has no bias");
  return biases_[static_cast<std::size_t>(layer - 1)];
}

Vec& MlpController::bias(int layer) {
  check_layer(layer);
  if (layer == num_layers()) throw std::out_of_range("MlpController: output layer has no bias");
  return biases_[static_cast<std::size_t>(layer - 1)];
}

void MlpController::validate() const {
  for (int l = 1; l <= num_layers(); ++l) {
    const Mat& w = weights_[static_cast<std::size_t>(l - 1)];
    if (w.rows() != sizes_[l] || w.cols() != sizes_[l - 1]) {
      throw std::invalid_argument("MlpController: broken dimension chain at layer " +
                                  std::to_string(l));
    }
    require_finite(w, "MlpController weight");
    if (l < num_layers()) {
      const Vec& b = biases_[static_cast<std::size_t>(l - 1)];
      if (b.size() != sizes_[l]) {
        throw std::invalid_argument("MlpController: bias size mismatch at layer " +
                                    std::to_string(l));
      }
      require_finite(b, "MlpController bias");
    }
  }
}

Vec make_input(const Vec& u_nom, const Vec& e) {
  Vec zeta(u_nom.size() + e.size());
  zeta << u_nom, e;
  return zeta;
}

const Vec& forward(const MlpController& net, const Vec& zeta, ForwardCache& cache,
                   const WeightOverride& ov) {
  const int L = net.num_layers();
  if (zeta.size() != net.input_dim()) {
    throw std::invalid_argument("forward: input dimension " + std::to_string(zeta.size()) +
                                " does not match network input " +
                                std::to_string(net.input_dim()));
  }
  const auto& sizes = net.layer_sizes();
  auto weight_of = [&](int l) -> Eigen::Map<const Mat> {
    if (ov.data != nullptr && ov.layer == l) {
      return Eigen::Map<const Mat>(ov.data, sizes[l], sizes[l - 1]);
    }
    const Mat& w = net.weight(l);
    return Eigen::Map<const Mat>(w.data(), w.rows(), w.cols());
  };
  cache.z.resize(static_cast<std::size_t>(L));
  cache.a.resize(static_cast<std::size_t>(L));
  cache.z[0] = zeta;
  for (int l = 1; l < L; ++l) {
    Vec& a = cache.a[static_cast<std::size_t>(l)];
    a.resize(sizes[l]);
    a.noalias() = weight_of(l) * cache.z[static_cast<std::size_t>(l - 1)];
    a += net.bias(l);
    Vec& z = cache.z[static_cast<std::size_t>(l)];
    if (net.activation() == Activation::tanh) {
      z = a.array().tanh();
    } else {
      z = a;
    }
  }
  cache.output.resize(sizes[L]);
  cache.output.noalias() = -(weight_of(L) * cache.z[static_cast<std::size_t>(L - 1)]);
  return cache.output;
}

ForwardResult forward(const MlpController& net, const Vec& e, const Vec& u_nom) {
  ForwardResult res;
  res.u_nn = forward(net, make_input(u_nom, e), res.cache);
  return res;
}

std::vector<double> layer_spectral_norms(const MlpController& net) {
  std::vector<double> out;
  for (int l = 1; l <= net.num_layers(); ++l) out.push_back(spectral_norm(net.weight(l)).value);
  return out;
}

// ---------------------------------------------------------------------------
// Weight files.

namespace {

constexpr std::string_view kMagic = "acefr-mlp";

void write_double(std::ostream& os, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  os.write(buf, ptr - buf);
}

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

void save_weights(const MlpController& net, const std::filesystem::path& path,
                  WeightEncoding encoding) {
  net.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_weights: cannot open " + path.string());
  os << kMagic << ' ' << (encoding == WeightEncoding::text ? "text" : "binary") << " 1\n";
  os << "activation " << activation_name(net.activation()) << '\n';
  os << "layers";
  for (int s : net.layer_sizes()) os << ' ' << s;
  os << '\n';
  const int L = net.num_layers();
  if (encoding == WeightEncoding::text) {
    for (int l = 1; l <= L; ++l) {
      const Mat& w = net.weight(l);
      os << "W" << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
          if (j > 0) os << ' ';
          write_double(os, w(i, j));
        }
        os << '\n';
      }
      if (l < L) {
        const Vec& b = net.bias(l);
        os << "b" << l << ' ' << b.size() << '\n';
        for (Eigen::Index i = 0; i < b.size(); ++i) {
          if (i > 0) os << ' ';
          write_double(os, b[i]);
        }
        os << '\n';
      }
    }
    os << "end\n";
  } else {
    static_assert(std::endian::native == std::endian::little,
                  "binary weight files assume a little-endian host");
    auto put = [&](double v) { os.write(reinterpret_cast<const char*>(&v), sizeof(double)); };
    for (int l = 1; l <= L; ++l) {
      const Mat& w = net.weight(l);
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) put(w(i, j));
      }
      if (l < L) {
        const Vec& b = net.bias(l);
        for (Eigen::Index i = 0; i < b.size(); ++i) put(b[i]);
      }
    }
  }
  if (!os) throw std::runtime_error("save_weights: write failed for " + path.string());
}

namespace {

class TextReader {
 public:
  explicit TextReader(std::istream& is) : is_(is) {}

  std::string word(const char* expecting) {
    std::string w;
    if (!(is_ >> w)) throw WeightFormatError(std::string("truncated weight file: expected ") + expecting);
    return w;
  }

  long integer(const char* expecting) {
    const std::string w = word(expecting);
    long v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) {
      throw WeightFormatError(std::string("malformed integer '") + w + "' for " + expecting);
    }
    return v;
  }

  double real(const char* expecting) {
    const std::string w = word(expecting);
    double v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) {
      throw WeightFormatError(std::string("malformed number '") + w + "' for " + expecting);
    }
    return v;
  }

 private:
  std::istream& is_;
};

}  // namespace

MlpController load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_weights: cannot open " + path.string());

  std::string magic_line;
  std::getline(is, magic_line);
  std::istringstream magic(magic_line);
  std::string tag, enc, version;
  magic >> tag >> enc >> version;
  if (tag != kMagic || (enc != "text" && enc != "binary") || version != "1") {
    throw WeightFormatError("not an acefr weight file: " + path.string());
  }
  std::string line;
  std::getline(is, line);
  std::istringstream act_line(line);
  std::string key, act_name;
  act_line >> key >> act_name;
  if (key != "activation") throw WeightFormatError("missing activation line");
  const Activation act = parse_activation(act_name);

  std::getline(is, line);
  std::istringstream size_line(line);
  size_line >> key;
  if (key != "layers") throw WeightFormatError("missing layers line");
  std::vector<int> sizes;
  int s = 0;
  while (size_line >> s) sizes.push_back(s);
  if (sizes.size() < 2) throw WeightFormatError("layers line needs at least two sizes");

  MlpController net(sizes, act);
  const int L = net.num_layers();
  if (enc == "text") {
    TextReader rd(is);
    for (int l = 1; l <= L; ++l) {
      Mat& w = net.weight(l);
      const std::string wtag = "W" + std::to_string(l);
      if (rd.word(wtag.c_str()) != wtag) throw WeightFormatError("expected " + wtag);
      const long rows = rd.integer("rows");
      const long cols = rd.integer("cols");
      if (rows != w.rows() || cols != w.cols()) {
        throw WeightFormatError(wtag + ": expected shape " + shape_str(w.rows(), w.cols()) +
                                ", found " + shape_str(rows, cols));
      }
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rd.real(wtag.c_str());
      }
      if (l < L) {
        Vec& b = net.bias(l);
        const std::string btag = "b" + std::to_string(l);
        if (rd.word(btag.c_str()) != btag) throw WeightFormatError("expected " + btag);
        const long len = rd.integer("bias length");
        if (len != b.size()) {
          throw WeightFormatError(btag + ": expected length " + std::to_string(b.size()) +
                                  ", found " + std::to_string(len));
        }
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rd.real(btag.c_str());
      }
    }
    if (rd.word("end marker") != "end") throw WeightFormatError("missing end marker");
  } else {
    auto get = [&](const char* what) {
      double v = 0;
      if (!is.read(reinterpret_cast<char*>(&v), sizeof(double))) {
        throw WeightFormatError(std::string("truncated weight file while reading ") + what);
      }
      return v;
    };
    for (int l = 1; l <= L; ++l) {
      Mat& w = net.weight(l);
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = get("weights");
      }
      if (l < L) {
        Vec& b = net.bias(l);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = get("biases");
      }
    }
    if (is.peek() != std::char_traits<char>::eof()) {
      throw WeightFormatError("trailing data after weights");
    }
  }
  try {
    net.validate();
  } catch (const std::invalid_argument& ex) {
    throw WeightFormatError(ex.what());
  }
  return net;
}

}  // namespace acefr
