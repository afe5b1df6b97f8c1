#include <cmath>
#include <numeric>
#include <sstream>

#include "acefr/dnn.hpp"

namespace acefr {

namespace {

// Batched forward pass; zs[l] holds z_l for every column, l = 0..L-1.
Mat batch_forward(const MlpController& net, const Mat& inputs, std::vector<Mat>& zs) {
  const int L = net.num_layers();
  zs.resize(static_cast<std::size_t>(L));
  zs[0] = inputs;
  for (int l = 1; l < L; ++l) {
    Mat a = net.weight(l) * zs[static_cast<std::size_t>(l - 1)];
    a.colwise() += net.bias(l);
    if (net.activation() == Activation::tanh) {
      zs[static_cast<std::size_t>(l)] = a.array().tanh();
    } else {
      zs[static_cast<std::size_t>(l)] = std::move(a);
    }
  }
  return -(net.weight(L) * zs[static_cast<std::size_t>(L - 1)]);
}

void check_shapes(const MlpController& net, const Mat& inputs, const Mat& targets) {
  if (inputs.rows() != net.input_dim() || targets.rows() != net.output_dim() ||
      inputs.cols() != targets.cols() || inputs.cols() == 0) {
    throw std::invalid_argument("imitation loss: inputs/targets do not match the network");
  }
}

}  // namespace

double imitation_loss(const MlpController& net, const Mat& inputs, const Mat& targets) {
  check_shapes(net, inputs, targets);
  std::vector<Mat> zs;
  const Mat out = batch_forward(net, inputs, zs);
  return (out - targets).squaredNorm() / static_cast<double>(inputs.cols());
}

LossGradient imitation_gradient(const MlpController& net, const Mat& inputs,
                                const Mat& targets) {
  check_shapes(net, inputs, targets);
  const int L = net.num_layers();
  std::vector<Mat> zs;
  const Mat out = batch_forward(net, inputs, zs);
  const Mat resid = out - targets;
  const double count = static_cast<double>(inputs.cols());

  LossGradient grad;
  grad.loss = resid.squaredNorm() / count;
  grad.d_weight.resize(static_cast<std::size_t>(L));
  grad.d_bias.resize(static_cast<std::size_t>(L - 1));

  // d loss / d out, then through u_NN = -W_L z_{L-1}.
  const Mat d_out = (2.0 / count) * resid;
  grad.d_weight[static_cast<std::size_t>(L - 1)] =
      -d_out * zs[static_cast<std::size_t>(L - 1)].transpose();
  Mat d_z = -(net.weight(L).transpose() * d_out);
  for (int l = L - 1; l >= 1; --l) {
    const Mat& z = zs[static_cast<std::size_t>(l)];
    Mat d_a = net.activation() == Activation::tanh
                  ? Mat(d_z.array() * (1.0 - z.array().square()))
                  : d_z;
    grad.d_weight[static_cast<std::size_t>(l - 1)] =
        d_a * zs[static_cast<std::size_t>(l - 1)].transpose();
    grad.d_bias[static_cast<std::size_t>(l - 1)] = d_a.rowwise().sum();
    if (l > 1) d_z = net.weight(l).transpose() * d_a;
  }
  return grad;
}

namespace {

Mat gather(const Mat& src, const std::vector<Eigen::Index>& idx, std::size_t begin,
           std::size_t end) {
  Mat out(src.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) {
    out.col(static_cast<Eigen::Index>(k - begin)) = src.col(idx[k]);
  }
  return out;
}

void shuffle(std::vector<Eigen::Index>& idx, SeededStream& stream) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

TrainResult train(MlpController net, const TrainingDataset& data, const TrainHyper& hyper,
                  SeededStream stream) {
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (!(hyper.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (hyper.batch < 1 || hyper.epochs < 0) throw std::invalid_argument("train: bad batch/epochs");
  if (!(hyper.eps_sn > 0.0 && hyper.eps_sn < 1.0)) {
    throw std::invalid_argument("train: eps_sn must lie in (0, 1)");
  }
  if (hyper.lambda_e != 0.0) {
    throw std::invalid_argument("train: the rollout-error term is not trainable (lambda_e must be 0)");
  }
  net.validate();
  const Mat inputs = data.inputs();
  const Mat& targets = data.u_comp;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  SeededStream split_stream = stream.split(0);
  shuffle(order, split_stream);
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(hyper.validation_fraction * static_cast<double>(order.size())));
  if (n_val >= order.size()) n_val = 0;
  const Mat val_in = n_val > 0 ? gather(inputs, order, 0, n_val) : inputs;
  const Mat val_tg = n_val > 0 ? gather(targets, order, 0, n_val) : targets;
  std::vector<Eigen::Index> train_idx(order.begin() + static_cast<long>(n_val), order.end());

  const int L = net.num_layers();
  const double bound = 1.0 - hyper.eps_sn;
  for (int l = 1; l <= L; ++l) net.weight(l) = project_spectral(net.weight(l), bound);

  TrainResult result;
  result.initial_validation_loss = imitation_loss(net, val_in, val_tg);
  // Epoch 0 records the untrained network.
  EpochLoss rec0;
  rec0.train_loss = train_idx.empty()
                        ? 0.0
                        : imitation_loss(net, gather(inputs, train_idx, 0, train_idx.size()),
                                         gather(targets, train_idx, 0, train_idx.size()));
  rec0.validation_loss = result.initial_validation_loss;
  result.history.push_back(rec0);

  std::vector<Mat> vel_w;
  std::vector<Vec> vel_b;
  for (int l = 1; l <= L; ++l) {
    vel_w.push_back(Mat::Zero(net.weight(l).rows(), net.weight(l).cols()));
    if (l < L) vel_b.push_back(Vec::Zero(net.bias(l).size()));
  }

  SeededStream order_stream = stream.split(1);
  long step = 0;
  const std::size_t batch = static_cast<std::size_t>(hyper.batch);
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    shuffle(train_idx, order_stream);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t begin = 0; begin < train_idx.size(); begin += batch) {
      const std::size_t end = std::min(train_idx.size(), begin + batch);
      const Mat bx = gather(inputs, train_idx, begin, end);
      const Mat by = gather(targets, train_idx, begin, end);
      const LossGradient g = imitation_gradient(net, bx, by);
      ++step;
      if (!std::isfinite(g.loss)) {
        std::ostringstream msg;
        msg << "training diverged at step " << step << " (epoch " << epoch << ")";
        throw TrainingDiverged(step, msg.str());
      }
      loss_sum += g.loss * static_cast<double>(end - begin);
      loss_count += end - begin;
      for (int l = 1; l <= L; ++l) {
        const auto i = static_cast<std::size_t>(l - 1);
        vel_w[i] = hyper.momentum * vel_w[i] - hyper.learning_rate * g.d_weight[i];
        net.weight(l) = project_spectral(net.weight(l) + vel_w[i], bound);
        if (l < L) {
          vel_b[i] = hyper.momentum * vel_b[i] - hyper.learning_rate * g.d_bias[i];
          net.bias(l) += vel_b[i];
        }
      }
    }
    EpochLoss rec;
    rec.epoch = epoch;
    rec.train_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    rec.validation_loss = imitation_loss(net, val_in, val_tg);
    if (!std::isfinite(rec.validation_loss)) {
      throw TrainingDiverged(step, "validation loss is not finite after epoch " +
                                       std::to_string(epoch));
    }
    result.history.push_back(rec);
  }
  result.final_validation_loss = imitation_loss(net, val_in, val_tg);
  result.net = std::move(net);
  return result;
}

}  // namespace acefr
