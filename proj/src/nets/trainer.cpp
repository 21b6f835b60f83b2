#include "neuroair/error.hpp"
#include "neuroair/nets.hpp"
#include "neuroair/seed.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

namespace neuroair::nets {

namespace {

void gather(const Batch<float>& x, std::span<const std::size_t> idx, Batch<float>& out) {
  out.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  }
}

struct Scores {
  double loss = 0.0;
  double accuracy = 0.0;
};

Scores score(Model& net, const Batch<float>& x, std::span<const int> labels, int batch_size) {
  double loss = 0.0;
  std::size_t correct = 0;
  const auto n = static_cast<std::size_t>(x.rows());
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(batch_size), n - start);
    const Batch<float> probs =
        net.forward(x.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)),
                    Mode::kInfer);
    const auto lab = labels.subspan(start, len);
    loss += Model::cross_entropy(probs, lab) * static_cast<double>(len);
    for (std::size_t i = 0; i < len; ++i) {
      if (argmax(probs.row(static_cast<Eigen::Index>(i))) == lab[i]) ++correct;
    }
  }
  return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

void check_set(const NetSpec& spec, const EpochSet& set, const char* what) {
  require(set.trials() > 0, ErrorCode::kInvalidArgument, std::string(what) + " set is empty");
  require(set.channels() == static_cast<std::size_t>(spec.channels) &&
              set.samples() == static_cast<std::size_t>(spec.samples),
          ErrorCode::kShapeMismatch,
          std::string(what) + " set is " + std::to_string(set.channels()) + "x" +
              std::to_string(set.samples()) + ", network expects " + std::to_string(spec.channels) +
              "x" + std::to_string(spec.samples));
  for (int y : set.labels()) {
    require(y >= 0 && y < spec.n_classes, ErrorCode::kInvalidArgument,
            std::string(what) + " label out of range");
  }
}

}  // namespace

void TrainConfig::validate() const {
  require(batch_size > 0 && max_epochs > 0 && patience >= 0, ErrorCode::kConfig,
          "train config: batch_size and max_epochs must be positive, patience >= 0");
  require(adam.lr > 0.0 && adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 &&
              adam.beta2 < 1.0 && adam.epsilon > 0.0,
          ErrorCode::kConfig, "train config: invalid Adam hyperparameters");
}

Batch<float> to_batch(const EpochSet& epochs) {
  const auto v = epochs.values();
  Batch<float> out(static_cast<Eigen::Index>(epochs.trials()),
                   static_cast<Eigen::Index>(epochs.channels() * epochs.samples()));
  for (std::size_t k = 0; k < v.size(); ++k) out.data()[k] = static_cast<float>(v[k]);
  return out;
}

TrainedNet train(const NetSpec& spec, const EpochSet& train_set, const EpochSet& val_set,
                 const TrainConfig& cfg) {
  cfg.validate();
  check_set(spec, train_set, "training");
  check_set(spec, val_set, "validation");

  TrainedNet result;
  result.net = std::make_unique<Model>(spec, cfg.seed);
  Model& net = *result.net;
  Adam<float> adam(cfg.adam);
  const auto params = net.params();

  const Batch<float> x_train = to_batch(train_set);
  const Batch<float> x_val = to_batch(val_set);
  const auto& y_train = train_set.labels();
  const auto& y_val = val_set.labels();

  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<std::size_t> order(train_set.trials());
  std::iota(order.begin(), order.end(), 0);

  double best_acc = -1.0;
  std::vector<Vec<float>> best_state;
  int wait = 0;
  Batch<float> xb;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      gather(x_train, idx, xb);
      std::vector<int> yb(len);
      for (std::size_t i = 0; i < len; ++i) yb[i] = y_train[idx[i]];

      const Batch<float> probs = net.forward(xb, Mode::kTrain);
      const double loss = Model::cross_entropy(probs, yb);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "training diverged: non-finite loss at epoch " << epoch << ", batch starting at "
           << start << " (lr " << cfg.adam.lr << ")";
        fail(ErrorCode::kNumerical, os.str());
      }
      loss_sum += loss * static_cast<double>(len);
      for (std::size_t i = 0; i < len; ++i) {
        if (argmax(probs.row(static_cast<Eigen::Index>(i))) == yb[i]) ++correct;
      }
      net.backward(yb);
      adam.step(params);
      net.apply_constraints();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    entry.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    const Scores val = score(net, x_val, y_val, cfg.batch_size);
    entry.val_loss = val.loss;
    entry.val_accuracy = val.accuracy;
    result.log.push_back(entry);
    if (cfg.verbose) {
      std::cerr << std::fixed << std::setprecision(4) << "epoch " << epoch << " loss "
                << entry.train_loss << " acc " << entry.train_accuracy << " val_loss "
                << entry.val_loss << " val_acc " << entry.val_accuracy << "\n";
    }

    if (entry.val_accuracy > best_acc) {
      best_acc = entry.val_accuracy;
      result.best_epoch = epoch;
      best_state = net.snapshot();
      wait = 0;
    } else if (++wait >= std::max(cfg.patience, 1)) {
      break;
    }
  }
  net.restore(best_state);
  return result;
}

Evaluation evaluate_predictions(std::span<const int> labels, std::span<const int> predictions,
                                int n_classes) {
  require(labels.size() == predictions.size(), ErrorCode::kShapeMismatch,
          "evaluate: prediction count mismatch");
  Evaluation ev;
  ev.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < n_classes && predictions[i] >= 0 && predictions[i] < n_classes,
            ErrorCode::kInvalidArgument, "evaluate: class index out of range");
    ++ev.confusion(labels[i], predictions[i]);
    if (labels[i] == predictions[i]) ++correct;
  }
  ev.predictions.assign(predictions.begin(), predictions.end());
  ev.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
  return ev;
}

Evaluation evaluate(Model& net, const EpochSet& test_set, int batch_size) {
  check_set(net.spec(), test_set, "test");
  require(batch_size > 0, ErrorCode::kInvalidArgument, "evaluate: batch size must be positive");
  const Batch<float> x = to_batch(test_set);
  std::vector<int> pred;
  const auto n = static_cast<std::size_t>(x.rows());
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(batch_size), n - start);
    const Batch<float> probs =
        net.forward(x.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)),
                    Mode::kInfer);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) pred.push_back(argmax(probs.row(i)));
  }
  return evaluate_predictions(test_set.labels(), pred, net.spec().n_classes);
}

}  // namespace neuroair::nets
