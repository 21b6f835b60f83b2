#pragma once

#include "neuroair/core.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace neuroair::nets {

enum class LayerKind {
  kConv2d,
  kDepthwiseConv2d,
  kSeparableConv2d,
  kBatchNorm,
  kActivation,
  kAvgPool2d,
  kMaxPool2d,
  kDropout,
  kFlatten,
  kDense,
};

enum class Activation { kLinear, kElu, kSquare, kLog, kSoftmax };
enum class Padding { kValid, kSame };

inline constexpr double kLogEpsilon = 1e-7;
inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  int filters = 0;  // conv filters or dense units
  Padding padding = Padding::kValid;
  double rate = 0.0;  // dropout
  int depth_multiplier = 1;
  std::optional<double> max_norm;
  Activation activation = Activation::kLinear;
  bool bias = true;

  std::string describe() const;

  static LayerSpec conv2d(int kh, int kw, int filters, Padding pad = Padding::kValid, bool bias = true);
  static LayerSpec depthwise(int kh, int kw, int multiplier, Padding pad = Padding::kValid,
                             bool bias = false, std::optional<double> max_norm = std::nullopt);
  static LayerSpec separable(int kh, int kw, int filters, Padding pad = Padding::kValid, bool bias = false);
  static LayerSpec batchnorm();
  static LayerSpec activation_layer(Activation a);
  static LayerSpec avgpool(int kh, int kw, int sh, int sw);
  static LayerSpec maxpool(int kh, int kw, int sh, int sw);
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
  static LayerSpec dense(int units);
};

/// Feature-map shape of one sample: maps x height x width.
struct Shape {
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const { return static_cast<std::size_t>(c) * h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct NetSpec {
  std::string name;
  int channels = 0;  // kappa
  int samples = 0;   // T
  int n_classes = kNumClasses;
  std::vector<LayerSpec> layers;

  Shape input_shape() const { return {1, channels, samples}; }
};

/// Architecture by name: eegnet, deepconvnet (alias dcnet), shallowconvnet
/// (alias scnet). Spatial kernels span all `channels`.
NetSpec build(std::string_view name, int channels, int samples, int n_classes = kNumClasses);

/// Output shape after every layer. Throws naming the first layer that does
/// not fit.
std::vector<Shape> propagate_shapes(const NetSpec& spec);
std::size_t flatten_size(const NetSpec& spec);

nlohmann::json to_json(const NetSpec& spec);
NetSpec net_spec_from_json(const nlohmann::json& j);

template <typename S>
using Batch = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct Param {
  std::string name;
  std::vector<int> shape;
  Vec<S> value;
  Vec<S> grad;
  std::optional<double> max_norm;
  int norm_group = 0;  // consecutive entries sharing one norm bound

  void apply_max_norm();
};

/// One layer over a batch laid out as rows = samples, columns = c*h*w.
template <typename S>
class Layer {
 public:
  Layer(LayerSpec spec, Shape in, Shape out) : spec_(std::move(spec)), in_(in), out_(out) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }
  Shape input_shape() const { return in_; }
  Shape output_shape() const { return out_; }

  virtual void forward(const Batch<S>& in, Batch<S>& out, bool train, std::mt19937_64& rng) = 0;
  /// Overwrites parameter gradients; writes din when non-null. Must follow a
  /// train-mode forward on the same batch.
  virtual void backward(const Batch<S>& in, const Batch<S>& out, const Batch<S>& dout,
                        Batch<S>* din) = 0;
  virtual std::vector<Param<S>*> params() { return {}; }
  virtual std::vector<Vec<S>*> buffers() { return {}; }

 protected:
  LayerSpec spec_;
  Shape in_;
  Shape out_;
};

template <typename S>
std::unique_ptr<Layer<S>> make_layer(const LayerSpec& spec, Shape in, std::mt19937_64& init_rng);

enum class Mode { kTrain, kInfer };

template <typename S>
class Network {
 public:
  Network(NetSpec spec, std::uint64_t seed);

  const NetSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return layers_.size(); }
  Layer<S>& layer(std::size_t i) { return *layers_.at(i); }

  /// Class probabilities, rows = samples.
  Batch<S> forward(const Batch<S>& x, Mode mode);
  /// Gradient of the mean cross-entropy of the last train-mode forward.
  void backward(std::span<const int> labels);
  /// Mean cross-entropy of `probs` against `labels`.
  static double cross_entropy(const Batch<S>& probs, std::span<const int> labels);

  std::vector<Param<S>*> params();
  std::vector<Vec<S>*> buffers();
  std::size_t parameter_count();
  void apply_constraints();

  std::vector<Vec<S>> snapshot();
  void restore(const std::vector<Vec<S>>& state);

 private:
  NetSpec spec_;
  std::vector<std::unique_ptr<Layer<S>>> layers_;
  std::vector<Batch<S>> acts_;
  std::vector<Batch<S>> grads_;
  std::mt19937_64 rng_;
  bool trained_forward_ = false;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename S>
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  void step(const std::vector<Param<S>*>& params);

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Vec<S>> m_;
  std::vector<Vec<S>> v_;
};

struct TrainConfig {
  int batch_size = 128;
  int max_epochs = 500;
  int patience = 20;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool verbose = false;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

using Model = Network<float>;

struct TrainedNet {
  std::unique_ptr<Model> net;
  std::vector<EpochLog> log;
  int best_epoch = -1;
};

/// EpochSet rows -> float batch.
Batch<float> to_batch(const EpochSet& epochs);

/// Mini-batch Adam with early stopping on validation accuracy; returns the
/// parameters of the best validation epoch.
TrainedNet train(const NetSpec& spec, const EpochSet& train_set, const EpochSet& val_set,
                 const TrainConfig& cfg);

struct Evaluation {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;  // true x predicted
  std::vector<int> predictions;
};

/// Index of the largest entry; ties go to the lowest index.
template <typename Row>
int argmax(const Row& row) {
  int best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k) {
    if (row(k) > row(best)) best = static_cast<int>(k);
  }
  return best;
}

Evaluation evaluate(Model& net, const EpochSet& test_set, int batch_size = 128);
Evaluation evaluate_predictions(std::span<const int> labels, std::span<const int> predictions,
                                int n_classes = kNumClasses);

void save_checkpoint(const std::filesystem::path& path, TrainedNet& trained);
TrainedNet load_checkpoint(const std::filesystem::path& path);

}  // namespace neuroair::nets
