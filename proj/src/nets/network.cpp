#include "neuroair/error.hpp"
#include "neuroair/nets.hpp"
#include "neuroair/seed.hpp"

#include <cmath>

namespace neuroair::nets {

template <typename S>
Network<S>::Network(NetSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), rng_(derive_seed(seed, "dropout")) {
  const auto shapes = propagate_shapes(spec_);
  require(!spec_.layers.empty() && spec_.layers.back().kind == LayerKind::kActivation &&
              spec_.layers.back().activation == Activation::kSoftmax,
          ErrorCode::kInvalidArgument, "network must end in a softmax activation");
  require(shapes.back().size() == static_cast<std::size_t>(spec_.n_classes), ErrorCode::kShapeMismatch,
          "network output size does not match class count");
  std::mt19937_64 init(derive_seed(seed, "init"));
  Shape cur = spec_.input_shape();
  for (const auto& l : spec_.layers) {
    layers_.push_back(make_layer<S>(l, cur, init));
    cur = layers_.back()->output_shape();
  }
  acts_.resize(layers_.size() + 1);
  grads_.resize(layers_.size());
}

template <typename S>
Batch<S> Network<S>::forward(const Batch<S>& x, Mode mode) {
  require(static_cast<std::size_t>(x.cols()) == spec_.input_shape().size(), ErrorCode::kShapeMismatch,
          "forward: input has " + std::to_string(x.cols()) + " values per sample, network expects " +
              std::to_string(spec_.input_shape().size()));
  const bool train = mode == Mode::kTrain;
  acts_[0] = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->forward(acts_[i], acts_[i + 1], train, rng_);
    if (!acts_[i + 1].allFinite()) {
      trained_forward_ = false;
      fail(ErrorCode::kNumerical, "non-finite activation after layer " + std::to_string(i) + " (" +
                                      spec_.layers[i].describe() + ")");
    }
  }
  trained_forward_ = train;
  return acts_.back();
}

template <typename S>
double Network<S>::cross_entropy(const Batch<S>& probs, std::span<const int> labels) {
  require(static_cast<std::size_t>(probs.rows()) == labels.size(), ErrorCode::kShapeMismatch,
          "cross_entropy: label count mismatch");
  double total = 0.0;
  for (Eigen::Index n = 0; n < probs.rows(); ++n) {
    const double p = static_cast<double>(probs(n, labels[static_cast<std::size_t>(n)]));
    total -= std::log(std::max(p, 1e-300));
  }
  return probs.rows() > 0 ? total / static_cast<double>(probs.rows()) : 0.0;
}

template <typename S>
void Network<S>::backward(std::span<const int> labels) {
  require(trained_forward_, ErrorCode::kInvalidArgument,
          "backward called without a preceding train-mode forward");
  const Batch<S>& probs = acts_.back();
  require(static_cast<std::size_t>(probs.rows()) == labels.size(), ErrorCode::kShapeMismatch,
          "backward: label count mismatch");
  // Softmax and cross-entropy fused: d(mean CE)/d(logits) = (p - y) / N.
  const std::size_t last = layers_.size() - 1;
  Batch<S>& grad = grads_[last];
  grad = probs;
  for (Eigen::Index n = 0; n < grad.rows(); ++n) {
    const int y = labels[static_cast<std::size_t>(n)];
    require(y >= 0 && y < grad.cols(), ErrorCode::kInvalidArgument, "backward: label out of range");
    grad(n, y) -= S(1);
  }
  grad /= static_cast<S>(grad.rows());
  // grads_[i] holds the gradient with respect to the input of layer i.
  for (std::size_t i = last; i-- > 0;) {
    layers_[i]->backward(acts_[i], acts_[i + 1], grads_[i + 1], i > 0 ? &grads_[i] : nullptr);
  }
}

template <typename S>
std::vector<Param<S>*> Network<S>::params() {
  std::vector<Param<S>*> out;
  for (auto& l : layers_) {
    auto p = l->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template <typename S>
std::vector<Vec<S>*> Network<S>::buffers() {
  std::vector<Vec<S>*> out;
  for (auto& l : layers_) {
    auto b = l->buffers();
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

template <typename S>
std::size_t Network<S>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : params()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

template <typename S>
void Network<S>::apply_constraints() {
  for (auto* p : params()) p->apply_max_norm();
}

template <typename S>
std::vector<Vec<S>> Network<S>::snapshot() {
  std::vector<Vec<S>> out;
  for (auto* p : params()) out.push_back(p->value);
  for (auto* b : buffers()) out.push_back(*b);
  return out;
}

template <typename S>
void Network<S>::restore(const std::vector<Vec<S>>& state) {
  auto ps = params();
  auto bs = buffers();
  require(state.size() == ps.size() + bs.size(), ErrorCode::kShapeMismatch,
          "restore: tensor count mismatch");
  std::size_t k = 0;
  for (auto* p : ps) {
    require(state[k].size() == p->value.size(), ErrorCode::kShapeMismatch,
            "restore: size mismatch for " + p->name);
    p->value = state[k++];
  }
  for (auto* b : bs) {
    require(state[k].size() == b->size(), ErrorCode::kShapeMismatch, "restore: buffer size mismatch");
    *b = state[k++];
  }
}

template <typename S>
void Adam<S>::step(const std::vector<Param<S>*>& params) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.push_back(Vec<S>::Zero(p->value.size()));
      v_.push_back(Vec<S>::Zero(p->value.size()));
    }
  }
  require(m_.size() == params.size(), ErrorCode::kShapeMismatch, "adam: parameter set changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const S lr_t = static_cast<S>(cfg_.lr * std::sqrt(bc2) / bc1);
  const S b1 = static_cast<S>(cfg_.beta1);
  const S b2 = static_cast<S>(cfg_.beta2);
  const S eps = static_cast<S>(cfg_.epsilon);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& g = params[k]->grad;
    m_[k] = b1 * m_[k] + (S(1) - b1) * g;
    v_[k] = b2 * v_[k] + (S(1) - b2) * g.cwiseAbs2();
    params[k]->value.array() -= lr_t * m_[k].array() / (v_[k].array().sqrt() + eps);
  }
}

template class Network<float>;
template class Network<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace neuroair::nets
