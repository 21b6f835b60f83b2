#include "neuroair/error.hpp"
#include "neuroair/nets.hpp"
#include "shape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace neuroair::nets {

namespace {

template <typename S>
using ConstMap = Eigen::Map<const Batch<S>>;
template <typename S>
using MutMap = Eigen::Map<Batch<S>>;

template <typename S>
Param<S> make_param(std::string name, std::vector<int> shape) {
  Param<S> p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  const auto n = std::accumulate(p.shape.begin(), p.shape.end(), Eigen::Index{1},
                                 [](Eigen::Index a, int b) { return a * b; });
  p.value = Vec<S>::Zero(n);
  p.grad = Vec<S>::Zero(n);
  return p;
}

template <typename S>
void glorot_uniform(Vec<S>& v, double fan_in, double fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = static_cast<S>(u(rng));
}

// Output positions [lo, hi) whose input index o*stride + k - pad lies in [0, in).
std::pair<int, int> valid_range(int k, int pad, int stride, int in, int out) {
  int lo = 0;
  if (pad - k > 0) lo = (pad - k + stride - 1) / stride;
  int hi = (in - k + pad + stride - 1) / stride;
  if (in - k + pad <= 0) hi = 0;
  hi = std::min(hi, out);
  lo = std::min(lo, hi);
  return {lo, hi};
}

// ---------------------------------------------------------------- conv2d

template <typename S>
class Conv2d final : public Layer<S> {
 public:
  Conv2d(const LayerSpec& s, Shape in, Shape out, std::mt19937_64& rng, std::string prefix = "")
      : Layer<S>(s, in, out) {
    gh_ = detail::axis_geometry(in.h, s.kernel_h, s.stride_h, s.padding);
    gw_ = detail::axis_geometry(in.w, s.kernel_w, s.stride_w, s.padding);
    k_ = in.c * s.kernel_h * s.kernel_w;
    p_ = out.h * out.w;
    weight_ = make_param<S>(prefix + "kernel", {s.filters, in.c, s.kernel_h, s.kernel_w});
    glorot_uniform(weight_.value, k_, static_cast<double>(s.filters) * s.kernel_h * s.kernel_w, rng);
    if (s.bias) bias_ = make_param<S>(prefix + "bias", {s.filters});
    // Keep each patch block near 32k entries so it stays cache resident.
    const Eigen::Index per_row = k_ * out.w;
    block_rows_ = static_cast<int>(std::clamp<Eigen::Index>(32768 / std::max<Eigen::Index>(per_row, 1), 1, out.h));
  }

  void forward(const Batch<S>& in, Batch<S>& out, bool, std::mt19937_64&) override {
    const auto n_rows = in.rows();
    const int ho = this->out_.h;
    const Eigen::Index wo = this->out_.w;
    out.resize(n_rows, static_cast<Eigen::Index>(this->out_.size()));
    ConstMap<S> w(weight_.value.data(), this->spec_.filters, k_);
    for (Eigen::Index n = 0; n < n_rows; ++n) {
      MutMap<S> o(out.data() + n * out.cols(), this->spec_.filters, p_);
      for (int r0 = 0; r0 < ho; r0 += block_rows_) {
        const int r1 = std::min(ho, r0 + block_rows_);
        im2col(in.data() + n * in.cols(), r0, r1, cols_);
        o.middleCols(r0 * wo, (r1 - r0) * wo).noalias() = w * cols_;
      }
      if (bias_) o.colwise() += bias_->value;
    }
  }

  void backward(const Batch<S>& in, const Batch<S>&, const Batch<S>& dout, Batch<S>* din) override {
    const auto n_rows = in.rows();
    const int ho = this->out_.h;
    const Eigen::Index wo = this->out_.w;
    ConstMap<S> w(weight_.value.data(), this->spec_.filters, k_);
    MutMap<S> dw(weight_.grad.data(), this->spec_.filters, k_);
    dw.setZero();
    if (bias_) bias_->grad.setZero();
    if (din) din->setZero(n_rows, in.cols());
    for (Eigen::Index n = 0; n < n_rows; ++n) {
      ConstMap<S> d(dout.data() + n * dout.cols(), this->spec_.filters, p_);
      if (bias_) bias_->grad += d.rowwise().sum();
      for (int r0 = 0; r0 < ho; r0 += block_rows_) {
        const int r1 = std::min(ho, r0 + block_rows_);
        const auto db = d.middleCols(r0 * wo, (r1 - r0) * wo);
        im2col(in.data() + n * in.cols(), r0, r1, cols_);
        dw.noalias() += db * cols_.transpose();
        if (din) {
          dcols_.noalias() = w.transpose() * db;
          col2im(dcols_, r0, r1, din->data() + n * din->cols());
        }
      }
    }
  }

  std::vector<Param<S>*> params() override {
    std::vector<Param<S>*> out{&weight_};
    if (bias_) out.push_back(&*bias_);
    return out;
  }

 private:
  // Visits patch-matrix rows for output rows [r0, r1).
  template <typename Fn>
  void for_each_patch_row(int r0, int r1, Fn&& fn) const {
    const auto& s = this->spec_;
    const Shape in = this->in_;
    const Shape out = this->out_;
    for (int c = 0; c < in.c; ++c) {
      for (int i = 0; i < s.kernel_h; ++i) {
        for (int j = 0; j < s.kernel_w; ++j) {
          const int row = (c * s.kernel_h + i) * s.kernel_w + j;
          const auto [lo, hi] = valid_range(j, gw_.pad_before, s.stride_w, in.w, out.w);
          for (int oh = r0; oh < r1; ++oh) {
            const int ih = oh * s.stride_h + i - gh_.pad_before;
            const bool row_valid = ih >= 0 && ih < in.h;
            fn(row, c, ih, j, oh - r0, row_valid, lo, hi);
          }
        }
      }
    }
  }

  void im2col(const S* x, int r0, int r1, Batch<S>& cols) const {
    const int wo = this->out_.w;
    const Eigen::Index width = static_cast<Eigen::Index>(r1 - r0) * wo;
    cols.resize(k_, width);
    const auto& s = this->spec_;
    const Shape in = this->in_;
    for_each_patch_row(r0, r1, [&](int row, int c, int ih, int j, int oh, bool ok, int lo, int hi) {
      S* dst = cols.data() + static_cast<Eigen::Index>(row) * width + static_cast<Eigen::Index>(oh) * wo;
      if (!ok) {
        std::fill(dst, dst + wo, S(0));
        return;
      }
      const S* src = x + (static_cast<Eigen::Index>(c) * in.h + ih) * in.w;
      std::fill(dst, dst + lo, S(0));
      const int off = j - gw_.pad_before;
      if (s.stride_w == 1) {
        std::copy(src + lo + off, src + hi + off, dst + lo);
      } else {
        for (int ow = lo; ow < hi; ++ow) dst[ow] = src[ow * s.stride_w + off];
      }
      std::fill(dst + hi, dst + wo, S(0));
    });
  }

  void col2im(const Batch<S>& cols, int r0, int r1, S* x) const {
    const int wo = this->out_.w;
    const Eigen::Index width = static_cast<Eigen::Index>(r1 - r0) * wo;
    const auto& s = this->spec_;
    const Shape in = this->in_;
    for_each_patch_row(r0, r1, [&](int row, int c, int ih, int j, int oh, bool ok, int lo, int hi) {
      if (!ok) return;
      const S* src = cols.data() + static_cast<Eigen::Index>(row) * width + static_cast<Eigen::Index>(oh) * wo;
      S* dst = x + (static_cast<Eigen::Index>(c) * in.h + ih) * in.w;
      const int off = j - gw_.pad_before;
      if (s.stride_w == 1) {
        Eigen::Map<Vec<S>>(dst + lo + off, hi - lo) += Eigen::Map<const Vec<S>>(src + lo, hi - lo);
      } else {
        for (int ow = lo; ow < hi; ++ow) dst[ow * s.stride_w + off] += src[ow];
      }
    });
  }

  detail::Axis gh_;
  detail::Axis gw_;
  Eigen::Index k_ = 0;
  Eigen::Index p_ = 0;
  int block_rows_ = 1;
  Param<S> weight_;
  std::optional<Param<S>> bias_;
  Batch<S> cols_;
  Batch<S> dcols_;
};

// ------------------------------------------------------- depthwise conv2d

template <typename S>
class DepthwiseConv2d final : public Layer<S> {
 public:
  DepthwiseConv2d(const LayerSpec& s, Shape in, Shape out, std::mt19937_64& rng,
                  std::string prefix = "")
      : Layer<S>(s, in, out) {
    gh_ = detail::axis_geometry(in.h, s.kernel_h, s.stride_h, s.padding);
    gw_ = detail::axis_geometry(in.w, s.kernel_w, s.stride_w, s.padding);
    taps_ = s.kernel_h * s.kernel_w;
    weight_ = make_param<S>(prefix + "depthwise_kernel",
                            {in.c * s.depth_multiplier, s.kernel_h, s.kernel_w});
    weight_.max_norm = s.max_norm;
    weight_.norm_group = taps_;
    glorot_uniform(weight_.value, static_cast<double>(taps_) * in.c,
                   static_cast<double>(taps_) * s.depth_multiplier, rng);
    if (s.bias) bias_ = make_param<S>(prefix + "depthwise_bias", {in.c * s.depth_multiplier});
  }

  void forward(const Batch<S>& in, Batch<S>& out, bool, std::mt19937_64&) override {
    out.setZero(in.rows(), static_cast<Eigen::Index>(this->out_.size()));
    for (Eigen::Index n = 0; n < in.rows(); ++n) {
      const S* x = in.data() + n * in.cols();
      S* y = out.data() + n * out.cols();
      visit([&](const S* src, S* dst, int stride, int off, int lo, int hi, Eigen::Index widx) {
        const S wv = weight_.value(widx);
        if (stride == 1) {
          Eigen::Map<Vec<S>>(dst + lo, hi - lo) += wv * Eigen::Map<const Vec<S>>(src + lo + off, hi - lo);
          return;
        }
        for (int ow = lo; ow < hi; ++ow) dst[ow] += wv * src[ow * stride + off];
      }, x, y);
      if (bias_) {
        const Eigen::Index plane = static_cast<Eigen::Index>(this->out_.h) * this->out_.w;
        for (int oc = 0; oc < this->out_.c; ++oc) {
          Eigen::Map<Vec<S>>(y + oc * plane, plane).array() += bias_->value(oc);
        }
      }
    }
  }

  void backward(const Batch<S>& in, const Batch<S>&, const Batch<S>& dout, Batch<S>* din) override {
    weight_.grad.setZero();
    if (bias_) bias_->grad.setZero();
    if (din) din->setZero(in.rows(), in.cols());
    const Eigen::Index plane = static_cast<Eigen::Index>(this->out_.h) * this->out_.w;
    for (Eigen::Index n = 0; n < in.rows(); ++n) {
      const S* x = in.data() + n * in.cols();
      const S* dy = dout.data() + n * dout.cols();
      S* dx = din ? din->data() + n * din->cols() : nullptr;
      // dst pointers index into dout; gradient flows to weights and inputs.
      visit([&](const S* src, const S* d, int stride, int off, int lo, int hi, Eigen::Index widx) {
        const S wv = weight_.value(widx);
        S* g = dx ? dx + (src - x) : nullptr;
        if (stride == 1) {
          const Eigen::Map<const Vec<S>> dv(d + lo, hi - lo);
          const Eigen::Map<const Vec<S>> sv(src + lo + off, hi - lo);
          weight_.grad(widx) += dv.dot(sv);
          if (g) Eigen::Map<Vec<S>>(g + lo + off, hi - lo) += wv * dv;
          return;
        }
        S acc = 0;
        for (int ow = lo; ow < hi; ++ow) acc += d[ow] * src[ow * stride + off];
        weight_.grad(widx) += acc;
        if (g) {
          for (int ow = lo; ow < hi; ++ow) g[ow * stride + off] += wv * d[ow];
        }
      }, x, dy);
      if (bias_) {
        for (int oc = 0; oc < this->out_.c; ++oc) {
          bias_->grad(oc) += Eigen::Map<const Vec<S>>(dy + oc * plane, plane).sum();
        }
      }
    }
  }

  std::vector<Param<S>*> params() override {
    std::vector<Param<S>*> out{&weight_};
    if (bias_) out.push_back(&*bias_);
    return out;
  }

 private:
  // fn(src_row, out_row, stride_w, offset, lo, hi, weight_index) for every
  // (out channel, tap, output row) whose input row is inside the map.
  template <typename Fn, typename Out>
  void visit(Fn&& fn, const S* x, Out* y) const {
    const auto& s = this->spec_;
    const Shape in = this->in_;
    const Shape out = this->out_;
    for (int c = 0; c < in.c; ++c) {
      for (int d = 0; d < s.depth_multiplier; ++d) {
        const int oc = c * s.depth_multiplier + d;
        for (int i = 0; i < s.kernel_h; ++i) {
          for (int j = 0; j < s.kernel_w; ++j) {
            const auto [lo, hi] = valid_range(j, gw_.pad_before, s.stride_w, in.w, out.w);
            const Eigen::Index widx = static_cast<Eigen::Index>(oc) * taps_ + i * s.kernel_w + j;
            for (int oh = 0; oh < out.h; ++oh) {
              const int ih = oh * s.stride_h + i - gh_.pad_before;
              if (ih < 0 || ih >= in.h) continue;
              const S* src = x + (static_cast<Eigen::Index>(c) * in.h + ih) * in.w;
              Out* dst = y + (static_cast<Eigen::Index>(oc) * out.h + oh) * out.w;
              fn(src, dst, s.stride_w, j - gw_.pad_before, lo, hi, widx);
            }
          }
        }
      }
    }
  }

  detail::Axis gh_;
  detail::Axis gw_;
  int taps_ = 1;
  Param<S> weight_;
  std::optional<Param<S>> bias_;
};

// ------------------------------------------------------- separable conv2d

template <typename S>
class SeparableConv2d final : public Layer<S> {
 public:
  SeparableConv2d(const LayerSpec& s, Shape in, Shape out, std::mt19937_64& rng)
      : Layer<S>(s, in, out),
        depthwise_(depthwise_spec(s), in, mid_shape(s, in), rng),
        pointwise_(LayerSpec::conv2d(1, 1, s.filters, Padding::kValid, s.bias), mid_shape(s, in), out,
                   rng, "pointwise_") {}

  void forward(const Batch<S>& in, Batch<S>& out, bool train, std::mt19937_64& rng) override {
    depthwise_.forward(in, mid_, train, rng);
    pointwise_.forward(mid_, out, train, rng);
  }

  void backward(const Batch<S>& in, const Batch<S>& out, const Batch<S>& dout, Batch<S>* din) override {
    pointwise_.backward(mid_, out, dout, &dmid_);
    depthwise_.backward(in, mid_, dmid_, din);
  }

  std::vector<Param<S>*> params() override {
    auto a = depthwise_.params();
    auto b = pointwise_.params();
    a.insert(a.end(), b.begin(), b.end());
    return a;
  }

 private:
  static LayerSpec depthwise_spec(const LayerSpec& s) {
    LayerSpec d = LayerSpec::depthwise(s.kernel_h, s.kernel_w, 1, s.padding, false);
    d.stride_h = s.stride_h;
    d.stride_w = s.stride_w;
    return d;
  }
  static Shape mid_shape(const LayerSpec& s, Shape in) {
    return detail::layer_output_shape(depthwise_spec(s), in);
  }

  DepthwiseConv2d<S> depthwise_;
  Conv2d<S> pointwise_;
  Batch<S> mid_;
  Batch<S> dmid_;
};

// ------------------------------------------------------------ batchnorm

template <typename S>
class BatchNorm final : public Layer<S> {
 public:
  BatchNorm(const LayerSpec& s, Shape in, Shape out) : Layer<S>(s, in, out) {
    gamma_ = make_param<S>("gamma", {in.c});
    beta_ = make_param<S>("beta", {in.c});
    gamma_.value.setOnes();
    running_mean_ = Vec<S>::Zero(in.c);
    running_var_ = Vec<S>::Ones(in.c);
  }

  void forward(const Batch<S>& in, Batch<S>& out, bool train, std::mt19937_64&) override {
    const Shape sh = this->in_;
    const Eigen::Index plane = static_cast<Eigen::Index>(sh.h) * sh.w;
    out.resize(in.rows(), in.cols());
    if (train) {
      const double m = static_cast<double>(in.rows() * plane);
      mean_.resize(sh.c);
      inv_std_.resize(sh.c);
      for (int c = 0; c < sh.c; ++c) {
        const auto block = in.middleCols(c * plane, plane);
        double sum = 0.0;
        for (Eigen::Index n = 0; n < in.rows(); ++n) sum += static_cast<double>(block.row(n).sum());
        const double mu = sum / m;
        const S mu_s = static_cast<S>(mu);
        double sq = 0.0;
        for (Eigen::Index n = 0; n < in.rows(); ++n) {
          sq += static_cast<double>((block.row(n).array() - mu_s).square().sum());
        }
        const double var = sq / m;
        mean_(c) = mu;
        inv_std_(c) = 1.0 / std::sqrt(var + kBatchNormEpsilon);
        const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
        running_mean_(c) = static_cast<S>(kBatchNormMomentum * running_mean_(c) + (1.0 - kBatchNormMomentum) * mu);
        running_var_(c) = static_cast<S>(kBatchNormMomentum * running_var_(c) + (1.0 - kBatchNormMomentum) * unbiased);
      }
      apply(in, out, mean_, inv_std_);
    } else {
      Eigen::VectorXd mu = running_mean_.template cast<double>();
      Eigen::VectorXd inv = (running_var_.template cast<double>().array() + kBatchNormEpsilon).rsqrt();
      apply(in, out, mu, inv);
    }
  }

  void backward(const Batch<S>& in, const Batch<S>&, const Batch<S>& dout, Batch<S>* din) override {
    require(mean_.size() == this->in_.c, ErrorCode::kInvalidArgument,
            "batchnorm backward without a train-mode forward");
    const Shape sh = this->in_;
    const Eigen::Index plane = static_cast<Eigen::Index>(sh.h) * sh.w;
    const double m = static_cast<double>(in.rows() * plane);
    if (din) din->resize(in.rows(), in.cols());
    for (int c = 0; c < sh.c; ++c) {
      const auto x = in.middleCols(c * plane, plane);
      const auto d = dout.middleCols(c * plane, plane);
      const S mu = static_cast<S>(mean_(c));
      const S inv = static_cast<S>(inv_std_(c));
      double dgamma = 0.0;
      double dbeta = 0.0;
      for (Eigen::Index n = 0; n < in.rows(); ++n) {
        dgamma += static_cast<double>((d.row(n).array() * (x.row(n).array() - mu)).sum()) * inv_std_(c);
        dbeta += static_cast<double>(d.row(n).sum());
      }
      gamma_.grad(c) = static_cast<S>(dgamma);
      beta_.grad(c) = static_cast<S>(dbeta);
      if (!din) continue;
      const S scale = static_cast<S>(static_cast<double>(gamma_.value(c)) * inv_std_(c) / m);
      const S mm = static_cast<S>(m);
      const S db = static_cast<S>(dbeta);
      const S dg = static_cast<S>(dgamma);
      din->middleCols(c * plane, plane).array() =
          scale * (mm * d.array() - db - (x.array() - mu) * inv * dg);
    }
  }

  std::vector<Param<S>*> params() override { return {&gamma_, &beta_}; }
  std::vector<Vec<S>*> buffers() override { return {&running_mean_, &running_var_}; }

 private:
  void apply(const Batch<S>& in, Batch<S>& out, const Eigen::VectorXd& mu,
             const Eigen::VectorXd& inv) const {
    const Shape sh = this->in_;
    const Eigen::Index plane = static_cast<Eigen::Index>(sh.h) * sh.w;
    for (int c = 0; c < sh.c; ++c) {
      const S a = static_cast<S>(static_cast<double>(gamma_.value(c)) * inv(c));
      const S b = static_cast<S>(static_cast<double>(beta_.value(c)) -
                                 static_cast<double>(gamma_.value(c)) * inv(c) * mu(c));
      out.middleCols(c * plane, plane).array() = in.middleCols(c * plane, plane).array() * a + b;
    }
  }

  Param<S> gamma_;
  Param<S> beta_;
  Vec<S> running_mean_;
  Vec<S> running_var_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd inv_std_;
};

// ----------------------------------------------------------- activation

template <typename S>
class ActivationLayer final : public Layer<S> {
 public:
  using Layer<S>::Layer;

  void forward(const Batch<S>& in, Batch<S>& out, bool, std::mt19937_64&) override {
    const S eps = static_cast<S>(kLogEpsilon);
    switch (this->spec_.activation) {
      case Activation::kLinear:
        out = in;
        break;
      case Activation::kElu:
        out = in.unaryExpr([](S x) { return x > S(0) ? x : std::expm1(x); });
        break;
      case Activation::kSquare:
        out = in.array().square().matrix();
        break;
      case Activation::kLog:
        out = in.unaryExpr([eps](S x) { return std::log(std::max(x, eps)); });
        break;
      case Activation::kSoftmax:
        out.resize(in.rows(), in.cols());
        for (Eigen::Index n = 0; n < in.rows(); ++n) {
          const S top = in.row(n).maxCoeff();
          out.row(n) = (in.row(n).array() - top).exp().matrix();
          out.row(n) /= out.row(n).sum();
        }
        break;
    }
  }

  void backward(const Batch<S>& in, const Batch<S>& out, const Batch<S>& dout, Batch<S>* din) override {
    if (!din) return;
    const S eps = static_cast<S>(kLogEpsilon);
    switch (this->spec_.activation) {
      case Activation::kLinear:
        *din = dout;
        break;
      case Activation::kElu:
        *din = dout.binaryExpr(in, [](S d, S x) { return x > S(0) ? d : d * std::exp(x); });
        break;
      case Activation::kSquare:
        *din = (S(2) * dout.array() * in.array()).matrix();
        break;
      case Activation::kLog:
        *din = dout.binaryExpr(in, [eps](S d, S x) { return x > eps ? d / x : S(0); });
        break;
      case Activation::kSoftmax:
        din->resize(in.rows(), in.cols());
        for (Eigen::Index n = 0; n < in.rows(); ++n) {
          const S dot = out.row(n).dot(dout.row(n));
          din->row(n) = (out.row(n).array() * (dout.row(n).array() - dot)).matrix();
        }
        break;
    }
  }
};

// -------------------------------------------------------------- pooling

template <typename S>
class Pool2d final : public Layer<S> {
 public:
  Pool2d(const LayerSpec& s, Shape in, Shape out, bool is_max)
      : Layer<S>(s, in, out), max_(is_max) {}

  void forward(const Batch<S>& in, Batch<S>& out, bool train, std::mt19937_64&) override {
    const auto& s = this->spec_;
    const Shape i = this->in_;
    const Shape o = this->out_;
    out.resize(in.rows(), static_cast<Eigen::Index>(o.size()));
    if (max_ && train) argmax_.resize(static_cast<std::size_t>(in.rows()) * o.size());
    const S inv_area = S(1) / static_cast<S>(s.kernel_h * s.kernel_w);
    for (Eigen::Index n = 0; n < in.rows(); ++n) {
      const S* x = in.data() + n * in.cols();
      S* y = out.data() + n * out.cols();
      for (int c = 0; c < o.c; ++c) {
        for (int oh = 0; oh < o.h; ++oh) {
          for (int ow = 0; ow < o.w; ++ow) {
            const Eigen::Index oidx = (static_cast<Eigen::Index>(c) * o.h + oh) * o.w + ow;
            S acc = max_ ? -std::numeric_limits<S>::infinity() : S(0);
            Eigen::Index best = -1;
            for (int kh = 0; kh < s.kernel_h; ++kh) {
              const S* row = x + (static_cast<Eigen::Index>(c) * i.h + oh * s.stride_h + kh) * i.w +
                             static_cast<Eigen::Index>(ow) * s.stride_w;
              for (int kw = 0; kw < s.kernel_w; ++kw) {
                if (max_) {
                  if (best < 0 || row[kw] > acc) {
                    acc = row[kw];
                    best = (row + kw) - x;
                  }
                } else {
                  acc += row[kw];
                }
              }
            }
            y[oidx] = max_ ? acc : acc * inv_area;
            if (max_ && train) argmax_[static_cast<std::size_t>(n * out.cols() + oidx)] = best;
          }
        }
      }
    }
  }

  void backward(const Batch<S>& in, const Batch<S>&, const Batch<S>& dout, Batch<S>* din) override {
    if (!din) return;
    const auto& s = this->spec_;
    const Shape i = this->in_;
    const Shape o = this->out_;
    din->setZero(in.rows(), in.cols());
    if (max_) {
      require(argmax_.size() == static_cast<std::size_t>(dout.size()), ErrorCode::kInvalidArgument,
              "maxpool backward without a train-mode forward");
      for (Eigen::Index n = 0; n < in.rows(); ++n) {
        S* dx = din->data() + n * din->cols();
        for (Eigen::Index k = 0; k < dout.cols(); ++k) {
          dx[argmax_[static_cast<std::size_t>(n * dout.cols() + k)]] += dout(n, k);
        }
      }
      return;
    }
    const S inv_area = S(1) / static_cast<S>(s.kernel_h * s.kernel_w);
    for (Eigen::Index n = 0; n < in.rows(); ++n) {
      S* dx = din->data() + n * din->cols();
      const S* dy = dout.data() + n * dout.cols();
      for (int c = 0; c < o.c; ++c) {
        for (int oh = 0; oh < o.h; ++oh) {
          for (int ow = 0; ow < o.w; ++ow) {
            const S g = dy[(static_cast<Eigen::Index>(c) * o.h + oh) * o.w + ow] * inv_area;
            for (int kh = 0; kh < s.kernel_h; ++kh) {
              S* row = dx + (static_cast<Eigen::Index>(c) * i.h + oh * s.stride_h + kh) * i.w +
                       static_cast<Eigen::Index>(ow) * s.stride_w;
              for (int kw = 0; kw < s.kernel_w; ++kw) row[kw] += g;
            }
          }
        }
      }
    }
  }

 private:
  bool max_;
  std::vector<Eigen::Index> argmax_;
};

// -------------------------------------------------------------- dropout

template <typename S>
class Dropout final : public Layer<S> {
 public:
  using Layer<S>::Layer;

  void forward(const Batch<S>& in, Batch<S>& out, bool train, std::mt19937_64& rng) override {
    const double rate = this->spec_.rate;
    if (!train || rate <= 0.0) {
      out = in;
      mask_.resize(0, 0);
      return;
    }
    std::bernoulli_distribution keep(1.0 - rate);
    const S scale = static_cast<S>(1.0 / (1.0 - rate));
    mask_.resize(in.rows(), in.cols());
    for (Eigen::Index k = 0; k < mask_.size(); ++k) mask_.data()[k] = keep(rng) ? scale : S(0);
    out = (in.array() * mask_.array()).matrix();
  }

  void backward(const Batch<S>&, const Batch<S>&, const Batch<S>& dout, Batch<S>* din) override {
    if (!din) return;
    if (mask_.size() == 0) {
      *din = dout;
    } else {
      *din = (dout.array() * mask_.array()).matrix();
    }
  }

 private:
  Batch<S> mask_;
};

// -------------------------------------------------------------- flatten

template <typename S>
class Flatten final : public Layer<S> {
 public:
  using Layer<S>::Layer;
  void forward(const Batch<S>& in, Batch<S>& out, bool, std::mt19937_64&) override { out = in; }
  void backward(const Batch<S>&, const Batch<S>&, const Batch<S>& dout, Batch<S>* din) override {
    if (din) *din = dout;
  }
};

// ---------------------------------------------------------------- dense

template <typename S>
class Dense final : public Layer<S> {
 public:
  Dense(const LayerSpec& s, Shape in, Shape out, std::mt19937_64& rng) : Layer<S>(s, in, out) {
    fan_in_ = static_cast<Eigen::Index>(in.size());
    weight_ = make_param<S>("kernel", {s.filters, static_cast<int>(fan_in_)});
    glorot_uniform(weight_.value, static_cast<double>(fan_in_), s.filters, rng);
    if (s.bias) bias_ = make_param<S>("bias", {s.filters});
  }

  void forward(const Batch<S>& in, Batch<S>& out, bool, std::mt19937_64&) override {
    const Eigen::Index units = this->spec_.filters;
    ConstMap<S> w(weight_.value.data(), units, fan_in_);
    out.resize(in.rows(), units);
    // Per-sample products keep inference independent of batch composition.
    for (Eigen::Index n = 0; n < in.rows(); ++n) {
      Eigen::Map<Vec<S>> y(out.data() + n * units, units);
      Eigen::Map<const Vec<S>> x(in.data() + n * fan_in_, fan_in_);
      y.noalias() = w * x;
      if (bias_) y += bias_->value;
    }
  }

  void backward(const Batch<S>& in, const Batch<S>&, const Batch<S>& dout, Batch<S>* din) override {
    const Eigen::Index units = this->spec_.filters;
    ConstMap<S> w(weight_.value.data(), units, fan_in_);
    MutMap<S> dw(weight_.grad.data(), units, fan_in_);
    dw.noalias() = dout.transpose() * in;
    if (bias_) bias_->grad = dout.colwise().sum().transpose();
    if (din) din->noalias() = dout * w;
  }

  std::vector<Param<S>*> params() override {
    std::vector<Param<S>*> out{&weight_};
    if (bias_) out.push_back(&*bias_);
    return out;
  }

 private:
  Eigen::Index fan_in_ = 0;
  Param<S> weight_;
  std::optional<Param<S>> bias_;
};

}  // namespace

template <typename S>
void Param<S>::apply_max_norm() {
  if (!max_norm || norm_group <= 0) return;
  const double bound = *max_norm;
  for (Eigen::Index start = 0; start < value.size(); start += norm_group) {
    auto seg = value.segment(start, norm_group);
    const double norm = std::sqrt(seg.template cast<double>().squaredNorm());
    if (norm > bound) seg *= static_cast<S>(bound / norm);
  }
}

template <typename S>
std::unique_ptr<Layer<S>> make_layer(const LayerSpec& spec, Shape in, std::mt19937_64& rng) {
  const Shape out = detail::layer_output_shape(spec, in);
  switch (spec.kind) {
    case LayerKind::kConv2d:
      return std::make_unique<Conv2d<S>>(spec, in, out, rng);
    case LayerKind::kDepthwiseConv2d:
      return std::make_unique<DepthwiseConv2d<S>>(spec, in, out, rng);
    case LayerKind::kSeparableConv2d:
      return std::make_unique<SeparableConv2d<S>>(spec, in, out, rng);
    case LayerKind::kBatchNorm:
      return std::make_unique<BatchNorm<S>>(spec, in, out);
    case LayerKind::kActivation:
      return std::make_unique<ActivationLayer<S>>(spec, in, out);
    case LayerKind::kAvgPool2d:
      return std::make_unique<Pool2d<S>>(spec, in, out, false);
    case LayerKind::kMaxPool2d:
      return std::make_unique<Pool2d<S>>(spec, in, out, true);
    case LayerKind::kDropout:
      return std::make_unique<Dropout<S>>(spec, in, out);
    case LayerKind::kFlatten:
      return std::make_unique<Flatten<S>>(spec, in, out);
    case LayerKind::kDense:
      return std::make_unique<Dense<S>>(spec, in, out, rng);
  }
  fail(ErrorCode::kInvalidArgument, "unknown layer kind");
}

template struct Param<float>;
template struct Param<double>;
template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&, Shape, std::mt19937_64&);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&, Shape, std::mt19937_64&);

}  // namespace neuroair::nets
