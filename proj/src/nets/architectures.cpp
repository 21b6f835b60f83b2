#include "neuroair/error.hpp"
#include "neuroair/nets.hpp"
#include "shape.hpp"

#include <sstream>

namespace neuroair::nets {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kDepthwiseConv2d: return "depthwise_conv2d";
    case LayerKind::kSeparableConv2d: return "separable_conv2d";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kActivation: return "activation";
    case LayerKind::kAvgPool2d: return "avgpool2d";
    case LayerKind::kMaxPool2d: return "maxpool2d";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
  }
  return "?";
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kElu: return "elu";
    case Activation::kSquare: return "square";
    case Activation::kLog: return "log";
    case Activation::kSoftmax: return "softmax";
  }
  return "?";
}

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<E> values, const char* (*name)(E)) {
  for (E v : values) {
    if (s == name(v)) return v;
  }
  fail(ErrorCode::kFormat, "unknown value '" + s + "' in network spec");
}

const char* padding_name(Padding p) { return p == Padding::kSame ? "same" : "valid"; }

}  // namespace

LayerSpec LayerSpec::conv2d(int kh, int kw, int filters, Padding pad, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.filters = filters;
  s.padding = pad;
  s.bias = bias;
  return s;
}

LayerSpec LayerSpec::depthwise(int kh, int kw, int multiplier, Padding pad, bool bias,
                               std::optional<double> max_norm) {
  LayerSpec s;
  s.kind = LayerKind::kDepthwiseConv2d;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.depth_multiplier = multiplier;
  s.padding = pad;
  s.bias = bias;
  s.max_norm = max_norm;
  return s;
}

LayerSpec LayerSpec::separable(int kh, int kw, int filters, Padding pad, bool bias) {
  LayerSpec s = conv2d(kh, kw, filters, pad, bias);
  s.kind = LayerKind::kSeparableConv2d;
  return s;
}

LayerSpec LayerSpec::batchnorm() {
  LayerSpec s;
  s.kind = LayerKind::kBatchNorm;
  return s;
}

LayerSpec LayerSpec::activation_layer(Activation a) {
  LayerSpec s;
  s.kind = LayerKind::kActivation;
  s.activation = a;
  return s;
}

LayerSpec LayerSpec::avgpool(int kh, int kw, int sh, int sw) {
  LayerSpec s;
  s.kind = LayerKind::kAvgPool2d;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.stride_h = sh;
  s.stride_w = sw;
  return s;
}

LayerSpec LayerSpec::maxpool(int kh, int kw, int sh, int sw) {
  LayerSpec s = avgpool(kh, kw, sh, sw);
  s.kind = LayerKind::kMaxPool2d;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::kDropout;
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::flatten() { return LayerSpec{}; }

LayerSpec LayerSpec::dense(int units) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.filters = units;
  return s;
}

std::string LayerSpec::describe() const {
  std::ostringstream os;
  os << kind_name(kind);
  switch (kind) {
    case LayerKind::kConv2d:
    case LayerKind::kSeparableConv2d:
      os << " (" << kernel_h << "," << kernel_w << ") x" << filters << " " << padding_name(padding);
      break;
    case LayerKind::kDepthwiseConv2d:
      os << " (" << kernel_h << "," << kernel_w << ") depth " << depth_multiplier << " "
         << padding_name(padding);
      break;
    case LayerKind::kAvgPool2d:
    case LayerKind::kMaxPool2d:
      os << " (" << kernel_h << "," << kernel_w << ") stride (" << stride_h << "," << stride_w << ")";
      break;
    case LayerKind::kActivation:
      os << " " << activation_name(activation);
      break;
    case LayerKind::kDropout:
      os << " " << rate;
      break;
    case LayerKind::kDense:
      os << " " << filters;
      break;
    default:
      break;
  }
  return os.str();
}

namespace detail {

Axis axis_geometry(int in, int kernel, int stride, Padding pad) {
  if (pad == Padding::kSame) {
    const int out = (in + stride - 1) / stride;
    const int total = std::max((out - 1) * stride + kernel - in, 0);
    return {out, total / 2};
  }
  if (in < kernel) return {0, 0};
  return {(in - kernel) / stride + 1, 0};
}

Shape layer_output_shape(const LayerSpec& s, Shape in) {
  auto need = [&](bool ok, const std::string& what) {
    require(ok, ErrorCode::kShapeMismatch, s.describe() + ": " + what);
  };
  need(in.c >= 1 && in.h >= 1 && in.w >= 1, "empty input");
  switch (s.kind) {
    case LayerKind::kConv2d:
    case LayerKind::kSeparableConv2d:
    case LayerKind::kDepthwiseConv2d: {
      need(s.kernel_h >= 1 && s.kernel_w >= 1 && s.stride_h >= 1 && s.stride_w >= 1,
           "kernel and stride must be positive");
      const auto h = axis_geometry(in.h, s.kernel_h, s.stride_h, s.padding);
      const auto w = axis_geometry(in.w, s.kernel_w, s.stride_w, s.padding);
      need(h.out >= 1 && w.out >= 1,
           "input " + std::to_string(in.h) + "x" + std::to_string(in.w) + " smaller than kernel");
      if (s.kind == LayerKind::kDepthwiseConv2d) {
        need(s.depth_multiplier >= 1, "depth multiplier must be positive");
        return {in.c * s.depth_multiplier, h.out, w.out};
      }
      need(s.filters >= 1, "filter count must be positive");
      return {s.filters, h.out, w.out};
    }
    case LayerKind::kAvgPool2d:
    case LayerKind::kMaxPool2d: {
      need(s.padding == Padding::kValid, "pooling supports valid padding only");
      need(s.kernel_h >= 1 && s.kernel_w >= 1 && s.stride_h >= 1 && s.stride_w >= 1,
           "kernel and stride must be positive");
      const auto h = axis_geometry(in.h, s.kernel_h, s.stride_h, Padding::kValid);
      const auto w = axis_geometry(in.w, s.kernel_w, s.stride_w, Padding::kValid);
      need(h.out >= 1 && w.out >= 1,
           "input " + std::to_string(in.h) + "x" + std::to_string(in.w) + " smaller than pool");
      return {in.c, h.out, w.out};
    }
    case LayerKind::kDropout:
      need(s.rate >= 0.0 && s.rate < 1.0, "rate must lie in [0, 1)");
      return in;
    case LayerKind::kBatchNorm:
    case LayerKind::kActivation:
      return in;
    case LayerKind::kFlatten:
      return {static_cast<int>(in.size()), 1, 1};
    case LayerKind::kDense:
      need(s.filters >= 1, "unit count must be positive");
      return {s.filters, 1, 1};
  }
  fail(ErrorCode::kInvalidArgument, "unknown layer kind");
}

}  // namespace detail

NetSpec build(std::string_view name, int channels, int samples, int n_classes) {
  require(channels >= 1 && samples >= 1 && n_classes >= 2, ErrorCode::kInvalidArgument,
          "build: channels, samples and classes must be positive");
  NetSpec spec;
  spec.channels = channels;
  spec.samples = samples;
  spec.n_classes = n_classes;
  auto& L = spec.layers;
  using A = Activation;
  if (name == "eegnet") {
    spec.name = "eegnet";
    L.push_back(LayerSpec::conv2d(1, 64, 8, Padding::kSame, false));
    L.push_back(LayerSpec::batchnorm());
    L.push_back(LayerSpec::depthwise(channels, 1, 2, Padding::kValid, false, 1.0));
    L.push_back(LayerSpec::batchnorm());
    L.push_back(LayerSpec::activation_layer(A::kElu));
    L.push_back(LayerSpec::avgpool(1, 4, 1, 4));
    L.push_back(LayerSpec::dropout(0.5));
    L.push_back(LayerSpec::separable(1, 16, 16, Padding::kSame, false));
    L.push_back(LayerSpec::batchnorm());
    L.push_back(LayerSpec::activation_layer(A::kElu));
    L.push_back(LayerSpec::avgpool(1, 8, 1, 8));
    L.push_back(LayerSpec::dropout(0.5));
  } else if (name == "deepconvnet" || name == "dcnet") {
    spec.name = "deepconvnet";
    L.push_back(LayerSpec::conv2d(1, 5, 25));
    L.push_back(LayerSpec::conv2d(channels, 1, 25));
    int filters = 25;
    for (int block = 0; block < 4; ++block) {
      if (block > 0) {
        filters *= 2;
        L.push_back(LayerSpec::conv2d(1, 5, filters));
      }
      L.push_back(LayerSpec::batchnorm());
      L.push_back(LayerSpec::activation_layer(A::kElu));
      L.push_back(LayerSpec::maxpool(1, 2, 1, 2));
      L.push_back(LayerSpec::dropout(0.5));
    }
  } else if (name == "shallowconvnet" || name == "scnet") {
    spec.name = "shallowconvnet";
    L.push_back(LayerSpec::conv2d(1, 13, 40));
    L.push_back(LayerSpec::conv2d(channels, 1, 40));
    L.push_back(LayerSpec::batchnorm());
    L.push_back(LayerSpec::activation_layer(A::kSquare));
    L.push_back(LayerSpec::avgpool(1, 35, 1, 7));
    L.push_back(LayerSpec::activation_layer(A::kLog));
    L.push_back(LayerSpec::dropout(0.5));
  } else {
    fail(ErrorCode::kInvalidArgument,
         "unknown model '" + std::string(name) + "' (expected eegnet, deepconvnet, shallowconvnet)");
  }
  L.push_back(LayerSpec::flatten());
  L.push_back(LayerSpec::dense(n_classes));
  L.push_back(LayerSpec::activation_layer(A::kSoftmax));
  propagate_shapes(spec);
  return spec;
}

std::vector<Shape> propagate_shapes(const NetSpec& spec) {
  std::vector<Shape> shapes;
  Shape cur = spec.input_shape();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      cur = detail::layer_output_shape(spec.layers[i], cur);
    } catch (const Error& e) {
      fail(ErrorCode::kShapeMismatch, spec.name + " layer " + std::to_string(i) + " (" +
                                          e.what() + ") with input " + std::to_string(spec.channels) +
                                          "x" + std::to_string(spec.samples));
    }
    shapes.push_back(cur);
  }
  return shapes;
}

std::size_t flatten_size(const NetSpec& spec) {
  const auto shapes = propagate_shapes(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::kFlatten) return shapes[i].size();
  }
  fail(ErrorCode::kInvalidArgument, "network has no flatten layer");
}

nlohmann::json to_json(const NetSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json j;
    j["kind"] = kind_name(l.kind);
    j["kernel"] = {l.kernel_h, l.kernel_w};
    j["stride"] = {l.stride_h, l.stride_w};
    j["filters"] = l.filters;
    j["padding"] = padding_name(l.padding);
    j["rate"] = l.rate;
    j["depth_multiplier"] = l.depth_multiplier;
    j["max_norm"] = l.max_norm ? nlohmann::json(*l.max_norm) : nlohmann::json(nullptr);
    j["activation"] = activation_name(l.activation);
    j["bias"] = l.bias;
    layers.push_back(std::move(j));
  }
  return {{"name", spec.name},
          {"channels", spec.channels},
          {"samples", spec.samples},
          {"n_classes", spec.n_classes},
          {"layers", std::move(layers)}};
}

NetSpec net_spec_from_json(const nlohmann::json& j) {
  NetSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.channels = j.at("channels").get<int>();
    spec.samples = j.at("samples").get<int>();
    spec.n_classes = j.at("n_classes").get<int>();
    for (const auto& lj : j.at("layers")) {
      LayerSpec l;
      l.kind = parse_enum<LayerKind>(lj.at("kind").get<std::string>(),
                                     {LayerKind::kConv2d, LayerKind::kDepthwiseConv2d,
                                      LayerKind::kSeparableConv2d, LayerKind::kBatchNorm,
                                      LayerKind::kActivation, LayerKind::kAvgPool2d,
                                      LayerKind::kMaxPool2d, LayerKind::kDropout,
                                      LayerKind::kFlatten, LayerKind::kDense},
                                     kind_name);
      l.kernel_h = lj.at("kernel").at(0).get<int>();
      l.kernel_w = lj.at("kernel").at(1).get<int>();
      l.stride_h = lj.at("stride").at(0).get<int>();
      l.stride_w = lj.at("stride").at(1).get<int>();
      l.filters = lj.at("filters").get<int>();
      l.padding = lj.at("padding").get<std::string>() == "same" ? Padding::kSame : Padding::kValid;
      l.rate = lj.at("rate").get<double>();
      l.depth_multiplier = lj.at("depth_multiplier").get<int>();
      if (!lj.at("max_norm").is_null()) l.max_norm = lj["max_norm"].get<double>();
      l.activation = parse_enum<Activation>(lj.at("activation").get<std::string>(),
                                            {Activation::kLinear, Activation::kElu, Activation::kSquare,
                                             Activation::kLog, Activation::kSoftmax},
                                            activation_name);
      l.bias = lj.at("bias").get<bool>();
      spec.layers.push_back(l);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad network spec: ") + e.what());
  }
  propagate_shapes(spec);
  return spec;
}

}  // namespace neuroair::nets
