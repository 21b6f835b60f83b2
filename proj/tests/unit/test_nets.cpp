#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "neuroair/error.hpp"
#include "neuroair/nets.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <functional>

using namespace neuroair;
using namespace neuroair::nets;

namespace {

using B = Batch<double>;
using testing::check_layer;
using testing::random_batch;
using testing::toy_set;

NetSpec dense_toy(int inputs, int classes) {
  NetSpec spec;
  spec.name = "toy";
  spec.channels = 1;
  spec.samples = inputs;
  spec.n_classes = classes;
  spec.layers = {LayerSpec::flatten(), LayerSpec::dense(classes), LayerSpec::activation_layer(Activation::kSoftmax)};
  return spec;
}

}  // namespace

TEST_CASE("flatten sizes at 31 x 1500") {
  CHECK(flatten_size(build("eegnet", 31, 1500)) == 736);
  CHECK(flatten_size(build("deepconvnet", 31, 1500)) == 18000);
  CHECK(flatten_size(build("shallowconvnet", 31, 1500)) == 8320);
  CHECK(build("dcnet", 31, 1500).name == "deepconvnet");
  CHECK(build("scnet", 31, 1500).name == "shallowconvnet");
}

TEST_CASE("spatial kernels span the feature channel count") {
  for (int kappa : {9, 16, 25, 30, 62}) {
    const auto spec = build("eegnet", kappa, 1500);
    CHECK(spec.layers[2].kernel_h == kappa);
    CHECK(spec.layers[2].depth_multiplier == 2);
    CHECK(spec.layers[2].max_norm.value() == 1.0);
    CHECK(build("deepconvnet", kappa, 1500).layers[1].kernel_h == kappa);
    CHECK(build("shallowconvnet", kappa, 1500).layers[1].kernel_h == kappa);
  }
}

TEST_CASE("intermediate shapes follow the pooling arithmetic") {
  const auto e = propagate_shapes(build("eegnet", 31, 1500));
  CHECK(e[0] == Shape{8, 31, 1500});
  CHECK(e[2] == Shape{16, 1, 1500});
  CHECK(e[5] == Shape{16, 1, 375});
  CHECK(e[10] == Shape{16, 1, 46});
  const auto d = propagate_shapes(build("deepconvnet", 31, 1500));
  CHECK(d[0].w == 1496);
  CHECK(d[4].w == 748);
  const auto s = propagate_shapes(build("shallowconvnet", 31, 1500));
  CHECK(s[1] == Shape{40, 1, 1488});
  CHECK(s[4] == Shape{40, 1, 208});
  CHECK(d.back().size() == 26);
}

TEST_CASE("too short an input names the failing layer") {
  try {
    build("deepconvnet", 31, 40);
    FAIL("expected a shape error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kShapeMismatch);
    CHECK(std::string(err.what()).find("layer") != std::string::npos);
  }
  CHECK_THROWS_AS(build("resnet", 31, 1500), Error);
}

TEST_CASE("EEGNet has the fewest parameters") {
  Network<float> e(build("eegnet", 31, 1500), 1);
  Network<float> d(build("deepconvnet", 31, 1500), 1);
  Network<float> s(build("shallowconvnet", 31, 1500), 1);
  CHECK(e.parameter_count() < s.parameter_count());
  CHECK(e.parameter_count() < d.parameter_count());
}

TEST_CASE("net specs round trip through JSON") {
  const auto spec = build("shallowconvnet", 16, 500);
  const auto back = net_spec_from_json(to_json(spec));
  CHECK(back.name == spec.name);
  CHECK(flatten_size(back) == flatten_size(spec));
  CHECK(back.layers.size() == spec.layers.size());
}

TEST_CASE("finite-difference gradients for every layer kind") {
  const Shape one{1, 5, 7};
  const Shape two{2, 5, 7};
  const B x1 = random_batch(3, 35, 1);
  const B x2 = random_batch(3, 70, 2);
  struct Case {
    const char* name;
    LayerSpec spec;
    Shape in;
    B x;
  };
  std::vector<Case> cases{
      {"conv2d valid", LayerSpec::conv2d(2, 3, 3), one, x1},
      {"conv2d same", LayerSpec::conv2d(3, 4, 2, Padding::kSame, false), two, x2},
      {"depthwise", LayerSpec::depthwise(5, 1, 2, Padding::kValid, false, 1.0), two, x2},
      {"depthwise biased", LayerSpec::depthwise(2, 2, 1, Padding::kValid, true), two, x2},
      {"separable same", LayerSpec::separable(1, 3, 3, Padding::kSame), two, x2},
      {"separable valid", LayerSpec::separable(2, 2, 2, Padding::kValid, true), two, x2},
      {"batchnorm", LayerSpec::batchnorm(), two, x2},
      {"elu", LayerSpec::activation_layer(Activation::kElu), one, x1},
      {"square", LayerSpec::activation_layer(Activation::kSquare), one, x1},
      {"log", LayerSpec::activation_layer(Activation::kLog), one, B(x1.cwiseAbs().array() + 0.5)},
      {"linear", LayerSpec::activation_layer(Activation::kLinear), one, x1},
      {"softmax", LayerSpec::activation_layer(Activation::kSoftmax), one, x1},
      {"avgpool", LayerSpec::avgpool(2, 3, 1, 2), two, x2},
      {"maxpool", LayerSpec::maxpool(2, 2, 2, 2), two, x2},
      {"dropout", LayerSpec::dropout(0.5), one, x1},
      {"flatten", LayerSpec::flatten(), two, x2},
      {"dense", LayerSpec::dense(4), two, x2},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const auto g = check_layer(c.spec, c.in, c.x);
    CHECK(g.input < 1e-4);
    CHECK(g.params < 1e-4);
  }
}

TEST_CASE("whole-network gradients match finite differences") {
  for (const std::string name : {"eegnet", "deepconvnet", "shallowconvnet"}) {
    CAPTURE(name);
    const int samples = name == "deepconvnet" ? 96 : 64;
    auto spec = build(name, 3, samples, 4);
    for (auto& l : spec.layers) {
      if (l.kind == LayerKind::kDropout) l.rate = 0.0;
    }
    Network<double> net(spec, 5);
    const B x = random_batch(3, 3 * samples, 4);
    const std::vector<int> y{0, 3, 1};
    net.forward(x, Mode::kTrain);
    net.backward(y);
    auto params = net.params();
    double worst = 0.0;
    std::mt19937_64 pick(1);
    for (auto* p : params) {
      std::uniform_int_distribution<Eigen::Index> idx(0, p->value.size() - 1);
      Eigen::VectorXd analytic(6);
      Eigen::VectorXd numeric(6);
      for (int k = 0; k < 6; ++k) {
        const auto i = idx(pick);
        const double keep = p->value(i);
        const double h = 1e-6;
        p->value(i) = keep + h;
        const double up = Network<double>::cross_entropy(net.forward(x, Mode::kTrain), y);
        p->value(i) = keep - h;
        const double down = Network<double>::cross_entropy(net.forward(x, Mode::kTrain), y);
        p->value(i) = keep;
        numeric(k) = (up - down) / (2 * h);
        analytic(k) = p->grad(i);
      }
      // Biases feeding batchnorm have an exactly zero gradient; only
      // finite-difference noise remains there.
      if ((analytic - numeric).norm() > 1e-8) worst = std::max(worst, testing::rel(analytic, numeric));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("ELU derivative is continuous at zero") {
  std::mt19937_64 init(1);
  auto elu = make_layer<double>(LayerSpec::activation_layer(Activation::kElu), {1, 1, 1}, init);
  auto f = [&](double v) {
    B in(1, 1);
    in(0, 0) = v;
    B out;
    std::mt19937_64 rng(1);
    elu->forward(in, out, true, rng);
    return out(0, 0);
  };
  const double h = 1e-7;
  const double left = (f(0.0) - f(-h)) / h;
  const double right = (f(h) - f(0.0)) / h;
  CHECK(std::abs(left - right) < 1e-6);
}

TEST_CASE("dense plus softmax gradient is (p - y) x^T") {
  Network<double> net(dense_toy(3, 2), 3);
  B x(2, 3);
  x << 1.0, -2.0, 0.5, 0.3, 0.1, -1.0;
  const std::vector<int> y{1, 0};
  const B p = net.forward(x, Mode::kTrain);
  net.backward(y);
  B d = p;
  d(0, 1) -= 1.0;
  d(1, 0) -= 1.0;
  const Eigen::MatrixXd expect = d.transpose() * x / 2.0;
  const auto params = net.params();
  const auto* w = params.front();
  REQUIRE(w->value.size() == 6);
  for (int u = 0; u < 2; ++u) {
    for (int i = 0; i < 3; ++i) CHECK(w->grad(u * 3 + i) == doctest::Approx(expect(u, i)).epsilon(1e-12));
  }
}

TEST_CASE("backward before forward is an error") {
  Network<double> net(dense_toy(3, 2), 3);
  const std::vector<int> y{0};
  CHECK_THROWS_AS(net.backward(y), Error);
  net.forward(B::Zero(1, 3), Mode::kInfer);
  CHECK_THROWS_AS(net.backward(y), Error);
}

TEST_CASE("softmax rows sum to one and uniform predictions cost log 26") {
  Network<float> net(build("eegnet", 4, 64), 2);
  const Batch<float> x = random_batch(5, 4 * 64, 3).cast<float>();
  const auto p = net.forward(x, Mode::kInfer);
  for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(std::abs(p.row(r).sum() - 1.0f) < 1e-6);
  B uniform = B::Constant(3, 26, 1.0 / 26);
  for (int label : {0, 13, 25}) {
    const std::vector<int> y{label, label, label};
    CHECK(Network<double>::cross_entropy(uniform, y) == doctest::Approx(std::log(26.0)).epsilon(1e-12));
  }
}

TEST_CASE("zero input with zero dense bias gives uniform output") {
  Network<double> net(dense_toy(5, 26), 1);
  for (auto* p : net.params()) {
    if (p->name.find("bias") != std::string::npos) p->value.setZero();
  }
  const B p = net.forward(B::Zero(2, 5), Mode::kInfer);
  for (Eigen::Index k = 0; k < 26; ++k) CHECK(p(0, k) == doctest::Approx(1.0 / 26).epsilon(1e-12));
}

TEST_CASE("inference is deterministic and independent of batch composition") {
  Network<float> net(build("shallowconvnet", 4, 64), 2);
  const Batch<float> x = random_batch(6, 4 * 64, 9).cast<float>();
  Batch<float> dup(2, x.cols());
  dup.row(0) = x.row(3);
  dup.row(1) = x.row(3);
  const auto p = net.forward(dup, Mode::kInfer);
  CHECK((p.row(0) - p.row(1)).cwiseAbs().maxCoeff() == 0.0f);
  const auto full = net.forward(x, Mode::kInfer);
  CHECK((full.row(3) - p.row(0)).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("max-norm projection keeps depthwise kernels within bound") {
  Network<double> net(build("eegnet", 4, 64), 3);
  for (auto* p : net.params()) {
    if (p->max_norm) p->value *= 50.0;
  }
  net.apply_constraints();
  bool found = false;
  for (auto* p : net.params()) {
    if (!p->max_norm) continue;
    found = true;
    for (Eigen::Index s = 0; s < p->value.size(); s += p->norm_group) {
      CHECK(p->value.segment(s, p->norm_group).norm() <= 1.0 + 1e-6);
    }
  }
  CHECK(found);
}

TEST_CASE("training reaches full train accuracy on a separable toy set") {
  const auto data = toy_set(64, 4, 64, 1);
  const auto spec = build("eegnet", 4, 64);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.adam.lr = 1e-2;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.seed = 3;
  auto trained = train(spec, data, data, cfg);
  const auto ev = evaluate(*trained.net, data);
  CHECK(ev.accuracy == 1.0);
  for (auto* p : trained.net->params()) {
    if (!p->max_norm) continue;
    for (Eigen::Index s = 0; s < p->value.size(); s += p->norm_group) {
      CHECK(p->value.segment(s, p->norm_group).cast<double>().norm() <= 1.0 + 1e-6);
    }
  }
}

TEST_CASE("early stopping waits out the patience and restores the best epoch") {
  const auto data = toy_set(52, 3, 64, 2);
  const auto val = toy_set(26, 3, 64, 5);
  const auto spec = build("shallowconvnet", 3, 64);
  for (int patience : {0, 2}) {
    TrainConfig cfg;
    cfg.batch_size = 26;
    cfg.max_epochs = 60;
    cfg.patience = patience;
    cfg.seed = 1;
    auto trained = train(spec, data, val, cfg);
    const int n = static_cast<int>(trained.log.size());
    if (n < cfg.max_epochs) CHECK(n == trained.best_epoch + std::max(patience, 1) + 1);
    double best = -1;
    for (const auto& e : trained.log) best = std::max(best, e.val_accuracy);
    CHECK(trained.log[static_cast<std::size_t>(trained.best_epoch)].val_accuracy == best);
    CHECK(evaluate(*trained.net, val).accuracy == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("training is bit-identical under a fixed seed") {
  const auto data = toy_set(52, 3, 64, 2);
  TrainConfig cfg;
  cfg.batch_size = 13;
  cfg.max_epochs = 4;
  cfg.seed = 11;
  const auto spec = build("eegnet", 3, 64);
  auto a = train(spec, data, data, cfg);
  auto b = train(spec, data, data, cfg);
  CHECK(a.log == b.log);
}

TEST_CASE("evaluation accuracy, ties and confusion") {
  const std::vector<int> labels{0, 1, 2, 2};
  const auto ev = evaluate_predictions(labels, labels);
  CHECK(ev.accuracy == 1.0);
  CHECK(ev.confusion.sum() == 4);
  CHECK(ev.confusion(2, 2) == 2);
  CHECK(ev.confusion.trace() == 4);
  Eigen::RowVectorXd tie(3);
  tie << 0.4, 0.4, 0.2;
  CHECK(argmax(tie) == 0);
}

TEST_CASE("an untrained net is near chance on a balanced set") {
  const auto data = toy_set(26 * 20, 4, 64, 8);
  Network<float> net(build("eegnet", 4, 64), 17);
  const auto ev = evaluate(net, data);
  // Binomial 99.9% band around 1/26 for 520 trials, widened for the
  // correlation a fixed untrained network induces between trials.
  CHECK(ev.accuracy < 1.0 / 26 + 0.08);
  CHECK(ev.confusion.sum() == 520);
}

TEST_CASE("checkpoints round trip") {
  const auto dir = oracle::scratch("nets_ckpt");
  const auto data = toy_set(26, 3, 64, 2);
  TrainConfig cfg;
  cfg.batch_size = 13;
  cfg.max_epochs = 2;
  auto trained = train(build("eegnet", 3, 64), data, data, cfg);
  save_checkpoint(dir / "net.ckpt", trained);
  auto back = load_checkpoint(dir / "net.ckpt");
  CHECK(back.best_epoch == trained.best_epoch);
  CHECK(back.log.size() == trained.log.size());
  const auto x = to_batch(data);
  CHECK((back.net->forward(x, Mode::kInfer) - trained.net->forward(x, Mode::kInfer)).cwiseAbs().maxCoeff() == 0.0f);
}
