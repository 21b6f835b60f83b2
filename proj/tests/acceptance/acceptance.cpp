// Acceptance checks. Prints one PASS/FAIL line per criterion; pass criterion
// numbers as arguments to run a subset.

#include "neuroair/error.hpp"
#include "neuroair/eval.hpp"
#include "neuroair/filters.hpp"
#include "neuroair/harmonics.hpp"
#include "neuroair/ica.hpp"
#include "neuroair/nair_io.hpp"
#include "neuroair/nets.hpp"
#include "neuroair/pipeline.hpp"
#include "neuroair/source.hpp"
#include "neuroair/synth.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

using namespace neuroair;
namespace fs = std::filesystem;

namespace {

// Tolerances and targets.
constexpr double kSphereTol = 1e-8;
constexpr double kHeadPaperTol = 3e-3;
constexpr double kHeadExactTol = 1e-8;
constexpr double kHarmonicSeconds = 10.0;
constexpr double kAmariMax = 0.05;
constexpr double kResidualMax = 1e-6;
constexpr double kIcaSeconds = 120.0;
constexpr double kBlinkReduction = 0.90;
constexpr double kNonFrontalChange = 0.05;
constexpr double kFrontopolar = 0.9;  // anterior direction cosine of Fp1/Fp2
constexpr double kStopbandDb = 50.0;
constexpr double kRippleDb = 0.2;
constexpr double kGradTol = 1e-4;
constexpr double kSeparability = 0.99;
constexpr double kBenchAccuracy = 0.90;
constexpr double kBenchSeconds = 1800.0;
constexpr double kTtestP = 0.0371;
constexpr double kTtestTol = 1e-4;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [miss]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1 --------------------------------------------------------------------------

template <typename H>
double gram_error(H harmonic, int max_n, double theta_max) {
  std::vector<std::pair<int, int>> nm;
  for (int n = 0; n <= max_n; ++n) {
    for (int m = -n; m <= n; ++m) nm.emplace_back(n, m);
  }
  const auto k = nm.size();
  Eigen::MatrixXd gram(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double v = oracle::sphere_integral(
          [&](double th, double ph) {
            return harmonic(nm[i].first, nm[i].second, th, ph) * harmonic(nm[j].first, nm[j].second, th, ph);
          },
          theta_max);
      gram(i, j) = gram(j, i) = v;
    }
  }
  return (gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
}

Outcome harmonic_correctness() {
  using namespace harmonics;
  const auto t0 = std::chrono::steady_clock::now();
  const double cap = 2.0 * std::numbers::pi / 3.0;
  const double sphere = gram_error(spherical_harmonic, 4, std::numbers::pi);
  const double paper = gram_error(
      [](int n, int m, double t, double p) { return head_harmonic(n, m, t, p, ShiftConstants::paper()); }, 4, cap);
  const double exact = gram_error(
      [](int n, int m, double t, double p) { return head_harmonic(n, m, t, p, ShiftConstants::exact()); }, 4, cap);
  const double secs = seconds_since(t0);
  Outcome o;
  o.require(sphere < kSphereTol, "sphere n<=4 max|G-I|=" + fmt("%.2e", sphere));
  o.require(paper < kHeadPaperTol, "head cap 1.33/0.33 max|G-I|=" + fmt("%.2e", paper));
  o.require(exact < kHeadExactTol, "head cap 4/3,1/3 max|G-I|=" + fmt("%.2e", exact));
  o.require(secs < kHarmonicSeconds, "time " + fmt("%.2f s", secs));
  return o;
}

// 2 --------------------------------------------------------------------------

Outcome dimensionality() {
  using namespace harmonics;
  const auto montage = standard_montage_31();
  EpochSet trial(1, 31, 1500, {0}, 500.0, {0.0, 3.0}, montage.names());
  trial.trial(0) = oracle::gaussian_matrix(31, 1500, 1);
  Outcome o;
  const std::map<int, std::size_t> expect{{4, 25}, {3, 16}, {2, 9}};
  for (auto kind : {BasisKind::kSpherical, BasisKind::kHead}) {
    const char* tag = kind == BasisKind::kSpherical ? "SHD" : "HHD";
    for (const auto& [n, rows] : expect) {
      const auto basis = build_basis(kind, n, montage);
      const auto c = decompose(trial, basis, SamplingWeights::identity(31));
      o.require(c.channels() == rows && c.samples() == 1500,
                std::string(tag) + " N=" + std::to_string(n) + " -> " + std::to_string(c.channels()) + "x" +
                    std::to_string(c.samples()));
    }
  }
  return o;
}

// 3 --------------------------------------------------------------------------

Outcome ica_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto montage = standard_montage_31();
  double worst_amari = 0.0;
  double worst_residual = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Eigen::MatrixXd s = oracle::laplace_sources(31, 30000, 100 + seed);
    const Eigen::MatrixXd a = oracle::gaussian_matrix(31, 31, 200 + seed);
    const Recording rec(a * s, 500.0, montage);
    const auto model = ica::fit_ica(rec, {.seed = seed});
    worst_amari = std::max(worst_amari, oracle::amari_index(model.unmixing * a));
    const auto back = ica::remove_artifacts(model, rec, std::vector<bool>(model.components(), false));
    const double res = (back.data() - rec.data()).cwiseAbs().maxCoeff() / rec.data().cwiseAbs().maxCoeff();
    worst_residual = std::max(worst_residual, res);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.require(worst_amari < kAmariMax, "worst Amari over 5 seeds " + fmt("%.4f", worst_amari));
  o.require(worst_residual < kResidualMax, "worst relative residual " + fmt("%.2e", worst_residual));
  o.require(secs < kIcaSeconds, "time " + fmt("%.1f s", secs));
  return o;
}

// 4 --------------------------------------------------------------------------

double correlation(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const Eigen::RowVectorXd x = a.array() - a.mean();
  const Eigen::RowVectorXd y = b.array() - b.mean();
  return x.dot(y) / (x.norm() * y.norm());
}

Outcome artifact_removal() {
  synth::SynthConfig cfg;
  cfg.trials_per_class = 4;
  const auto data = synth::generate(cfg, 11);
  const auto broadband = pipeline::preprocess(data.recording);
  const auto stage = pipeline::run_ica(broadband, {}, 11);
  const auto comps = ica::components(stage.model, broadband);

  const Eigen::RowVectorXd blink = data.truth.sources.row(static_cast<Eigen::Index>(*data.truth.blink_source));
  std::size_t best = 0;
  double best_corr = 0.0;
  for (std::size_t k = 0; k < stage.model.components(); ++k) {
    const double c = std::abs(correlation(comps.data().row(static_cast<Eigen::Index>(k)), blink));
    if (c > best_corr) {
      best_corr = c;
      best = k;
    }
  }
  std::vector<bool> only_blink(stage.model.components(), false);
  only_blink[best] = true;
  const auto cleaned = ica::remove_artifacts(stage.model, broadband, only_blink);

  const auto& montage = *broadband.montage();
  const auto frontal = montage.frontal_channels(kFrontopolar);
  std::set<std::size_t> front(frontal.begin(), frontal.end());
  double low_before = 0.0;
  double low_after = 0.0;
  for (auto ch : frontal) {
    const Eigen::RowVectorXd b = broadband.data().row(static_cast<Eigen::Index>(ch));
    const Eigen::RowVectorXd a = cleaned.data().row(static_cast<Eigen::Index>(ch));
    low_before += oracle::power_below({b.data(), static_cast<std::size_t>(b.size())}, broadband.fs(), 3.0);
    low_after += oracle::power_below({a.data(), static_cast<std::size_t>(a.size())}, broadband.fs(), 3.0);
  }
  double rest_before = 0.0;
  double rest_after = 0.0;
  for (std::size_t ch = 0; ch < broadband.channels(); ++ch) {
    if (front.count(ch)) continue;
    const auto r = static_cast<Eigen::Index>(ch);
    rest_before += (broadband.data().row(r).array() - broadband.data().row(r).mean()).square().mean();
    rest_after += (cleaned.data().row(r).array() - cleaned.data().row(r).mean()).square().mean();
  }
  const double reduction = 1.0 - low_after / low_before;
  const double change = std::abs(rest_after / rest_before - 1.0);
  Outcome o;
  o.require(stage.flags[best], "blink component IC" + std::to_string(best + 1) + " flagged (|r|=" +
                                   fmt("%.3f", best_corr) + ")");
  o.require(reduction >= kBlinkReduction, "frontal <3 Hz power reduced " + fmt("%.1f%%", 100 * reduction));
  o.require(change < kNonFrontalChange, "non-frontal broadband power change " + fmt("%.2f%%", 100 * change));
  return o;
}

// 5 --------------------------------------------------------------------------

/// Zero-phase amplitude of a symmetric kernel: h[M] + 2 sum h[M+k] cos(w k).
double amplitude(const std::vector<double>& taps, double f, double fs) {
  const auto mid = taps.size() / 2;
  const double w = 2.0 * std::numbers::pi * f / fs;
  double a = taps[mid];
  for (std::size_t k = 1; k <= mid; ++k) a += 2.0 * taps[mid + k] * std::cos(w * static_cast<double>(k));
  return a;
}

Outcome filter_quality() {
  using namespace filters;
  const double fs = 500.0;
  const double step = 0.02;
  Outcome o;
  const Eigen::RowVectorXd noise = oracle::gaussian_matrix(1, 20000, 5).row(0);
  for (const auto& band : band_registry()) {
    const auto f = design_fir(band, fs);
    const double tbw = band.transition_bw;
    std::vector<std::pair<double, double>> pass;
    std::vector<std::pair<double, double>> stop;
    switch (band.kind) {
      case BandKind::kLowpass:
        pass.emplace_back(0.0, band.edges[0]);
        stop.emplace_back(band.edges[0] + tbw, fs / 2);
        break;
      case BandKind::kHighpass:
        pass.emplace_back(band.edges[0], fs / 2);
        stop.emplace_back(0.0, band.edges[0] - tbw);
        break;
      case BandKind::kBandpass:
        pass.emplace_back(band.edges[0], band.edges[1]);
        stop.emplace_back(0.0, band.edges[0] - tbw);
        stop.emplace_back(band.edges[1] + tbw, fs / 2);
        break;
    }
    double ripple = 0.0;
    for (const auto& [lo, hi] : pass) {
      for (double hz = lo; hz <= hi + 1e-9; hz += step) {
        ripple = std::max(ripple, std::abs(oracle::db(std::abs(amplitude(f.taps, hz, fs)))));
      }
    }
    double atten = std::numeric_limits<double>::infinity();
    for (const auto& [lo, hi] : stop) {
      for (double hz = lo; hz <= hi + 1e-9; hz += step) {
        atten = std::min(atten, -oracle::db(std::abs(amplitude(f.taps, hz, fs))));
      }
    }
    // Band-limited input, filtered again: the cross-correlation must peak at lag 0.
    const auto x = filter_zero_phase(std::span<const double>(noise.data(), static_cast<std::size_t>(noise.size())), f);
    const auto y = filter_zero_phase(std::span<const double>(x), f);
    int best_lag = 0;
    double best = -std::numeric_limits<double>::infinity();
    const auto n = static_cast<int>(x.size());
    for (int lag = -50; lag <= 50; ++lag) {
      double c = 0.0;
      for (int t = std::max(0, -lag); t < std::min(n, n - lag); ++t) c += x[t] * y[t + lag];
      if (c > best) {
        best = c;
        best_lag = lag;
      }
    }
    o.require(atten >= kStopbandDb && ripple < kRippleDb && best_lag == 0,
              band.name + " stop " + fmt("%.1f dB", atten) + " ripple " + fmt("%.3f dB", ripple) + " lag " +
                  std::to_string(best_lag));
  }
  return o;
}

// 6 --------------------------------------------------------------------------

Outcome network_engine() {
  using namespace nets;
  using testing::B;
  const Shape one{1, 5, 7};
  const Shape two{2, 5, 7};
  const B x1 = testing::random_batch(3, 35, 1);
  const B x2 = testing::random_batch(3, 70, 2);
  struct Case {
    const char* name;
    LayerSpec spec;
    Shape in;
    B x;
  };
  const std::vector<Case> cases{
      {"conv2d", LayerSpec::conv2d(2, 3, 3), one, x1},
      {"conv2d-same", LayerSpec::conv2d(3, 4, 2, Padding::kSame, false), two, x2},
      {"depthwise", LayerSpec::depthwise(5, 1, 2, Padding::kValid, false, 1.0), two, x2},
      {"separable", LayerSpec::separable(1, 3, 3, Padding::kSame), two, x2},
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
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    const auto g = testing::check_layer(c.spec, c.in, c.x);
    const double e = std::max(g.input, g.params);
    if (e >= worst) {
      worst = e;
      worst_name = c.name;
    }
  }
  Outcome o;
  o.require(worst < kGradTol, std::to_string(cases.size()) + " layer kinds, worst rel err " + fmt("%.1e", worst) +
                                  " (" + worst_name + ")");

  const std::size_t e = flatten_size(build("eegnet", 31, 1500));
  const std::size_t d = flatten_size(build("deepconvnet", 31, 1500));
  const std::size_t s = flatten_size(build("shallowconvnet", 31, 1500));
  o.require(e == 736 && d == 18000 && s == 8320,
            "flatten " + std::to_string(e) + "/" + std::to_string(d) + "/" + std::to_string(s));

  const auto toy = testing::toy_set(64, 4, 64, 1);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.adam.lr = 1e-2;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.seed = 3;
  auto trained = train(build("eegnet", 4, 64), toy, toy, cfg);
  int first_full = -1;
  for (const auto& l : trained.log) {
    if (l.val_accuracy == 1.0) {
      first_full = l.epoch;
      break;
    }
  }
  const double acc = evaluate(*trained.net, toy).accuracy;
  o.require(acc == 1.0 && first_full >= 0,
            "toy train accuracy " + fmt("%.3f", acc) + " first reached at epoch " + std::to_string(first_full));
  return o;
}

// 7 --------------------------------------------------------------------------

Outcome sloreta_localization() {
  const auto lf = source::synth_leadfield(31, 300, 7);
  const auto op = source::sloreta_kernel(lf, source::default_lambda(lf));
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> pick(0, 299);
  const Eigen::RowVectorXd wave = oracle::gaussian_matrix(1, 100, 3).row(0);
  int hits = 0;
  for (int i = 0; i < 20; ++i) {
    const auto j = pick(rng);
    EpochSet e(1, 31, 100, {0}, 500.0, {0.0, 0.2}, lf.channel_names);
    e.trial(0) = lf.gain.col(static_cast<Eigen::Index>(j)) * wave;
    const Matrix s = source::apply_inverse(op, e).trial(0);
    Eigen::Index peak = 0;
    s.rowwise().squaredNorm().maxCoeff(&peak);
    hits += static_cast<std::size_t>(peak) == j;
  }
  Outcome o;
  o.require(hits == 20, std::to_string(hits) + "/20 single sources localized exactly");
  return o;
}

// 8 --------------------------------------------------------------------------

Outcome benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = oracle::scratch("acceptance_benchmark");
  const synth::SynthConfig scfg;
  const auto data = synth::generate(scfg, 1);
  const auto sep = synth::separability_check(data, scfg);
  io::write_nair(dir / "s01.nair", data.recording);

  pipeline::PipelineConfig cfg;
  cfg.subjects = {{"s01", {dir / "s01.nair"}}};
  cfg.features = {"ica"};
  cfg.bands = {"delta_theta", "gamma"};
  cfg.models = {"eegnet"};
  cfg.window = {0.0, 0.5};
  cfg.ica.fit_stride = 2;
  cfg.train.max_epochs = 40;
  cfg.train.patience = 8;
  cfg.folds = 10;
  cfg.out_dir = dir / "out";
  cfg.seed = 7;
  cfg.persist_intermediates = false;
  const auto result = pipeline::run_pipeline(cfg);
  std::map<std::string, std::vector<double>> by_band;
  for (const auto& r : result.records) {
    if (r.status == eval::Status::kOk) by_band[r.band].push_back(r.accuracy);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  const double dt = mean(by_band["delta_theta"]);
  const double gm = mean(by_band["gamma"]);
  const double secs = seconds_since(t0);
  Outcome o;
  o.require(sep.accuracy >= kSeparability, "oracle separability " + fmt("%.4f", sep.accuracy));
  o.require(by_band["delta_theta"].size() == 10 && dt >= kBenchAccuracy,
            "ICA+EEGNet delta_theta mean 10-fold " + fmt("%.4f", dt));
  o.require(dt > gm, "gamma " + fmt("%.4f", gm));
  o.require(secs < kBenchSeconds, "time " + fmt("%.0f s", secs) + " at T=250");
  return o;
}

// 9 --------------------------------------------------------------------------

Outcome statistics() {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> zero{0.0, 0.0, 0.0};
  const auto t = eval::paired_t_one_tailed(a, zero);
  Outcome o;
  o.require(std::abs(t.p - kTtestP) <= kTtestTol, "d=[1,2,3] p=" + fmt("%.5f", t.p));
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Eigen::MatrixXd m = oracle::gaussian_matrix(2, 10, seed);
    const std::vector<double> x(m.row(0).data(), m.row(0).data() + 10);
    std::vector<double> y(10);
    for (int i = 0; i < 10; ++i) y[static_cast<std::size_t>(i)] = m(1, i);
    const double ab = eval::paired_t_one_tailed(x, y).p;
    const double ba = eval::paired_t_one_tailed(y, x).p;
    worst = std::max(worst, std::abs(ab + ba - 1.0));
  }
  o.require(worst < 1e-12, "max |p(a,b) + p(b,a) - 1| over 50 pairs " + fmt("%.1e", worst));
  return o;
}

// 10 -------------------------------------------------------------------------

Outcome fold_invariants() {
  std::vector<int> labels;
  for (int t = 0; t < 100; ++t) {
    for (int c = 0; c < kNumClasses; ++c) labels.push_back(c);
  }
  std::mt19937_64 shuffle(1);
  std::shuffle(labels.begin(), labels.end(), shuffle);
  int bad = 0;
  std::mt19937_64 seeds(2024);
  for (int run = 0; run < 100; ++run) {
    const auto plan = eval::make_folds(labels, 10, seeds());
    std::vector<int> tested(labels.size(), 0);
    bool ok = plan.folds.size() == 10;
    for (const auto& f : plan.folds) {
      std::vector<int> tr(kNumClasses, 0), va(kNumClasses, 0), te(kNumClasses, 0);
      std::set<std::size_t> all;
      for (auto i : f.train) tr[static_cast<std::size_t>(labels[i])]++, all.insert(i);
      for (auto i : f.val) va[static_cast<std::size_t>(labels[i])]++, all.insert(i);
      for (auto i : f.test) te[static_cast<std::size_t>(labels[i])]++, all.insert(i), tested[i]++;
      ok = ok && all.size() == labels.size();
      for (int c = 0; c < kNumClasses; ++c) {
        ok = ok && tr[static_cast<std::size_t>(c)] == 72 && va[static_cast<std::size_t>(c)] == 18 &&
             te[static_cast<std::size_t>(c)] == 10;
      }
    }
    ok = ok && std::all_of(tested.begin(), tested.end(), [](int n) { return n == 1; });
    bad += !ok;
  }
  Outcome o;
  o.require(bad == 0, std::to_string(100 - bad) + "/100 seeds: every trial tested once, 72/18/10 per class");
  return o;
}

// 11 -------------------------------------------------------------------------

std::map<std::string, std::string> manifest_hashes(const fs::path& manifest) {
  const auto doc = nlohmann::json::parse(slurp(manifest));
  std::map<std::string, std::string> out;
  for (const auto& s : doc["stages"]) {
    for (const auto& a : s["artifacts"]) {
      out[s["stage"].get<std::string>() + "/" + a["name"].get<std::string>()] = a["sha256"].get<std::string>();
    }
  }
  return out;
}

Outcome reproducibility() {
  const auto dir = oracle::scratch("acceptance_repro");
  synth::SynthConfig scfg;
  scfg.trials_per_class = 10;
  io::write_nair(dir / "s1.nair", synth::generate(scfg, 3).recording);
  const auto lf = source::synth_leadfield(31, 300, 3);
  source::write_leadfield(dir / "lf.bin", lf);
  source::write_atlas(dir / "atlas.txt", source::synth_atlas(lf, 62, 3));

  auto run = [&](const std::string& name) {
    pipeline::PipelineConfig cfg;
    cfg.subjects = {{"s1", {dir / "s1.nair"}}};
    cfg.features = {"eeg", "ica", "scout", "shd", "hhd"};
    cfg.order = 2;
    cfg.leadfield = dir / "lf.bin";
    cfg.atlas = dir / "atlas.txt";
    cfg.bands = {"delta_theta"};
    cfg.models = {"eegnet"};
    cfg.window = {0.0, 0.5};
    cfg.ica.fit_stride = 2;
    cfg.train.max_epochs = 2;
    cfg.train.batch_size = 64;
    cfg.out_dir = dir / name;
    cfg.seed = 99;
    return pipeline::run_pipeline(cfg);
  };
  const auto a = run("a");
  const auto b = run("b");
  const auto csv_a = slurp(a.results_csv);
  const auto csv_b = slurp(b.results_csv);
  const auto ha = manifest_hashes(a.manifest);
  const auto hb = manifest_hashes(b.manifest);
  Outcome o;
  o.require(!csv_a.empty() && csv_a == csv_b, "results CSV identical (" + std::to_string(a.records.size()) +
                                                  " records)");
  o.require(!ha.empty() && ha == hb, std::to_string(ha.size()) + " manifest hashes identical");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"harmonic orthonormality", harmonic_correctness},
      {"harmonic dimensionality", dimensionality},
      {"ICA recovery", ica_recovery},
      {"blink removal", artifact_removal},
      {"filter response", filter_quality},
      {"network engine", network_engine},
      {"sLORETA localization", sloreta_localization},
      {"synthetic benchmark", benchmark},
      {"paired t-test", statistics},
      {"fold protocol", fold_invariants},
      {"reproducibility", reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("criterion %2d %s  %s: %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
