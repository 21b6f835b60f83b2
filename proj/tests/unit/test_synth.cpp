#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "neuroair/error.hpp"
#include "neuroair/ica.hpp"
#include "neuroair/nair_io.hpp"
#include "neuroair/synth.hpp"
#include "oracles.hpp"

using namespace neuroair;
using namespace neuroair::synth;

namespace {

SynthConfig small(std::size_t per_class = 4) {
  SynthConfig cfg;
  cfg.trials_per_class = per_class;
  return cfg;
}

double mean_power_below(const Recording& rec, const std::vector<std::string>& channels, double hz) {
  const auto& m = *rec.montage();
  double total = 0.0;
  for (const auto& name : channels) {
    const auto i = m.index_of(name).value();
    const Eigen::RowVectorXd row = rec.data().row(static_cast<Eigen::Index>(i));
    total += oracle::power_below(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                 rec.fs(), hz);
  }
  return total / static_cast<double>(channels.size());
}

/// Per-class average of one source over the signature window after each onset.
Eigen::MatrixXd class_means(const Synthetic& s, std::size_t source, std::size_t len) {
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(kNumClasses, static_cast<Eigen::Index>(len));
  std::vector<int> counts(kNumClasses, 0);
  for (const auto& a : s.recording.annotations()) {
    means.row(a.label) += s.truth.sources.row(static_cast<Eigen::Index>(source)).segment(a.sample, static_cast<Eigen::Index>(len));
    counts[static_cast<std::size_t>(a.label)]++;
  }
  for (int c = 0; c < kNumClasses; ++c) means.row(c) /= counts[static_cast<std::size_t>(c)];
  return means;
}

}  // namespace

TEST_CASE("default configuration yields 2600 annotated trials on 31 channels") {
  const SynthConfig cfg;
  const auto s = generate(cfg, 1);
  CHECK(s.recording.channels() == 31);
  CHECK(s.recording.fs() == 500.0);
  CHECK(s.recording.annotations().size() == 2600);
  std::vector<int> per(kNumClasses, 0);
  for (const auto& a : s.recording.annotations()) per[static_cast<std::size_t>(a.label)]++;
  CHECK(std::all_of(per.begin(), per.end(), [](int n) { return n == 100; }));
  CHECK(s.truth.signal_sources.size() == 5);
  CHECK(s.truth.artifact_sources.size() == 2);
}

TEST_CASE("generation is deterministic and seed dependent") {
  const auto a = generate(small(), 5);
  const auto b = generate(small(), 5);
  const auto c = generate(small(), 6);
  CHECK((a.recording.data() - b.recording.data()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.truth.mixing - c.truth.mixing).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("class signatures survive a change of seed") {
  const auto cfg = small(40);
  const auto a = generate(cfg, 1);
  const auto b = generate(cfg, 2);
  const auto len = static_cast<std::size_t>(cfg.signature.duration_s * cfg.fs);
  for (auto src : a.truth.signal_sources) {
    const Eigen::MatrixXd ma = class_means(a, src, len);
    const Eigen::MatrixXd mb = class_means(b, src, len);
    const double corr = (ma.array() * mb.array()).sum() / (ma.norm() * mb.norm());
    CHECK(corr > 0.9);
  }
}

TEST_CASE("mixing respects the condition bound") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = generate(small(), seed);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.truth.mixing);
    const auto sv = svd.singularValues();
    CHECK(sv(0) / sv(sv.size() - 1) <= 20.0 * (1 + 1e-9));
  }
}

TEST_CASE("blinks put low-frequency power on frontal channels") {
  const auto s = generate(small(), 2);
  const double frontal = mean_power_below(s.recording, {"Fp1", "Fp2"}, 3.0);
  const double parietal = mean_power_below(s.recording, {"P3", "Pz", "P4"}, 3.0);
  CHECK(frontal >= 5.0 * parietal);
}

TEST_CASE("noise-free identity-like mixtures are recovered by ICA") {
  auto cfg = small(8);
  cfg.n_neural_sources = 31;
  cfg.artifacts.blink = false;
  cfg.artifacts.muscle = false;
  cfg.noise_sd = 0.0;
  cfg.identity_like_mixing = true;
  const auto s = generate(cfg, 4);
  const auto model = ica::fit_ica(s.recording, {.seed = 1});
  CHECK(oracle::amari_index(model.unmixing * s.truth.mixing) < 0.05);
}

TEST_CASE("default configuration passes the oracle separability check") {
  const auto r = separability_check(SynthConfig{}, 1);
  CHECK(r.accuracy >= 0.99);
  CHECK(r.passed);
  CHECK_NOTHROW(require_separable(small(10), 1));
}

TEST_CASE("without signatures the oracle is at chance") {
  auto cfg = small(20);
  cfg.signature.amplitude = 0.0;
  const auto r = separability_check(cfg, 1);
  CHECK(r.accuracy < 0.1);
  CHECK_FALSE(r.passed);
  CHECK_THROWS_AS(require_separable(cfg, 1), Error);
}

TEST_CASE("doubling sensor noise lowers the margin") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = small(10);
    double prev = std::numeric_limits<double>::infinity();
    for (double sd : {0.1, 0.2, 0.4}) {
      cfg.noise_sd = sd;
      const double m = separability_check(cfg, seed).margin;
      CHECK(m < prev);
      prev = m;
    }
  }
}

TEST_CASE("generated recordings round trip bit-exactly through NAIR") {
  const auto dir = oracle::scratch("synth_nair");
  const auto s = generate(small(), 3);
  io::write_nair(dir / "d.nair", s.recording);
  const auto back = io::read_nair_recording(dir / "d.nair");
  CHECK((back.data() - s.recording.data()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.annotations() == s.recording.annotations());
  write_truth(dir / "t.json", s.truth, small());
  CHECK(std::filesystem::file_size(dir / "t.json") > 0);
}

TEST_CASE("config JSON round trips and rejects unknown keys") {
  auto cfg = small(7);
  cfg.noise_sd = 0.3;
  cfg.artifacts.muscle = false;
  const auto back = synth_config_from_json(to_json(cfg));
  CHECK(back.trials_per_class == 7);
  CHECK(back.noise_sd == 0.3);
  CHECK_FALSE(back.artifacts.muscle);
  auto j = to_json(cfg);
  j["bogus"] = 1;
  CHECK_THROWS_AS(synth_config_from_json(j), Error);
  auto bad = cfg;
  bad.signature.hi_hz = 300.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
