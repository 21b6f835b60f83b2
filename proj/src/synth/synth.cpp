#include "neuroair/synth.hpp"

#include "neuroair/error.hpp"
#include "neuroair/filters.hpp"
#include "neuroair/seed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace neuroair::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = n > 1 ? 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1)) : 1.0;
  }
  return w;
}

// signatures[class][signal source] = waveform over the signature window.
std::vector<std::vector<std::vector<double>>> class_signatures(const SynthConfig& cfg) {
  const auto& s = cfg.signature;
  const auto len = static_cast<std::size_t>(std::llround(s.duration_s * cfg.fs));
  const auto window = hann(len);
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> freq(s.lo_hz, s.hi_hz);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::uniform_real_distribution<double> gain(0.5, 1.0);
  std::vector<std::vector<std::vector<double>>> out(static_cast<std::size_t>(cfg.n_classes));
  for (auto& per_class : out) {
    per_class.resize(s.sources);
    for (auto& wave : per_class) {
      wave.assign(len, 0.0);
      for (int k = 0; k < s.tones; ++k) {
        const double f = freq(rng);
        const double ph = phase(rng);
        const double g = gain(rng);
        for (std::size_t i = 0; i < len; ++i) {
          wave[i] += g * std::sin(kTwoPi * f * static_cast<double>(i) / cfg.fs + ph);
        }
      }
      double ss = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        wave[i] *= window[i];
        ss += wave[i] * wave[i];
      }
      const double rms = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(len, 1)));
      for (auto& v : wave) v = rms > 0.0 ? v * s.amplitude / rms : 0.0;
    }
  }
  return out;
}

// Event onsets from a Poisson process at `rate` over [0, n).
std::vector<std::size_t> poisson_onsets(std::mt19937_64& rng, double rate, double fs, std::size_t n) {
  std::vector<std::size_t> out;
  if (rate <= 0.0) return out;
  std::exponential_distribution<double> gap(rate);
  double t = gap(rng);
  while (t * fs < static_cast<double>(n)) {
    out.push_back(static_cast<std::size_t>(t * fs));
    t += gap(rng);
  }
  return out;
}

Montage synth_montage(std::size_t channels) {
  const Montage full = standard_montage_31();
  if (channels == full.size()) return full;
  std::vector<std::string> names(full.names().begin(), full.names().begin() + static_cast<std::ptrdiff_t>(channels));
  std::vector<ElectrodePosition> pos(full.positions().begin(),
                                     full.positions().begin() + static_cast<std::ptrdiff_t>(channels));
  return Montage(std::move(names), std::move(pos));
}

Matrix make_mixing(const SynthConfig& cfg, const Montage& montage, std::uint64_t seed,
                   std::optional<std::size_t> blink, std::optional<std::size_t> muscle) {
  const std::size_t I = cfg.channels;
  const std::size_t J = cfg.n_sources();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix A(I, J);
  if (cfg.identity_like_mixing) {
    A.setIdentity();
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] += 0.1 * normal(rng);
  } else {
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = normal(rng);
    for (std::size_t j = 0; j < J; ++j) A.col(static_cast<Eigen::Index>(j)).normalize();
  }
  if (blink) {
    for (std::size_t i = 0; i < I; ++i) {
      const double anterior = montage.unit_vector(i).x();
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(*blink)) = std::exp(6.0 * (anterior - 1.0));
    }
    A.col(static_cast<Eigen::Index>(*blink)).normalize();
  }
  if (muscle) {
    for (std::size_t i = 0; i < I; ++i) {
      const Eigen::Vector3d u = montage.unit_vector(i);
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(*muscle)) =
          std::exp(4.0 * (std::abs(u.y()) - 1.0)) * (1.0 + 0.2 * normal(rng));
    }
    A.col(static_cast<Eigen::Index>(*muscle)).normalize();
  }

  // Lift small singular values to s_max / bound.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s = svd.singularValues();
  const double floor = s(0) / cfg.condition_bound;
  for (Eigen::Index k = 0; k < s.size(); ++k) s(k) = std::max(s(k), floor);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace

std::size_t SynthConfig::n_sources() const {
  return n_neural_sources + (artifacts.blink ? 1 : 0) + (artifacts.muscle ? 1 : 0);
}

void SynthConfig::validate() const {
  require(channels >= 2 && channels <= 31, ErrorCode::kConfig, "synth: channels must lie in [2, 31]");
  require(fs > 0.0, ErrorCode::kConfig, "synth: fs must be positive");
  require(n_classes >= 1, ErrorCode::kConfig, "synth: n_classes must be positive");
  require(trials_per_class >= 1, ErrorCode::kConfig, "synth: trials_per_class must be positive");
  require(n_neural_sources >= 1, ErrorCode::kConfig, "synth: need at least one neural source");
  require(n_sources() <= channels, ErrorCode::kConfig,
          "synth: " + std::to_string(n_sources()) + " sources exceed " + std::to_string(channels) + " channels");
  require(signature.sources <= n_neural_sources, ErrorCode::kConfig,
          "synth: more signature sources than neural sources");
  require(signature.lo_hz >= 0.5 && signature.hi_hz < fs / 2.0 && signature.lo_hz <= signature.hi_hz,
          ErrorCode::kConfig, "synth: signature band must lie inside [0.5, fs/2)");
  require(signature.tones >= 1 && signature.amplitude >= 0.0 && signature.duration_s > 0.0, ErrorCode::kConfig,
          "synth: invalid signature spec");
  require(trial_period_s > 0.0 && lead_in_s >= 0.0 && tail_s >= 0.0, ErrorCode::kConfig,
          "synth: trial timing must be positive");
  require(noise_sd >= 0.0, ErrorCode::kConfig, "synth: noise_sd must be >= 0");
  require(envelope_depth >= 0.0 && envelope_s > 0.0, ErrorCode::kConfig, "synth: invalid neural envelope");
  require(condition_bound >= 1.0, ErrorCode::kConfig, "synth: condition_bound must be >= 1");
  require(!identity_like_mixing || n_sources() == channels, ErrorCode::kConfig,
          "synth: identity-like mixing needs as many sources as channels");
  if (artifacts.muscle) {
    require(artifacts.muscle_lo_hz > 0.0 && artifacts.muscle_hi_hz + 2.5 < fs / 2.0 &&
                artifacts.muscle_lo_hz < artifacts.muscle_hi_hz,
            ErrorCode::kConfig, "synth: muscle band must lie inside (0, fs/2)");
  }
}

nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json j;
  j["channels"] = c.channels;
  j["fs"] = c.fs;
  j["n_classes"] = c.n_classes;
  j["trials_per_class"] = c.trials_per_class;
  j["n_neural_sources"] = c.n_neural_sources;
  j["envelope_depth"] = c.envelope_depth;
  j["envelope_s"] = c.envelope_s;
  j["trial_period_s"] = c.trial_period_s;
  j["lead_in_s"] = c.lead_in_s;
  j["tail_s"] = c.tail_s;
  j["signature"] = {{"sources", c.signature.sources},   {"lo_hz", c.signature.lo_hz},
                    {"hi_hz", c.signature.hi_hz},       {"tones", c.signature.tones},
                    {"amplitude", c.signature.amplitude}, {"duration_s", c.signature.duration_s},
                    {"seed", c.signature.seed}};
  const auto& a = c.artifacts;
  j["artifacts"] = {{"blink", a.blink},
                    {"blink_amplitude", a.blink_amplitude},
                    {"blink_rate_hz", a.blink_rate_hz},
                    {"blink_width_s", a.blink_width_s},
                    {"muscle", a.muscle},
                    {"muscle_amplitude", a.muscle_amplitude},
                    {"muscle_rate_hz", a.muscle_rate_hz},
                    {"muscle_burst_s", a.muscle_burst_s},
                    {"muscle_lo_hz", a.muscle_lo_hz},
                    {"muscle_hi_hz", a.muscle_hi_hz}};
  j["noise_sd"] = c.noise_sd;
  j["mixing_seed"] = c.mixing_seed ? nlohmann::json(*c.mixing_seed) : nlohmann::json(nullptr);
  j["condition_bound"] = c.condition_bound;
  j["identity_like_mixing"] = c.identity_like_mixing;
  return j;
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, "synth config " + path + key + ": " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, const nlohmann::json& known, const std::string& path) {
  require(j.is_object(), ErrorCode::kConfig, "synth config " + path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    require(known.contains(key), ErrorCode::kConfig, "synth config " + path + key + ": unknown key");
  }
}

}  // namespace

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  const nlohmann::json known = to_json(c);
  reject_unknown(j, known, "");
  take(j, "", "channels", c.channels);
  take(j, "", "fs", c.fs);
  take(j, "", "n_classes", c.n_classes);
  take(j, "", "trials_per_class", c.trials_per_class);
  take(j, "", "n_neural_sources", c.n_neural_sources);
  take(j, "", "envelope_depth", c.envelope_depth);
  take(j, "", "envelope_s", c.envelope_s);
  take(j, "", "trial_period_s", c.trial_period_s);
  take(j, "", "lead_in_s", c.lead_in_s);
  take(j, "", "tail_s", c.tail_s);
  if (j.contains("signature")) {
    const auto& s = j["signature"];
    reject_unknown(s, known["signature"], "signature.");
    take(s, "signature.", "sources", c.signature.sources);
    take(s, "signature.", "lo_hz", c.signature.lo_hz);
    take(s, "signature.", "hi_hz", c.signature.hi_hz);
    take(s, "signature.", "tones", c.signature.tones);
    take(s, "signature.", "amplitude", c.signature.amplitude);
    take(s, "signature.", "duration_s", c.signature.duration_s);
    take(s, "signature.", "seed", c.signature.seed);
  }
  if (j.contains("artifacts")) {
    const auto& a = j["artifacts"];
    auto& o = c.artifacts;
    reject_unknown(a, known["artifacts"], "artifacts.");
    take(a, "artifacts.", "blink", o.blink);
    take(a, "artifacts.", "blink_amplitude", o.blink_amplitude);
    take(a, "artifacts.", "blink_rate_hz", o.blink_rate_hz);
    take(a, "artifacts.", "blink_width_s", o.blink_width_s);
    take(a, "artifacts.", "muscle", o.muscle);
    take(a, "artifacts.", "muscle_amplitude", o.muscle_amplitude);
    take(a, "artifacts.", "muscle_rate_hz", o.muscle_rate_hz);
    take(a, "artifacts.", "muscle_burst_s", o.muscle_burst_s);
    take(a, "artifacts.", "muscle_lo_hz", o.muscle_lo_hz);
    take(a, "artifacts.", "muscle_hi_hz", o.muscle_hi_hz);
  }
  take(j, "", "noise_sd", c.noise_sd);
  if (j.contains("mixing_seed") && !j["mixing_seed"].is_null()) {
    std::uint64_t s = 0;
    take(j, "", "mixing_seed", s);
    c.mixing_seed = s;
  }
  take(j, "", "condition_bound", c.condition_bound);
  take(j, "", "identity_like_mixing", c.identity_like_mixing);
  c.validate();
  return c;
}

Synthetic generate(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Montage montage = synth_montage(cfg.channels);
  const auto period = static_cast<std::size_t>(std::llround(cfg.trial_period_s * cfg.fs));
  const auto lead = static_cast<std::size_t>(std::llround(cfg.lead_in_s * cfg.fs));
  const auto tail = static_cast<std::size_t>(std::llround(cfg.tail_s * cfg.fs));
  const std::size_t n_trials = cfg.n_trials();
  const std::size_t N = lead + n_trials * period + tail;
  const std::size_t J = cfg.n_sources();

  GroundTruth truth;
  truth.seed = seed;
  for (std::size_t j = 0; j < cfg.n_neural_sources; ++j) {
    truth.source_names.push_back("N" + std::to_string(j + 1));
  }
  for (std::size_t j = 0; j < cfg.signature.sources; ++j) truth.signal_sources.push_back(j);
  std::size_t next = cfg.n_neural_sources;
  if (cfg.artifacts.blink) {
    truth.blink_source = next++;
    truth.artifact_sources.push_back(*truth.blink_source);
    truth.source_names.push_back("blink");
  }
  if (cfg.artifacts.muscle) {
    truth.muscle_source = next++;
    truth.artifact_sources.push_back(*truth.muscle_source);
    truth.source_names.push_back("muscle");
  }

  // Trial order: each class trials_per_class times, shuffled.
  std::vector<int> order(n_trials);
  for (std::size_t t = 0; t < n_trials; ++t) order[t] = static_cast<int>(t % static_cast<std::size_t>(cfg.n_classes));
  std::mt19937_64 order_rng(derive_seed(seed, "trial-order"));
  std::shuffle(order.begin(), order.end(), order_rng);
  std::vector<Annotation> annotations(n_trials);
  for (std::size_t t = 0; t < n_trials; ++t) {
    annotations[t] = {static_cast<std::int64_t>(lead + t * period), order[t]};
  }

  Matrix& S = truth.sources;
  S.resize(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(N));
  for (std::size_t j = 0; j < cfg.n_neural_sources; ++j) {
    std::mt19937_64 rng(derive_seed(seed, "neural:" + std::to_string(j)));
    // Laplace with unit variance, then the envelope normalized so that
    // E[envelope^2] = 1.
    std::exponential_distribution<double> expo(std::sqrt(2.0));
    std::bernoulli_distribution sign;
    std::normal_distribution<double> normal;
    const double rho = std::exp(-1.0 / (cfg.envelope_s * cfg.fs));
    const double innov = std::sqrt(1.0 - rho * rho);
    const double d = cfg.envelope_depth;
    const double norm = std::exp(-d * d);
    double g = normal(rng);
    auto row = S.row(static_cast<Eigen::Index>(j));
    for (std::size_t n = 0; n < N; ++n) {
      const double e = expo(rng);
      g = rho * g + innov * normal(rng);
      row(static_cast<Eigen::Index>(n)) = (sign(rng) ? e : -e) * std::exp(d * g) * norm;
    }
  }
  if (cfg.signature.amplitude > 0.0) {
    const auto signatures = class_signatures(cfg);
    for (std::size_t t = 0; t < n_trials; ++t) {
      const auto& sig = signatures[static_cast<std::size_t>(order[t])];
      const auto onset = static_cast<std::size_t>(annotations[t].sample);
      for (std::size_t k = 0; k < sig.size(); ++k) {
        for (std::size_t i = 0; i < sig[k].size() && onset + i < N; ++i) {
          S(static_cast<Eigen::Index>(truth.signal_sources[k]), static_cast<Eigen::Index>(onset + i)) += sig[k][i];
        }
      }
    }
  }
  const auto& art = cfg.artifacts;
  if (truth.blink_source) {
    std::mt19937_64 rng(derive_seed(seed, "blink"));
    auto row = S.row(static_cast<Eigen::Index>(*truth.blink_source));
    row.setZero();
    const auto width = static_cast<std::size_t>(std::llround(art.blink_width_s * cfg.fs));
    const auto shape = hann(width);
    std::uniform_real_distribution<double> gain(0.7, 1.3);
    for (std::size_t on : poisson_onsets(rng, art.blink_rate_hz, cfg.fs, N)) {
      const double g = art.blink_amplitude * gain(rng);
      for (std::size_t i = 0; i < width && on + i < N; ++i) row(static_cast<Eigen::Index>(on + i)) += g * shape[i];
    }
  }
  if (truth.muscle_source) {
    std::mt19937_64 rng(derive_seed(seed, "muscle"));
    std::normal_distribution<double> normal;
    std::vector<double> noise(N);
    for (auto& v : noise) v = normal(rng);
    const filters::BandSpec band{"muscle", filters::BandKind::kBandpass, {art.muscle_lo_hz, art.muscle_hi_hz}, 5.0};
    auto hf = filters::filter_zero_phase(noise, filters::design_fir(band, cfg.fs));
    std::vector<double> envelope(N, 0.0);
    const auto width = static_cast<std::size_t>(std::llround(art.muscle_burst_s * cfg.fs));
    const auto shape = hann(width);
    for (std::size_t on : poisson_onsets(rng, art.muscle_rate_hz, cfg.fs, N)) {
      for (std::size_t i = 0; i < width && on + i < N; ++i) envelope[on + i] += shape[i];
    }
    auto row = S.row(static_cast<Eigen::Index>(*truth.muscle_source));
    for (std::size_t n = 0; n < N; ++n) {
      row(static_cast<Eigen::Index>(n)) = art.muscle_amplitude * envelope[n] * hf[n];
    }
  }

  const std::uint64_t mix_seed = cfg.mixing_seed ? *cfg.mixing_seed : derive_seed(seed, "mixing");
  truth.mixing = make_mixing(cfg, montage, mix_seed, truth.blink_source, truth.muscle_source);

  Matrix X = truth.mixing * S;
  if (cfg.noise_sd > 0.0) {
    std::mt19937_64 rng(derive_seed(seed, "sensor-noise"));
    std::normal_distribution<double> normal(0.0, cfg.noise_sd);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] += normal(rng);
  }
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = static_cast<double>(static_cast<float>(X.data()[i]));

  return {Recording(std::move(X), cfg.fs, montage, std::move(annotations)), std::move(truth)};
}

nlohmann::json truth_to_json(const GroundTruth& truth, const SynthConfig& cfg) {
  nlohmann::json j;
  j["format"] = "neuroair-synth-truth";
  j["seed"] = truth.seed;
  j["config"] = to_json(cfg);
  j["source_names"] = truth.source_names;
  j["signal_sources"] = truth.signal_sources;
  j["artifact_sources"] = truth.artifact_sources;
  j["blink_source"] = truth.blink_source ? nlohmann::json(*truth.blink_source) : nlohmann::json(nullptr);
  j["muscle_source"] = truth.muscle_source ? nlohmann::json(*truth.muscle_source) : nlohmann::json(nullptr);
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < truth.mixing.rows(); ++i) {
    std::vector<double> r(truth.mixing.row(i).data(), truth.mixing.row(i).data() + truth.mixing.cols());
    rows.push_back(r);
  }
  j["mixing"] = rows;
  return j;
}

void write_truth(const std::filesystem::path& path, const GroundTruth& truth, const SynthConfig& cfg) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << truth_to_json(truth, cfg).dump(2) << '\n';
  require(out.good(), ErrorCode::kIo, "error writing " + path.string());
}

Separability separability_check(const Synthetic& data, const SynthConfig& cfg, double threshold) {
  const auto& truth = data.truth;
  const auto& rec = data.recording;
  const std::size_t K = truth.signal_sources.size();
  const auto len = static_cast<std::size_t>(std::llround(cfg.signature.duration_s * cfg.fs));
  Separability out;
  if (K == 0 || len == 0) return out;

  const Eigen::MatrixXd pinv = Eigen::MatrixXd(truth.mixing).completeOrthogonalDecomposition().pseudoInverse();
  const auto& ann = rec.annotations();
  const std::size_t n = ann.size();
  const std::size_t dim = K * len;
  Eigen::MatrixXd feats = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t) {
    const auto onset = static_cast<Eigen::Index>(ann[t].sample);
    const Eigen::Index avail = std::min<Eigen::Index>(static_cast<Eigen::Index>(len), rec.data().cols() - onset);
    for (std::size_t k = 0; k < K; ++k) {
      const auto src = static_cast<Eigen::Index>(truth.signal_sources[k]);
      const Eigen::RowVectorXd u = pinv.row(src) * rec.data().middleCols(onset, avail);
      feats.col(static_cast<Eigen::Index>(t)).segment(static_cast<Eigen::Index>(k * len), avail) = u.transpose();
    }
  }

  // Two folds by parity of each trial's rank within its class.
  std::vector<int> fold(n);
  std::vector<std::size_t> seen(static_cast<std::size_t>(cfg.n_classes), 0);
  for (std::size_t t = 0; t < n; ++t) fold[t] = static_cast<int>(seen[static_cast<std::size_t>(ann[t].label)]++ % 2);

  std::size_t correct = 0;
  double margin_sum = 0.0;
  double true_sum = 0.0;
  for (int f = 0; f < 2; ++f) {
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), cfg.n_classes);
    std::vector<double> counts(static_cast<std::size_t>(cfg.n_classes), 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      if (fold[t] == f) continue;
      centroids.col(ann[t].label) += feats.col(static_cast<Eigen::Index>(t));
      counts[static_cast<std::size_t>(ann[t].label)] += 1.0;
    }
    for (int c = 0; c < cfg.n_classes; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0.0) centroids.col(c) /= counts[static_cast<std::size_t>(c)];
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (fold[t] != f) continue;
      const Eigen::VectorXd d2 = (centroids.colwise() - feats.col(static_cast<Eigen::Index>(t))).colwise().squaredNorm();
      Eigen::Index best = 0;
      double wrong = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < d2.size(); ++c) {
        if (d2(c) < d2(best)) best = c;
        if (c != ann[t].label) wrong = std::min(wrong, d2(c));
      }
      if (best == ann[t].label) ++correct;
      const double d_true = std::sqrt(d2(ann[t].label));
      margin_sum += std::sqrt(wrong) - d_true;
      true_sum += d_true;
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  out.margin = true_sum > 0.0 ? margin_sum / true_sum : std::numeric_limits<double>::infinity();
  out.passed = out.accuracy >= threshold;
  return out;
}

Separability separability_check(const SynthConfig& cfg, std::uint64_t seed, double threshold) {
  return separability_check(generate(cfg, seed), cfg, threshold);
}

void require_separable(const SynthConfig& cfg, std::uint64_t seed, double threshold) {
  const auto s = separability_check(cfg, seed, threshold);
  require(s.passed, ErrorCode::kConfig,
          "synth: oracle nearest-centroid accuracy " + std::to_string(s.accuracy) + " below " +
              std::to_string(threshold) + " (margin " + std::to_string(s.margin) + ")");
}

}  // namespace neuroair::synth
