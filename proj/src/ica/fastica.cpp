#include "neuroair/ica.hpp"

#include "neuroair/error.hpp"
#include "neuroair/nair_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace neuroair::ica {

namespace {

using Dense = Eigen::MatrixXd;  // column-major for the sample-heavy products

Dense symmetric_decorrelation(const Dense& w) {
  const Dense m = w * w.transpose();
  Eigen::SelfAdjointEigenSolver<Dense> es(m);
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * w;
}

std::string component_name(std::size_t k) {
  std::ostringstream os;
  os << "IC" << std::setw(2) << std::setfill('0') << (k + 1);
  return os.str();
}

}  // namespace

IcaModel fit_ica(const Recording& rec, const FitOptions& opt) {
  require(opt.max_iter > 0 && opt.tol > 0.0 && opt.fit_stride >= 1, ErrorCode::kInvalidArgument,
          "fit_ica: max_iter, tol and fit_stride must be positive");
  const auto channels = static_cast<Eigen::Index>(rec.channels());
  const auto n_fit = static_cast<Eigen::Index>((rec.samples() + opt.fit_stride - 1) / opt.fit_stride);
  require(n_fit > channels, ErrorCode::kInvalidArgument,
          "fit_ica: need more samples than channels");
  if (n_fit < 20 * channels * channels) {
    std::cerr << "warning: fit_ica on " << n_fit << " samples; at least "
              << 20 * channels * channels << " recommended for " << channels << " channels\n";
  }

  Dense x(channels, n_fit);
  for (Eigen::Index j = 0; j < n_fit; ++j) {
    x.col(j) = rec.data().col(j * static_cast<Eigen::Index>(opt.fit_stride)).transpose();
  }
  const Eigen::VectorXd mean = x.rowwise().mean();
  x.colwise() -= mean;

  const Dense cov = x * x.transpose() / static_cast<double>(n_fit);
  Eigen::SelfAdjointEigenSolver<Dense> pca(cov);
  const Eigen::VectorXd evals = pca.eigenvalues();  // ascending
  const double largest = evals(channels - 1);
  require(largest > 0.0, ErrorCode::kNumerical, "fit_ica: data has zero variance");
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < channels; ++i) {
    if (evals(i) > opt.rank_tol * largest) ++rank;
  }
  if (rank < channels) {
    require(opt.rank == RankPolicy::kReduce, ErrorCode::kNumerical,
            "fit_ica: rank-deficient data (rank " + std::to_string(rank) + " of " +
                std::to_string(channels) + " channels)");
  }

  // Principal axes in descending variance order.
  Dense axes(channels, rank);
  Eigen::VectorXd variances(rank);
  for (Eigen::Index k = 0; k < rank; ++k) {
    axes.col(k) = pca.eigenvectors().col(channels - 1 - k);
    variances(k) = evals(channels - 1 - k);
  }
  const Dense whitener = variances.cwiseSqrt().cwiseInverse().asDiagonal() * axes.transpose();
  const Dense z = whitener * x;
  x.resize(0, 0);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dense w(rank, rank);
  for (Eigen::Index i = 0; i < rank; ++i) {
    for (Eigen::Index j = 0; j < rank; ++j) w(i, j) = normal(rng);
  }
  w = symmetric_decorrelation(w);

  const double inv_n = 1.0 / static_cast<double>(n_fit);
  int iter = 0;
  double change = std::numeric_limits<double>::infinity();
  Dense g(rank, n_fit);
  while (iter < opt.max_iter) {
    g.noalias() = w * z;
    g = g.array().tanh().matrix();
    const Eigen::VectorXd g_prime = (1.0 - g.array().square()).matrix().rowwise().mean();
    Dense w_new = g * z.transpose() * inv_n;
    w_new -= g_prime.asDiagonal() * w;
    w_new = symmetric_decorrelation(w_new);
    change = ((w_new * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = std::move(w_new);
    ++iter;
    if (change < opt.tol) break;
  }
  if (!(change < opt.tol)) {
    std::ostringstream os;
    os << "fit_ica: FastICA did not converge after " << iter << " iterations (last change "
       << change << ", tol " << opt.tol << ")";
    fail(ErrorCode::kConvergence, os.str());
  }
  g.resize(0, 0);

  Dense unmixing = w * whitener;  // rank x channels
  Dense mixing = axes * variances.cwiseSqrt().asDiagonal() * w.transpose();  // channels x rank

  // Back-projected variance of each component on the fitted samples.
  const Dense u = w * z;
  std::vector<double> power(static_cast<std::size_t>(rank));
  for (Eigen::Index k = 0; k < rank; ++k) {
    const double var = (u.row(k).array() - u.row(k).mean()).square().mean();
    power[static_cast<std::size_t>(k)] = var * mixing.col(k).squaredNorm();
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(rank));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return power[a] > power[b]; });

  IcaModel model;
  model.mixing.resize(channels, rank);
  model.unmixing.resize(rank, channels);
  for (Eigen::Index k = 0; k < rank; ++k) {
    const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(k)]);
    Eigen::Index peak = 0;
    mixing.col(src).cwiseAbs().maxCoeff(&peak);
    const double sign = mixing(peak, src) < 0.0 ? -1.0 : 1.0;
    model.mixing.col(k) = sign * mixing.col(src);
    model.unmixing.row(k) = sign * unmixing.row(src);
  }
  model.whitener = whitener;
  model.mean = mean;
  model.component_order = std::move(order);
  model.artifact_flags.assign(static_cast<std::size_t>(rank), false);
  model.channel_names = rec.channel_names();
  model.seed = opt.seed;
  model.iterations = iter;
  return model;
}

Recording components(const IcaModel& model, const Recording& rec) {
  require(rec.channels() == model.channels(), ErrorCode::kShapeMismatch,
          "components: recording has " + std::to_string(rec.channels()) +
              " channels, model expects " + std::to_string(model.channels()));
  Matrix centered = rec.data().colwise() - model.mean;
  Matrix u = model.unmixing * centered;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < model.components(); ++k) names.push_back(component_name(k));
  return rec.with_channels(std::move(u), std::move(names));
}

Recording remove_artifacts(const IcaModel& model, const Recording& rec,
                           const std::vector<bool>& flags) {
  require(flags.size() == model.components(), ErrorCode::kShapeMismatch,
          "remove_artifacts: flag count must equal component count");
  require(std::find(flags.begin(), flags.end(), false) != flags.end(),
          ErrorCode::kInvalidArgument, "remove_artifacts: nothing retained (all components flagged)");
  require(rec.channels() == model.channels(), ErrorCode::kShapeMismatch,
          "remove_artifacts: channel count mismatch");
  Matrix kept_mixing = model.mixing;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (flags[k]) kept_mixing.col(static_cast<Eigen::Index>(k)).setZero();
  }
  Matrix centered = rec.data().colwise() - model.mean;
  const Matrix u = model.unmixing * centered;
  Matrix v = kept_mixing * u;
  v.colwise() += model.mean;
  return rec.with_data(std::move(v));
}

EpochSet component_subset(const EpochSet& comps, std::size_t k) {
  require(k >= 1 && k <= comps.channels(), ErrorCode::kInvalidArgument,
          "component_subset: k=" + std::to_string(k) + " outside [1, " +
              std::to_string(comps.channels()) + "]");
  std::vector<std::string> names(comps.channel_names().begin(),
                                 comps.channel_names().begin() + static_cast<std::ptrdiff_t>(k));
  EpochSet out = comps.reshaped(k, std::move(names));
  for (std::size_t t = 0; t < comps.trials(); ++t) {
    out.trial(t) = comps.trial(t).topRows(static_cast<Eigen::Index>(k));
  }
  return out;
}

void save_model(const std::filesystem::path& path, const IcaModel& model) {
  nlohmann::json h;
  h["format"] = "neuroair-ica";
  h["version"] = 1;
  h["channels"] = model.channels();
  h["components"] = model.components();
  h["seed"] = model.seed;
  h["iterations"] = model.iterations;
  h["component_order"] = model.component_order;
  h["artifact_flags"] = model.artifact_flags;
  h["channel_names"] = model.channel_names;
  h["blobs"] = {"mixing", "unmixing", "whitener", "mean"};
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << h.dump() << '\n';
  io::write_f32_blob(out, std::span<const double>(model.mixing.data(), model.mixing.size()));
  io::write_f32_blob(out, std::span<const double>(model.unmixing.data(), model.unmixing.size()));
  io::write_f32_blob(out, std::span<const double>(model.whitener.data(), model.whitener.size()));
  io::write_f32_blob(out, std::span<const double>(model.mean.data(), model.mean.size()));
}

IcaModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  IcaModel m;
  try {
    const auto h = nlohmann::json::parse(io::read_header_line(in, path.string()));
    require(h.at("format") == "neuroair-ica", ErrorCode::kFormat,
            path.string() + " is not an ICA model file");
    const auto c = h.at("channels").get<Eigen::Index>();
    const auto k = h.at("components").get<Eigen::Index>();
    m.seed = h.at("seed").get<std::uint64_t>();
    m.iterations = h.at("iterations").get<int>();
    m.component_order = h.at("component_order").get<std::vector<std::size_t>>();
    m.artifact_flags = h.at("artifact_flags").get<std::vector<bool>>();
    m.channel_names = h.at("channel_names").get<std::vector<std::string>>();
    auto read = [&](Eigen::Index rows, Eigen::Index cols, const char* what) {
      const auto v = io::read_f32_blob(in, static_cast<std::size_t>(rows * cols),
                                       path.string() + ":" + what);
      return Matrix(Eigen::Map<const Matrix>(v.data(), rows, cols));
    };
    m.mixing = read(c, k, "mixing");
    m.unmixing = read(k, c, "unmixing");
    m.whitener = read(k, c, "whitener");
    m.mean = read(c, 1, "mean").col(0);
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::kFormat, "bad ICA model header in " + path.string() + ": " + ex.what());
  }
  return m;
}

}  // namespace neuroair::ica
