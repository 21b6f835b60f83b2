#include "neuroair/source.hpp"

#include "neuroair/error.hpp"
#include "neuroair/seed.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace neuroair::source {

namespace {

// Orthonormal basis of the complement of the ones vector (I x I-1).
Eigen::MatrixXd reference_subspace(Eigen::Index channels) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(channels) / std::sqrt(static_cast<double>(channels));
  const Eigen::MatrixXd seed_col = ones;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(seed_col);
  const Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(channels - 1);
}

std::string dipole_name(std::size_t i) {
  std::ostringstream os;
  os << "d" << std::setw(5) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

void LeadField::validate() const {
  require(gain.rows() >= 2 && gain.cols() >= 1, ErrorCode::kShapeMismatch,
          "lead field needs at least 2 channels and 1 dipole");
  require(gain.allFinite(), ErrorCode::kNumerical, "lead field has non-finite entries");
  require(channel_names.empty() || channel_names.size() == channels(), ErrorCode::kShapeMismatch,
          "lead field channel name count mismatch");
  if (dipole_positions) {
    require(static_cast<std::size_t>(dipole_positions->rows()) == dipoles(),
            ErrorCode::kShapeMismatch, "lead field dipole position count mismatch");
  }
}

void Atlas::validate(std::size_t dipoles) const {
  require(region_of.size() == dipoles, ErrorCode::kShapeMismatch,
          "atlas covers " + std::to_string(region_of.size()) + " dipoles, lead field has " +
              std::to_string(dipoles));
  require(!region_names.empty(), ErrorCode::kInvalidArgument, "atlas has no regions");
  std::vector<std::size_t> counts(region_names.size(), 0);
  for (int r : region_of) {
    require(r >= 0 && static_cast<std::size_t>(r) < region_names.size(), ErrorCode::kFormat,
            "atlas region index " + std::to_string(r) + " out of range");
    ++counts[static_cast<std::size_t>(r)];
  }
  std::string empty;
  for (std::size_t r = 0; r < counts.size(); ++r) {
    if (counts[r] == 0) empty += (empty.empty() ? "" : ", ") + region_names[r];
  }
  require(empty.empty(), ErrorCode::kInvalidArgument, "atlas regions without dipoles: " + empty);
}

Matrix average_reference(const Matrix& gain) {
  Matrix out = gain;
  out.rowwise() -= gain.colwise().mean();
  return out;
}

double default_lambda(const LeadField& lf, double snr) {
  require(snr > 0.0, ErrorCode::kInvalidArgument, "default_lambda: snr must be positive");
  const Matrix l = average_reference(lf.gain);
  return l.squaredNorm() / (static_cast<double>(lf.channels()) * snr * snr);
}

InverseOperator sloreta_kernel(const LeadField& lf, double lambda) {
  lf.validate();
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::kInvalidArgument,
          "sloreta_kernel: lambda must be finite and >= 0");
  const auto channels = static_cast<Eigen::Index>(lf.channels());
  const Eigen::MatrixXd l = average_reference(lf.gain);
  const Eigen::MatrixXd q = reference_subspace(channels);
  const Eigen::MatrixXd lq = q.transpose() * l;  // (I-1) x D
  Eigen::MatrixXd m = lq * lq.transpose();
  m.diagonal().array() += lambda;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double top = ev.maxCoeff();
  require(top > 0.0 && ev.minCoeff() > 1e-12 * top, ErrorCode::kNumerical,
          "sloreta_kernel: L L^T + lambda I is singular on the average-reference subspace "
          "(rank below " + std::to_string(channels - 1) + ")");
  const Eigen::MatrixXd m_inv =
      es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

  // K = L^T Q M^-1 Q^T, dipoles x channels.
  const Eigen::MatrixXd k = lq.transpose() * m_inv * q.transpose();
  InverseOperator op;
  op.lambda = lambda;
  op.resolution = (k.array() * l.transpose().array()).rowwise().sum();
  const double scale = std::max(1.0, op.resolution.cwiseAbs().maxCoeff());
  for (Eigen::Index v = 0; v < op.resolution.size(); ++v) {
    require(op.resolution(v) > 1e-14 * scale, ErrorCode::kNumerical,
            "sloreta_kernel: resolution diagonal is not positive at dipole " + std::to_string(v));
  }
  op.kernel = op.resolution.cwiseSqrt().cwiseInverse().asDiagonal() * k;
  return op;
}

EpochSet apply_inverse(const InverseOperator& op, const EpochSet& epochs) {
  require(epochs.channels() == static_cast<std::size_t>(op.kernel.cols()), ErrorCode::kShapeMismatch,
          "apply_inverse: epochs have " + std::to_string(epochs.channels()) +
              " channels, operator expects " + std::to_string(op.kernel.cols()));
  const auto dipoles = static_cast<std::size_t>(op.kernel.rows());
  std::vector<std::string> names(dipoles);
  for (std::size_t i = 0; i < dipoles; ++i) names[i] = dipole_name(i);
  EpochSet out = epochs.reshaped(dipoles, std::move(names));
  for (std::size_t t = 0; t < epochs.trials(); ++t) {
    out.trial(t).noalias() = op.kernel * epochs.trial(t);
  }
  return out;
}

Matrix region_average_matrix(const Atlas& atlas, std::size_t dipoles) {
  atlas.validate(dipoles);
  Matrix avg = Matrix::Zero(static_cast<Eigen::Index>(atlas.regions()), static_cast<Eigen::Index>(dipoles));
  std::vector<double> counts(atlas.regions(), 0.0);
  for (int r : atlas.region_of) counts[static_cast<std::size_t>(r)] += 1.0;
  for (std::size_t v = 0; v < dipoles; ++v) {
    const auto r = static_cast<std::size_t>(atlas.region_of[v]);
    avg(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v)) = 1.0 / counts[r];
  }
  return avg;
}

EpochSet scout_average(const EpochSet& dipole_series, const Atlas& atlas) {
  const Matrix avg = region_average_matrix(atlas, dipole_series.channels());
  EpochSet out = dipole_series.reshaped(atlas.regions(), atlas.region_names);
  for (std::size_t t = 0; t < dipole_series.trials(); ++t) {
    out.trial(t).noalias() = avg * dipole_series.trial(t);
  }
  return out;
}

EpochSet extract_scouts(const InverseOperator& op, const Atlas& atlas, const EpochSet& epochs) {
  require(epochs.channels() == static_cast<std::size_t>(op.kernel.cols()), ErrorCode::kShapeMismatch,
          "extract_scouts: channel count does not match operator");
  const Matrix composed =
      region_average_matrix(atlas, static_cast<std::size_t>(op.kernel.rows())) * op.kernel;
  EpochSet out = epochs.reshaped(atlas.regions(), atlas.region_names);
  for (std::size_t t = 0; t < epochs.trials(); ++t) {
    out.trial(t).noalias() = composed * epochs.trial(t);
  }
  return out;
}

LeadField synth_leadfield(const Montage& montage, std::size_t dipoles, std::uint64_t seed,
                          double cond_bound) {
  require(montage.size() >= 2 && dipoles >= montage.size(), ErrorCode::kInvalidArgument,
          "synth_leadfield: need >= 2 channels and at least as many dipoles as channels");
  require(cond_bound > 1.0, ErrorCode::kInvalidArgument, "synth_leadfield: cond_bound must exceed 1");
  const auto channels = static_cast<Eigen::Index>(montage.size());
  const auto d = static_cast<Eigen::Index>(dipoles);

  std::mt19937_64 rng(derive_seed(seed, "leadfield"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Positions pos(d, 3);
  Eigen::MatrixXd orient(d, 3);
  for (Eigen::Index v = 0; v < d; ++v) {
    // Upper-hemisphere shell between 55% and 85% of the head radius.
    const double r = kDefaultHeadRadius * (0.55 + 0.30 * unit(rng));
    const double z = -0.2 + 1.2 * unit(rng);
    const double az = 2.0 * std::numbers::pi * unit(rng);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    pos.row(v) << r * rho * std::cos(az), r * rho * std::sin(az), r * z;
    Eigen::Vector3d o(normal(rng), normal(rng), normal(rng));
    orient.row(v) = o.normalized().transpose();
  }

  Eigen::MatrixXd gain(channels, d);
  for (Eigen::Index i = 0; i < channels; ++i) {
    const Eigen::Vector3d e = montage.unit_vector(static_cast<std::size_t>(i)) * kDefaultHeadRadius;
    for (Eigen::Index v = 0; v < d; ++v) {
      const Eigen::Vector3d diff = e - pos.row(v).transpose();
      const double dist = diff.norm();
      gain(i, v) = orient.row(v).dot(diff) / (dist * dist * dist);
    }
  }
  gain.rowwise() -= gain.colwise().mean();
  gain /= gain.colwise().norm().mean();

  // Floor the singular values on the reference subspace.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gain, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s = svd.singularValues();
  const double floor = s(0) / std::sqrt(cond_bound);
  for (Eigen::Index k = 0; k < channels - 1; ++k) s(k) = std::max(s(k), floor);
  s(channels - 1) = 0.0;  // the ones direction
  gain = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  gain.rowwise() -= gain.colwise().mean();

  LeadField lf;
  lf.gain = gain;
  lf.dipole_positions = std::move(pos);
  lf.channel_names = montage.names();
  return lf;
}

LeadField synth_leadfield(std::size_t channels, std::size_t dipoles, std::uint64_t seed,
                          double cond_bound) {
  if (channels == 31) return synth_leadfield(standard_montage_31(), dipoles, seed, cond_bound);
  require(channels >= 2, ErrorCode::kInvalidArgument, "synth_leadfield: need >= 2 channels");
  // Fibonacci points on the cap theta <= 2pi/3.
  std::vector<std::string> names;
  std::vector<ElectrodePosition> positions;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < channels; ++i) {
    const double z = 1.0 - 1.5 * (static_cast<double>(i) + 0.5) / static_cast<double>(channels);
    double phi = std::fmod(golden * static_cast<double>(i), 2.0 * std::numbers::pi);
    std::ostringstream os;
    os << "E" << std::setw(3) << std::setfill('0') << (i + 1);
    names.push_back(os.str());
    positions.push_back({std::acos(z), phi, kDefaultHeadRadius});
  }
  return synth_leadfield(Montage(std::move(names), std::move(positions)), dipoles, seed, cond_bound);
}

Atlas synth_atlas(const LeadField& lf, std::size_t regions, std::uint64_t seed) {
  lf.validate();
  require(regions >= 1 && regions <= lf.dipoles(), ErrorCode::kInvalidArgument,
          "synth_atlas: region count must lie in [1, dipoles]");
  std::vector<std::size_t> perm(lf.dipoles());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, "atlas"));
  std::shuffle(perm.begin(), perm.end(), rng);

  Atlas atlas;
  atlas.region_of.assign(lf.dipoles(), 0);
  for (std::size_t r = 0; r < regions; ++r) {
    std::ostringstream os;
    os << "R" << std::setw(2) << std::setfill('0') << (r + 1);
    atlas.region_names.push_back(os.str());
  }
  if (!lf.dipole_positions) {
    for (std::size_t i = 0; i < perm.size(); ++i) atlas.region_of[perm[i]] = static_cast<int>(i % regions);
    return atlas;
  }
  const Positions& p = *lf.dipole_positions;
  for (std::size_t v = 0; v < lf.dipoles(); ++v) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < regions; ++r) {
      const double dist = (p.row(static_cast<Eigen::Index>(v)) - p.row(static_cast<Eigen::Index>(perm[r]))).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = r;
      }
    }
    atlas.region_of[v] = static_cast<int>(best);
  }
  return atlas;
}

}  // namespace neuroair::source
