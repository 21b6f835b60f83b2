#include "neuroair/harmonics.hpp"

#include "neuroair/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>

namespace neuroair::harmonics {

namespace {

// (n - m)! / (n + m)! for m >= 0
double factorial_ratio(int n, int m) {
  double r = 1.0;
  for (int j = n - m + 1; j <= n + m; ++j) r /= j;
  return r;
}

double three_case(int m, double phi, double norm, double legendre) {
  if (m == 0) return norm * legendre;
  const int am = std::abs(m);
  const double sign = (am % 2 == 0) ? 1.0 : -1.0;
  const double angular = m < 0 ? std::sin(am * phi) : std::cos(am * phi);
  return sign * std::numbers::sqrt2 * norm * angular * legendre;
}

}  // namespace

double alp(int n, int m, double x) {
  require(m >= 0 && m <= n, ErrorCode::kInvalidArgument,
          "alp: need 0 <= m <= n (n=" + std::to_string(n) + ", m=" + std::to_string(m) + ")");
  require(std::abs(x) <= 1.0, ErrorCode::kInvalidArgument, "alp: |x| must be <= 1");
  // P_m^m = (2m-1)!! (1-x^2)^(m/2)
  const double s = std::sqrt((1.0 - x) * (1.0 + x));
  double pmm = 1.0;
  for (int k = 1; k <= m; ++k) pmm *= (2.0 * k - 1.0) * s;
  if (n == m) return pmm;
  double pm1 = x * (2.0 * m + 1.0) * pmm;
  if (n == m + 1) return pm1;
  double prev = pmm;
  double cur = pm1;
  for (int l = m + 2; l <= n; ++l) {
    const double next = ((2.0 * l - 1.0) * x * cur - (l + m - 1.0) * prev) / (l - m);
    prev = cur;
    cur = next;
  }
  return cur;
}

double k_norm(int n, int m) {
  const int am = std::abs(m);
  require(am <= n, ErrorCode::kInvalidArgument, "k_norm: |m| must not exceed n");
  return std::sqrt((2.0 * n + 1.0) * factorial_ratio(n, am) / (4.0 * std::numbers::pi));
}

double k_norm_head(int n, int m) {
  const int am = std::abs(m);
  require(am <= n, ErrorCode::kInvalidArgument, "k_norm_head: |m| must not exceed n");
  return std::sqrt((2.0 * n + 1.0) * factorial_ratio(n, am) / (3.0 * std::numbers::pi));
}

double spherical_harmonic(int n, int m, double theta, double phi) {
  const int am = std::abs(m);
  return three_case(m, phi, k_norm(n, m), alp(n, am, std::cos(theta)));
}

double head_harmonic(int n, int m, double theta, double phi, ShiftConstants shift) {
  const int am = std::abs(m);
  const double x = std::clamp(shift.scale * std::cos(theta) - shift.offset, -1.0, 1.0);
  return three_case(m, phi, k_norm_head(n, m), alp(n, am, x));
}

int max_order(std::size_t channels) {
  int n = 0;
  while (static_cast<std::size_t>((n + 2) * (n + 2)) <= channels) ++n;
  return n;
}

HarmonicBasis build_basis(BasisKind kind, int order, const Montage& montage, ShiftConstants shift) {
  require(order >= 0, ErrorCode::kInvalidArgument, "build_basis: order must be >= 0");
  const int limit = max_order(montage.size());
  require(order <= limit, ErrorCode::kInvalidArgument,
          "build_basis: order " + std::to_string(order) + " violates N <= sqrt(I) - 1 = " +
              std::to_string(std::sqrt(static_cast<double>(montage.size())) - 1.0) +
              " for I = " + std::to_string(montage.size()) + " (max " + std::to_string(limit) + ")");
  const int terms = (order + 1) * (order + 1);
  HarmonicBasis basis{kind, order, Matrix(static_cast<Eigen::Index>(montage.size()), terms),
                      montage, shift};
  for (std::size_t i = 0; i < montage.size(); ++i) {
    const auto& p = montage.position(i);
    for (int n = 0; n <= order; ++n) {
      for (int m = -n; m <= n; ++m) {
        basis.matrix(static_cast<Eigen::Index>(i), column_index(n, m)) =
            kind == BasisKind::kSpherical ? spherical_harmonic(n, m, p.theta, p.phi)
                                          : head_harmonic(n, m, p.theta, p.phi, shift);
      }
    }
  }
  require(basis.matrix.allFinite(), ErrorCode::kNumerical, "build_basis: non-finite entry");
  return basis;
}

SamplingWeights SamplingWeights::identity(std::size_t channels) {
  return {Vector::Ones(static_cast<Eigen::Index>(channels))};
}

EpochSet decompose(const EpochSet& epochs, const HarmonicBasis& basis,
                   const SamplingWeights& gamma) {
  require(epochs.channels() == static_cast<std::size_t>(basis.matrix.rows()),
          ErrorCode::kShapeMismatch,
          "decompose: epochs have " + std::to_string(epochs.channels()) + " channels, basis has " +
              std::to_string(basis.matrix.rows()) + " rows");
  require(gamma.diagonal.size() == basis.matrix.rows(), ErrorCode::kShapeMismatch,
          "decompose: sampling weight length mismatch");
  require((gamma.diagonal.array() >= 0.0).all(), ErrorCode::kInvalidArgument,
          "decompose: sampling weights must be nonnegative");

  const Matrix projector = basis.matrix.transpose() * gamma.diagonal.asDiagonal();
  const char prefix = basis.kind == BasisKind::kSpherical ? 'Y' : 'H';
  std::vector<std::string> names;
  for (int n = 0; n <= basis.order; ++n) {
    for (int m = -n; m <= n; ++m) {
      names.push_back(std::string(1, prefix) + "_" + std::to_string(n) + "_" + std::to_string(m));
    }
  }
  EpochSet out = epochs.reshaped(basis.terms(), std::move(names));
  for (std::size_t t = 0; t < epochs.trials(); ++t) {
    out.trial(t).noalias() = projector * epochs.trial(t);
  }
  return out;
}

}  // namespace neuroair::harmonics
