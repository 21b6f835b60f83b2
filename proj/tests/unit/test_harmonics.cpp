#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "neuroair/error.hpp"
#include "neuroair/harmonics.hpp"
#include "oracles.hpp"

using namespace neuroair;
using namespace neuroair::harmonics;

namespace {

constexpr double kPi = std::numbers::pi;

double k_oracle(int n, int m, double denom) {
  m = std::abs(m);
  return std::sqrt((2 * n + 1) * oracle::factorial(n - m) / (denom * oracle::factorial(n + m)));
}

/// Real harmonic rebuilt from the closed-form ALPs and factorial constants.
double y_oracle(int n, int m, double theta, double phi) {
  const double p = oracle::alp_closed(n, std::abs(m), std::cos(theta));
  const double k = k_oracle(n, m, 4.0 * kPi);
  const double sign = (std::abs(m) % 2) ? -1.0 : 1.0;
  if (m < 0) return sign * std::sqrt(2.0) * k * std::sin(-m * phi) * p;
  if (m > 0) return sign * std::sqrt(2.0) * k * std::cos(m * phi) * p;
  return k * p;
}

EpochSet trial_of(const Matrix& v, const Montage& montage) {
  EpochSet e(1, static_cast<std::size_t>(v.rows()), static_cast<std::size_t>(v.cols()), {0}, 500.0,
             {0.0, v.cols() / 500.0}, montage.names(), montage);
  e.trial(0) = v;
  return e;
}

}  // namespace

TEST_CASE("ALP examples") {
  CHECK(alp(0, 0, 0.37) == 1.0);
  CHECK(alp(1, 0, 0.5) == doctest::Approx(0.5));
  CHECK(alp(2, 1, 0.3) == doctest::Approx(3 * 0.3 * std::sqrt(1 - 0.09)).epsilon(1e-12));
  CHECK(alp(2, 1, 0.3) == doctest::Approx(0.858545).epsilon(1e-6));
  CHECK_THROWS_AS(alp(1, 2, 0.3), Error);
  CHECK_THROWS_AS(alp(2, 1, 1.5), Error);
}

TEST_CASE("ALP recurrence matches the closed forms for n <= 3") {
  double worst = 0.0;
  for (int n = 0; n <= 3; ++n) {
    for (int m = 0; m <= n; ++m) {
      for (double x = -1.0; x <= 1.0; x += 0.01) {
        worst = std::max(worst, std::abs(alp(n, m, x) - oracle::alp_closed(n, m, x)));
      }
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("normalization constants") {
  CHECK(k_norm(0, 0) == doctest::Approx(0.2820948).epsilon(1e-7));
  CHECK(k_norm_head(0, 0) == doctest::Approx(0.3257350).epsilon(1e-7));
  CHECK(k_norm(2, 1) == doctest::Approx(0.257516).epsilon(1e-6));
  for (int n = 0; n <= 6; ++n) {
    for (int m = -n; m <= n; ++m) {
      CHECK(k_norm(n, m) == doctest::Approx(k_oracle(n, m, 4 * kPi)).epsilon(1e-13));
      CHECK(k_norm_head(n, m) == doctest::Approx(k_oracle(n, m, 3 * kPi)).epsilon(1e-13));
    }
  }
}

TEST_CASE("spherical harmonic values") {
  CHECK(spherical_harmonic(0, 0, 1.1, 2.2) == doctest::Approx(std::sqrt(1.0 / (4 * kPi))));
  CHECK(spherical_harmonic(1, 0, 0.0, 0.7) == doctest::Approx(0.488603).epsilon(1e-6));
  for (int n = 0; n <= 3; ++n) {
    for (int m = -n; m <= n; ++m) {
      for (double th : {0.1, 0.9, 1.7, 2.8}) {
        for (double ph : {0.0, 1.3, 4.4}) {
          CHECK(spherical_harmonic(n, m, th, ph) == doctest::Approx(y_oracle(n, m, th, ph)).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("the norm of Y_2^-1 over the sphere is one") {
  const double v = oracle::sphere_integral([](double t, double p) {
    const double y = spherical_harmonic(2, -1, t, p);
    return y * y;
  });
  CHECK(std::abs(v - 1.0) < 1e-8);
}

TEST_CASE("head harmonic values") {
  CHECK(head_harmonic(0, 0, 0.4, 1.0) == doctest::Approx(std::sqrt(1.0 / (3 * kPi))));
  CHECK(head_harmonic(1, 0, 0.0, 0.0) == doctest::Approx(0.564190).epsilon(1e-6));
  const double x = 1.33 * std::cos(0.8) - 0.33;
  CHECK(head_harmonic(2, 1, 0.8, 0.5) ==
        doctest::Approx(-std::sqrt(2.0) * k_oracle(2, 1, 3 * kPi) * std::cos(0.5) * oracle::alp_closed(2, 1, x)));
  // Below the cap the shifted argument is clamped to -1.
  CHECK(head_harmonic(1, 0, 3.0, 0.0) == doctest::Approx(-k_oracle(1, 0, 3 * kPi)));
}

TEST_CASE("head harmonics are orthonormal over the cap with the exact shift") {
  const double cap = 2.0 * kPi / 3.0;
  double worst = 0.0;
  for (int n = 0; n <= 3; ++n) {
    for (int m = -n; m <= n; ++m) {
      for (int n2 = 0; n2 <= 3; ++n2) {
        for (int m2 = -n2; m2 <= n2; ++m2) {
          const double v = oracle::sphere_integral(
              [&](double t, double p) {
                return head_harmonic(n, m, t, p, ShiftConstants::exact()) *
                       head_harmonic(n2, m2, t, p, ShiftConstants::exact());
              },
              cap);
          worst = std::max(worst, std::abs(v - ((n == n2 && m == m2) ? 1.0 : 0.0)));
        }
      }
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("order limit and basis shape") {
  CHECK(max_order(31) == 4);
  CHECK(max_order(25) == 4);
  CHECK(max_order(24) == 3);
  const auto montage = standard_montage_31();
  for (int n : {2, 3, 4}) {
    const auto b = build_basis(BasisKind::kSpherical, n, montage);
    CHECK(b.terms() == static_cast<std::size_t>((n + 1) * (n + 1)));
    CHECK(b.matrix.rows() == 31);
    CHECK(b.matrix.allFinite());
  }
  CHECK_THROWS_AS(build_basis(BasisKind::kHead, 5, montage), Error);
  try {
    build_basis(BasisKind::kSpherical, 5, montage);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("sqrt") != std::string::npos);
  }
}

TEST_CASE("basis columns follow the (n, m) ordering") {
  const auto montage = standard_montage_31();
  const auto sb = build_basis(BasisKind::kSpherical, 4, montage);
  const auto hb = build_basis(BasisKind::kHead, 4, montage);
  CHECK(column_index(0, 0) == 0);
  CHECK(column_index(1, -1) == 1);
  CHECK(column_index(4, 4) == 24);
  for (std::size_t i = 0; i < 31; ++i) {
    CHECK(sb.matrix(i, 0) == doctest::Approx(k_norm(0, 0)));
    CHECK(hb.matrix(i, 0) == doctest::Approx(k_norm_head(0, 0)));
    const auto& p = montage.position(i);
    CHECK(sb.matrix(i, column_index(3, -2)) == doctest::Approx(spherical_harmonic(3, -2, p.theta, p.phi)));
    CHECK(hb.matrix(i, column_index(2, 1)) == doctest::Approx(head_harmonic(2, 1, p.theta, p.phi)));
  }
}

TEST_CASE("decomposition shape, zeros and linearity") {
  const auto montage = standard_montage_31();
  const auto basis = build_basis(BasisKind::kSpherical, 4, montage);
  const auto gamma = SamplingWeights::identity(31);
  const Matrix v1 = oracle::gaussian_matrix(31, 1500, 1);
  const Matrix v2 = oracle::gaussian_matrix(31, 1500, 2);
  const auto d1 = decompose(trial_of(v1, montage), basis, gamma);
  CHECK(d1.channels() == 25);
  CHECK(d1.samples() == 1500);
  const auto z = decompose(trial_of(Matrix::Zero(31, 1500), montage), basis, gamma);
  CHECK(std::all_of(z.values().begin(), z.values().end(), [](double x) { return x == 0.0; }));
  const auto d2 = decompose(trial_of(v2, montage), basis, gamma);
  const auto ds = decompose(trial_of(v1 + 3.0 * v2, montage), basis, gamma);
  const Matrix diff = ds.trial(0) - (d1.trial(0) + 3.0 * d2.trial(0));
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(decompose(trial_of(v1, montage), build_basis(BasisKind::kHead, 3, montage), gamma).channels() == 16);
  CHECK(decompose(trial_of(v1, montage), build_basis(BasisKind::kHead, 2, montage), gamma).channels() == 9);
  CHECK_THROWS_AS(decompose(trial_of(v1.topRows(30), montage_from_names({"Cz", "Fz"})), basis, gamma), Error);
}

TEST_CASE("decomposition equals basis transpose times data") {
  const auto montage = standard_montage_31();
  const auto basis = build_basis(BasisKind::kHead, 3, montage);
  Vector w = Vector::LinSpaced(31, 0.5, 1.5);
  const Matrix v = oracle::gaussian_matrix(31, 50, 3);
  const auto d = decompose(trial_of(v, montage), basis, {w});
  const Matrix expect = basis.matrix.transpose() * w.asDiagonal() * v;
  CHECK((d.trial(0) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("a field built from one basis column is dominated by that coefficient") {
  const auto montage = standard_montage_31();
  const auto basis = build_basis(BasisKind::kSpherical, 3, montage);
  const auto gamma = SamplingWeights::identity(31);
  const Eigen::RowVectorXd course = oracle::gaussian_matrix(1, 200, 4).row(0);
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(basis.terms()); ++j) {
    const Matrix v = basis.matrix.col(j) * course;
    const auto d = decompose(trial_of(v, montage), basis, gamma);
    const Eigen::VectorXd energy = d.trial(0).rowwise().squaredNorm();
    Eigen::Index top = 0;
    energy.maxCoeff(&top);
    CHECK(top == j);
  }
}
