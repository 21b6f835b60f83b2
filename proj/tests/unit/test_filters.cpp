#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "neuroair/error.hpp"
#include "neuroair/filters.hpp"
#include "oracles.hpp"

using namespace neuroair;
using namespace neuroair::filters;

namespace {

constexpr double kFs = 500.0;

std::vector<double> sine(double hz, std::size_t n, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = std::sin(2.0 * std::numbers::pi * hz * t / kFs + phase);
  return x;
}

/// Least-squares amplitude and phase of a known-frequency sinusoid over [lo, hi).
std::pair<double, double> fit_sine(const std::vector<double>& x, double hz, std::size_t lo, std::size_t hi) {
  Eigen::MatrixXd a(hi - lo, 2);
  Eigen::VectorXd y(hi - lo);
  for (std::size_t t = lo; t < hi; ++t) {
    const double w = 2.0 * std::numbers::pi * hz * t / kFs;
    a(t - lo, 0) = std::sin(w);
    a(t - lo, 1) = std::cos(w);
    y(t - lo) = x[t];
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(y);
  return {std::hypot(c(0), c(1)), std::atan2(c(1), c(0))};
}

}  // namespace

TEST_CASE("registry holds the seven named bands") {
  const auto& r = band_registry();
  CHECK(r.size() == 7);
  const auto& theta = band_by_name("theta");
  CHECK(theta.kind == BandKind::kBandpass);
  CHECK(theta.edges == std::vector<double>{4.0, 8.0});
  CHECK(theta.transition_bw == 2.0);
  const auto& gamma = band_by_name("gamma");
  CHECK(gamma.kind == BandKind::kHighpass);
  CHECK(gamma.edges == std::vector<double>{32.0});
  CHECK(gamma.transition_bw == 8.0);
  const auto& delta = band_by_name("delta");
  CHECK(delta.kind == BandKind::kLowpass);
  CHECK(delta.edges == std::vector<double>{4.0});
  CHECK(band_by_name("alpha").edges == std::vector<double>{8.0, 12.0});
  CHECK(band_by_name("beta").edges == std::vector<double>{12.0, 32.0});
  CHECK(band_by_name("beta").transition_bw == 3.0);
  CHECK(band_by_name("delta_theta").edges == std::vector<double>{8.0});
  CHECK(band_by_name("broadband").edges == std::vector<double>{0.5, 45.0});
  CHECK(band_by_name("broadband").transition_bw == 0.5);
  CHECK(band_by_name("combined").name == "broadband");
  CHECK_THROWS_AS(band_by_name("mu"), Error);
}

TEST_CASE("filter orders follow the transition width") {
  CHECK(fir_order(2.0, kFs) == 826);
  CHECK(fir_order(0.5, kFs) == 3300);
  CHECK(design_fir(band_by_name("delta"), kFs).order == 826);
  CHECK(design_fir(band_by_name("broadband"), kFs).order == 3300);
  CHECK(design_fir(band_by_name("delta"), kFs).taps.size() == 827);
}

TEST_CASE("delta response is -6 dB at 5 Hz and unity at DC") {
  const auto f = design_fir(band_by_name("delta"), kFs);
  CHECK(oracle::fir_magnitude(f.taps, 5.0, kFs) == doctest::Approx(0.5).epsilon(0.01));
  CHECK(oracle::fir_magnitude(f.taps, 0.0, kFs) == doctest::Approx(1.0).epsilon(1e-9));
  double sum = 0.0;
  for (double t : f.taps) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("taps are symmetric") {
  for (const auto& b : band_registry()) {
    const auto f = design_fir(b, kFs);
    for (int k = 0; k <= f.order; ++k) CHECK(f.taps[k] == doctest::Approx(f.taps[f.order - k]).epsilon(1e-12));
  }
}

TEST_CASE("edges at or past Nyquist are rejected") {
  CHECK_THROWS_AS(design_fir({"x", BandKind::kLowpass, {250.0}, 2.0}, kFs), Error);
  CHECK_THROWS_AS(design_fir({"x", BandKind::kLowpass, {249.5}, 2.0}, kFs), Error);
  CHECK_THROWS_AS(design_fir({"x", BandKind::kBandpass, {8.0, 4.0}, 2.0}, kFs), Error);
  CHECK_THROWS_AS(design_fir({"x", BandKind::kLowpass, {-1.0}, 2.0}, kFs), Error);
}

TEST_CASE("2 Hz passes the delta filter unchanged in amplitude and phase") {
  const auto f = design_fir(band_by_name("delta"), kFs);
  const auto x = sine(2.0, 5000, 0.3);
  const auto y = filter_zero_phase(x, f);
  const auto [amp, phase] = fit_sine(y, 2.0, 1000, 4000);
  const auto [amp0, phase0] = fit_sine(x, 2.0, 1000, 4000);
  CHECK(amp / amp0 >= 0.99);
  CHECK(amp / amp0 <= 1.01);
  CHECK(std::abs(phase - phase0) < 0.01);
}

TEST_CASE("20 Hz is attenuated by at least 50 dB by the delta filter") {
  const auto f = design_fir(band_by_name("delta"), kFs);
  const auto x = sine(20.0, 5000);
  const auto y = filter_zero_phase(x, f);
  double in = 0.0, out = 0.0;
  for (std::size_t t = 1000; t < 4000; ++t) {
    in += x[t] * x[t];
    out += y[t] * y[t];
  }
  CHECK(10.0 * std::log10(out / in) <= -50.0);
}

TEST_CASE("impulse response is centered on the impulse") {
  const auto f = design_fir(band_by_name("theta"), kFs);
  std::vector<double> x(4001, 0.0);
  x[2000] = 1.0;
  const auto y = filter_zero_phase(x, f, EdgeMode::kZero);
  for (int k = 1; k <= f.order / 2; ++k) CHECK(y[2000 - k] == doctest::Approx(y[2000 + k]).epsilon(1e-12));
  CHECK(y[2000] == doctest::Approx(f.taps[f.order / 2]));
}

TEST_CASE("filtering is linear") {
  const auto f = design_fir(band_by_name("alpha"), kFs);
  const auto a = oracle::gaussian_matrix(1, 3000, 1);
  const auto b = oracle::gaussian_matrix(1, 3000, 2);
  std::vector<double> x(a.data(), a.data() + 3000), y(b.data(), b.data() + 3000), z(3000);
  for (int i = 0; i < 3000; ++i) z[i] = 2.0 * x[i] - 0.5 * y[i];
  const auto fx = filter_zero_phase(x, f);
  const auto fy = filter_zero_phase(y, f);
  const auto fz = filter_zero_phase(z, f);
  double worst = 0.0;
  for (int i = 0; i < 3000; ++i) worst = std::max(worst, std::abs(fz[i] - (2.0 * fx[i] - 0.5 * fy[i])));
  CHECK(worst < 1e-9);
}

TEST_CASE("signals not longer than the order are rejected") {
  const auto f = design_fir(band_by_name("delta"), kFs);
  std::vector<double> x(826, 1.0);
  CHECK_THROWS_AS(filter_zero_phase(x, f), Error);
}

TEST_CASE("row-wise application matches the vector form") {
  const auto f = design_fir(band_by_name("delta_theta"), kFs);
  Matrix m = oracle::gaussian_matrix(3, 2000, 4);
  const Matrix out = filter_zero_phase(m, f);
  for (int r = 0; r < 3; ++r) {
    std::vector<double> row(m.row(r).data(), m.row(r).data() + 2000);
    const auto y = filter_zero_phase(row, f);
    for (int t = 0; t < 2000; t += 97) CHECK(out(r, t) == doctest::Approx(y[t]).epsilon(1e-12));
  }
}

TEST_CASE("Welch PSD locates a tone and band fractions sum to one") {
  auto x = sine(10.0, 20000);
  const auto s = welch_psd(x, kFs, 1000);
  const auto peak = std::max_element(s.power.begin(), s.power.end()) - s.power.begin();
  CHECK(s.freq[peak] == doctest::Approx(10.0));
  CHECK(band_power_fraction(s, 9.0, 11.0) > 0.95);
  CHECK(band_power_fraction(s, 0.0, 9.0) + band_power_fraction(s, 9.0, 1e9) == doctest::Approx(1.0));
}
