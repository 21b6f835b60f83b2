#include "neuroair/error.hpp"
#include "neuroair/eval.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace neuroair::eval {

namespace {

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive(F&& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(F&& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return adaptive(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 50);
}

}  // namespace

double student_t_upper_tail(double t, int df) {
  require(df >= 1, ErrorCode::kInvalidArgument, "student_t_upper_tail: df must be >= 1");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (t < 0.0) return 1.0 - student_t_upper_tail(-t, df);
  if (std::isinf(t)) return 0.0;
  const double nu = static_cast<double>(df);
  const double log_c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
  const double c = std::exp(log_c);
  constexpr double kTol = 1e-13;
  if (t <= 1.0) {
    auto density = [&](double x) { return c * std::pow(1.0 + x * x / nu, -0.5 * (nu + 1.0)); };
    return 0.5 - integrate(density, 0.0, t, kTol);
  }
  // x = 1/u maps (t, inf) onto (0, 1/t) with a smooth integrand.
  auto mapped = [&](double u) {
    if (u == 0.0) return df == 1 ? c : 0.0;
    return std::exp(log_c + 0.5 * (nu + 1.0) * std::log(nu) + (nu - 1.0) * std::log(u) -
                    0.5 * (nu + 1.0) * std::log1p(nu * u * u));
  };
  return integrate(mapped, 0.0, 1.0 / t, kTol);
}

TTest paired_t_one_tailed(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::kShapeMismatch, "paired t-test: length mismatch");
  require(a.size() >= 2, ErrorCode::kInvalidArgument, "paired t-test: need at least 2 pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  TTest out;
  out.df = static_cast<int>(a.size()) - 1;
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0 || sd <= 1e-15 * std::abs(mean)) {
    if (mean == 0.0) {
      out.t = 0.0;
      out.p = 0.5;
    } else {
      out.degenerate = true;
      out.t = mean > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      out.p = mean > 0.0 ? 0.0 : 1.0;
    }
    return out;
  }
  out.t = mean / (sd / std::sqrt(n));
  out.p = student_t_upper_tail(out.t, out.df);
  return out;
}

}  // namespace neuroair::eval
