#pragma once

#include "neuroair/core.hpp"

namespace neuroair::harmonics {

/// Associated Legendre function P_n^m(x) without the Condon-Shortley phase,
/// computed by the diagonal m-ladder and the upward n-recurrence.
double alp(int n, int m, double x);

/// K_n^m = sqrt((2n+1)(n-|m|)! / (4 pi (n+|m|)!)).
double k_norm(int n, int m);
/// Head-harmonic normalization: 3 pi in place of 4 pi.
double k_norm_head(int n, int m);

/// Real spherical harmonic with the explicit (-1)^m factor:
///   m < 0: (-1)^m sqrt2 K sin(|m| phi) P_n^|m|(cos theta)
///   m > 0: (-1)^m sqrt2 K cos(|m| phi) P_n^|m|(cos theta)
///   m = 0: K P_n^0(cos theta)
double spherical_harmonic(int n, int m, double theta, double phi);

/// Affine map cos(theta) -> scale * cos(theta) - offset taking the head cap
/// theta <= 2pi/3 onto [-1, 1]. The published constants are the rounded
/// 1.33 / 0.33; exact() gives 4/3 and 1/3.
struct ShiftConstants {
  double scale = 1.33;
  double offset = 0.33;

  static ShiftConstants paper() { return {1.33, 0.33}; }
  static ShiftConstants exact() { return {4.0 / 3.0, 1.0 / 3.0}; }
};

/// Same three-case form as spherical_harmonic with shifted ALPs
/// P_n^m(scale cos theta - offset), clamped to [-1, 1], and K from k_norm_head.
double head_harmonic(int n, int m, double theta, double phi,
                     ShiftConstants shift = ShiftConstants::paper());

enum class BasisKind { kSpherical, kHead };

/// Column index of (n, m): n^2 + n + m, i.e. lexicographic with m from -n to n.
constexpr int column_index(int n, int m) { return n * n + n + m; }

/// Largest N with (N+1)^2 <= channels, i.e. N <= sqrt(I) - 1.
int max_order(std::size_t channels);

/// Basis sampled at the electrodes: I x (N+1)^2.
struct HarmonicBasis {
  BasisKind kind = BasisKind::kSpherical;
  int order = 0;
  Matrix matrix;
  Montage montage;
  ShiftConstants shift;

  std::size_t terms() const { return static_cast<std::size_t>(matrix.cols()); }
};

HarmonicBasis build_basis(BasisKind kind, int order, const Montage& montage,
                          ShiftConstants shift = ShiftConstants::paper());

/// Diagonal sampling weights (identity by default).
struct SamplingWeights {
  Vector diagonal;

  static SamplingWeights identity(std::size_t channels);
};

/// Per trial: basis^T * diag(gamma) * V, giving (N+1)^2 x T coefficients.
EpochSet decompose(const EpochSet& epochs, const HarmonicBasis& basis,
                   const SamplingWeights& gamma);

}  // namespace neuroair::harmonics
