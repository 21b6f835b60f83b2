#pragma once

#include "neuroair/core.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace neuroair::filters {

enum class BandKind { kLowpass, kHighpass, kBandpass };

/// Passband edges in Hz: one edge for low/highpass, two for bandpass.
struct BandSpec {
  std::string name;
  BandKind kind = BandKind::kLowpass;
  std::vector<double> edges;
  double transition_bw = 1.0;

  /// Throws if the edges are malformed or the upper transition crosses Nyquist.
  void validate(double fs) const;
};

enum class WindowKind { kHamming };

struct FirFilter {
  std::vector<double> taps;  // symmetric, length order + 1
  int order = 0;
  BandSpec band;
  double fs = 0.0;
  WindowKind window = WindowKind::kHamming;
};

/// Hamming-windowed sinc. Order is the smallest even integer >= 3.3 / (tbw / fs);
/// the -6 dB points sit half a transition band outside each passband edge.
/// Lowpass kernels are scaled to unit DC gain, highpass is the spectral
/// inversion of the matching lowpass, bandpass the difference of two windowed
/// sincs with its residual DC gain subtracted as a multiple of the window.
FirFilter design_fir(const BandSpec& band, double fs);

int fir_order(double transition_bw, double fs);

enum class EdgeMode { kReflect, kZero };

/// Single pass of the symmetric kernel with its group delay (order / 2)
/// removed, so the output is aligned with the input. Edges are extended by
/// `order` samples on each side. Requires length > order.
std::vector<double> filter_zero_phase(std::span<const double> x, const FirFilter& f,
                                      EdgeMode edges = EdgeMode::kReflect);

/// Row-wise application.
Matrix filter_zero_phase(const Matrix& rows, const FirFilter& f, EdgeMode edges = EdgeMode::kReflect);
Recording filter_zero_phase(const Recording& rec, const FirFilter& f,
                            EdgeMode edges = EdgeMode::kReflect);
EpochSet filter_zero_phase(const EpochSet& epochs, const FirFilter& f,
                           EdgeMode edges = EdgeMode::kReflect);

struct Spectrum {
  std::vector<double> freq;   // Hz
  std::vector<double> power;  // one-sided power spectral density
};

/// Welch estimate with Hann windows of `segment` samples and 50% overlap.
/// Signals shorter than one segment use a single zero-padded window.
Spectrum welch_psd(std::span<const double> x, double fs, std::size_t segment);

/// Fraction of total spectral power in [lo_hz, hi_hz).
double band_power_fraction(const Spectrum& s, double lo_hz, double hi_hz);

/// delta, theta, alpha, beta, gamma, delta_theta, broadband.
const std::vector<BandSpec>& band_registry();

/// Registry lookup; "combined" is an alias for broadband.
const BandSpec& band_by_name(std::string_view name);

}  // namespace neuroair::filters
