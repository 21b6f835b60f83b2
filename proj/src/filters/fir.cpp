#include "neuroair/filters.hpp"

#include "neuroair/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

namespace neuroair::filters {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  require(p != nullptr, ErrorCode::kNumerical, "fftw_malloc failed");
  return FftwBuffer<T>(p);
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

/// Overlap-add convolution engine for one kernel; one instance per call.
class OverlapAdd {
 public:
  explicit OverlapAdd(std::span<const double> kernel) : kernel_len_(kernel.size()) {
    std::size_t n = 256;
    while (n < 4 * kernel_len_) n *= 2;
    fft_len_ = n;
    block_ = fft_len_ - kernel_len_ + 1;
    time_ = fftw_buffer<double>(fft_len_);
    freq_ = fftw_buffer<fftw_complex>(fft_len_ / 2 + 1);
    kernel_freq_.resize(fft_len_ / 2 + 1);
    {
      std::lock_guard lock(fftw_planner_mutex());
      forward_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(fft_len_), time_.get(), freq_.get(),
                                          FFTW_ESTIMATE));
      inverse_.reset(fftw_plan_dft_c2r_1d(static_cast<int>(fft_len_), freq_.get(), time_.get(),
                                          FFTW_ESTIMATE));
    }
    std::fill_n(time_.get(), fft_len_, 0.0);
    std::copy(kernel.begin(), kernel.end(), time_.get());
    fftw_execute(forward_.get());
    for (std::size_t k = 0; k < kernel_freq_.size(); ++k) {
      kernel_freq_[k] = {freq_[k][0], freq_[k][1]};
    }
  }

  /// Full linear convolution of `x` with the kernel.
  std::vector<double> convolve(std::span<const double> x) {
    std::vector<double> out(x.size() + kernel_len_ - 1, 0.0);
    const double scale = 1.0 / static_cast<double>(fft_len_);
    for (std::size_t start = 0; start < x.size(); start += block_) {
      const std::size_t len = std::min(block_, x.size() - start);
      std::fill_n(time_.get(), fft_len_, 0.0);
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(start), len, time_.get());
      fftw_execute(forward_.get());
      for (std::size_t k = 0; k < kernel_freq_.size(); ++k) {
        const std::complex<double> v =
            std::complex<double>(freq_[k][0], freq_[k][1]) * kernel_freq_[k];
        freq_[k][0] = v.real();
        freq_[k][1] = v.imag();
      }
      fftw_execute(inverse_.get());
      const std::size_t produced = std::min(len + kernel_len_ - 1, out.size() - start);
      for (std::size_t i = 0; i < produced; ++i) out[start + i] += time_[i] * scale;
    }
    return out;
  }

 private:
  std::size_t kernel_len_;
  std::size_t fft_len_ = 0;
  std::size_t block_ = 0;
  FftwBuffer<double> time_;
  FftwBuffer<fftw_complex> freq_;
  std::vector<std::complex<double>> kernel_freq_;
  Plan forward_;
  Plan inverse_;
};

double hamming(int n, int order) { return 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / order); }

/// Windowed ideal lowpass, not normalized.
std::vector<double> windowed_sinc(int order, double cutoff_hz, double fs) {
  const double fc = cutoff_hz / fs;  // cycles per sample
  const int half = order / 2;
  std::vector<double> h(static_cast<std::size_t>(order) + 1);
  for (int n = 0; n <= half; ++n) {
    const int k = n - half;
    const double sinc = k == 0 ? 2.0 * fc
                               : std::sin(2.0 * std::numbers::pi * fc * k) / (std::numbers::pi * k);
    h[static_cast<std::size_t>(n)] = sinc * hamming(n, order);
  }
  for (int n = half + 1; n <= order; ++n) {
    h[static_cast<std::size_t>(n)] = h[static_cast<std::size_t>(order - n)];
  }
  return h;
}

std::vector<double> windowed_sinc_lowpass(int order, double cutoff_hz, double fs) {
  auto h = windowed_sinc(order, cutoff_hz, fs);
  double sum = 0.0;
  for (double v : h) sum += v;
  for (double& v : h) v /= sum;
  return h;
}

/// Difference of two windowed sincs; the residual DC gain is removed with a
/// multiple of the window so the correction stays inside the lower stopband.
std::vector<double> windowed_sinc_bandpass(int order, double lo_hz, double hi_hz, double fs) {
  auto h = windowed_sinc(order, hi_hz, fs);
  const auto low = windowed_sinc(order, lo_hz, fs);
  double dc = 0.0;
  double wsum = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    h[i] -= low[i];
    dc += h[i];
    wsum += hamming(static_cast<int>(i), order);
  }
  for (std::size_t i = 0; i < h.size(); ++i) h[i] -= dc / wsum * hamming(static_cast<int>(i), order);
  return h;
}

void spectral_inversion(std::vector<double>& h) {
  for (double& v : h) v = -v;
  h[h.size() / 2] += 1.0;
}

std::vector<BandSpec> make_registry() {
  using enum BandKind;
  return {
      {"delta", kLowpass, {4.0}, 2.0},
      {"theta", kBandpass, {4.0, 8.0}, 2.0},
      {"alpha", kBandpass, {8.0, 12.0}, 2.0},
      {"beta", kBandpass, {12.0, 32.0}, 3.0},
      {"gamma", kHighpass, {32.0}, 8.0},
      {"delta_theta", kLowpass, {8.0}, 2.0},
      {"broadband", kBandpass, {0.5, 45.0}, 0.5},
  };
}

}  // namespace

void BandSpec::validate(double fs) const {
  require(fs > 0.0, ErrorCode::kInvalidArgument, "sampling rate must be positive");
  require(transition_bw > 0.0, ErrorCode::kInvalidArgument,
          "band '" + name + "': transition bandwidth must be positive");
  const std::size_t want = kind == BandKind::kBandpass ? 2 : 1;
  require(edges.size() == want, ErrorCode::kInvalidArgument,
          "band '" + name + "': wrong number of passband edges");
  for (double e : edges) {
    require(e > 0.0, ErrorCode::kInvalidArgument, "band '" + name + "': edges must be positive");
  }
  if (kind == BandKind::kBandpass) {
    require(edges[0] < edges[1], ErrorCode::kInvalidArgument,
            "band '" + name + "': bandpass edges must increase");
  }
  const double top = edges.back() + transition_bw / 2.0;
  require(top < fs / 2.0, ErrorCode::kInvalidArgument,
          "band '" + name + "': edge + transition/2 = " + std::to_string(top) +
              " Hz reaches Nyquist " + std::to_string(fs / 2.0) + " Hz");
  if (kind != BandKind::kLowpass) {
    require(edges.front() - transition_bw / 2.0 > 0.0, ErrorCode::kInvalidArgument,
            "band '" + name + "': lower cutoff must stay above 0 Hz");
  }
}

int fir_order(double transition_bw, double fs) {
  const double raw = 3.3 / (transition_bw / fs);
  // Absorb representation error so 3300.0000000000005 still rounds to 3300.
  int order = static_cast<int>(std::ceil(raw * (1.0 - 1e-12)));
  if (order % 2 != 0) ++order;
  return order;
}

FirFilter design_fir(const BandSpec& band, double fs) {
  band.validate(fs);
  FirFilter f;
  f.order = fir_order(band.transition_bw, fs);
  f.band = band;
  f.fs = fs;
  const double half_tbw = band.transition_bw / 2.0;
  switch (band.kind) {
    case BandKind::kLowpass:
      f.taps = windowed_sinc_lowpass(f.order, band.edges[0] + half_tbw, fs);
      break;
    case BandKind::kHighpass:
      f.taps = windowed_sinc_lowpass(f.order, band.edges[0] - half_tbw, fs);
      spectral_inversion(f.taps);
      break;
    case BandKind::kBandpass:
      f.taps = windowed_sinc_bandpass(f.order, band.edges[0] - half_tbw, band.edges[1] + half_tbw, fs);
      break;
  }
  return f;
}

std::vector<double> filter_zero_phase(std::span<const double> x, const FirFilter& f,
                                      EdgeMode edges) {
  OverlapAdd engine(f.taps);
  const auto m = static_cast<std::size_t>(f.order);
  require(x.size() > m, ErrorCode::kInvalidArgument,
          "signal length " + std::to_string(x.size()) + " must exceed filter order " +
              std::to_string(m));
  const std::size_t n = x.size();
  std::vector<double> padded(n + 2 * m, 0.0);
  std::copy(x.begin(), x.end(), padded.begin() + static_cast<std::ptrdiff_t>(m));
  if (edges == EdgeMode::kReflect) {
    for (std::size_t i = 1; i <= m; ++i) {
      padded[m - i] = x[i];
      padded[m + n - 1 + i] = x[n - 1 - i];
    }
  }
  const auto full = engine.convolve(padded);
  const std::size_t offset = m + m / 2;
  return {full.begin() + static_cast<std::ptrdiff_t>(offset),
          full.begin() + static_cast<std::ptrdiff_t>(offset + n)};
}

Matrix filter_zero_phase(const Matrix& rows, const FirFilter& f, EdgeMode edges) {
  const auto m = static_cast<std::size_t>(f.order);
  const auto n = static_cast<std::size_t>(rows.cols());
  require(n > m, ErrorCode::kInvalidArgument,
          "signal length " + std::to_string(n) + " must exceed filter order " + std::to_string(m));
  OverlapAdd engine(f.taps);
  Matrix out(rows.rows(), rows.cols());
  std::vector<double> padded(n + 2 * m);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double* x = rows.data() + r * rows.cols();
    std::fill(padded.begin(), padded.end(), 0.0);
    std::copy_n(x, n, padded.begin() + static_cast<std::ptrdiff_t>(m));
    if (edges == EdgeMode::kReflect) {
      for (std::size_t i = 1; i <= m; ++i) {
        padded[m - i] = x[i];
        padded[m + n - 1 + i] = x[n - 1 - i];
      }
    }
    const auto full = engine.convolve(padded);
    std::copy_n(full.begin() + static_cast<std::ptrdiff_t>(m + m / 2), n,
                out.data() + r * rows.cols());
  }
  return out;
}

Recording filter_zero_phase(const Recording& rec, const FirFilter& f, EdgeMode edges) {
  require(std::abs(rec.fs() - f.fs) < 1e-9, ErrorCode::kInvalidArgument,
          "filter designed for a different sampling rate");
  return rec.with_data(filter_zero_phase(rec.data(), f, edges));
}

EpochSet filter_zero_phase(const EpochSet& epochs, const FirFilter& f, EdgeMode edges) {
  require(std::abs(epochs.fs() - f.fs) < 1e-9, ErrorCode::kInvalidArgument,
          "filter designed for a different sampling rate");
  EpochSet out = epochs;
  for (std::size_t t = 0; t < epochs.trials(); ++t) {
    Matrix trial = epochs.trial(t);
    out.trial(t) = filter_zero_phase(trial, f, edges);
  }
  return out;
}

Spectrum welch_psd(std::span<const double> x, double fs, std::size_t segment) {
  require(!x.empty() && segment >= 8, ErrorCode::kInvalidArgument, "welch_psd: bad input size");
  const std::size_t nfft = segment;
  auto time = fftw_buffer<double>(nfft);
  auto freq = fftw_buffer<fftw_complex>(nfft / 2 + 1);
  Plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(nfft), time.get(), freq.get(), FFTW_ESTIMATE));
  }
  std::vector<double> window(segment);
  double wss = 0.0;
  for (std::size_t i = 0; i < segment; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(segment));
    wss += window[i] * window[i];
  }
  Spectrum out;
  out.freq.resize(nfft / 2 + 1);
  out.power.assign(nfft / 2 + 1, 0.0);
  for (std::size_t k = 0; k < out.freq.size(); ++k) {
    out.freq[k] = fs * static_cast<double>(k) / static_cast<double>(nfft);
  }
  const std::size_t hop = segment / 2;
  std::size_t count = 0;
  for (std::size_t start = 0; count == 0 || start + segment <= x.size(); start += hop) {
    std::fill_n(time.get(), nfft, 0.0);
    const std::size_t len = std::min(segment, x.size() - std::min(start, x.size()));
    for (std::size_t i = 0; i < len; ++i) time[i] = x[start + i] * window[i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < out.power.size(); ++k) {
      out.power[k] += freq[k][0] * freq[k][0] + freq[k][1] * freq[k][1];
    }
    ++count;
    if (start + segment >= x.size()) break;
  }
  const double scale = 1.0 / (fs * wss * static_cast<double>(count));
  for (std::size_t k = 0; k < out.power.size(); ++k) {
    const bool edge = k == 0 || (nfft % 2 == 0 && k == out.power.size() - 1);
    out.power[k] *= scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

double band_power_fraction(const Spectrum& s, double lo_hz, double hi_hz) {
  double total = 0.0;
  double band = 0.0;
  for (std::size_t k = 0; k < s.power.size(); ++k) {
    total += s.power[k];
    if (s.freq[k] >= lo_hz && s.freq[k] < hi_hz) band += s.power[k];
  }
  return total > 0.0 ? band / total : 0.0;
}

const std::vector<BandSpec>& band_registry() {
  static const std::vector<BandSpec> registry = make_registry();
  return registry;
}

const BandSpec& band_by_name(std::string_view name) {
  const std::string_view key = name == "combined" ? std::string_view("broadband") : name;
  for (const auto& b : band_registry()) {
    if (b.name == key) return b;
  }
  fail(ErrorCode::kInvalidArgument, "unknown band '" + std::string(name) + "'");
}

}  // namespace neuroair::filters
