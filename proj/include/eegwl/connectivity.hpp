#pragma once

// Fronto-parietal phase-locking features. Phases come from complex Morlet
// convolution; PLV is the modulus of the time-averaged unit phasor of the
// phase difference, averaged over a grid of centre frequencies per band.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "eeg_data.hpp"
#include "error.hpp"
#include "features.hpp"
#include "fft.hpp"

namespace eegwl {

struct WaveletConfig {
  double n_cycles = 7.0;
  int n_freqs = 5;
  /// Wavelet half-support in Gaussian standard deviations.
  double support_sigmas = 5.0;
};

struct PhaseSeries {
  std::string channel;
  double freq_hz = 0.0;
  std::vector<double> phases;  // (-pi, pi]
  // Samples outside [valid_begin, valid_end) are within half a wavelet
  // support of the trial edges and are excluded from PLV averages.
  std::size_t valid_begin = 0;
  std::size_t valid_end = 0;
};

struct MorletKernel {
  std::vector<std::complex<double>> taps;  // taps[j] is the wavelet at lag j - half
  std::size_t half = 0;
};

inline MorletKernel morlet_kernel(double fs, double freq_hz, const WaveletConfig& cfg) {
  constexpr double pi = std::numbers::pi;
  const double sigma_t = cfg.n_cycles / (2.0 * pi * freq_hz);
  MorletKernel k;
  k.half = static_cast<std::size_t>(std::ceil(cfg.support_sigmas * sigma_t * fs));
  k.taps.resize(2 * k.half + 1);
  double norm = 0.0;
  for (std::size_t j = 0; j < k.taps.size(); ++j) {
    const double t = (static_cast<double>(j) - static_cast<double>(k.half)) / fs;
    const double g = std::exp(-t * t / (2.0 * sigma_t * sigma_t));
    k.taps[j] = std::polar(g, 2.0 * pi * freq_hz * t);
    norm += g;
  }
  for (auto& v : k.taps) v /= norm;
  return k;
}

namespace detail {

inline void check_wavelet_args(std::size_t n, double fs, double freq_hz, const WaveletConfig& cfg,
                               const MorletKernel& k) {
  if (!(freq_hz > 0.0)) throw Error(Errc::InvalidArgument, "centre frequency must be positive");
  if (freq_hz >= fs / 2.0)
    throw Error(Errc::FrequencyAboveNyquist, std::to_string(freq_hz) + " Hz at fs " +
                                                 std::to_string(fs));
  if (cfg.n_cycles < 3.0) throw Error(Errc::InvalidArgument, "n_cycles must be >= 3");
  if (n <= k.taps.size())
    throw Error(Errc::SignalShorterThanWavelet,
                std::to_string(n) + " samples vs wavelet of " + std::to_string(k.taps.size()));
}

/// Full complex spectrum of a real signal zero-padded to fft_len.
inline fft::ComplexVec real_spectrum(std::span<const double> x, std::size_t fft_len) {
  const auto half = fft::rfft(x, fft_len);
  fft::ComplexVec full(fft_len);
  for (std::size_t k = 0; k < half.size(); ++k) full[k] = half[k];
  for (std::size_t k = half.size(); k < fft_len; ++k) full[k] = std::conj(half[fft_len - k]);
  return full;
}

inline fft::ComplexVec kernel_spectrum(const MorletKernel& k, std::size_t fft_len) {
  fft::ComplexVec buf(fft_len, {0.0, 0.0});
  std::copy(k.taps.begin(), k.taps.end(), buf.begin());
  fft::transform(buf, false);
  return buf;
}

/// c[i] = sum_m x[i - m] w[m], m in [-half, half], for i in [0, n).
inline std::vector<std::complex<double>> convolve_spectra(const fft::ComplexVec& xs,
                                                          const fft::ComplexVec& ks,
                                                          std::size_t n, std::size_t half) {
  fft::ComplexVec prod(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) prod[i] = xs[i] * ks[i];
  fft::transform(prod, true);
  const double inv = 1.0 / static_cast<double>(xs.size());
  std::vector<std::complex<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = prod[i + half] * inv;
  return out;
}

inline std::size_t conv_fft_len(std::size_t n, const MorletKernel& k) {
  return fft::fast_size(n + k.taps.size() - 1);
}

}  // namespace detail

/// Complex Morlet coefficients of x at one centre frequency (length n).
inline std::vector<std::complex<double>> morlet_coefficients(std::span<const double> x, double fs,
                                                             double freq_hz,
                                                             const WaveletConfig& cfg,
                                                             std::size_t* half_out = nullptr) {
  const auto k = morlet_kernel(fs, freq_hz, cfg);
  detail::check_wavelet_args(x.size(), fs, freq_hz, cfg, k);
  const auto len = detail::conv_fft_len(x.size(), k);
  if (half_out) *half_out = k.half;
  return detail::convolve_spectra(detail::real_spectrum(x, len), detail::kernel_spectrum(k, len),
                                  x.size(), k.half);
}

inline PhaseSeries morlet_phase(std::span<const double> x, double fs, double freq_hz,
                                double n_cycles, std::string channel = {}) {
  WaveletConfig cfg;
  cfg.n_cycles = n_cycles;
  std::size_t half = 0;
  const auto coef = morlet_coefficients(x, fs, freq_hz, cfg, &half);
  PhaseSeries ps;
  ps.channel = std::move(channel);
  ps.freq_hz = freq_hz;
  ps.valid_begin = half;
  ps.valid_end = x.size() - half;
  ps.phases.resize(x.size());
  for (std::size_t i = 0; i < coef.size(); ++i) {
    if (i >= ps.valid_begin && i < ps.valid_end && std::abs(coef[i]) == 0.0)
      throw Error(Errc::SignalDegenerate, "zero-magnitude wavelet coefficient at sample " +
                                              std::to_string(i));
    ps.phases[i] = std::arg(coef[i]);
  }
  return ps;
}

inline double plv_pair(const PhaseSeries& pk, const PhaseSeries& pl) {
  if (pk.phases.size() != pl.phases.size())
    throw Error(Errc::LengthMismatch, pk.channel + " vs " + pl.channel);
  if (pk.freq_hz != pl.freq_hz)
    throw Error(Errc::FrequencyMismatch, pk.channel + " vs " + pl.channel);
  const std::size_t begin = std::max(pk.valid_begin, pl.valid_begin);
  const std::size_t end = std::min(pk.valid_end, pl.valid_end);
  if (end <= begin) throw Error(Errc::LengthMismatch, "no retained samples");
  double re = 0.0, im = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double d = pk.phases[i] - pl.phases[i];
    re += std::cos(d);
    im += std::sin(d);
  }
  const double n = static_cast<double>(end - begin);
  return std::min(1.0, std::hypot(re, im) / n);
}

/// Evenly spaced centres: midpoints of n equal sub-intervals of the band.
inline std::vector<double> band_centres(const BandDef& band, int n_freqs) {
  if (n_freqs < 1) throw Error(Errc::InvalidArgument, "n_freqs must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(n_freqs));
  const double w = (band.hi_hz - band.lo_hz) / n_freqs;
  for (int i = 0; i < n_freqs; ++i) out[static_cast<std::size_t>(i)] = band.lo_hz + (i + 0.5) * w;
  return out;
}

namespace detail {

// Unit phasors of the retained samples.
struct PhasorSeries {
  std::vector<std::complex<double>> z;
  std::size_t begin = 0;
};

inline PhasorSeries unit_phasors(const std::vector<std::complex<double>>& coef, std::size_t half,
                                 const std::string& channel) {
  PhasorSeries p;
  p.begin = half;
  p.z.reserve(coef.size() - 2 * half);
  for (std::size_t i = half; i + half < coef.size(); ++i) {
    const double m = std::abs(coef[i]);
    if (m == 0.0)
      throw Error(Errc::SignalDegenerate, "zero-magnitude wavelet coefficient in " + channel);
    p.z.push_back(coef[i] / m);
  }
  return p;
}

inline double phasor_plv(const PhasorSeries& a, const PhasorSeries& b) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < a.z.size(); ++i) {
    const auto& u = a.z[i];
    const auto& v = b.z[i];
    re += u.real() * v.real() + u.imag() * v.imag();
    im += u.imag() * v.real() - u.real() * v.imag();
  }
  return std::min(1.0, std::hypot(re, im) / static_cast<double>(a.z.size()));
}

}  // namespace detail

/// PLV between two channels averaged over the band's centre-frequency grid.
inline double band_plv(std::span<const double> x, std::span<const double> y, double fs,
                       const BandDef& band, const WaveletConfig& cfg = {}) {
  if (x.size() != y.size()) throw Error(Errc::LengthMismatch, "channel lengths differ");
  double sum = 0.0;
  const auto centres = band_centres(band, cfg.n_freqs);
  for (double f : centres) {
    std::size_t half = 0;
    const auto cx = morlet_coefficients(x, fs, f, cfg, &half);
    const auto cy = morlet_coefficients(y, fs, f, cfg);
    sum += detail::phasor_plv(detail::unit_phasors(cx, half, "x"),
                              detail::unit_phasors(cy, half, "y"));
  }
  return sum / static_cast<double>(centres.size());
}

inline constexpr std::size_t kRegionSize = 5;

using PlvGrid = Eigen::Matrix<double, kRegionSize, kRegionSize>;

/// Frontal rows x parietal columns, one per band.
struct PlvMatrix {
  BandDef band{};
  std::vector<std::string> frontal;
  std::vector<std::string> parietal;
  PlvGrid values = PlvGrid::Zero();
  bool normalized = false;
  /// Median of the centre-frequency grid, reported alongside the values.
  double median_centre_hz = 0.0;
};

using PlvMatrixSet = std::array<PlvMatrix, 3>;

struct FrontoParietalPlv {
  PlvMatrixSet matrices;
  PlvFeatureVector features;
};

namespace detail {

struct RegionIndex {
  std::vector<std::size_t> frontal, parietal;
};

inline RegionIndex region_index(const Recording& rec) {
  RegionIndex idx;
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    if (rec.channels[c].region == Region::Frontal) idx.frontal.push_back(c);
    if (rec.channels[c].region == Region::Parietal) idx.parietal.push_back(c);
  }
  if (idx.frontal.size() != kRegionSize || idx.parietal.size() != kRegionSize)
    throw Error(Errc::MontageNotCanonical,
                "need 5 frontal and 5 parietal channels, got " + std::to_string(idx.frontal.size()) +
                    " and " + std::to_string(idx.parietal.size()));
  return idx;
}

inline double median_of(std::vector<double> v) {
  std::ranges::sort(v);
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Collapses per-pair matrices to one feature per fronto/parietal channel:
/// frontal = row mean, parietal = column mean. Channel order follows `order`.
inline PlvFeatureVector average_plv(const PlvMatrixSet& mats,
                                    const std::vector<std::string>& order) {
  PlvFeatureVector out;
  out.kind = FeatureKind::Plv;
  out.normalized = mats[0].normalized;
  for (const auto& name : order) {
    for (const auto& m : mats) {
      double v = 0.0;
      if (auto it = std::ranges::find(m.frontal, name); it != m.frontal.end()) {
        v = m.values.row(it - m.frontal.begin()).mean();
      } else if (auto jt = std::ranges::find(m.parietal, name); jt != m.parietal.end()) {
        v = m.values.col(jt - m.parietal.begin()).mean();
      } else {
        throw Error(Errc::ShapeMismatch, "channel " + name + " not in PLV matrix");
      }
      out.entries.push_back({name, m.band.name, v});
    }
  }
  return out;
}

inline std::vector<std::string> fronto_parietal_order(const PlvMatrix& m,
                                                      const std::vector<std::string>& montage) {
  std::vector<std::string> out;
  for (const auto& n : montage)
    if (std::ranges::find(m.frontal, n) != m.frontal.end() ||
        std::ranges::find(m.parietal, n) != m.parietal.end())
      out.push_back(n);
  return out;
}

inline FrontoParietalPlv fronto_parietal_plv(const Recording& rec, const BandSet& bands,
                                             const WaveletConfig& cfg = {}) {
  const auto idx = detail::region_index(rec);
  std::array<std::size_t, 2 * kRegionSize> used{};
  std::ranges::copy(idx.frontal, used.begin());
  std::ranges::copy(idx.parietal, used.begin() + kRegionSize);

  FrontoParietalPlv result;
  std::vector<std::string> montage_names;
  for (const auto& c : rec.channels) montage_names.push_back(c.name);

  // Channel spectra are shared across centre frequencies with the same FFT length.
  std::size_t cached_len = 0;
  std::array<fft::ComplexVec, 2 * kRegionSize> spectra;

  for (std::size_t b = 0; b < bands.size(); ++b) {
    auto& m = result.matrices[b];
    m.band = bands[b];
    for (auto i : idx.frontal) m.frontal.push_back(rec.channels[i].name);
    for (auto i : idx.parietal) m.parietal.push_back(rec.channels[i].name);
    const auto centres = band_centres(bands[b], cfg.n_freqs);
    m.median_centre_hz = detail::median_of(centres);
    for (double f : centres) {
      const auto kernel = morlet_kernel(rec.fs, f, cfg);
      detail::check_wavelet_args(rec.n_samples(), rec.fs, f, cfg, kernel);
      const auto len = detail::conv_fft_len(rec.n_samples(), kernel);
      if (len != cached_len) {
        for (std::size_t u = 0; u < used.size(); ++u)
          spectra[u] = detail::real_spectrum(rec.channel(used[u]), len);
        cached_len = len;
      }
      const auto ks = detail::kernel_spectrum(kernel, len);
      std::array<detail::PhasorSeries, 2 * kRegionSize> ph;
      for (std::size_t u = 0; u < used.size(); ++u) {
        const auto coef = detail::convolve_spectra(spectra[u], ks, rec.n_samples(), kernel.half);
        ph[u] = detail::unit_phasors(coef, kernel.half, rec.channels[used[u]].name);
      }
      for (std::size_t r = 0; r < kRegionSize; ++r)
        for (std::size_t c = 0; c < kRegionSize; ++c)
          m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) +=
              detail::phasor_plv(ph[r], ph[kRegionSize + c]);
    }
    m.values /= static_cast<double>(centres.size());
  }
  result.features = average_plv(result.matrices,
                                fronto_parietal_order(result.matrices[0], montage_names));
  return result;
}

/// Per-pair test - baseline, then the same row/column averaging.
inline PlvFeatureVector baseline_normalize_plv(const PlvMatrixSet& test,
                                               const PlvMatrixSet& baseline,
                                               const std::vector<std::string>& channel_order) {
  PlvMatrixSet corrected = test;
  for (std::size_t b = 0; b < test.size(); ++b) {
    if (test[b].normalized || baseline[b].normalized)
      throw Error(Errc::DoubleNormalization, "PLV matrix is already baseline-normalized");
    if (test[b].band != baseline[b].band || test[b].frontal != baseline[b].frontal ||
        test[b].parietal != baseline[b].parietal)
      throw Error(Errc::ShapeMismatch, "test and baseline PLV matrices differ in layout");
    corrected[b].values = test[b].values - baseline[b].values;
    corrected[b].normalized = true;
  }
  return average_plv(corrected, channel_order);
}

inline void write_plv_csv(std::ostream& os, const PlvMatrix& m) {
  os << to_string(m.band.name);
  for (const auto& p : m.parietal) os << ',' << p;
  os << '\n';
  for (std::size_t r = 0; r < m.frontal.size(); ++r) {
    os << m.frontal[r];
    for (std::size_t c = 0; c < m.parietal.size(); ++c)
      os << ',' << m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    os << '\n';
  }
}

}  // namespace eegwl
