#pragma once

// Band log-power features: P_band = log( sum of PSD over the band's bins ).

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "eeg_data.hpp"
#include "error.hpp"
#include "features.hpp"
#include "fft.hpp"

namespace eegwl {

struct Psd {
  std::vector<double> freqs;   // ascending, Hz
  std::vector<double> values;  // one-sided density

  double bin_width() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

enum class PsdMethod {
  Welch,        // Hann, overlapping segments, averaged periodograms
  Rectangular,  // single full-length periodogram; used by the DFT oracle tests
};

struct PsdOptions {
  PsdMethod method = PsdMethod::Welch;
  double segment_s = 4.0;
  double overlap = 0.5;
  double min_duration_s = 8.0;
};

namespace detail {

// One-sided density of a (possibly windowed) segment of length n.
inline void accumulate_periodogram(std::span<const double> seg, std::span<const double> window,
                                   double fs, std::vector<double>& acc) {
  const std::size_t n = seg.size();
  double mean = 0.0;
  if (!window.empty()) {
    for (double v : seg) mean += v;
    mean /= static_cast<double>(n);
  }
  std::vector<double> buf(n);
  double wss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = window.empty() ? 1.0 : window[i];
    buf[i] = (seg[i] - mean) * w;
    wss += w * w;
  }
  const auto spec = fft::rfft(buf, n);
  const double scale = 1.0 / (fs * wss);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    double p = std::norm(spec[k]) * scale;
    const bool edge = (k == 0) || (n % 2 == 0 && k == n / 2);
    if (!edge) p *= 2.0;
    acc[k] += p;
  }
}

}  // namespace detail

inline Psd compute_psd(std::span<const double> x, double fs, const PsdOptions& opt = {}) {
  if (!(fs > 0.0)) throw Error(Errc::InvalidArgument, "sample rate must be positive");
  if (static_cast<double>(x.size()) < opt.min_duration_s * fs)
    throw Error(Errc::SignalTooShort, std::to_string(x.size()) + " samples at " +
                                          std::to_string(fs) + " Hz");
  for (double v : x)
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteSample, "non-finite sample in PSD input");

  Psd psd;
  if (opt.method == PsdMethod::Rectangular) {
    const std::size_t n = x.size();
    psd.values.assign(n / 2 + 1, 0.0);
    detail::accumulate_periodogram(x, {}, fs, psd.values);
    psd.freqs.resize(psd.values.size());
    for (std::size_t k = 0; k < psd.freqs.size(); ++k)
      psd.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(n);
    return psd;
  }

  const auto nperseg = static_cast<std::size_t>(std::llround(opt.segment_s * fs));
  const auto noverlap = static_cast<std::size_t>(std::llround(opt.overlap * nperseg));
  const std::size_t step = nperseg - noverlap;
  if (nperseg < 2 || step == 0 || x.size() < nperseg)
    throw Error(Errc::SignalTooShort, "signal shorter than one Welch segment");

  std::vector<double> window(nperseg);
  for (std::size_t i = 0; i < nperseg; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(nperseg));

  psd.values.assign(nperseg / 2 + 1, 0.0);
  std::size_t count = 0;
  for (std::size_t start = 0; start + nperseg <= x.size(); start += step, ++count)
    detail::accumulate_periodogram(x.subspan(start, nperseg), window, fs, psd.values);
  for (double& v : psd.values) v /= static_cast<double>(count);
  psd.freqs.resize(psd.values.size());
  for (std::size_t k = 0; k < psd.freqs.size(); ++k)
    psd.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(nperseg);
  return psd;
}

/// Natural log of the summed density over grid frequencies in [lo, hi).
inline double band_log_power(const Psd& psd, const BandDef& band) {
  double sum = 0.0;
  std::size_t bins = 0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    if (psd.freqs[k] >= band.lo_hz && psd.freqs[k] < band.hi_hz) {
      sum += psd.values[k];
      ++bins;
    }
  }
  if (bins == 0) throw Error(Errc::EmptyBand, to_string(band.name) + " has no grid frequency");
  if (sum == 0.0) throw Error(Errc::DegenerateSignal, "zero power in " + to_string(band.name));
  return std::log(sum);
}

/// One spectral estimate over the whole trial per channel; 3 values per channel.
inline SpectralFeatureVector extract_spectral(const Recording& rec, const BandSet& bands,
                                              const PsdOptions& opt = {}) {
  SpectralFeatureVector out;
  out.kind = FeatureKind::Spectral;
  out.entries.reserve(rec.n_channels() * bands.size());
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    const auto& name = rec.channels[c].name;
    try {
      const auto psd = compute_psd(rec.channel(c), rec.fs, opt);
      for (const auto& b : bands) out.entries.push_back({name, b.name, band_log_power(psd, b)});
    } catch (const Error& e) {
      throw Error(e.code(), "channel " + name + ": " + e.what());
    }
  }
  return out;
}

inline SpectralFeatureVector baseline_normalize_spectral(const SpectralFeatureVector& test,
                                                         const SpectralFeatureVector& baseline) {
  if (test.kind != FeatureKind::Spectral || baseline.kind != FeatureKind::Spectral)
    throw Error(Errc::ShapeMismatch, "expected spectral feature vectors");
  return subtract_baseline(test, baseline);
}

}  // namespace eegwl
