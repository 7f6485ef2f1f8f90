#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <string>
#include <vector>

#include "error.hpp"

namespace eegwl {

enum class Band { Theta, Alpha, Beta };

inline std::string to_string(Band b) {
  switch (b) {
    case Band::Theta: return "Theta";
    case Band::Alpha: return "Alpha";
    default: return "Beta";
  }
}

inline Band parse_band(std::string_view s) {
  if (s == "Theta") return Band::Theta;
  if (s == "Alpha") return Band::Alpha;
  if (s == "Beta") return Band::Beta;
  throw Error(Errc::InvalidArgument, "unknown band '" + std::string(s) + "'");
}

/// Half-open frequency interval [lo_hz, hi_hz).
struct BandDef {
  Band name;
  double lo_hz;
  double hi_hz;
  double center() const { return 0.5 * (lo_hz + hi_hz); }
  friend bool operator==(const BandDef&, const BandDef&) = default;
};

using BandSet = std::array<BandDef, 3>;

inline BandSet default_bands() {
  return {BandDef{Band::Theta, 4.0, 8.0}, BandDef{Band::Alpha, 8.0, 13.0},
          BandDef{Band::Beta, 13.0, 30.0}};
}

/// Bands must lie strictly inside (0, 45) Hz, be ordered theta/alpha/beta, and not overlap.
inline void validate_bands(const BandSet& bands, double max_hz = 45.0) {
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto& b = bands[i];
    if (b.name != static_cast<Band>(i))
      throw Error(Errc::InvalidArgument, "bands must be ordered Theta, Alpha, Beta");
    if (!(b.lo_hz > 0.0 && b.lo_hz < b.hi_hz && b.hi_hz < max_hz))
      throw Error(Errc::InvalidArgument, "invalid edges for band " + to_string(b.name));
    if (i > 0 && bands[i - 1].hi_hz > b.lo_hz)
      throw Error(Errc::InvalidArgument, "bands overlap at " + to_string(b.name));
  }
}

enum class FeatureKind { Spectral, Plv };

inline std::string to_string(FeatureKind k) { return k == FeatureKind::Spectral ? "spectral" : "plv"; }

struct FeatureEntry {
  std::string channel;
  Band band;
  double value;
  friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

/// Ordered (channel, band) -> value. Channels follow montage order with
/// bands theta, alpha, beta inside each channel.
struct FeatureVector {
  FeatureKind kind = FeatureKind::Spectral;
  std::vector<FeatureEntry> entries;
  bool normalized = false;

  std::size_t size() const { return entries.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

using SpectralFeatureVector = FeatureVector;
using PlvFeatureVector = FeatureVector;

/// Display name used in rankings, e.g. "Theta Oz" or "Beta P4 (PLV)".
inline std::string feature_name(FeatureKind kind, const FeatureEntry& e) {
  auto name = to_string(e.band) + " " + e.channel;
  if (kind == FeatureKind::Plv) name += " (PLV)";
  return name;
}

inline std::vector<std::string> feature_names(const FeatureVector& v) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v.entries) out.push_back(feature_name(v.kind, e));
  return out;
}

/// Entrywise test - baseline for two unnormalized vectors of the same layout.
inline FeatureVector subtract_baseline(const FeatureVector& test, const FeatureVector& baseline) {
  if (test.normalized || baseline.normalized)
    throw Error(Errc::DoubleNormalization, "input vector is already baseline-normalized");
  if (test.kind != baseline.kind || test.size() != baseline.size())
    throw Error(Errc::ShapeMismatch, "test and baseline vectors differ in layout");
  FeatureVector out = test;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& t = test.entries[i];
    const auto& b = baseline.entries[i];
    if (t.channel != b.channel || t.band != b.band)
      throw Error(Errc::ShapeMismatch, "entry " + std::to_string(i) + " differs in channel/band");
    out.entries[i].value = t.value - b.value;
  }
  out.normalized = true;
  return out;
}

// FEAT1 serialization --------------------------------------------------------

inline nlohmann::json to_json(const FeatureVector& v) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : v.entries)
    entries.push_back({{"channel", e.channel}, {"band", to_string(e.band)}, {"value", e.value}});
  return {{"schema", "FEAT1"},
          {"kind", to_string(v.kind)},
          {"normalized", v.normalized},
          {"entries", entries}};
}

inline FeatureVector feature_vector_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "FEAT1")
      throw Error(Errc::InvalidArgument, "expected FEAT1 schema");
    FeatureVector v;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "spectral")
      v.kind = FeatureKind::Spectral;
    else if (kind == "plv")
      v.kind = FeatureKind::Plv;
    else
      throw Error(Errc::InvalidArgument, "unknown feature kind '" + kind + "'");
    v.normalized = j.at("normalized").get<bool>();
    for (const auto& e : j.at("entries"))
      v.entries.push_back({e.at("channel").get<std::string>(),
                           parse_band(e.at("band").get<std::string>()), e.at("value").get<double>()});
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed FEAT1 document: ") + e.what());
  }
}

}  // namespace eegwl
