#pragma once

// EEG recordings: data model, EEGR file format, montage selection and
// zero-phase low-pass filtering.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "error.hpp"

namespace eegwl {

enum class Region { Frontal, Parietal, Other };
enum class Condition { VR, Desktop };
enum class Task { MediumTurn, SpeedChange };
enum class Phase { Baseline, Test };

inline std::string to_string(Condition c) { return c == Condition::VR ? "VR" : "Desktop"; }
inline std::string to_string(Task t) { return t == Task::MediumTurn ? "MediumTurn" : "SpeedChange"; }
inline std::string to_string(Phase p) { return p == Phase::Baseline ? "Baseline" : "Test"; }
inline std::string to_string(Region r) {
  switch (r) {
    case Region::Frontal: return "Frontal";
    case Region::Parietal: return "Parietal";
    default: return "Other";
  }
}

inline Condition parse_condition(std::string_view s) {
  if (s == "VR") return Condition::VR;
  if (s == "Desktop") return Condition::Desktop;
  throw Error(Errc::InvalidArgument, "unknown condition '" + std::string(s) + "'");
}
inline Task parse_task(std::string_view s) {
  if (s == "MediumTurn") return Task::MediumTurn;
  if (s == "SpeedChange") return Task::SpeedChange;
  throw Error(Errc::InvalidArgument, "unknown task '" + std::string(s) + "'");
}
inline Phase parse_phase(std::string_view s) {
  if (s == "Baseline") return Phase::Baseline;
  if (s == "Test") return Phase::Test;
  throw Error(Errc::InvalidArgument, "unknown phase '" + std::string(s) + "'");
}

struct Channel {
  std::string name;
  Region region = Region::Other;
  friend bool operator==(const Channel&, const Channel&) = default;
};

inline Region region_of(std::string_view name) {
  static constexpr std::array<std::string_view, 5> frontal{"F7", "F3", "Fz", "F4", "F8"};
  static constexpr std::array<std::string_view, 5> parietal{"P3", "Pz", "P4", "PO7", "PO8"};
  if (std::ranges::find(frontal, name) != frontal.end()) return Region::Frontal;
  if (std::ranges::find(parietal, name) != parietal.end()) return Region::Parietal;
  return Region::Other;
}

inline std::vector<Channel> make_montage(std::span<const std::string_view> names) {
  std::vector<Channel> out;
  out.reserve(names.size());
  for (auto n : names) out.push_back({std::string(n), region_of(n)});
  return out;
}

/// The 14-electrode analysis montage.
inline std::vector<Channel> canonical_montage() {
  static constexpr std::array<std::string_view, 14> names{
      "F7", "F3", "Fz", "F4", "F8", "T7", "Cz", "T8", "P3", "Pz", "P4", "PO7", "PO8", "Oz"};
  return make_montage(names);
}

/// A 32-electrode 10-20 layout that contains the canonical 14.
inline std::vector<Channel> extended_montage_32() {
  static constexpr std::array<std::string_view, 32> names{
      "Fp1", "Fp2", "F7",  "F3",  "Fz",  "F4",  "F8",  "FC5", "FC1", "FC2", "FC6",
      "T7",  "C3",  "Cz",  "C4",  "T8",  "CP5", "CP1", "CP2", "CP6", "P7",  "P3",
      "Pz",  "P4",  "P8",  "PO7", "PO3", "PO4", "PO8", "O1",  "Oz",  "O2"};
  return make_montage(names);
}

/// Row-major so each channel is a contiguous span.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Recording {
  std::string subject_id;
  Condition condition = Condition::Desktop;
  Task task = Task::MediumTurn;
  Phase phase = Phase::Test;
  int order = 1;
  double fs = 128.0;
  std::vector<Channel> channels;
  SampleMatrix samples;  // [n_channels x n_samples], microvolts

  std::size_t n_channels() const { return channels.size(); }
  std::size_t n_samples() const { return static_cast<std::size_t>(samples.cols()); }
  std::span<const double> channel(std::size_t i) const {
    return {samples.row(static_cast<Eigen::Index>(i)).data(), n_samples()};
  }
  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
      if (channels[i].name == name) return i;
    return std::nullopt;
  }
};

inline void validate(const Recording& rec) {
  if (!(rec.fs > 0.0) || !std::isfinite(rec.fs))
    throw Error(Errc::InvalidArgument, "sample rate must be positive");
  if (static_cast<std::size_t>(rec.samples.rows()) != rec.channels.size())
    throw Error(Errc::ShapeMismatch, "sample rows do not match channel count");
  if (!rec.samples.allFinite()) throw Error(Errc::NonFiniteSample, "recording " + rec.subject_id);
}

/// Test-phase recordings must span exactly the configured task duration.
inline void check_task_duration(const Recording& rec, double duration_s) {
  if (rec.phase != Phase::Test) return;
  const auto expected = static_cast<std::size_t>(std::llround(duration_s * rec.fs));
  if (rec.n_samples() != expected)
    throw Error(Errc::ShapeMismatch, "test recording of " + rec.subject_id + "/" +
                                         to_string(rec.condition) + " has " +
                                         std::to_string(rec.n_samples()) + " samples, expected " +
                                         std::to_string(expected));
}

// ---------------------------------------------------------------------------
// EEGR file format: one JSON header line, then float32 little-endian samples,
// channel-major.

inline nlohmann::json eegr_header(const Recording& rec) {
  nlohmann::json names = nlohmann::json::array();
  for (const auto& c : rec.channels) names.push_back(c.name);
  return {{"format", "EEGR1"},
          {"subject_id", rec.subject_id},
          {"condition", to_string(rec.condition)},
          {"task", to_string(rec.task)},
          {"phase", to_string(rec.phase)},
          {"order", rec.order},
          {"fs", rec.fs},
          {"n_channels", rec.n_channels()},
          {"n_samples", rec.n_samples()},
          {"channels", names}};
}

namespace detail {
inline std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  return v;
}
}  // namespace detail

/// `provenance`, when given, is stored in the header and ignored on load.
inline void write_recording(const Recording& rec, const std::filesystem::path& path,
                            const nlohmann::json& provenance = nullptr) {
  validate(rec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  auto header = eegr_header(rec);
  if (!provenance.is_null()) header["provenance"] = provenance;
  out << header.dump() << '\n';
  std::vector<std::uint32_t> buf(rec.n_samples());
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto row = rec.channel(c);
    for (std::size_t i = 0; i < row.size(); ++i) {
      const float f = static_cast<float>(row[i]);
      buf[i] = detail::to_little_endian(std::bit_cast<std::uint32_t>(f));
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
  }
  if (!out) throw Error(Errc::InvalidArgument, "write failed for " + path.string());
}

inline Recording load_recording(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingRecording, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, "empty file " + path.string());

  Recording rec;
  std::size_t n_channels = 0, n_samples = 0;
  try {
    const auto h = nlohmann::json::parse(line);
    if (h.at("format").get<std::string>() != "EEGR1")
      throw Error(Errc::MalformedHeader, "unsupported format in " + path.string());
    rec.subject_id = h.at("subject_id").get<std::string>();
    rec.condition = parse_condition(h.at("condition").get<std::string>());
    rec.task = parse_task(h.at("task").get<std::string>());
    rec.phase = parse_phase(h.at("phase").get<std::string>());
    rec.order = h.at("order").get<int>();
    rec.fs = h.at("fs").get<double>();
    n_channels = h.at("n_channels").get<std::size_t>();
    n_samples = h.at("n_samples").get<std::size_t>();
    for (const auto& n : h.at("channels")) {
      auto name = n.get<std::string>();
      rec.channels.push_back({name, region_of(name)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedHeader, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedHeader) throw;
    throw Error(Errc::MalformedHeader, path.string() + ": " + e.what());
  }
  if (rec.channels.size() != n_channels)
    throw Error(Errc::MalformedHeader, "channel list length differs from n_channels");
  if (!(rec.fs > 0.0)) throw Error(Errc::MalformedHeader, "fs must be positive");

  const auto payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto payload_bytes = static_cast<std::uint64_t>(in.tellg() - payload_start);
  const std::uint64_t expected = static_cast<std::uint64_t>(n_channels) * n_samples * 4u;
  if (payload_bytes != expected)
    throw Error(Errc::SampleCountMismatch, path.string() + ": payload has " +
                                               std::to_string(payload_bytes) + " bytes, expected " +
                                               std::to_string(expected));
  in.seekg(payload_start);

  rec.samples.resize(static_cast<Eigen::Index>(n_channels), static_cast<Eigen::Index>(n_samples));
  std::vector<std::uint32_t> buf(n_samples);
  for (std::size_t c = 0; c < n_channels; ++c) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(n_samples * sizeof(std::uint32_t)));
    for (std::size_t i = 0; i < n_samples; ++i) {
      const float f = std::bit_cast<float>(detail::to_little_endian(buf[i]));
      if (!std::isfinite(f))
        throw Error(Errc::NonFiniteSample, path.string() + ": channel " + rec.channels[c].name +
                                               " sample " + std::to_string(i));
      rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = f;
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------

inline Recording select_montage(const Recording& rec, std::span<const Channel> montage) {
  Recording out = rec;
  out.channels.assign(montage.begin(), montage.end());
  out.samples.resize(static_cast<Eigen::Index>(montage.size()), rec.samples.cols());
  for (std::size_t i = 0; i < montage.size(); ++i) {
    auto idx = rec.index_of(montage[i].name);
    if (!idx) throw Error(Errc::MissingChannel, montage[i].name);
    out.samples.row(static_cast<Eigen::Index>(i)) =
        rec.samples.row(static_cast<Eigen::Index>(*idx));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Butterworth low-pass as second-order sections, applied forward-backward.

struct Biquad {
  double b0, b1, b2, a1, a2;  // a0 == 1
};

inline std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double fs) {
  if (order < 2 || order % 2 != 0)
    throw Error(Errc::InvalidArgument, "butterworth order must be even");
  constexpr double pi = std::numbers::pi;
  const double warped = 2.0 * fs * std::tan(pi * cutoff_hz / fs);
  std::vector<Biquad> sections;
  for (int k = 1; k <= order / 2; ++k) {
    const double angle = pi * (2.0 * k + order - 1.0) / (2.0 * order);
    const std::complex<double> s_pole = warped * std::polar(1.0, angle);
    const std::complex<double> z_pole = (2.0 * fs + s_pole) / (2.0 * fs - s_pole);
    const double a1 = -2.0 * z_pole.real();
    const double a2 = std::norm(z_pole);
    const double g = (1.0 + a1 + a2) / 4.0;  // unit DC gain, zeros at z = -1
    sections.push_back({g, 2.0 * g, g, a1, a2});
  }
  return sections;
}

/// Closed-form squared magnitude of the digital Butterworth response.
inline double butterworth_gain_squared(int order, double f_hz, double cutoff_hz, double fs) {
  constexpr double pi = std::numbers::pi;
  const double r = std::tan(pi * f_hz / fs) / std::tan(pi * cutoff_hz / fs);
  return 1.0 / (1.0 + std::pow(r, 2.0 * order));
}

namespace detail {

inline void sosfilt_inplace(std::span<const Biquad> sos, std::span<double> x) {
  if (x.empty()) return;
  double dc = x.front();  // steady-state start for a constant input
  for (const auto& s : sos) {
    const double y_ss = dc * (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    double z2 = s.b2 * dc - s.a2 * y_ss;
    double z1 = s.b1 * dc - s.a1 * y_ss + z2;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    dc = y_ss;
  }
}

}  // namespace detail

/// Zero-phase filtering with odd-reflection padding of `pad` samples per end.
inline std::vector<double> filtfilt(std::span<const Biquad> sos, std::span<const double> x,
                                    std::size_t pad) {
  const std::size_t n = x.size();
  if (n <= pad) throw Error(Errc::SignalTooShort, "signal shorter than filter padding");
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    ext[i] = 2.0 * x[0] - x[pad - i];
    ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  detail::sosfilt_inplace(sos, ext);
  std::ranges::reverse(ext);
  detail::sosfilt_inplace(sos, ext);
  std::ranges::reverse(ext);
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

inline constexpr int kLowpassOrder = 4;

inline Recording lowpass_filter(const Recording& rec, double cutoff_hz) {
  if (!(cutoff_hz > 0.0)) throw Error(Errc::InvalidArgument, "cutoff must be positive");
  if (cutoff_hz >= rec.fs / 2.0)
    throw Error(Errc::CutoffAboveNyquist, std::to_string(cutoff_hz) + " Hz at fs " +
                                              std::to_string(rec.fs));
  const auto sos = butterworth_lowpass(kLowpassOrder, cutoff_hz, rec.fs);
  Recording out = rec;
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto y = filtfilt(sos, rec.channel(c), 3 * kLowpassOrder);
    std::copy(y.begin(), y.end(), out.samples.row(static_cast<Eigen::Index>(c)).data());
  }
  return out;
}

// ---------------------------------------------------------------------------

using RecordingKey = std::tuple<std::string, Condition, Phase>;

class RecordingSet {
 public:
  void add(Recording rec) {
    RecordingKey key{rec.subject_id, rec.condition, rec.phase};
    index_[key] = recordings_.size();
    recordings_.push_back(std::move(rec));
  }

  const std::vector<Recording>& recordings() const { return recordings_; }

  const Recording* find(const std::string& subject, Condition c, Phase p) const {
    auto it = index_.find({subject, c, p});
    return it == index_.end() ? nullptr : &recordings_[it->second];
  }

  /// Every test recording needs a baseline from the same subject and condition.
  void check_baselines() const {
    for (const auto& r : recordings_) {
      if (r.phase != Phase::Test) continue;
      if (!find(r.subject_id, r.condition, Phase::Baseline))
        throw Error(Errc::MissingRecording,
                    "no baseline recording for " + r.subject_id + "/" + to_string(r.condition));
    }
  }

 private:
  std::vector<Recording> recordings_;
  std::map<RecordingKey, std::size_t> index_;
};

}  // namespace eegwl
