#pragma once

// Synthetic EEG and NASA-TLX with planted effects. Each channel is pink
// noise plus one oscillator per band. Power effects scale oscillator
// amplitudes in the High-class test phase; coupling effects tie a parietal
// oscillator's phase to a frontal one through von Mises jitter.

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "eeg_data.hpp"
#include "features.hpp"
#include "fft.hpp"
#include "labeling.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace eegwl {

enum class WorkloadClass { Low, High };
inline std::string to_string(WorkloadClass c) { return c == WorkloadClass::Low ? "Low" : "High"; }

struct PowerEffect {
  std::string channel;
  Band band;
  double ratio;  // amplitude, High / Low
};

struct CouplingEffect {
  std::string frontal;
  std::string parietal;
  Band band;
  double kappa_high;
  double kappa_low;
};

struct EffectSpec {
  std::vector<PowerEffect> power_effects;
  std::vector<CouplingEffect> coupling_effects;
  double noise = 10.0;  // pink-noise SD
  double fs = 128.0;
  double duration_s = 300.0;
  double baseline_duration_s = 60.0;
  double kappa_baseline = 0.0;
  std::array<double, 3> oscillator_hz{6.0, 10.5, 21.5};
  std::array<double, 3> oscillator_amplitude{15.0, 20.0, 10.0};
  double phase_diffusion = 2.0;  // rad^2 / s
  double gain_sd = 0.2;          // log-SD of the per-subject channel gain
  double jitter_hold_s = 1.0;
  double jitter_fade_s = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    for (const auto& p : power_effects) {
      if (!(p.ratio > 0.0)) throw Error(Errc::InvalidConfig, "amplitude ratio must be positive");
      if (region_of(p.channel) == Region::Other && p.channel != "T7" && p.channel != "T8" &&
          p.channel != "Cz" && p.channel != "Oz")
        throw Error(Errc::InvalidConfig, "power effect on unknown channel " + p.channel);
    }
    for (const auto& c : coupling_effects) {
      if (!(c.kappa_high >= 0.0) || !(c.kappa_low >= 0.0))
        throw Error(Errc::InvalidConfig, "kappa must be >= 0");
      if (region_of(c.frontal) != Region::Frontal || region_of(c.parietal) != Region::Parietal)
        throw Error(Errc::InvalidConfig, "coupling needs a frontal and a parietal channel");
    }
    if (!(kappa_baseline >= 0.0)) throw Error(Errc::InvalidConfig, "kappa must be >= 0");
    if (!(duration_s >= 60.0)) throw Error(Errc::InvalidConfig, "duration must be >= 60 s");
    if (!(baseline_duration_s >= 8.0)) throw Error(Errc::InvalidConfig, "baseline duration must be >= 8 s");
    if (!(fs > 2.0 * oscillator_hz[2])) throw Error(Errc::InvalidConfig, "fs too low for the oscillators");
    if (!(noise >= 0.0) || !(gain_sd >= 0.0) || !(phase_diffusion >= 0.0))
      throw Error(Errc::InvalidConfig, "noise, gain_sd and phase_diffusion must be >= 0");
    if (!(jitter_hold_s > 0.0) || !(jitter_fade_s >= 0.0) || jitter_fade_s > jitter_hold_s)
      throw Error(Errc::InvalidConfig, "need 0 <= jitter_fade_s <= jitter_hold_s");
  }
};

/// Named presets: none, power, connectivity, both.
inline EffectSpec effect_preset(std::string_view name) {
  EffectSpec s;
  const bool power = name == "power" || name == "both";
  const bool conn = name == "connectivity" || name == "both";
  if (!power && !conn && name != "none")
    throw Error(Errc::InvalidArgument, "unknown effect '" + std::string(name) + "'");
  if (power)
    s.power_effects = {{"Pz", Band::Alpha, 1.5}, {"Oz", Band::Theta, 1.5}, {"F7", Band::Alpha, 1.5}};
  if (conn)
    s.coupling_effects = {{"F3", "P3", Band::Alpha, 4.0, 0.0},
                          {"Fz", "Pz", Band::Beta, 4.0, 0.0},
                          {"F4", "P4", Band::Alpha, 4.0, 0.0}};
  return s;
}

struct RecordingIds {
  std::string subject_id;
  Condition condition = Condition::Desktop;
  Task task = Task::MediumTurn;
  int order = 1;
};

namespace detail {

/// 1/f-power noise scaled to the requested SD.
inline std::vector<double> pink_noise(std::size_t n, double sd, Rng& rng) {
  std::vector<double> out(n, 0.0);
  if (sd == 0.0) return out;
  const std::size_t m = fft::fast_size(n);
  std::normal_distribution<double> N(0.0, 1.0);
  fft::ComplexVec spec(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t f = std::min(k, m - k);  // |frequency| in bins
    const double g = f == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(f));
    const double re = N(rng), im = N(rng);
    spec[k] = {g * re, g * im};
  }
  fft::transform(spec, true);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += (out[i] = spec[i].real());
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (auto& v : out) ss += (v - mean) * (v - mean);
  const double scale = sd / std::sqrt(ss / static_cast<double>(n));
  for (auto& v : out) v = (v - mean) * scale;
  return out;
}

/// Phase of a band oscillator: linear drift plus a Gaussian random walk.
inline std::vector<double> oscillator_phase(std::size_t n, double fs, double f, double diffusion, Rng& rng) {
  std::vector<double> ph(n);
  std::uniform_real_distribution<double> U(-std::numbers::pi, std::numbers::pi);
  std::normal_distribution<double> N(0.0, std::sqrt(diffusion / fs));
  double p = U(rng);
  const double step = 2.0 * std::numbers::pi * f / fs;
  for (auto& v : ph) {
    v = p;
    p += step + N(rng);
  }
  return ph;
}

inline double wrap_pi(double x) { return std::remainder(x, 2.0 * std::numbers::pi); }

/// Piecewise von Mises jitter: a fresh draw every hold interval, reached by
/// a raised-cosine crossfade along the shorter arc.
inline std::vector<double> phase_jitter(std::size_t n, double fs, double kappa, double hold_s, double fade_s,
                                        Rng& rng) {
  std::vector<double> d(n);
  const auto hold = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(hold_s * fs)));
  const auto fade = std::min(hold, static_cast<std::size_t>(std::llround(fade_s * fs)));
  double prev = sample_von_mises(rng, 0.0, kappa);
  for (std::size_t start = 0; start < n; start += hold) {
    const double next = start == 0 ? prev : sample_von_mises(rng, 0.0, kappa);
    const double arc = wrap_pi(next - prev);
    for (std::size_t i = start; i < std::min(n, start + hold); ++i) {
      const std::size_t t = i - start;
      double w = 1.0;
      if (start > 0 && t < fade) w = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(t) / fade));
      d[i] = prev + w * arc;
    }
    prev = next;
  }
  return d;
}

inline double channel_gain(const EffectSpec& spec, const std::string& subject, const std::string& channel) {
  Rng rng(derive_seed(spec.seed, {hash_string("gain"), hash_string(subject), hash_string(channel)}));
  std::normal_distribution<double> N(0.0, spec.gain_sd);
  return std::exp(N(rng));
}

}  // namespace detail

/// One recording on the canonical 14-channel montage.
inline Recording gen_recording(const EffectSpec& spec, WorkloadClass cls, Phase phase, const RecordingIds& ids) {
  spec.validate();
  Recording rec;
  rec.subject_id = ids.subject_id;
  rec.condition = ids.condition;
  rec.task = ids.task;
  rec.order = ids.order;
  rec.phase = phase;
  rec.fs = spec.fs;
  rec.channels = canonical_montage();
  const double dur = phase == Phase::Test ? spec.duration_s : spec.baseline_duration_s;
  const auto n = static_cast<std::size_t>(std::llround(dur * spec.fs));
  const auto nc = rec.channels.size();
  rec.samples.resize(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(n));

  Rng rng(derive_seed(spec.seed, {hash_string(ids.subject_id), static_cast<std::uint64_t>(ids.condition),
                                  static_cast<std::uint64_t>(phase)}));
  const bool high_test = phase == Phase::Test && cls == WorkloadClass::High;

  // phases[channel][band]
  std::vector<std::array<std::vector<double>, 3>> phases(nc);
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t b = 0; b < 3; ++b)
      phases[c][b] = detail::oscillator_phase(n, spec.fs, spec.oscillator_hz[b], spec.phase_diffusion, rng);
  for (const auto& cp : spec.coupling_effects) {
    const auto f = *rec.index_of(cp.frontal);
    const auto p = *rec.index_of(cp.parietal);
    const auto b = static_cast<std::size_t>(cp.band);
    const double kappa =
        phase == Phase::Baseline ? spec.kappa_baseline : (cls == WorkloadClass::High ? cp.kappa_high : cp.kappa_low);
    const auto jitter = detail::phase_jitter(n, spec.fs, kappa, spec.jitter_hold_s, spec.jitter_fade_s, rng);
    for (std::size_t i = 0; i < n; ++i) phases[p][b][i] = phases[f][b][i] + jitter[i];
  }

  for (std::size_t c = 0; c < nc; ++c) {
    const auto& name = rec.channels[c].name;
    auto x = detail::pink_noise(n, spec.noise, rng);
    for (std::size_t b = 0; b < 3; ++b) {
      double amp = spec.oscillator_amplitude[b];
      if (high_test)
        for (const auto& pe : spec.power_effects)
          if (pe.channel == name && static_cast<std::size_t>(pe.band) == b) amp *= pe.ratio;
      for (std::size_t i = 0; i < n; ++i) x[i] += amp * std::cos(phases[c][b][i]);
    }
    const double g = detail::channel_gain(spec, ids.subject_id, name);
    auto row = rec.samples.row(static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < n; ++i) row(static_cast<Eigen::Index>(i)) = g * x[i];
  }
  return rec;
}

// Dataset plan and TLX ------------------------------------------------------------

/// How the ground-truth class of each session is set.
///  FromLabels: the class is the median-split residual label of the session's
///    own TLX (aggregated over label_subset), so labels and EEG agree exactly
///    unless misalignment flips them.
///  Planted: one High and one Low session per subject, chosen at random; the
///    High session's informative subscales get +class_shift/2, the Low -/2.
enum class ClassSource { FromLabels, Planted };

struct TlxParams {
  double intercept = 47.0;
  double group_variance = 258.82;
  double residual_variance = 50.0;
  double beta_condition = 3.87;  // VR - Desktop
  double beta_task = 0.14;       // SpeedChange - MediumTurn
  ClassSource class_source = ClassSource::FromLabels;
  SubscaleSet label_subset = SubscaleSet::four_scale();
  double class_shift = 20.0;  // Planted only
  double misalignment_rate = 0.0;
  SubscaleSet informative = SubscaleSet::full();
  double subscale_noise_sd = 0.0;
  double uninformative_noise_sd = 0.0;

  void validate() const {
    if (!(group_variance >= 0.0) || !(residual_variance >= 0.0))
      throw Error(Errc::InvalidConfig, "variances must be >= 0");
    if (!(misalignment_rate >= 0.0 && misalignment_rate <= 1.0))
      throw Error(Errc::InvalidConfig, "misalignment_rate must lie in [0, 1]");
    if (!(subscale_noise_sd >= 0.0) || !(uninformative_noise_sd >= 0.0))
      throw Error(Errc::InvalidConfig, "noise SDs must be >= 0");
  }
};

struct SampleTruth {
  RecordingIds ids;
  WorkloadClass eeg_class = WorkloadClass::Low;  // drives the planted EEG effect
  WorkloadClass tlx_class = WorkloadClass::Low;  // class the TLX scores express
};

struct SynthPlan {
  std::vector<SampleTruth> samples;  // subject-major, Desktop then VR
  std::vector<TlxRecord> tlx;
  std::vector<double> subject_intercepts;
};

inline std::string subject_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%02d", i + 1);
  return buf;
}

inline WorkloadClass flip(WorkloadClass c) {
  return c == WorkloadClass::High ? WorkloadClass::Low : WorkloadClass::High;
}

/// Tasks alternate within subject (VR gets SpeedChange for subjects 3-4,
/// 7-8, ...), VR comes first for odd-numbered subjects.
inline SynthPlan plan_dataset(int n_subjects, const EffectSpec& spec, const TlxParams& tlx) {
  if (n_subjects < 4) throw Error(Errc::InvalidArgument, "need at least 4 subjects");
  tlx.validate();
  SynthPlan plan;
  Rng rng(derive_seed(spec.seed, {hash_string("tlx")}));
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const bool planted = tlx.class_source == ClassSource::Planted;
  for (int i = 0; i < n_subjects; ++i) {
    const auto id = subject_name(i);
    const double u = std::sqrt(tlx.group_variance) * N(rng);
    plan.subject_intercepts.push_back(u);
    const bool vr_high = U(rng) < 0.5;
    const bool vr_first = i % 2 == 0;
    const bool vr_speed = (i / 2) % 2 == 1;
    for (Condition c : {Condition::Desktop, Condition::VR}) {
      const bool vr = c == Condition::VR;
      SampleTruth s;
      s.ids = {id, c, (vr == vr_speed) ? Task::SpeedChange : Task::MediumTurn, (vr == vr_first) ? 1 : 2};
      s.tlx_class = (vr == vr_high) ? WorkloadClass::High : WorkloadClass::Low;
      const double w = tlx.intercept + tlx.beta_condition * (vr ? 1 : 0) +
                       tlx.beta_task * (s.ids.task == Task::SpeedChange ? 1 : 0) + u +
                       std::sqrt(tlx.residual_variance) * N(rng);
      const double shift = planted ? tlx.class_shift * (s.tlx_class == WorkloadClass::High ? 0.5 : -0.5) : 0.0;
      TlxRecord r;
      r.subject_id = id;
      r.condition = c;
      r.task = s.ids.task;
      r.order = s.ids.order;
      for (std::size_t k = 0; k < kNumSubscales; ++k) {
        const bool inf = tlx.informative.contains(static_cast<Subscale>(k));
        const double sd = inf ? tlx.subscale_noise_sd : tlx.uninformative_noise_sd;
        const double v = w + (inf ? shift : 0.0) + sd * N(rng);
        r.scores[k] = std::clamp(v, 0.0, 100.0);
      }
      plan.samples.push_back(s);
      plan.tlx.push_back(r);
    }
  }
  if (!planted) {
    const auto labels = make_labels(plan.tlx, tlx.label_subset);
    for (std::size_t i = 0; i < plan.samples.size(); ++i)
      plan.samples[i].tlx_class =
          labels.split.labels[i] == WorkloadLabel::High ? WorkloadClass::High : WorkloadClass::Low;
  }
  for (auto& s : plan.samples) s.eeg_class = U(rng) < tlx.misalignment_rate ? flip(s.tlx_class) : s.tlx_class;
  return plan;
}

struct SynthDataset {
  SynthPlan plan;
  RecordingSet recordings;
};

inline SynthDataset gen_dataset(int n_subjects, const EffectSpec& spec, const TlxParams& tlx) {
  spec.validate();
  SynthDataset ds;
  ds.plan = plan_dataset(n_subjects, spec, tlx);
  for (const auto& s : ds.plan.samples)
    for (Phase p : {Phase::Baseline, Phase::Test}) ds.recordings.add(gen_recording(spec, s.eeg_class, p, s.ids));
  return ds;
}

/// Features straight from generated signals, two recordings in memory at a time.
inline FeatureDataset synth_features(const SynthPlan& plan, const EffectSpec& spec,
                                     const FeaturePipelineConfig& fcfg, unsigned jobs = 1) {
  spec.validate();
  validate_bands(fcfg.bands, fcfg.lowpass_hz);
  FeatureDataset ds;
  ds.rows.resize(plan.samples.size());
  std::vector<std::vector<std::string>> names(plan.samples.size());
  parallel_for(plan.samples.size(), jobs, [&](std::size_t i) {
    const auto& s = plan.samples[i];
    const auto test = gen_recording(spec, s.eeg_class, Phase::Test, s.ids);
    const auto base = gen_recording(spec, s.eeg_class, Phase::Baseline, s.ids);
    auto [n, v] = sample_features(test, base, fcfg);
    names[i] = std::move(n);
    ds.rows[i] = {{s.ids.subject_id, s.ids.condition}, s.ids.task, s.ids.order, std::move(v)};
  });
  if (!names.empty()) ds.names = names.front();
  return ds;
}

// Serialization ---------------------------------------------------------------------

inline nlohmann::json to_json(const EffectSpec& s) {
  nlohmann::json power = nlohmann::json::array(), coupling = nlohmann::json::array();
  for (const auto& p : s.power_effects)
    power.push_back({{"channel", p.channel}, {"band", to_string(p.band)}, {"ratio", p.ratio}});
  for (const auto& c : s.coupling_effects)
    coupling.push_back({{"frontal", c.frontal},
                        {"parietal", c.parietal},
                        {"band", to_string(c.band)},
                        {"kappa_high", c.kappa_high},
                        {"kappa_low", c.kappa_low}});
  return {{"power_effects", power},
          {"coupling_effects", coupling},
          {"noise", s.noise},
          {"fs", s.fs},
          {"duration_s", s.duration_s},
          {"baseline_duration_s", s.baseline_duration_s},
          {"kappa_baseline", s.kappa_baseline},
          {"oscillator_hz", s.oscillator_hz},
          {"oscillator_amplitude", s.oscillator_amplitude},
          {"phase_diffusion", s.phase_diffusion},
          {"gain_sd", s.gain_sd},
          {"jitter_hold_s", s.jitter_hold_s},
          {"jitter_fade_s", s.jitter_fade_s},
          {"seed", s.seed}};
}

inline nlohmann::json to_json(const TlxParams& t) {
  return {{"intercept", t.intercept},
          {"group_variance", t.group_variance},
          {"residual_variance", t.residual_variance},
          {"beta_condition", t.beta_condition},
          {"beta_task", t.beta_task},
          {"class_source", t.class_source == ClassSource::Planted ? "planted" : "from_labels"},
          {"label_subset", t.label_subset.to_string()},
          {"class_shift", t.class_shift},
          {"misalignment_rate", t.misalignment_rate},
          {"informative", t.informative.to_string()},
          {"subscale_noise_sd", t.subscale_noise_sd},
          {"uninformative_noise_sd", t.uninformative_noise_sd}};
}

inline nlohmann::json ground_truth_json(const SynthPlan& plan, const EffectSpec& spec, const TlxParams& tlx) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : plan.samples)
    rows.push_back({{"subject_id", s.ids.subject_id},
                    {"condition", to_string(s.ids.condition)},
                    {"task", to_string(s.ids.task)},
                    {"order", s.ids.order},
                    {"class", to_string(s.eeg_class)},
                    {"tlx_class", to_string(s.tlx_class)}});
  return {{"schema", "GT1"},
          {"samples", rows},
          {"planted_effects", to_json(spec)},
          {"tlx_params", to_json(tlx)},
          {"subject_intercepts", plan.subject_intercepts},
          {"seeds", {{"master", spec.seed}}}};
}

inline std::string recording_filename(const RecordingIds& ids, Phase p) {
  return ids.subject_id + "_" + to_string(ids.condition) + "_" + to_string(p) + ".eegr";
}

/// Writes dir/eeg/*.eegr, dir/tlx.csv and dir/ground_truth.json.
inline void write_dataset(const std::filesystem::path& dir, int n_subjects, const EffectSpec& spec,
                          const TlxParams& tlx, unsigned jobs = 1,
                          const nlohmann::json& provenance = nullptr) {
  spec.validate();
  const auto plan = plan_dataset(n_subjects, spec, tlx);
  std::filesystem::create_directories(dir / "eeg");
  parallel_for(plan.samples.size() * 2, jobs, [&](std::size_t k) {
    const auto& s = plan.samples[k / 2];
    const Phase p = k % 2 ? Phase::Test : Phase::Baseline;
    write_recording(gen_recording(spec, s.eeg_class, p, s.ids), dir / "eeg" / recording_filename(s.ids, p),
                    provenance);
  });
  {
    std::ofstream out(dir / "tlx.csv");
    if (!out) throw Error(Errc::InvalidArgument, "cannot write " + (dir / "tlx.csv").string());
    write_tlx_csv(out, plan.tlx);
  }
  auto gt = ground_truth_json(plan, spec, tlx);
  if (!provenance.is_null()) gt["provenance"] = provenance;
  write_json_file(dir / "ground_truth.json", gt);
}

}  // namespace eegwl
