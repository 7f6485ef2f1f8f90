#pragma once

// Dataset-level feature extraction: montage selection, low-pass filtering,
// spectral and fronto-parietal PLV features per (subject, condition), each
// baseline-normalized, plus the FEAT1 dataset file and assembly of the
// labeled feature matrix.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <array>
#include <map>
#include <string>
#include <vector>

#include "connectivity.hpp"
#include "eeg_data.hpp"
#include "features.hpp"
#include "labeling.hpp"
#include "parallel.hpp"
#include "selection.hpp"
#include "spectral.hpp"

namespace eegwl {

struct FeaturePipelineConfig {
  BandSet bands = default_bands();
  WaveletConfig wavelet{};
  double lowpass_hz = 45.0;
  bool spectral_only = false;
};

struct FeatureRow {
  SampleKey key;
  Task task = Task::MediumTurn;
  int order = 1;
  std::vector<double> values;
};

struct FeatureDataset {
  std::vector<std::string> names;
  std::vector<FeatureRow> rows;
  nlohmann::json provenance = nlohmann::json::object();
};

inline Recording preprocess(const Recording& rec, double lowpass_hz) {
  const auto montage = canonical_montage();
  return lowpass_filter(select_montage(rec, montage), lowpass_hz);
}

/// Baseline-normalized features of one (subject, condition): 42 spectral,
/// then 30 PLV unless spectral_only.
inline std::pair<std::vector<std::string>, std::vector<double>> sample_features(
    const Recording& test_raw, const Recording& baseline_raw, const FeaturePipelineConfig& cfg) {
  const auto test = preprocess(test_raw, cfg.lowpass_hz);
  const auto base = preprocess(baseline_raw, cfg.lowpass_hz);
  std::vector<std::string> names;
  std::vector<double> values;
  auto append = [&](const FeatureVector& v) {
    for (const auto& n : feature_names(v)) names.push_back(n);
    for (const auto& e : v.entries) values.push_back(e.value);
  };
  append(baseline_normalize_spectral(extract_spectral(test, cfg.bands), extract_spectral(base, cfg.bands)));
  if (!cfg.spectral_only) {
    std::vector<std::string> order;
    for (const auto& c : test.channels) order.push_back(c.name);
    const auto t = fronto_parietal_plv(test, cfg.bands, cfg.wavelet);
    const auto b = fronto_parietal_plv(base, cfg.bands, cfg.wavelet);
    append(baseline_normalize_plv(t.matrices, b.matrices, fronto_parietal_order(t.matrices[0], order)));
  }
  return {std::move(names), std::move(values)};
}

inline FeatureDataset extract_dataset(const RecordingSet& set, const FeaturePipelineConfig& cfg,
                                      unsigned jobs = 1) {
  validate_bands(cfg.bands, cfg.lowpass_hz);
  set.check_baselines();
  std::vector<const Recording*> tests;
  for (const auto& r : set.recordings())
    if (r.phase == Phase::Test) tests.push_back(&r);
  std::ranges::sort(tests, [](const Recording* a, const Recording* b) {
    return SampleKey{a->subject_id, a->condition} < SampleKey{b->subject_id, b->condition};
  });
  FeatureDataset ds;
  ds.rows.resize(tests.size());
  std::vector<std::vector<std::string>> names(tests.size());
  parallel_for(tests.size(), jobs, [&](std::size_t i) {
    const auto& t = *tests[i];
    const auto* b = set.find(t.subject_id, t.condition, Phase::Baseline);
    try {
      auto [n, v] = sample_features(t, *b, cfg);
      names[i] = std::move(n);
      ds.rows[i] = {{t.subject_id, t.condition}, t.task, t.order, std::move(v)};
    } catch (const Error& e) {
      throw Error(e.code(), t.subject_id + "/" + to_string(t.condition) + ": " + e.what());
    }
  });
  if (!names.empty()) ds.names = names.front();
  return ds;
}

/// Feature extraction from dir/eeg/*.eegr. Files are indexed by their
/// headers and loaded one (test, baseline) pair at a time.
inline FeatureDataset extract_dataset_dir(const std::filesystem::path& dir, const FeaturePipelineConfig& cfg,
                                          unsigned jobs = 1) {
  validate_bands(cfg.bands, cfg.lowpass_hz);
  const auto eeg = dir / "eeg";
  if (!std::filesystem::is_directory(eeg))
    throw Error(Errc::InvalidArgument, "no eeg/ directory in " + dir.string());
  std::map<SampleKey, std::array<std::filesystem::path, 2>> index;  // [baseline, test]
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(eeg))
    if (e.path().extension() == ".eegr") files.push_back(e.path());
  std::ranges::sort(files);
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, "empty file " + f.string());
    try {
      const auto h = nlohmann::json::parse(line);
      SampleKey key{h.at("subject_id").get<std::string>(), parse_condition(h.at("condition").get<std::string>())};
      const auto phase = parse_phase(h.at("phase").get<std::string>());
      index[key][phase == Phase::Baseline ? 0 : 1] = f;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedHeader, f.string() + ": " + e.what());
    }
  }
  std::vector<std::pair<SampleKey, std::array<std::filesystem::path, 2>>> pairs;
  for (const auto& [key, p] : index) {
    if (p[1].empty()) continue;
    if (p[0].empty())
      throw Error(Errc::MissingRecording, "no baseline recording for " + to_string(key));
    pairs.emplace_back(key, p);
  }
  FeatureDataset ds;
  ds.rows.resize(pairs.size());
  std::vector<std::vector<std::string>> names(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    const auto& [key, p] = pairs[i];
    const auto test = load_recording(p[1]);
    const auto base = load_recording(p[0]);
    try {
      auto [n, v] = sample_features(test, base, cfg);
      names[i] = std::move(n);
      ds.rows[i] = {key, test.task, test.order, std::move(v)};
    } catch (const Error& e) {
      throw Error(e.code(), to_string(key) + ": " + e.what());
    }
  });
  if (!names.empty()) ds.names = names.front();
  return ds;
}

// FEAT1 dataset file ------------------------------------------------------------

inline nlohmann::json to_json(const FeatureDataset& ds) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : ds.rows)
    rows.push_back({{"subject_id", r.key.subject_id},
                    {"condition", to_string(r.key.condition)},
                    {"task", to_string(r.task)},
                    {"order", r.order},
                    {"values", r.values}});
  return {{"schema", "FEAT1"},
          {"normalized", true},
          {"feature_names", ds.names},
          {"samples", rows},
          {"provenance", ds.provenance}};
}

inline FeatureDataset feature_dataset_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "FEAT1")
      throw Error(Errc::InvalidArgument, "expected FEAT1 schema");
    FeatureDataset ds;
    ds.names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& s : j.at("samples")) {
      FeatureRow r;
      r.key = {s.at("subject_id").get<std::string>(), parse_condition(s.at("condition").get<std::string>())};
      r.task = parse_task(s.at("task").get<std::string>());
      r.order = s.at("order").get<int>();
      r.values = s.at("values").get<std::vector<double>>();
      if (r.values.size() != ds.names.size())
        throw Error(Errc::FeatureContractMismatch, "sample " + to_string(r.key) + " has " +
                                                       std::to_string(r.values.size()) + " values");
      ds.rows.push_back(std::move(r));
    }
    if (j.contains("provenance")) ds.provenance = j.at("provenance");
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed FEAT1 dataset: ") + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, path.string() + ": " + e.what());
  }
}

// Feature matrix assembly -------------------------------------------------------

enum class ModelKind { Baseline, Connectivity };

inline std::string to_string(ModelKind k) { return k == ModelKind::Baseline ? "baseline" : "connectivity"; }
inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "baseline") return ModelKind::Baseline;
  if (s == "connectivity") return ModelKind::Connectivity;
  throw Error(Errc::InvalidArgument, "unknown model kind '" + std::string(s) + "'");
}

inline bool is_plv_feature(std::string_view name) { return name.ends_with("(PLV)"); }

/// Baseline: spectral columns only. Connectivity: spectral + PLV.
inline std::vector<std::string> model_columns(std::span<const std::string> names, ModelKind kind) {
  std::vector<std::string> out;
  for (const auto& n : names)
    if (kind == ModelKind::Connectivity || !is_plv_feature(n)) out.push_back(n);
  return out;
}

/// Joins feature rows with labels by (subject, condition); rows are kept in
/// feature-file order and every row must have a label.
inline FeatureMatrix assemble_matrix(const FeatureDataset& ds, const std::map<SampleKey, int>& labels,
                                     ModelKind kind) {
  FeatureMatrix all;
  all.names = ds.names;
  all.values.resize(static_cast<Eigen::Index>(ds.rows.size()), static_cast<Eigen::Index>(ds.names.size()));
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& r = ds.rows[i];
    auto it = labels.find(r.key);
    if (it == labels.end())
      throw Error(Errc::FeatureContractMismatch, "no label for sample " + to_string(r.key));
    all.labels.push_back(it->second);
    all.row_ids.push_back(to_string(r.key));
    for (std::size_t c = 0; c < r.values.size(); ++c)
      all.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = r.values[c];
  }
  const auto cols = model_columns(all.names, kind);
  if (cols.empty()) throw Error(Errc::FeatureContractMismatch, "no columns for model kind");
  return all.select_columns(cols);
}

inline std::map<SampleKey, int> label_map(const LabelSet& ls) {
  std::map<SampleKey, int> out;
  for (std::size_t i = 0; i < ls.keys.size(); ++i)
    out[ls.keys[i]] = ls.split.labels[i] == WorkloadLabel::High ? 1 : 0;
  return out;
}

inline std::map<SampleKey, int> label_map(std::span<const LabelRow> rows) {
  std::map<SampleKey, int> out;
  for (const auto& r : rows) out[r.key] = r.label == WorkloadLabel::High ? 1 : 0;
  return out;
}

}  // namespace eegwl
