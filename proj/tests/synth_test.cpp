#include "test_support.hpp"

using namespace eegwl;
using namespace eegwl::testing;

namespace {

RecordingIds ids(const std::string& s = "S01") { return {s, Condition::VR, Task::SpeedChange, 1}; }

double alpha_plv(const Recording& rec, const std::string& a, const std::string& b) {
  const auto x = rec.channel(*rec.index_of(a)), y = rec.channel(*rec.index_of(b));
  const std::vector<double> vx(x.begin(), x.end()), vy(y.begin(), y.end());
  return band_plv(vx, vy, rec.fs, default_bands()[1], WaveletConfig{});
}

}  // namespace

TEST(Synth, RecordingDeterministicPerSeed) {
  auto spec = effect_preset("both");
  spec.duration_s = 60;
  spec.seed = 11;
  const auto a = gen_recording(spec, WorkloadClass::High, Phase::Test, ids());
  const auto b = gen_recording(spec, WorkloadClass::High, Phase::Test, ids());
  EXPECT_EQ(a.samples, b.samples);
  spec.seed = 12;
  const auto c = gen_recording(spec, WorkloadClass::High, Phase::Test, ids());
  EXPECT_NE(a.samples, c.samples);
  EXPECT_EQ(a.n_samples(), 60u * 128u);
  EXPECT_EQ(a.channels.size(), 14u);
}

TEST(Synth, CouplingStrengthControlsPlv) {
  auto spec = effect_preset("none");
  spec.coupling_effects = {{"F3", "P3", Band::Alpha, 50.0, 0.0}};
  spec.noise = 1.0;
  const auto high = gen_recording(spec, WorkloadClass::High, Phase::Test, ids());
  const auto low = gen_recording(spec, WorkloadClass::Low, Phase::Test, ids());
  EXPECT_GE(alpha_plv(high, "F3", "P3"), 0.9);
  EXPECT_LT(alpha_plv(low, "F3", "P3"), 0.1);
  EXPECT_LT(alpha_plv(high, "F4", "P4"), 0.1);
}

TEST(Synth, PowerRatioShiftsLogPower) {
  auto spec = effect_preset("power");
  spec.duration_s = 120;
  const auto high = gen_recording(spec, WorkloadClass::High, Phase::Test, ids());
  const auto low = gen_recording(spec, WorkloadClass::Low, Phase::Test, ids());
  const auto band = default_bands()[1];
  auto lp = [&](const Recording& r, const std::string& ch) {
    const auto x = r.channel(*r.index_of(ch));
    return band_log_power(compute_psd(std::vector<double>(x.begin(), x.end()), r.fs), band);
  };
  EXPECT_NEAR(lp(high, "Pz") - lp(low, "Pz"), 2 * std::log(1.5), 0.1);
  EXPECT_NEAR(lp(high, "P3") - lp(low, "P3"), 0.0, 1e-9);
}

TEST(Synth, PlanShapeAndCounterbalancing) {
  const auto spec = effect_preset("none");
  const auto plan = plan_dataset(49, spec, TlxParams{});
  ASSERT_EQ(plan.samples.size(), 98u);
  ASSERT_EQ(plan.tlx.size(), 98u);
  int vr_first = 0;
  for (std::size_t i = 0; i < 98; i += 2) {
    EXPECT_EQ(plan.samples[i].ids.subject_id, plan.samples[i + 1].ids.subject_id);
    EXPECT_EQ(plan.samples[i].ids.order + plan.samples[i + 1].ids.order, 3);
    EXPECT_NE(plan.samples[i].ids.task, plan.samples[i + 1].ids.task);
    vr_first += plan.samples[i + 1].ids.order == 1;
  }
  EXPECT_LE(std::abs(2 * vr_first - 49), 1);
  EXPECT_THROW(plan_dataset(3, spec, TlxParams{}), Error);
}

TEST(Synth, FromLabelsAlignsEegClassWithLabels) {
  auto spec = effect_preset("none");
  spec.seed = 4;
  const auto plan = plan_dataset(49, spec, TlxParams{});
  const auto labels = make_labels(plan.tlx, SubscaleSet::four_scale());
  for (std::size_t i = 0; i < plan.samples.size(); ++i)
    EXPECT_EQ(plan.samples[i].eeg_class == WorkloadClass::High, labels.split.labels[i] == WorkloadLabel::High);
}

TEST(Synth, MisalignmentRate) {
  TlxParams t;
  t.misalignment_rate = 0.3;
  int flipped = 0, total = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto spec = effect_preset("none");
    spec.seed = s;
    for (const auto& x : plan_dataset(49, spec, t).samples) {
      flipped += x.eeg_class != x.tlx_class;
      ++total;
    }
  }
  EXPECT_NEAR(static_cast<double>(flipped) / total, 0.3, 0.04);
}

TEST(Synth, ConditionEffectRecovered) {
  int covered = 0;
  const int seeds = 100;
  const TlxParams t;
  for (int s = 0; s < seeds; ++s) {
    auto spec = effect_preset("none");
    spec.seed = 1000 + static_cast<std::uint64_t>(s);
    const auto labels = make_labels(plan_dataset(49, spec, t).tlx, SubscaleSet::four_scale());
    const auto& b = labels.fit.fixed[1];
    covered += std::abs(b.coef - t.beta_condition) <= 2 * b.se;
  }
  EXPECT_GE(covered, 0.9 * seeds);
}

TEST(Synth, FeaturesHaveContractShape) {
  auto spec = effect_preset("both");
  spec.duration_s = 60;
  spec.baseline_duration_s = 16;
  const auto plan = plan_dataset(4, spec, TlxParams{});
  const auto ds = synth_features(plan, spec, FeaturePipelineConfig{});
  EXPECT_EQ(ds.names.size(), 72u);
  EXPECT_EQ(ds.rows.size(), 8u);
  FeaturePipelineConfig spectral;
  spectral.spectral_only = true;
  EXPECT_EQ(synth_features(plan, spec, spectral).names.size(), 42u);
}

TEST(Synth, WrittenDatasetLoads) {
  TempDir dir("synth");
  auto spec = effect_preset("power");
  spec.duration_s = 60;
  spec.baseline_duration_s = 16;
  write_dataset(dir.path(), 4, spec, TlxParams{});
  std::size_t recs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path() / "eeg"))
    recs += e.path().extension() == ".eegr";
  EXPECT_EQ(recs, 16u);
  EXPECT_EQ(read_tlx_csv(dir.path() / "tlx.csv").size(), 8u);
}

TEST(Synth, InvalidSpecsRejected) {
  auto spec = effect_preset("none");
  spec.duration_s = 30;
  EXPECT_THROW(spec.validate(), Error);
  spec = effect_preset("none");
  spec.coupling_effects = {{"P3", "F3", Band::Alpha, 1.0, 0.0}};
  EXPECT_THROW(spec.validate(), Error);
  EXPECT_THROW(effect_preset("loud"), Error);
}

TEST(SubsetSearch, PlantedSubscalesWin) {
  // MD and Effort carry the planted class with independent per-subscale noise,
  // so their average beats either alone; the rest are pure noise.
  TlxParams t;
  t.class_source = ClassSource::Planted;
  t.informative = SubscaleSet::parse("md,effort");
  t.group_variance = 25;
  t.residual_variance = 25;
  t.class_shift = 40;
  t.subscale_noise_sd = 15;
  t.uninformative_noise_sd = 40;
  EvalConfig cfg;
  cfg.folds = 4;
  cfg.inner_folds = 3;
  cfg.n_select = 2;
  cfg.holdout = false;
  cfg.grid = StackedGrid{{25}, {1.0}, {10.0}, {10.0}};
  const auto md = SubscaleSet::parse("md"), effort = SubscaleSet::parse("effort");
  int hits = 0;
  const int runs = 10;
  for (int run = 0; run < runs; ++run) {
    auto spec = effect_preset("none");
    spec.seed = 21 + static_cast<std::uint64_t>(run);
    const auto plan = plan_dataset(49, spec, t);
    FeatureDataset ds;
    ds.names = {"Theta Fz", "Alpha Pz", "Beta Oz", "Theta F7", "Alpha F8", "Beta T7"};
    Rng rng(derive_seed(5, {static_cast<std::uint64_t>(run)}));
    std::normal_distribution<double> N(0.0, 1.0);
    for (const auto& s : plan.samples) {
      std::vector<double> v;
      for (std::size_t c = 0; c < ds.names.size(); ++c) v.push_back(N(rng));
      v[1] += s.eeg_class == WorkloadClass::High ? 3.0 : -3.0;
      ds.rows.push_back({{s.ids.subject_id, s.ids.condition}, s.ids.task, s.ids.order, v});
    }
    cfg.seed = static_cast<std::uint64_t>(run);
    const auto r = subscale_subset_search(plan.tlx, ds, cfg, ModelKind::Baseline);
    ASSERT_EQ(r.ranked.size(), 63u);
    for (std::size_t i = 1; i < r.ranked.size(); ++i) EXPECT_FALSE(subset_better(r.ranked[i], r.ranked[i - 1]));
    const bool both = (r.chosen.mask() & md.mask()) && (r.chosen.mask() & effort.mask());
    hits += both;
    if (!both) std::cout << "run " << run << " chose " << r.chosen.to_string() << " acc "
                         << r.ranked.front().mean_accuracy << "\n";
  }
  EXPECT_GE(hits, 9);
}
