#include "test_support.hpp"

using namespace eegwl;
using nlohmann::json;

namespace {

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
    return e.what();
  }
  ADD_FAILURE() << "accepted " << j.dump();
  return {};
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
  const auto c = parse_config(json::object());
  EXPECT_EQ(c.k, 8);
  EXPECT_DOUBLE_EQ(c.split, 0.2);
  EXPECT_EQ(c.rfe_n_select, 8);
  EXPECT_EQ(c.rfe_max_iterations, 30000);
  EXPECT_DOUBLE_EQ(c.lowpass_hz, 45.0);
  EXPECT_EQ(c.subscales, "md,pd,perf,effort");
  EXPECT_EQ(c.bands[0].lo_hz, 4.0);
  EXPECT_EQ(c.bands[2].hi_hz, 30.0);
  EXPECT_EQ(c.wavelet.n_cycles, 7.0);
}

TEST(Config, ValuesOverride) {
  const auto c = parse_config(json::parse(R"({
    "seed": 7,
    "bands": {"alpha": [8, 12]},
    "rfe": {"n_select": 4},
    "grids": {"lr_C": [0.5, 5]},
    "eval": {"k": 5, "grid_mode": "global", "rfe_mode": "full_data"},
    "labeling": {"subscales": "search"}
  })"));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.bands[1].hi_hz, 12.0);
  EXPECT_EQ(c.rfe_n_select, 4);
  EXPECT_EQ(c.grid.lr_C, (std::vector<double>{0.5, 5}));
  const auto e = make_eval_config(c);
  EXPECT_EQ(e.folds, 5);
  EXPECT_EQ(e.grid_mode, GridMode::Global);
  EXPECT_EQ(e.rfe_mode, RfeMode::FullData);
  EXPECT_EQ(c.subscales, "search");
}

TEST(Config, ErrorsNameTheOffendingPath) {
  EXPECT_NE(config_error(json::parse(R"({"eval": {"k": 1}})")).find("/eval/k"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"eval": {"k": "eight"}})")).find("/eval/k"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"grids": {"svm_C": [1, -2]}})")).find("/grids/svm_C/1"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"grids": {"meta_C": []}})")).find("/grids/meta_C"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"bands": {"beta": [30, 13]}})")).find("/bands/beta"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"eval": {"split": 1.0}})")).find("/eval/split"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"labeling": {"subscales": "md,bogus"}})")).find("/labeling/subscales"),
            std::string::npos);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_NE(config_error(json::parse(R"({"evaluation": {}})")).find("/evaluation"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"rfe": {"n_features": 3}})")).find("/rfe/n_features"), std::string::npos);
  config_error(json::parse("[1, 2]"));
}

TEST(Config, BandAboveFilterCutoff) {
  EXPECT_NE(config_error(json::parse(R"({"filter": {"cutoff_hz": 25}})")).find("/bands"), std::string::npos);
}

TEST(Config, HashTracksContent) {
  const auto a = parse_config(json::object());
  auto b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.k = 5;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(parse_config(to_json(a)).k, a.k);
  EXPECT_EQ(config_hash(parse_config(to_json(a))), config_hash(a));
}
