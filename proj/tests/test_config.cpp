#include <doctest.h>

#include "randse/config.hpp"
#include "randse/dataset.hpp"
#include "randse/dgp.hpp"
#include "randse/errors.hpp"

#include <fstream>
#include <sstream>

using namespace randse;

TEST_CASE("presets round-trip through serialize/parse") {
  for (const auto& name : dgp::preset_names()) {
    const dgp::ScenarioSpec spec = dgp::scenario_preset(name);
    const std::string text = config::serialize_scenario(spec);
    const dgp::ScenarioSpec parsed = config::parse_scenario_config(text);
    CHECK(config::serialize_scenario(parsed) == text);
    CHECK(config::scenario_hash(parsed) == config::scenario_hash(spec));
  }
}

TEST_CASE("unknown and duplicate keys are hard errors") {
  const std::string base = config::serialize_scenario(dgp::scenario_preset("strong-exog-ar1"));
  CHECK_THROWS_AS(config::parse_scenario_config(base + "bogus_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_scenario_config(base + "n = 100\n"), ConfigError);

  dgp::ScenarioSpec spec = dgp::scenario_preset("strong-exog-ar1");
  CHECK_THROWS_AS(config::apply_override(spec, "bogus_key", "1"), ConfigError);
}

TEST_CASE("beta_true must match the effect mean when given") {
  std::string text = config::serialize_scenario(dgp::scenario_preset("strong-exog-ar1"));
  const auto pos = text.find("beta_true = 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::string("beta_true = 1").size(), "beta_true = 3");
  CHECK_THROWS_AS(config::parse_scenario_config(text), ConfigError);
}

TEST_CASE("comments and blank lines are tolerated") {
  const std::string text =
      "# tiny scenario\n"
      "n = 60\n"
      "\n"
      "error0 = iid(1.0)   # baseline noise\n"
      "treatment = bernoulli(0.4)\n"
      "treatment_level = unit\n"
      "effect = constant(0.5)\n"
      "gamma_true = 1.0\n"
      "methods = classic, hc0\n";
  const dgp::ScenarioSpec spec = config::parse_scenario_config(text);
  CHECK(spec.n == 60);
  CHECK(spec.beta_true == 0.5);
  CHECK(spec.methods.size() == 2);
}

TEST_CASE("overrides beat file values and retile uniform groups") {
  dgp::ScenarioSpec spec = dgp::scenario_preset("group-assign-crosscorr");
  REQUIRE(spec.group_sizes->size() == 400);
  config::apply_override(spec, "n", "500");
  CHECK(spec.n == 500);
  CHECK(spec.group_sizes->size() == 100);
  CHECK_NOTHROW(spec.validate());

  CHECK_THROWS_AS(config::apply_override(spec, "n", "503"), ConfigError);

  config::apply_override(spec, "methods", "cluster");
  REQUIRE(spec.methods.size() == 1);
  CHECK(spec.methods[0] == Method::ClusterLZ);
}

TEST_CASE("process syntax errors are caught") {
  dgp::ScenarioSpec spec = dgp::scenario_preset("strong-exog-ar1");
  CHECK_THROWS_AS(config::apply_override(spec, "error0", "ar1(0.5)"), ConfigError);
  CHECK_THROWS_AS(config::apply_override(spec, "error0", "wavelet(1.0)"), ConfigError);
  CHECK_THROWS_AS(config::apply_override(spec, "methods", "hc9"), ConfigError);
  CHECK_THROWS_AS(config::apply_override(spec, "treatment_level", "village"), ConfigError);
}

TEST_CASE("csv ingestion synthesizes the intercept and reads optional columns") {
  const std::string path = std::string(RANDSE_TEST_DATA_DIR) + "/micro6.csv";
  std::ostringstream notices;
  const Dataset data = load_dataset_csv(path, &notices);
  CHECK(data.n() == 6);
  CHECK(data.w.cols() == 2);
  CHECK(data.w(0, 0) == 1.0);
  CHECK(data.v.has_value());
  CHECK(data.group_ids.has_value());
  CHECK(notices.str().find("synthesized") != std::string::npos);
  CHECK_NOTHROW(data.validate());
}

TEST_CASE("csv ingestion rejects malformed files") {
  const auto write_tmp = [](const std::string& name, const std::string& content) {
    const std::string path = "/tmp/" + name;
    std::ofstream out(path);
    out << content;
    return path;
  };
  CHECK_THROWS_AS(load_dataset_csv(write_tmp("bad_col.csv", "y,d,z\n1,2,3\n")), DataError);
  CHECK_THROWS_AS(load_dataset_csv(write_tmp("no_d.csv", "y,w1\n1,2\n")), DataError);
  CHECK_THROWS_AS(load_dataset_csv(write_tmp("bad_num.csv", "y,d\n1,2\n3,x\n")), DataError);
  CHECK_THROWS_AS(load_dataset_csv(write_tmp("ragged.csv", "y,d\n1,2\n3\n")), DataError);
  CHECK_THROWS_AS(load_dataset_csv("/tmp/definitely_missing_file.csv"), DataError);
}
