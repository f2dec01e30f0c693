#include <doctest.h>

#include "auxgmm/config.hpp"
#include "auxgmm/error.hpp"

using namespace auxgmm;
using nlohmann::json;

namespace {

const char* kFull = R"({
  "command": "estimate",
  "data": "survey.csv",
  "case": "verify-in",
  "families": ["cep", "ipw", "ipw-param", "cep-known"],
  "moment": {"type": "cdf", "thresholds": [0.5, 1.0, 2.0]},
  "basis": {"kind": "spline", "degree": 3, "knots": 10, "interaction": "none", "max_terms": 40},
  "propensity": {"method": "sieve-logit", "clip": 0.02, "link": "logit",
                 "design": ["1", "x1"], "known": "0.25 + 0.25 * x1"},
  "weighting": "two-step",
  "optimizer": {"tolerance": 1e-9, "max_iterations": 300, "initial_step": 0.2},
  "output": "out.json",
  "format": "table",
  "seed": 42
})";

bool throws_config(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    return e.kind() == ErrorKind::ConfigError;
  }
  return false;
}

}  // namespace

TEST_CASE("serialize then parse is a fixed point") {
  const RunConfig a = parse_config_text(kFull);
  const json s1 = serialize_config(a);
  const RunConfig b = parse_config(s1);
  CHECK(serialize_config(b).dump() == s1.dump());
  CHECK(config_hash(a) == config_hash(b));

  const RunConfig empty = parse_config_text("{}");
  CHECK(serialize_config(parse_config(serialize_config(empty))).dump() == serialize_config(empty).dump());
}

TEST_CASE("parsed values land in the right fields") {
  const RunConfig c = parse_config_text(kFull);
  CHECK(c.sample_case == SampleCase::VerifyIn);
  REQUIRE(c.moment);
  CHECK(c.moment->thresholds.size() == 3);
  REQUIRE(c.basis);
  CHECK(c.basis->kind == BasisKind::PolySpline);
  CHECK(c.basis->knot_count.value_or(0) == 10);
  CHECK(c.propensity.clip.value_or(0.0) == doctest::Approx(0.02));
  CHECK(c.seed == 42);
  CHECK(c.format == "table");
}

TEST_CASE("unknown keys and bad values are config errors") {
  CHECK(throws_config(R"({"colour": 1})"));
  CHECK(throws_config(R"({"moment": {"type": "mean", "extra": 0}})"));
  CHECK(throws_config(R"({"propensity": {"method": "logit"}})"));
  CHECK(throws_config(R"({"families": ["cep", "magic"]})"));
  CHECK(throws_config(R"({"families": []})"));
  CHECK(throws_config(R"({"moment": {"type": "median"}})"));
  CHECK(throws_config(R"({"seed": "seven"})"));
  CHECK(throws_config(R"({"weighting": "fixed"})"));
  CHECK(throws_config(R"({"n": 1})"));
  CHECK(throws_config(R"({"preset": "dgp-z"})"));
  CHECK(throws_config(R"({"propensity": {"clip": 0.5}})"));
  CHECK(throws_config("{not json"));
}

TEST_CASE("config hash is stable and sensitive") {
  const RunConfig a = parse_config_text(kFull);
  const std::string h = config_hash(a);
  CHECK(h.size() == 16);
  CHECK(config_hash(parse_config_text(kFull)) == h);
  RunConfig b = a;
  b.seed = 43;
  CHECK(config_hash(b) != h);
  RunConfig c = a;
  c.moment->thresholds[0] = 0.25;
  CHECK(config_hash(c) != h);
}

TEST_CASE("families expand into estimator configs") {
  RunConfig c = parse_config_text(R"({
    "families": ["unadjusted", "cep", "ipw", "ipw-param", "cep-param", "ipw-known", "cep-known",
                 "ipw-mixed"],
    "propensity": {"known": "0.25 + 0.25 * x1"}
  })");
  const auto configs = make_estimator_configs(c, nullptr, 1);
  REQUIRE(configs.size() == 8);
  CHECK(configs[0].family == EstimatorFamily::Unadjusted);
  CHECK(configs[1].family == EstimatorFamily::CEP);
  CHECK(configs[2].family == EstimatorFamily::IPW);
  CHECK(configs[3].family == EstimatorFamily::IPW_ParametricP);
  CHECK(configs[3].propensity.method == PropensityKind::Parametric);
  CHECK(configs[4].family == EstimatorFamily::CEP_ParametricP);
  CHECK(configs[5].family == EstimatorFamily::IPW_KnownP);
  CHECK(configs[5].propensity.method == PropensityKind::Known);
  // cep-known is the parametric CEP estimator with p fixed at the known function
  CHECK(configs[6].family == EstimatorFamily::CEP_ParametricP);
  CHECK(configs[6].propensity.method == PropensityKind::Known);
  CHECK(configs[7].family == EstimatorFamily::IPW_Mixed);
  for (std::size_t k = 0; k < configs.size(); ++k) CHECK(configs[k].label == c.families[k]);

  c.families = {"ipw-known"};
  c.propensity.known.reset();
  CHECK_THROWS_AS(make_estimator_configs(c, nullptr, 1), Error);
}

TEST_CASE("presets supply defaults for simulate") {
  RunConfig c;
  c.command = "simulate";
  const DGPSpec spec = dgp_preset("dgp-a");
  const auto configs = make_estimator_configs(c, &spec, 1);
  CHECK(configs.size() == 5);
  CHECK(configs.back().family == EstimatorFamily::CEP_ParametricP);
  c.sample_case = SampleCase::VerifyIn;
  CHECK(make_estimator_configs(c, &spec, 1).back().family == EstimatorFamily::IPW_KnownP);
  CHECK(default_families("estimate", SampleCase::VerifyOut) == std::vector<std::string>{"cep"});
}

TEST_CASE("make_moment builds each moment type") {
  MomentSpec m;
  CHECK(make_moment(m).d_beta == 1);
  m.d_y = 3;
  CHECK(make_moment(m).d_beta == 3);
  m = MomentSpec{};
  m.type = "cdf";
  m.thresholds = {0.0, 1.0};
  CHECK(make_moment(m).d_beta == 2);
  m = MomentSpec{};
  m.type = "linreg";
  m.regressors = {"1", "x1"};
  CHECK(make_moment(m).d_beta == 2);
  m.type = "quantile";
  CHECK_THROWS_AS(make_moment(m), Error);
}

TEST_CASE("beta_init must match the parameter length") {
  RunConfig c = parse_config_text(R"({"beta_init": [0.0, 1.0]})");
  CHECK_THROWS_AS(make_estimator_configs(c, nullptr, 1), Error);
}
