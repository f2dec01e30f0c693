#include "auxgmm/config.hpp"

#include <cstdio>
#include <set>

#include "auxgmm/error.hpp"

namespace auxgmm {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) config_error("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    config_error("'" + what + "' has the wrong type");
  }
}

BasisSpec parse_basis(const json& j, const std::string& where) {
  only_keys(j, {"kind", "degree", "knots", "interaction", "max_terms"}, where);
  BasisSpec b;
  if (j.contains("kind")) {
    const auto k = get_as<std::string>(j["kind"], where + ".kind");
    if (k == "power") {
      b.kind = BasisKind::PowerSeries;
    } else if (k == "spline") {
      b.kind = BasisKind::PolySpline;
    } else {
      config_error(where + ".kind must be 'power' or 'spline'");
    }
  }
  if (j.contains("degree")) b.degree = get_as<int>(j["degree"], where + ".degree");
  if (j.contains("knots")) {
    const json& k = j["knots"];
    if (k.is_number_integer()) {
      b.knot_count = k.get<int>();
    } else {
      b.knots = get_as<std::vector<std::vector<double>>>(k, where + ".knots");
    }
  }
  if (j.contains("interaction")) {
    const auto i = get_as<std::string>(j["interaction"], where + ".interaction");
    if (i == "none") {
      b.interaction = Interaction::None;
    } else if (i == "tensor") {
      b.interaction = Interaction::FullTensor;
    } else {
      config_error(where + ".interaction must be 'none' or 'tensor'");
    }
  }
  if (j.contains("max_terms")) b.max_terms = get_as<Eigen::Index>(j["max_terms"], where + ".max_terms");
  return b;
}

json basis_json(const BasisSpec& b) {
  json j;
  j["kind"] = to_string(b.kind);
  j["degree"] = b.degree;
  if (!b.knots.empty()) {
    j["knots"] = b.knots;
  } else if (b.knot_count) {
    j["knots"] = *b.knot_count;
  }
  j["interaction"] = to_string(b.interaction);
  j["max_terms"] = b.max_terms;
  return j;
}

bool is_family_name(const std::string& f) {
  static const std::set<std::string> names{"unadjusted", "cep",       "cep-param", "cep-known",
                                           "ipw",        "ipw-param", "ipw-known", "ipw-mixed"};
  return names.count(f) > 0;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RunConfig parse_config(const json& j) {
  only_keys(j,
            {"command", "data", "case", "families", "moment", "basis", "propensity", "weighting",
             "weight_matrix", "optimizer", "beta_init", "output", "format", "seed", "preset", "n",
             "reps"},
            "config");
  RunConfig c;
  if (j.contains("command")) {
    c.command = get_as<std::string>(j["command"], "command");
    if (c.command != "estimate" && c.command != "bounds" && c.command != "simulate") {
      config_error("command must be estimate, bounds or simulate");
    }
  }
  if (j.contains("data")) c.data = get_as<std::string>(j["data"], "data");
  if (j.contains("case")) c.sample_case = parse_sample_case(get_as<std::string>(j["case"], "case"));
  if (j.contains("families")) {
    c.families = get_as<std::vector<std::string>>(j["families"], "families");
    if (c.families.empty()) config_error("families must not be empty");
    for (const auto& f : c.families) {
      if (!is_family_name(f)) config_error("unknown estimator family '" + f + "'");
    }
  }
  if (j.contains("moment")) {
    const json& m = j["moment"];
    only_keys(m, {"type", "thresholds", "regressors", "d_y"}, "moment");
    MomentSpec ms;
    if (m.contains("type")) ms.type = get_as<std::string>(m["type"], "moment.type");
    if (m.contains("thresholds")) ms.thresholds = get_as<std::vector<double>>(m["thresholds"], "moment.thresholds");
    if (m.contains("regressors")) ms.regressors = get_as<std::vector<std::string>>(m["regressors"], "moment.regressors");
    if (m.contains("d_y")) ms.d_y = get_as<int>(m["d_y"], "moment.d_y");
    make_moment(ms);  // validates
    c.moment = ms;
  }
  if (j.contains("basis")) c.basis = parse_basis(j["basis"], "basis");
  if (j.contains("propensity")) {
    const json& p = j["propensity"];
    only_keys(p, {"method", "clip", "basis", "link", "design", "known"}, "propensity");
    if (p.contains("method")) {
      c.propensity.method = get_as<std::string>(p["method"], "propensity.method");
      const auto k = parse_propensity_kind(*c.propensity.method);
      if (k != PropensityKind::SieveLS && k != PropensityKind::SieveLogit) {
        config_error("propensity.method selects the nonparametric fit: sieve-ls or sieve-logit");
      }
    }
    if (p.contains("clip")) {
      c.propensity.clip = get_as<double>(p["clip"], "propensity.clip");
      if (!(*c.propensity.clip >= 0.0 && *c.propensity.clip < 0.5)) {
        config_error("propensity.clip must lie in [0, 0.5)");
      }
    }
    if (p.contains("basis")) c.propensity.basis = parse_basis(p["basis"], "propensity.basis");
    if (p.contains("link")) {
      c.propensity.link = get_as<std::string>(p["link"], "propensity.link");
      parse_link(*c.propensity.link);
    }
    if (p.contains("design")) {
      c.propensity.design = get_as<std::vector<std::string>>(p["design"], "propensity.design");
      for (const auto& term : c.propensity.design) Expr::parse(term);
    }
    if (p.contains("known")) {
      c.propensity.known = get_as<std::string>(p["known"], "propensity.known");
      Expr::parse(*c.propensity.known);
    }
  }
  if (j.contains("weighting")) {
    c.weighting = get_as<std::string>(j["weighting"], "weighting");
    if (c.weighting != "two-step" && c.weighting != "identity" && c.weighting != "fixed") {
      config_error("weighting must be two-step, identity or fixed");
    }
  }
  if (j.contains("weight_matrix")) {
    c.weight_matrix = get_as<std::vector<std::vector<double>>>(j["weight_matrix"], "weight_matrix");
  }
  if (c.weighting == "fixed" && !c.weight_matrix) config_error("fixed weighting needs weight_matrix");
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    only_keys(o, {"tolerance", "max_iterations", "initial_step"}, "optimizer");
    OptimizerSpec s;
    if (o.contains("tolerance")) s.tolerance = get_as<double>(o["tolerance"], "optimizer.tolerance");
    if (o.contains("max_iterations")) s.max_iterations = get_as<int>(o["max_iterations"], "optimizer.max_iterations");
    if (o.contains("initial_step")) s.initial_step = get_as<double>(o["initial_step"], "optimizer.initial_step");
    c.optimizer = s;
  }
  if (j.contains("beta_init")) c.beta_init = get_as<std::vector<double>>(j["beta_init"], "beta_init");
  if (j.contains("output")) c.output = get_as<std::string>(j["output"], "output");
  if (j.contains("format")) {
    c.format = get_as<std::string>(j["format"], "format");
    if (c.format != "json" && c.format != "table") config_error("format must be json or table");
  }
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("preset")) {
    c.preset = get_as<std::string>(j["preset"], "preset");
    dgp_preset(*c.preset);  // validates
  }
  if (j.contains("n")) c.n = get_as<std::int64_t>(j["n"], "n");
  if (j.contains("reps")) c.reps = get_as<std::int64_t>(j["reps"], "reps");
  if (c.n && *c.n < 2) config_error("n must be at least 2");
  if (c.reps && *c.reps < 2) config_error("reps must be at least 2");
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

json serialize_config(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  if (c.data) j["data"] = *c.data;
  j["case"] = to_string(c.sample_case);
  if (!c.families.empty()) j["families"] = c.families;
  if (c.moment) {
    json m;
    m["type"] = c.moment->type;
    if (c.moment->type == "cdf") m["thresholds"] = c.moment->thresholds;
    if (c.moment->type == "linreg") m["regressors"] = c.moment->regressors;
    if (c.moment->type == "mean") m["d_y"] = c.moment->d_y;
    j["moment"] = m;
  }
  if (c.basis) j["basis"] = basis_json(*c.basis);
  json p = json::object();
  if (c.propensity.method) p["method"] = *c.propensity.method;
  if (c.propensity.clip) p["clip"] = *c.propensity.clip;
  if (c.propensity.basis) p["basis"] = basis_json(*c.propensity.basis);
  if (c.propensity.link) p["link"] = *c.propensity.link;
  if (!c.propensity.design.empty()) p["design"] = c.propensity.design;
  if (c.propensity.known) p["known"] = *c.propensity.known;
  if (!p.empty()) j["propensity"] = p;
  j["weighting"] = c.weighting;
  if (c.weight_matrix) j["weight_matrix"] = *c.weight_matrix;
  if (c.optimizer) {
    j["optimizer"] = {{"tolerance", c.optimizer->tolerance},
                      {"max_iterations", c.optimizer->max_iterations},
                      {"initial_step", c.optimizer->initial_step}};
  }
  if (c.beta_init) j["beta_init"] = *c.beta_init;
  if (c.output) j["output"] = *c.output;
  j["format"] = c.format;
  j["seed"] = c.seed;
  if (c.preset) j["preset"] = *c.preset;
  if (c.n) j["n"] = *c.n;
  if (c.reps) j["reps"] = *c.reps;
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(serialize_config(cfg).dump())));
  return buf;
}

std::vector<std::string> default_families(const std::string& command, SampleCase c) {
  if (command != "simulate") return {"cep"};
  if (c == SampleCase::VerifyOut) return {"unadjusted", "cep", "ipw", "ipw-param", "cep-param"};
  return {"unadjusted", "cep", "ipw", "ipw-param", "ipw-known"};
}

MomentModel make_moment(const MomentSpec& spec) {
  if (spec.type == "mean") {
    if (spec.d_y < 1) config_error("moment.d_y must be >= 1");
    return mean_model(spec.d_y);
  }
  if (spec.type == "cdf") return cdf_model(spec.thresholds);
  if (spec.type == "linreg") return linreg_model(spec.regressors);
  config_error("unknown moment type '" + spec.type + "'");
}

std::vector<EstimatorConfig> make_estimator_configs(const RunConfig& cfg, const DGPSpec* preset,
                                                    Eigen::Index d_x) {
  MomentModel moment = cfg.moment ? make_moment(*cfg.moment)
                                  : (preset ? preset->moment : mean_model(1));
  const BasisSpec basis = cfg.basis ? *cfg.basis : (preset ? preset->basis : BasisSpec{});
  const BasisSpec pbasis = cfg.propensity.basis ? *cfg.propensity.basis : basis;
  const double clip = cfg.propensity.clip.value_or(0.01);

  PropensitySpec sieve;
  sieve.method = parse_propensity_kind(cfg.propensity.method.value_or("sieve-ls"));
  sieve.clip = clip;
  sieve.basis = pbasis;

  PropensitySpec parametric;
  parametric.method = PropensityKind::Parametric;
  parametric.clip = clip;
  if (!cfg.propensity.design.empty()) {
    parametric.family.link = parse_link(cfg.propensity.link.value_or("logit"));
    for (const auto& term : cfg.propensity.design) parametric.family.design.push_back(Expr::parse(term));
  } else if (preset != nullptr && !cfg.propensity.link) {
    parametric.family = preset->family;
  } else {
    parametric.family = ParametricFamily::logit_linear(d_x);
    if (cfg.propensity.link) parametric.family.link = parse_link(*cfg.propensity.link);
  }

  std::optional<PropensitySpec> known;
  if (cfg.propensity.known || preset != nullptr) {
    known.emplace();
    known->method = PropensityKind::Known;
    known->clip = clip;
    known->known = cfg.propensity.known ? *cfg.propensity.known : preset->p_fn.source();
  }

  Weighting weighting;
  if (cfg.weighting == "identity") {
    weighting.kind = WeightingKind::Identity;
  } else if (cfg.weighting == "fixed") {
    weighting.kind = WeightingKind::Fixed;
    const auto& rows = *cfg.weight_matrix;
    weighting.fixed.resize(static_cast<Eigen::Index>(rows.size()),
                           rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.front().size()) config_error("weight_matrix rows differ in length");
      for (std::size_t k = 0; k < rows[r].size(); ++k) {
        weighting.fixed(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
      }
    }
  }

  std::vector<EstimatorConfig> out;
  const std::vector<std::string> families =
      cfg.families.empty() ? default_families(cfg.command, cfg.sample_case) : cfg.families;
  for (const auto& name : families) {
    EstimatorConfig e;
    e.label = name;
    e.sample_case = cfg.sample_case;
    e.moment = moment;
    e.basis = basis;
    e.weighting = weighting;
    if (cfg.optimizer) e.optimizer = *cfg.optimizer;
    if (cfg.beta_init) {
      e.beta_init = Eigen::Map<const Eigen::VectorXd>(cfg.beta_init->data(),
                                                     static_cast<Eigen::Index>(cfg.beta_init->size()));
    }
    e.propensity = sieve;
    if (name == "unadjusted") {
      e.family = EstimatorFamily::Unadjusted;
    } else if (name == "cep") {
      e.family = EstimatorFamily::CEP;
    } else if (name == "ipw") {
      e.family = EstimatorFamily::IPW;
    } else if (name == "cep-param" || name == "ipw-param" || name == "ipw-mixed") {
      e.family = name == "cep-param"   ? EstimatorFamily::CEP_ParametricP
                 : name == "ipw-param" ? EstimatorFamily::IPW_ParametricP
                                       : EstimatorFamily::IPW_Mixed;
      e.propensity = parametric;
      e.denominator = sieve;
    } else if (name == "cep-known" || name == "ipw-known") {
      if (!known) config_error(name + " needs propensity.known");
      e.family = name == "cep-known" ? EstimatorFamily::CEP_ParametricP : EstimatorFamily::IPW_KnownP;
      e.propensity = *known;
    } else {
      config_error("unknown estimator family '" + name + "'");
    }
    if (e.beta_init && e.beta_init->size() != e.moment.d_beta) {
      config_error("beta_init has the wrong length");
    }
    check_config(e);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace auxgmm
