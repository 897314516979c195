#include "pragsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pragsim/error.hpp"

namespace pragsim {

using nlohmann::json;

namespace {

std::string json_type(const json& j) { return j.type_name(); }

// Strict view of one JSON object: every key must be consumed before finish().
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object, got " + json_type(j_));
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(at(key), "expected a number, got " + json_type(*v));
    return v->get<double>();
  }

  long long integer(const std::string& key, long long fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw ConfigError(at(key), "expected an integer, got " + json_type(*v));
    return v->get<long long>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) throw ConfigError(at(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false, got " + json_type(*v));
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(at(key), "expected a string, got " + json_type(*v));
    return v->get<std::string>();
  }

  std::string required_string(const std::string& key) {
    if (!has(key)) throw ConfigError(at(key), "required field missing");
    return string(key, "");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class E>
E parse_enum(const std::string& text, const std::string& path,
             std::initializer_list<std::pair<std::string_view, E>> options) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (text == name) return value;
    names += (names.empty() ? "" : ", ") + std::string(name);
  }
  throw ConfigError(path, "unknown value \"" + text + "\" (expected one of: " + names + ")");
}

int to_int(long long v, const std::string& path) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(path, "integer out of range");
  return static_cast<int>(v);
}

TrendSpec parse_trend(const json& j, const std::string& path) {
  if (j.is_string()) {
    return parse_enum<TrendSpec>(j.get<std::string>(), path,
                                 {{"none", TrendSpec::none()},
                                  {"small_linear", TrendSpec::small_linear()},
                                  {"large_linear", TrendSpec::large_linear()},
                                  {"quadratic", TrendSpec::quadratic()}});
  }
  Obj o(j, path);
  TrendSpec t;
  t.kind = parse_enum<TrendKind>(o.required_string("kind"), o.at("kind"),
                                 {{"none", TrendKind::None}, {"linear", TrendKind::Linear},
                                  {"quadratic", TrendKind::Quadratic}});
  t.a = o.number("a", 0.0);
  t.b = o.number("b", 0.0);
  o.finish();
  if (t.kind == TrendKind::None && (t.a != 0.0 || t.b != 0.0)) throw ConfigError(path, "kind none requires a = b = 0");
  if (t.kind == TrendKind::Linear && t.b != 0.0) throw ConfigError(o.at("b"), "a linear trend has b = 0");
  return t;
}

EffectSpec parse_effect(const json& j, const std::string& path) {
  Obj o(j, path);
  EffectSpec e;
  e.kind = parse_enum<EffectKind>(o.required_string("kind"), o.at("kind"),
                                  {{"none", EffectKind::None}, {"constant", EffectKind::Constant},
                                   {"ramp", EffectKind::Ramp}});
  e.delta12 = o.number("delta12", 0.0);
  o.finish();
  if (e.kind == EffectKind::None && e.delta12 != 0.0) throw ConfigError(o.at("delta12"), "effect none has delta12 = 0");
  if (!std::isfinite(e.delta12)) throw ConfigError(o.at("delta12"), "must be finite");
  return e;
}

CovarianceSpec parse_covariance(const json& j, const std::string& path) {
  Obj o(j, path);
  CovarianceSpec c;
  c.kind = parse_enum<CovKind>(o.string("kind", "exponential"), o.at("kind"),
                               {{"exchangeable", CovKind::Exchangeable}, {"car1", CovKind::CAR1},
                                {"exponential", CovKind::Exponential}, {"unstructured", CovKind::Unstructured}});
  c.sigma_b2 = o.number("sigma_b2", c.sigma_b2);
  c.sigma2 = o.number("sigma2", c.sigma2);
  c.rho = o.number("rho", c.rho);
  c.range = o.number("range", c.range);
  c.sigma_u2 = o.number("sigma_u2", c.sigma_u2);
  c.sigma_e2 = o.number("sigma_e2", c.sigma_e2);
  const bool has_decay = o.has("monthly_decay");
  const double decay = o.number("monthly_decay", 0.8);
  if (const json* m = o.raw("monthly_corr")) {
    if (has_decay) throw ConfigError(o.at("monthly_corr"), "give monthly_corr or monthly_decay, not both");
    if (!m->is_array() || m->size() != static_cast<std::size_t>(kMonthBuckets))
      throw ConfigError(o.at("monthly_corr"), "expected a 10 x 10 array");
    c.monthly_corr.resize(kMonthBuckets, kMonthBuckets);
    for (int r = 0; r < kMonthBuckets; ++r) {
      const json& row = (*m)[static_cast<std::size_t>(r)];
      const std::string rp = o.at("monthly_corr") + "/" + std::to_string(r);
      if (!row.is_array() || row.size() != static_cast<std::size_t>(kMonthBuckets))
        throw ConfigError(rp, "expected an array of 10 numbers");
      for (int k = 0; k < kMonthBuckets; ++k) {
        const json& v = row[static_cast<std::size_t>(k)];
        if (!v.is_number()) throw ConfigError(rp + "/" + std::to_string(k), "expected a number");
        c.monthly_corr(r, k) = v.get<double>();
      }
    }
  } else {
    if (!(decay > -1.0 && decay < 1.0)) throw ConfigError(o.at("monthly_decay"), "must lie in (-1, 1)");
    c.monthly_corr = CovarianceSpec::default_monthly_corr(decay);
  }
  o.finish();
  try {
    validate(c);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

RealisticMix parse_mix(const json& j, const std::string& path) {
  Obj o(j, path);
  RealisticMix m;
  m.p_optimal = o.number("optimal", m.p_optimal);
  m.p_first_month = o.number("first_month", m.p_first_month);
  m.p_usual = o.number("usual_care", m.p_usual);
  o.finish();
  if (m.p_optimal < 0 || m.p_first_month < 0 || m.p_usual < 0)
    throw ConfigError(path, "mixing weights must be non-negative");
  const double sum = m.p_optimal + m.p_first_month + m.p_usual;
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "mixing weights must sum to 1 (got " << sum << ")";
    throw ConfigError(path, os.str());
  }
  return m;
}

BaselineDist parse_baseline(const json& j, const std::string& path) {
  Obj o(j, path);
  BaselineDist b;
  b.mean = o.number("mean", b.mean);
  b.sd = o.number("sd", b.sd);
  b.low = o.number("low", b.low);
  b.high = o.number("high", b.high);
  o.finish();
  if (!(b.sd > 0.0)) throw ConfigError(o.at("sd"), "must be > 0");
  if (!(b.low < b.high)) throw ConfigError(path, "low must be below high");
  return b;
}

CohortRef parse_cohort(const json& j, const std::string& path, const std::filesystem::path& base_dir) {
  Obj o(j, path);
  CohortRef c;
  c.path = o.string("path", "");
  c.size = to_int(o.integer("size", c.size), o.at("size"));
  c.seed = o.seed("seed", c.seed);
  o.finish();
  if (!c.path.empty() && (o.has("size") || o.has("seed")))
    throw ConfigError(path, "a cohort file takes no size or seed");
  if (c.size < 1) throw ConfigError(o.at("size"), "must be >= 1");
  if (!c.path.empty() && std::filesystem::path(c.path).is_relative() && !base_dir.empty())
    c.path = (base_dir / c.path).lexically_normal().string();
  return c;
}

ScenarioConfig parse_scenario(const json& j, const std::string& path, const std::filesystem::path& base_dir) {
  Obj o(j, path);
  ScenarioConfig s;
  s.id = o.required_string("id");
  if (s.id.empty()) throw ConfigError(o.at("id"), "must not be empty");
  s.n_per_site = to_int(o.integer("n_per_site", s.n_per_site), o.at("n_per_site"));
  s.sites = to_int(o.integer("sites", s.sites), o.at("sites"));
  s.follow_up = parse_enum<FollowUp>(o.string("follow_up", "realistic"), o.at("follow_up"),
                                     {{"optimal", FollowUp::Optimal}, {"realistic", FollowUp::Realistic}});
  if (const json* v = o.raw("realistic_mix")) s.realistic_mix = parse_mix(*v, o.at("realistic_mix"));
  if (const json* v = o.raw("trend")) s.trend = parse_trend(*v, o.at("trend"));
  if (const json* v = o.raw("effect")) s.effect = parse_effect(*v, o.at("effect"));
  if (const json* v = o.raw("covariance")) s.covariance = parse_covariance(*v, o.at("covariance"));
  s.alpha = o.number("alpha", s.alpha);
  s.beta1 = o.number("beta1", s.beta1);
  s.beta2 = o.number("beta2", s.beta2);
  if (const json* v = o.raw("baseline")) s.baseline = parse_baseline(*v, o.at("baseline"));
  if (const json* v = o.raw("cohort")) s.cohort = parse_cohort(*v, o.at("cohort"), base_dir);
  o.finish();
  if (s.n_per_site < 2 || s.n_per_site % 2 != 0) throw ConfigError(o.at("n_per_site"), "must be even and >= 2");
  if (s.sites < 1 || s.sites > 2) throw ConfigError(o.at("sites"), "must be 1 or 2");
  try {
    validate(s);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return s;
}

ModelSpec parse_method(const json& j, const std::string& path) {
  Obj o(j, path);
  ModelSpec m;
  m.key = o.required_string("key");
  if (m.key.empty()) throw ConfigError(o.at("key"), "must not be empty");
  m.selection = parse_enum<Selection>(o.required_string("selection"), o.at("selection"),
                                      {{"all", Selection::All}, {"random", Selection::Random},
                                       {"closest12", Selection::ClosestTo12}, {"mean", Selection::Mean},
                                       {"best", Selection::Best}});
  m.time_adjust = parse_enum<TimeAdjust>(o.string("time_adjust", "none"), o.at("time_adjust"),
                                         {{"none", TimeAdjust::None}, {"linear", TimeAdjust::Linear},
                                          {"splines3", TimeAdjust::Splines3}});
  m.effect_model = parse_enum<EffectModel>(o.string("effect_model", "constant"), o.at("effect_model"),
                                           {{"constant", EffectModel::Constant},
                                            {"splines3", EffectModel::TimeVarying}});
  const bool single = m.selection != Selection::All;
  m.engine = parse_enum<Engine>(o.string("engine", single ? "ols_sandwich" : "lmm_exponential"), o.at("engine"),
                                {{"ols_sandwich", Engine::OlsSandwich}, {"wgee", Engine::Wgee},
                                 {"lmm_exchangeable", Engine::LmmExchangeable}, {"lmm_car1", Engine::LmmCar1},
                                 {"lmm_exponential", Engine::LmmExponential}});
  m.mean_options.weight_by_n = o.boolean("weight_by_n", false);
  m.mean_options.adjust_for_n = o.boolean("adjust_for_n", false);
  m.target_time = o.number("target_time", 12.0);
  o.finish();
  try {
    validate(m);
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return m;
}

}  // namespace

RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
  Obj top(doc, "");
  RunConfig cfg;

  json defaults = json::object();
  if (const json* d = top.raw("defaults")) {
    if (!d->is_object()) throw ConfigError("/defaults", "expected an object");
    if (d->contains("id")) throw ConfigError("/defaults/id", "scenario ids cannot be defaulted");
    defaults = *d;
  }

  const json* scenarios = top.raw("scenarios");
  if (!scenarios) throw ConfigError("/scenarios", "required field missing");
  if (!scenarios->is_array()) throw ConfigError("/scenarios", "expected an array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < scenarios->size(); ++i) {
    const std::string path = "/scenarios/" + std::to_string(i);
    const json& raw = (*scenarios)[i];
    if (!raw.is_object()) throw ConfigError(path, "expected an object");
    json merged = defaults;
    merged.merge_patch(raw);
    ScenarioConfig s = parse_scenario(merged, path, base_dir);
    if (!ids.insert(s.id).second) throw ConfigError(path + "/id", "duplicate scenario id \"" + s.id + "\"");
    cfg.scenarios.push_back(std::move(s));
  }

  const json* methods = top.raw("methods");
  if (!methods) throw ConfigError("/methods", "required field missing");
  if (!methods->is_array()) throw ConfigError("/methods", "expected an array");
  if (methods->empty()) throw ConfigError("/methods", "no methods");
  std::set<std::string> keys;
  for (std::size_t i = 0; i < methods->size(); ++i) {
    const std::string path = "/methods/" + std::to_string(i);
    ModelSpec m = parse_method((*methods)[i], path);
    if (!keys.insert(m.key).second) throw ConfigError(path + "/key", "duplicate method key \"" + m.key + "\"");
    cfg.methods.push_back(std::move(m));
  }

  if (const json* o = top.raw("oracle")) {
    Obj ob(*o, "/oracle");
    cfg.oracle.n_big = to_int(ob.integer("n_big", cfg.oracle.n_big), ob.at("n_big"));
    cfg.oracle.k_reps = to_int(ob.integer("k_reps", cfg.oracle.k_reps), ob.at("k_reps"));
    cfg.oracle.seed = ob.seed("seed", cfg.oracle.seed);
    cfg.oracle.all_scores = ob.boolean("all_scores", cfg.oracle.all_scores);
    ob.finish();
    if (cfg.oracle.n_big < kOracleMinN)
      throw ConfigError("/oracle/n_big", "must be at least " + std::to_string(kOracleMinN));
    if (cfg.oracle.k_reps < kOracleMinReps)
      throw ConfigError("/oracle/k_reps", "must be at least " + std::to_string(kOracleMinReps));
  }
  top.finish();
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("/", "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.parent_path());
}

std::string_view to_string(Selection s) {
  switch (s) {
    case Selection::All: return "all";
    case Selection::Random: return "random";
    case Selection::ClosestTo12: return "closest12";
    case Selection::Mean: return "mean";
    case Selection::Best: return "best";
  }
  return "?";
}

std::string_view to_string(TimeAdjust t) {
  switch (t) {
    case TimeAdjust::None: return "none";
    case TimeAdjust::Linear: return "linear";
    case TimeAdjust::Splines3: return "splines3";
  }
  return "?";
}

std::string_view to_string(EffectModel e) {
  switch (e) {
    case EffectModel::Constant: return "constant";
    case EffectModel::TimeVarying: return "splines3";
  }
  return "?";
}

std::string_view to_string(Engine e) {
  switch (e) {
    case Engine::OlsSandwich: return "ols_sandwich";
    case Engine::Wgee: return "wgee";
    case Engine::LmmExchangeable: return "lmm_exchangeable";
    case Engine::LmmCar1: return "lmm_car1";
    case Engine::LmmExponential: return "lmm_exponential";
  }
  return "?";
}

std::string_view to_string(EstimandRefKind k) {
  switch (k) {
    case EstimandRefKind::EffectAt12: return "EffectAt12";
    case EstimandRefKind::ConstantEffect: return "ConstantEffect";
    case EstimandRefKind::ConstantPlim: return "ConstantPlim";
  }
  return "?";
}

}  // namespace pragsim
