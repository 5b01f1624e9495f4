#pragma once

// JSON problem specifications, designs and study files. Unknown keys are
// rejected; every error names the offending JSON pointer.

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "aopt/design.hpp"
#include "aopt/errors.hpp"
#include "aopt/evaluation.hpp"
#include "aopt/forlion.hpp"
#include "aopt/glm.hpp"
#include "aopt/liftone.hpp"

namespace aopt::io {

using Json = nlohmann::json;

class SchemaError : public InvalidArgument {
public:
  SchemaError(std::string pointer, const std::string& what)
      : InvalidArgument("schema error at " + (pointer.empty() ? std::string("/") : pointer) + ": " + what),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

private:
  std::string pointer_;
};

/// A parsed problem specification.
struct ProblemSpec {
  GlmModel model;
  std::optional<DesignSpace> space;
  std::optional<std::vector<Point>> candidates;
  Vector initial_weights;
};

namespace detail {

inline std::string child(const std::string& path, const std::string& key) {
  std::string k;
  for (char c : key) {
    if (c == '~')
      k += "~0";
    else if (c == '/')
      k += "~1";
    else
      k += c;
  }
  return path + "/" + k;
}
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline void require_object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw SchemaError(child(path, it.key()), "unknown key");
  }
}

inline const Json& required(const Json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw SchemaError(child(path, key), "missing required key");
  return j.at(key);
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "expected a finite number");
  return v;
}

inline long integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<long>();
}

inline std::string string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

inline Vector vector(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], child(path, i));
  return v;
}

inline std::vector<Point> points(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw SchemaError(path, "expected a nonempty array of points");
  std::vector<Point> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(vector(j[i], child(path, i)));
    if (out.back().size() != out.front().size()) throw SchemaError(child(path, i), "points differ in dimension");
  }
  return out;
}

inline Json to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Json to_json(const std::vector<Point>& pts) {
  Json a = Json::array();
  for (const auto& x : pts) a.push_back(to_json(x));
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model and predictor
// ---------------------------------------------------------------------------

inline PredictorBasis parse_predictor(const Json& j, const std::string& path) {
  using namespace detail;
  if (!j.is_array() || j.empty()) throw SchemaError(path, "expected a nonempty array of terms");
  std::vector<BasisTerm> terms;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = child(path, i);
    const auto& t = j[i];
    if (!t.is_object()) throw SchemaError(p, "expected an object");
    const auto type = string(required(t, "type", p), child(p, "type"));
    auto factor = [&] {
      const long f = integer(required(t, "factor", p), child(p, "factor"));
      if (f < 0) throw SchemaError(child(p, "factor"), "factor index must be nonnegative");
      return static_cast<int>(f);
    };
    if (type == "intercept") {
      require_object(t, p, {"type"});
      terms.emplace_back(term::Intercept{});
    } else if (type == "linear") {
      require_object(t, p, {"type", "factor"});
      terms.emplace_back(term::Linear{factor()});
    } else if (type == "power") {
      require_object(t, p, {"type", "factor", "exponent"});
      terms.emplace_back(term::Power{factor(), number(required(t, "exponent", p), child(p, "exponent"))});
    } else if (type == "interaction") {
      require_object(t, p, {"type", "factors"});
      const auto& fs = required(t, "factors", p);
      if (!fs.is_array() || fs.size() < 2) throw SchemaError(child(p, "factors"), "expected at least two factor indices");
      term::Interaction in;
      for (std::size_t k = 0; k < fs.size(); ++k) {
        const long f = integer(fs[k], child(child(p, "factors"), k));
        if (f < 0) throw SchemaError(child(child(p, "factors"), k), "factor index must be nonnegative");
        in.factors.push_back(static_cast<int>(f));
      }
      terms.emplace_back(std::move(in));
    } else if (type == "indicator") {
      require_object(t, p, {"type", "factor", "level"});
      terms.emplace_back(term::Indicator{factor(), number(required(t, "level", p), child(p, "level"))});
    } else {
      throw SchemaError(child(p, "type"), "unknown term type '" + type + "'");
    }
  }
  return PredictorBasis(std::move(terms));
}

inline Json predictor_to_json(const PredictorBasis& b) {
  Json a = Json::array();
  for (const auto& t : b.terms()) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, term::Intercept>)
            a.push_back({{"type", "intercept"}});
          else if constexpr (std::is_same_v<T, term::Linear>)
            a.push_back({{"type", "linear"}, {"factor", v.factor}});
          else if constexpr (std::is_same_v<T, term::Power>)
            a.push_back({{"type", "power"}, {"factor", v.factor}, {"exponent", v.exponent}});
          else if constexpr (std::is_same_v<T, term::Interaction>)
            a.push_back({{"type", "interaction"}, {"factors", v.factors}});
          else if constexpr (std::is_same_v<T, term::Indicator>)
            a.push_back({{"type", "indicator"}, {"factor", v.factor}, {"level", v.level}});
          else
            throw InvalidArgument("custom basis terms cannot be serialized");
        },
        t);
  }
  return a;
}

namespace detail {

inline const char* constant_key(FamilyKind k) {
  switch (k) {
    case FamilyKind::Binomial:
      return "n_trials";
    case FamilyKind::Gamma:
      return "shape";
    case FamilyKind::InverseGaussian:
      return "lambda";
    case FamilyKind::Normal:
      return "sigma2";
    default:
      return nullptr;
  }
}

}  // namespace detail

/// Parses "model" (family, link, beta, constants); the predictor is filled in separately.
inline GlmModel parse_model(const Json& j, const std::string& path) {
  using namespace detail;
  require_object(j, path, {"family", "link", "beta", "constants"});
  GlmModel m;
  const auto fam = string(required(j, "family", path), child(path, "family"));
  const auto link = string(required(j, "link", path), child(path, "link"));
  const auto fk = family_from_string(fam);
  if (!fk) throw SchemaError(child(path, "family"), "unknown family '" + fam + "'");
  m.family.kind = *fk;
  const auto lk = link_from_string(link);
  if (!lk) throw SchemaError(child(path, "link"), "unknown link '" + link + "'");
  m.link = *lk;
  if (m.family.kind == FamilyKind::Custom || m.link == Link::Custom)
    throw SchemaError(m.link == Link::Custom ? child(path, "link") : child(path, "family"),
                      "custom families and links need code hooks and cannot be read from JSON");
  m.beta = vector(required(j, "beta", path), child(path, "beta"));
  if (m.beta.size() < 1) throw SchemaError(child(path, "beta"), "beta must have at least one coefficient");

  const char* key = constant_key(m.family.kind);
  m.family.constant = 1.0;
  if (j.contains("constants")) {
    const auto cp = child(path, "constants");
    const auto& c = j.at("constants");
    if (key)
      require_object(c, cp, {key});
    else
      require_object(c, cp, {});
    if (key && c.contains(key)) {
      const double v = number(c.at(key), child(cp, key));
      if (m.family.kind == FamilyKind::Binomial && (v != std::floor(v) || v < 1))
        throw SchemaError(child(cp, key), "n_trials must be a positive integer");
      if (!(v > 0.0)) throw SchemaError(child(cp, key), "must be positive");
      m.family.constant = v;
    }
  }
  return m;
}

inline Json model_to_json(const GlmModel& m) {
  Json j{{"family", to_string(m.family.kind)}, {"link", to_string(m.link)}, {"beta", detail::to_json(m.beta)}};
  if (const char* key = detail::constant_key(m.family.kind)) j["constants"] = {{key, m.family.constant}};
  return j;
}

// ---------------------------------------------------------------------------
// Design space
// ---------------------------------------------------------------------------

inline DesignSpace parse_space(const Json& j, const std::string& path) {
  using namespace detail;
  require_object(j, path, {"factors", "grid"});
  const auto& fs = required(j, "factors", path);
  const auto fp = child(path, "factors");
  if (!fs.is_array() || fs.empty()) throw SchemaError(fp, "expected a nonempty array of factors");
  std::vector<Factor> factors;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const auto p = child(fp, i);
    const auto& f = fs[i];
    if (!f.is_object()) throw SchemaError(p, "expected an object");
    const auto kind = string(required(f, "kind", p), child(p, "kind"));
    if (kind == "continuous") {
      require_object(f, p, {"kind", "lower", "upper"});
      const double lo = number(required(f, "lower", p), child(p, "lower"));
      const double hi = number(required(f, "upper", p), child(p, "upper"));
      if (!(lo < hi)) throw SchemaError(child(p, "upper"), "upper must exceed lower");
      factors.emplace_back(ContinuousFactor{lo, hi});
    } else if (kind == "discrete") {
      require_object(f, p, {"kind", "levels"});
      const Vector lv = vector(required(f, "levels", p), child(p, "levels"));
      if (lv.size() == 0) throw SchemaError(child(p, "levels"), "levels must be nonempty");
      factors.emplace_back(DiscreteFactor{std::vector<double>(lv.data(), lv.data() + lv.size())});
    } else {
      throw SchemaError(child(p, "kind"), "expected 'continuous' or 'discrete'");
    }
  }
  std::optional<std::vector<std::vector<double>>> grid;
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    const auto gp = child(path, "grid");
    if (!g.is_array() || g.empty()) throw SchemaError(gp, "expected a nonempty array of combinations");
    grid.emplace();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vector c = vector(g[i], child(gp, i));
      grid->emplace_back(c.data(), c.data() + c.size());
    }
  }
  try {
    return DesignSpace(std::move(factors), std::move(grid));
  } catch (const InvalidArgument& e) {
    throw SchemaError(path, e.what());
  }
}

inline Json space_to_json(const DesignSpace& s) {
  Json fs = Json::array();
  for (const auto& f : s.factors()) {
    if (const auto* c = std::get_if<ContinuousFactor>(&f))
      fs.push_back({{"kind", "continuous"}, {"lower", c->lower}, {"upper", c->upper}});
    else
      fs.push_back({{"kind", "discrete"}, {"levels", std::get<DiscreteFactor>(f).levels}});
  }
  Json j{{"factors", fs}};
  if (s.grid()) j["grid"] = *s.grid();
  return j;
}

// ---------------------------------------------------------------------------
// Problem specification
// ---------------------------------------------------------------------------

inline ProblemSpec parse_spec(const Json& j) {
  using namespace detail;
  require_object(j, "", {"model", "predictor", "space", "candidates", "weights"});
  ProblemSpec spec;
  spec.model = parse_model(required(j, "model", ""), "/model");
  if (j.contains("space")) spec.space = parse_space(j.at("space"), "/space");
  if (j.contains("candidates")) spec.candidates = points(j.at("candidates"), "/candidates");
  if (!spec.space && !spec.candidates) throw SchemaError("/space", "either 'space' or 'candidates' is required");

  const int d = spec.candidates ? static_cast<int>(spec.candidates->front().size()) : spec.space->dimension();
  if (spec.space && spec.candidates && spec.space->dimension() != d)
    throw SchemaError("/candidates", "candidate dimension differs from the design space");
  if (spec.space && spec.candidates)
    for (std::size_t i = 0; i < spec.candidates->size(); ++i)
      if (!spec.space->contains((*spec.candidates)[i]))
        throw SchemaError(child("/candidates", i), "candidate lies outside the design space");

  spec.model.predictor = j.contains("predictor") ? parse_predictor(j.at("predictor"), "/predictor")
                                                 : PredictorBasis::main_effects(d);
  if (spec.model.predictor.size() != spec.model.beta.size())
    throw SchemaError("/model/beta", "length " + std::to_string(spec.model.beta.size()) +
                                         " differs from the number of predictor terms (" +
                                         std::to_string(spec.model.predictor.size()) + ")");
  try {
    spec.model.predictor.validate(d);
  } catch (const Error& e) {
    throw SchemaError("/predictor", e.what());
  }
  if (j.contains("weights")) {
    spec.initial_weights = vector(j.at("weights"), "/weights");
    if (!spec.candidates) throw SchemaError("/weights", "initial weights need 'candidates'");
    if (spec.initial_weights.size() != static_cast<Eigen::Index>(spec.candidates->size()))
      throw SchemaError("/weights", "length differs from the number of candidates");
    if ((spec.initial_weights.array() <= 0.0).any())
      throw SchemaError("/weights", "initial weights must be strictly positive");
  }
  return spec;
}

inline Json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw InvalidArgument("cannot open " + file);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
}

inline ProblemSpec read_spec(const std::string& file) { return parse_spec(read_json_file(file)); }

// ---------------------------------------------------------------------------
// Designs
// ---------------------------------------------------------------------------

/// A design file: the model it was computed for plus points and weights.
struct DesignFile {
  GlmModel model;
  ApproximateDesign design;
  Json extra = Json::object();
};

inline Json design_to_json(const GlmModel& model, const ApproximateDesign& d) {
  return {{"model", model_to_json(model)},
          {"predictor", predictor_to_json(model.predictor)},
          {"points", detail::to_json(d.points)},
          {"weights", detail::to_json(d.weights)}};
}

inline Json liftone_to_json(const GlmModel& model, const LiftOneResult& r) {
  Json j = design_to_json(model, r.design);
  j["h"] = r.h;
  j["certified"] = r.certified;
  j["iterations"] = r.iterations;
  j["seed"] = r.seed;
  j["method"] = r.method;
  return j;
}

inline Json forlion_to_json(const GlmModel& model, const ForlionResult& r, std::uint64_t seed) {
  Json j = design_to_json(model, r.design);
  j["h"] = r.h;
  j["certified"] = r.certified;
  j["iterations"] = r.iterations;
  j["seed"] = seed;
  j["method"] = "forlion";
  j["phi_star"] = r.phi_star;
  j["trace_inverse"] = r.trace_inverse;
  j["support_bound_exceeded"] = r.support_bound_exceeded;
  j["rank_guard_fired"] = r.rank_guard_fired;
  return j;
}

inline DesignFile parse_design(const Json& j) {
  using namespace detail;
  require_object(j, "", {"model", "predictor", "points", "weights", "h", "certified", "iterations", "seed", "method",
                         "phi_star", "trace_inverse", "support_bound_exceeded", "rank_guard_fired"});
  DesignFile f;
  f.model = parse_model(required(j, "model", ""), "/model");
  f.design.points = points(required(j, "points", ""), "/points");
  f.design.weights = vector(required(j, "weights", ""), "/weights");
  const int d = static_cast<int>(f.design.points.front().size());
  f.model.predictor =
      j.contains("predictor") ? parse_predictor(j.at("predictor"), "/predictor") : PredictorBasis::main_effects(d);
  if (f.model.predictor.size() != f.model.beta.size())
    throw SchemaError("/model/beta", "length differs from the number of predictor terms");
  try {
    f.model.predictor.validate(d);
  } catch (const Error& e) {
    throw SchemaError("/predictor", e.what());
  }
  if (f.design.weights.size() != f.design.size()) throw SchemaError("/weights", "length differs from points");
  try {
    f.design.validate(1e-9);
  } catch (const InvalidArgument& e) {
    throw SchemaError("/weights", e.what());
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "model" && it.key() != "predictor" && it.key() != "points" && it.key() != "weights")
      f.extra[it.key()] = it.value();
  return f;
}

inline Json exact_to_json(const GlmModel& model, const ExactDesign& e) {
  return {{"model", model_to_json(model)},
          {"predictor", predictor_to_json(model.predictor)},
          {"points", detail::to_json(e.points)},
          {"counts", e.counts},
          {"n", e.n}};
}

// ---------------------------------------------------------------------------
// Study files
// ---------------------------------------------------------------------------

inline StudyConfig parse_study(const Json& j) {
  using namespace detail;
  require_object(j, "", {"model", "predictor", "strata", "sizes", "n", "samplers", "replications", "seed",
                         "rest_indices"});
  StudyConfig cfg;
  cfg.model = parse_model(required(j, "model", ""), "/model");
  if (cfg.model.family.kind != FamilyKind::Bernoulli)
    throw SchemaError("/model/family", "studies simulate binary responses; family must be 'bernoulli'");
  cfg.strata = points(required(j, "strata", ""), "/strata");
  const int d = static_cast<int>(cfg.strata.front().size());
  cfg.model.predictor =
      j.contains("predictor") ? parse_predictor(j.at("predictor"), "/predictor") : PredictorBasis::main_effects(d);
  if (cfg.model.predictor.size() != cfg.model.beta.size())
    throw SchemaError("/model/beta", "length differs from the number of predictor terms");
  try {
    cfg.model.predictor.validate(d);
  } catch (const Error& e) {
    throw SchemaError("/predictor", e.what());
  }

  const auto& sz = required(j, "sizes", "");
  if (!sz.is_array() || sz.size() != cfg.strata.size()) throw SchemaError("/sizes", "expected one size per stratum");
  for (std::size_t i = 0; i < sz.size(); ++i) {
    const long v = integer(sz[i], child("/sizes", i));
    if (v < 0) throw SchemaError(child("/sizes", i), "must be nonnegative");
    cfg.sizes.push_back(v);
  }
  cfg.n = integer(required(j, "n", ""), "/n");
  const long N = std::accumulate(cfg.sizes.begin(), cfg.sizes.end(), 0L);
  if (cfg.n < 1 || cfg.n > N) throw SchemaError("/n", "must lie in [1, population size]");

  const auto& ss = required(j, "samplers", "");
  if (!ss.is_array() || ss.empty()) throw SchemaError("/samplers", "expected a nonempty array");
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const auto p = child("/samplers", i);
    require_object(ss[i], p, {"name", "kind", "allocation"});
    SamplerSpec s;
    s.name = string(required(ss[i], "name", p), child(p, "name"));
    const auto kind = ss[i].contains("kind") ? string(ss[i].at("kind"), child(p, "kind")) : std::string("allocation");
    if (kind == "allocation") {
      s.kind = SamplerSpec::Kind::Allocation;
      const auto& a = required(ss[i], "allocation", p);
      if (!a.is_array() || a.size() != cfg.strata.size())
        throw SchemaError(child(p, "allocation"), "expected one count per stratum");
      long total = 0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const long c = integer(a[k], child(child(p, "allocation"), k));
        if (c < 0 || c > cfg.sizes[k]) throw SchemaError(child(child(p, "allocation"), k), "count outside [0, N_i]");
        s.allocation.push_back(c);
        total += c;
      }
      if (total != cfg.n) throw SchemaError(child(p, "allocation"), "counts do not sum to n");
    } else if (kind == "srswor") {
      s.kind = SamplerSpec::Kind::Srswor;
      if (ss[i].contains("allocation")) throw SchemaError(child(p, "allocation"), "not allowed for srswor");
    } else if (kind == "a-optimal") {
      s.kind = SamplerSpec::Kind::AOptimal;
      if (ss[i].contains("allocation")) throw SchemaError(child(p, "allocation"), "not allowed for a-optimal");
    } else {
      throw SchemaError(child(p, "kind"), "expected 'allocation', 'srswor' or 'a-optimal'");
    }
    cfg.samplers.push_back(std::move(s));
  }
  if (j.contains("replications")) {
    const long r = integer(j.at("replications"), "/replications");
    if (r < 1) throw SchemaError("/replications", "must be positive");
    cfg.replications = static_cast<int>(r);
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw SchemaError("/seed", "expected a nonnegative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("rest_indices")) {
    const auto& r = j.at("rest_indices");
    if (!r.is_array() || r.empty()) throw SchemaError("/rest_indices", "expected a nonempty array");
    for (std::size_t k = 0; k < r.size(); ++k) {
      const long v = integer(r[k], child("/rest_indices", k));
      if (v < 0 || v >= cfg.model.beta.size()) throw SchemaError(child("/rest_indices", k), "index out of range");
      cfg.rest_indices.push_back(static_cast<int>(v));
    }
  }
  return cfg;
}

inline Json study_summary_to_json(const StudyReport& rep) {
  Json a = Json::array();
  for (const auto& s : rep.summaries)
    a.push_back({{"sampler", s.sampler},
                 {"allocation", s.allocation},
                 {"fits", s.fits},
                 {"excluded", s.excluded},
                 {"mean_rmse_b0", s.mean_rmse_b0},
                 {"sd_rmse_b0", s.sd_rmse_b0},
                 {"mean_rmse_rest", s.mean_rmse_rest},
                 {"sd_rmse_rest", s.sd_rmse_rest},
                 {"mean_ce", s.mean_ce},
                 {"sd_ce", s.sd_ce}});
  return a;
}

}  // namespace aopt::io
