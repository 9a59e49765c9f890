#include <cmath>
#include <fstream>

#include "tops/error.hpp"
#include "tops/pipeline.hpp"

namespace tops {

namespace {

using nlohmann::json;

template <class T>
void take(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::usage, std::string("config: bad value for '") + key + "'");
  }
}

void take_fit(const json& j, const char* key, FitOptions& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_object()) throw Error(ErrorKind::usage, std::string("config: '") + key + "' must be an object");
  take(*it, "ridge", out.ridge);
  take(*it, "max_iter", out.max_iter);
  take(*it, "tol", out.tol);
}

json fit_json(const FitOptions& f) { return {{"ridge", f.ridge}, {"max_iter", f.max_iter}, {"tol", f.tol}}; }

}  // namespace

void RunConfig::validate() const {
  if (horizons.empty()) throw Error(ErrorKind::usage, "config: at least one horizon is required");
  for (double h : horizons)
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::usage, "config: horizons must be positive");
  for (std::size_t i = 1; i < horizons.size(); ++i)
    if (!(horizons[i] > horizons[i - 1])) throw Error(ErrorKind::usage, "config: horizons must be strictly ascending");
  double sum = 0.0;
  for (double r : split) {
    if (!(r > 0.0)) throw Error(ErrorKind::usage, "config: split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::usage, "config: split ratios must sum to 1");
  if (bootstrap_reps < 100) throw Error(ErrorKind::usage, "config: bootstrap_reps must be >= 100");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::usage, "config: level must be in (0, 1)");
  growth.validate();
}

RunConfig RunConfig::from_json(const json& j, RunConfig base) {
  if (!j.is_object()) throw Error(ErrorKind::usage, "config: expected a JSON object");
  RunConfig c = std::move(base);
  take(j, "horizons", c.horizons);
  take(j, "split", c.split);
  take(j, "seed", c.seed);
  if (auto it = j.find("weight_mode"); it != j.end()) {
    std::string m = it->is_string() ? it->get<std::string>() : "";
    if (m == "simplex") c.weight_mode = WeightMode::simplex;
    else if (m == "unconstrained") c.weight_mode = WeightMode::unconstrained;
    else throw Error(ErrorKind::usage, "config: weight_mode must be 'simplex' or 'unconstrained'");
  }
  if (auto it = j.find("growth"); it != j.end()) {
    const json& g = *it;
    if (!g.is_object()) throw Error(ErrorKind::usage, "config: 'growth' must be an object");
    take(g, "min_leaf", c.growth.min_leaf);
    take(g, "thresholds_per_feature", c.growth.thresholds_per_feature);
    take(g, "min_gain", c.growth.min_gain);
    take(g, "threads", c.growth.threads);
    take(g, "linear_ridge", c.growth.learner.linear_ridge);
    take_fit(g, "logistic", c.growth.learner.logistic);
    take_fit(g, "cox", c.growth.learner.cox);
    if (auto lk = g.find("learners"); lk != g.end()) {
      if (!lk->is_array()) throw Error(ErrorKind::usage, "config: 'learners' must be an array");
      c.growth.learner_kinds.clear();
      for (const auto& name : *lk) {
        if (!name.is_string()) throw Error(ErrorKind::usage, "config: learner names must be strings");
        c.growth.learner_kinds.push_back(learner_from_string(name.get<std::string>()));
      }
    }
  }
  if (auto it = j.find("evaluation"); it != j.end()) {
    take(*it, "bootstrap_reps", c.bootstrap_reps);
    take(*it, "level", c.level);
  }
  c.growth.seed = c.seed;
  return c;
}

RunConfig RunConfig::from_json(const json& j) { return from_json(j, RunConfig{}); }

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::usage, "config '" + path + "': " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json kinds = json::array();
  for (auto k : growth.learner_kinds) kinds.push_back(tops::to_string(k));
  return {
      {"horizons", horizons},
      {"split", split},
      {"seed", seed},
      {"weight_mode", weight_mode == WeightMode::simplex ? "simplex" : "unconstrained"},
      {"growth",
       {{"min_leaf", growth.min_leaf},
        {"thresholds_per_feature", growth.thresholds_per_feature},
        {"min_gain", growth.min_gain},
        {"threads", growth.threads},
        {"learners", kinds},
        {"linear_ridge", growth.learner.linear_ridge},
        {"logistic", fit_json(growth.learner.logistic)},
        {"cox", fit_json(growth.learner.cox)}}},
      {"evaluation", {{"bootstrap_reps", bootstrap_reps}, {"level", level}}},
  };
}

}  // namespace tops
