#include <cmath>
#include <fstream>
#include <sstream>

#include "tops/error.hpp"
#include "tops/tree.hpp"

namespace tops {
namespace {

constexpr int kModelVersion = 1;

nlohmann::json predictor_json(const Predictor& p) {
  nlohmann::json j;
  j["kind"] = to_string(p.kind);
  j["coefficients"] = std::vector<double>(p.coefficients.begin(), p.coefficients.end() - (p.coefficients.empty() ? 0 : 1));
  j["intercept"] = p.intercept();
  if (p.baseline_survival) j["baseline_survival"] = *p.baseline_survival;
  j["horizon"] = p.horizon;
  j["trained_on_node"] = p.trained_on_node;
  return j;
}

Predictor predictor_from(const nlohmann::json& j) {
  Predictor p;
  p.kind = learner_from_string(j.at("kind").get<std::string>());
  p.coefficients = j.at("coefficients").get<std::vector<double>>();
  p.coefficients.push_back(j.at("intercept").get<double>());
  if (j.contains("baseline_survival")) p.baseline_survival = j.at("baseline_survival").get<double>();
  if (p.kind == LearnerKind::cox && !p.baseline_survival)
    throw Error(ErrorKind::data, "Cox predictor lacks baseline_survival");
  p.horizon = j.at("horizon").get<double>();
  p.trained_on_node = j.at("trained_on_node").get<int>();
  for (double c : p.coefficients)
    if (!std::isfinite(c)) throw Error(ErrorKind::data, "non-finite predictor coefficient");
  return p;
}

const char* side_name(Side s) { return s == Side::below ? "below" : "at_or_above"; }

Side side_from(const std::string& s) {
  if (s == "below") return Side::below;
  if (s == "at_or_above") return Side::at_or_above;
  throw Error(ErrorKind::data, "unknown constraint side '" + s + "'");
}

void check_structure(const TreeOfPredictors& t) {
  if (t.nodes.empty()) throw Error(ErrorKind::data, "model has no nodes");
  const std::size_t width = t.schema.width();
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const Node& n = t.nodes[i];
    if (n.id != static_cast<int>(i)) throw Error(ErrorKind::data, "node ids must be 0..n-1 in order");
    if (n.predictor.width() != width) throw Error(ErrorKind::data, "predictor width does not match schema");
    const auto path = t.path_to(n.id);
    if (std::find(path.begin(), path.end(), n.train_node_id) == path.end())
      throw Error(ErrorKind::data, "node " + std::to_string(n.id) + " trained on a non-ancestor");
    if (n.children) {
      const auto& c = *n.children;
      for (int child : {c.below, c.at_or_above})
        if (child <= n.id || child >= static_cast<int>(t.nodes.size()) || t.node(child).parent != n.id)
          throw Error(ErrorKind::data, "node " + std::to_string(n.id) + " has inconsistent children");
      if (c.feature_index >= width) throw Error(ErrorKind::data, "split column out of range");
    }
  }
  for (const auto& [leaf, w] : t.path_weights) {
    if (leaf < 0 || leaf >= static_cast<int>(t.nodes.size()) || !t.node(leaf).is_leaf())
      throw Error(ErrorKind::data, "path weights for non-leaf " + std::to_string(leaf));
    if (w.size() != t.path_to(leaf).size()) throw Error(ErrorKind::data, "path weight length mismatch");
  }
  if (!t.path_weights.empty() && t.path_weights.size() != t.leaves().size())
    throw Error(ErrorKind::data, "path weights missing for some leaves");
}

}  // namespace

nlohmann::json model_to_json(const TreeOfPredictors& tree) {
  nlohmann::json j;
  j["version"] = kModelVersion;
  j["horizon"] = tree.horizon;
  j["schema_fingerprint"] = tree.schema_fingerprint;
  j["schema"] = tree.schema.to_json();
  j["fill_values"] = tree.fill_values;
  j["column_ranges"] = tree.column_ranges;
  j["weight_mode"] = tree.weight_mode == WeightMode::simplex ? "simplex" : "unconstrained";
  j["root_id"] = tree.root_id;
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nlohmann::json jn;
    jn["id"] = n.id;
    jn["parent"] = n.parent;
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : n.constraints)
      cs.push_back({{"feature_index", c.feature_index}, {"threshold", c.threshold}, {"side", side_name(c.side)}});
    jn["constraints"] = cs;
    jn["predictor"] = predictor_json(n.predictor);
    jn["train_node_id"] = n.train_node_id;
    if (n.children)
      jn["children"] = {{"feature_index", n.children->feature_index},
                        {"threshold", n.children->threshold},
                        {"below", n.children->below},
                        {"at_or_above", n.children->at_or_above}};
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = nodes;
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [leaf, w] : tree.path_weights) weights[std::to_string(leaf)] = w;
  j["path_weights"] = weights;
  return j;
}

TreeOfPredictors model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kModelVersion)
      throw Error(ErrorKind::data, "unsupported model version " + j.at("version").dump());
    TreeOfPredictors t;
    t.horizon = j.at("horizon").get<double>();
    t.schema_fingerprint = j.at("schema_fingerprint").get<std::string>();
    t.schema = Schema::from_json(j.at("schema"));
    if (t.schema.fingerprint() != t.schema_fingerprint)
      throw Error(ErrorKind::schema, "schema fingerprint mismatch inside model file");
    t.fill_values = j.at("fill_values").get<std::vector<double>>();
    t.column_ranges = j.at("column_ranges").get<std::vector<std::array<double, 2>>>();
    if (t.fill_values.size() != t.schema.width() || t.column_ranges.size() != t.schema.width())
      throw Error(ErrorKind::data, "fill values or column ranges do not match schema width");
    const auto mode = j.at("weight_mode").get<std::string>();
    if (mode == "simplex") t.weight_mode = WeightMode::simplex;
    else if (mode == "unconstrained") t.weight_mode = WeightMode::unconstrained;
    else throw Error(ErrorKind::data, "unknown weight_mode '" + mode + "'");
    t.root_id = j.at("root_id").get<int>();
    if (t.root_id != 0) throw Error(ErrorKind::data, "root_id must be 0");
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<int>();
      n.parent = jn.at("parent").get<int>();
      for (const auto& c : jn.at("constraints"))
        n.constraints.push_back({c.at("feature_index").get<std::size_t>(), c.at("threshold").get<double>(),
                                 side_from(c.at("side").get<std::string>())});
      n.predictor = predictor_from(jn.at("predictor"));
      n.train_node_id = jn.at("train_node_id").get<int>();
      if (jn.contains("children")) {
        const auto& c = jn.at("children");
        n.children = Node::Children{c.at("feature_index").get<std::size_t>(), c.at("threshold").get<double>(),
                                    c.at("below").get<int>(), c.at("at_or_above").get<int>()};
      }
      if (n.parent >= static_cast<int>(t.nodes.size()) || (n.parent < 0) != t.nodes.empty())
        throw Error(ErrorKind::data, "node " + std::to_string(n.id) + " has an invalid parent");
      t.nodes.push_back(std::move(n));
    }
    for (const auto& [key, w] : j.at("path_weights").items())
      t.path_weights[std::stoi(key)] = w.get<std::vector<double>>();
    check_structure(t);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, std::string("malformed model: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorKind::data, "malformed model: bad leaf id");
  }
}

void save_model(const TreeOfPredictors& tree, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write model " + path);
  out << model_to_json(tree).dump(1) << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing model " + path);
}

TreeOfPredictors load_model(const std::string& path, const Schema* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open model " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, "malformed model " + path + ": " + e.what());
  }
  TreeOfPredictors t;
  try {
    t = model_from_json(j);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
  if (expected && expected->fingerprint() != t.schema_fingerprint)
    throw Error(ErrorKind::schema, "schema fingerprint mismatch: model " + path + " has " + t.schema_fingerprint +
                                       ", data schema has " + expected->fingerprint());
  return t;
}

}  // namespace tops
