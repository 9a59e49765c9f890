#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

#include <httplib.h>

#include "tops/analysis.hpp"
#include "tops/csv.hpp"
#include "tops/service.hpp"

namespace tops {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kModelVersion = 1;

std::string horizon_key(double h) { return csv::format_double(h); }

std::string cell_text(const FeatureSpec& spec, const json& v) {
  if (v.is_null()) return {};
  if (v.is_boolean()) {
    if (spec.kind != FeatureKind::binary) throw RequestError("feature '" + spec.name + "': boolean given for non-binary feature");
    return v.get<bool>() ? "1" : "0";
  }
  if (v.is_number()) {
    if (spec.kind == FeatureKind::categorical)
      throw RequestError("feature '" + spec.name + "': expected one of its categories");
    double d = v.get<double>();
    if (!std::isfinite(d)) throw RequestError("feature '" + spec.name + "': value must be finite");
    return csv::format_double(d);
  }
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.empty()) throw RequestError("feature '" + spec.name + "': empty value");
    return s;
  }
  throw RequestError("feature '" + spec.name + "': unsupported value type");
}

}  // namespace

json PredictResult::to_json() const {
  json probs = json::object(), paths = json::object(), samples = json::array();
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    probs[horizon_key(horizons[i])] = probabilities[i];
    paths[horizon_key(horizons[i])] = leaf_paths[i];
  }
  for (const auto& [t, s] : curve) samples.push_back({t, s});
  return {{"horizons", horizons},
          {"probabilities", probs},
          {"survival_curve", samples},
          {"leaf_path", paths},
          {"warnings", warnings}};
}

PredictionService::PredictionService(std::vector<TreeOfPredictors> models, std::size_t curve_points)
    : models_(std::move(models)), curve_points_(curve_points) {
  if (models_.empty()) throw Error(ErrorKind::data, "no models loaded", "startup");
  std::sort(models_.begin(), models_.end(), [](const auto& a, const auto& b) { return a.horizon < b.horizon; });
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i].schema_fingerprint != models_[0].schema_fingerprint)
      throw Error(ErrorKind::schema, "models were trained on different schemas", "startup");
    if (i > 0 && models_[i].horizon == models_[i - 1].horizon)
      throw Error(ErrorKind::data, "duplicate horizon " + horizon_key(models_[i].horizon), "startup");
    if (models_[i].fill_values.size() != models_[i].schema.width())
      throw Error(ErrorKind::data, "model for horizon " + horizon_key(models_[i].horizon) + " has no fill values",
                  "startup");
  }
}

PredictionService PredictionService::from_directory(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorKind::io, "model directory '" + dir + "' not found", "startup");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("model_") && entry.path().extension() == ".json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::data, "no model_*.json files in '" + dir + "'", "startup");
  std::vector<TreeOfPredictors> models;
  for (const auto& f : files) {
    try {
      models.push_back(load_model(f.string()));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::data, "cannot load model " + f.string() + ": " + e.what(), "startup");
    }
  }
  return PredictionService(std::move(models));
}

std::vector<double> PredictionService::horizons() const {
  std::vector<double> h;
  for (const auto& m : models_) h.push_back(m.horizon);
  return h;
}

std::vector<double> PredictionService::encode(const TreeOfPredictors& model, const json& features,
                                              std::vector<std::string>* warnings) const {
  const Schema& schema = model.schema;
  std::vector<double> x(schema.width(), kMissing);
  for (auto it = features.begin(); it != features.end(); ++it) {
    auto f = schema.feature_index(it.key());
    if (!f) throw RequestError("unknown feature '" + it.key() + "'");
    const FeatureSpec& spec = schema.features()[*f];
    std::string text = cell_text(spec, it.value());
    if (text.empty()) continue;
    std::span<double> out(x.data() + schema.column_offset(*f), schema.feature_width(*f));
    try {
      schema.encode_cell(*f, text, out);
    } catch (const Error& e) {
      throw RequestError("feature '" + spec.name + "': " + e.what());
    }
    if (warnings && spec.kind == FeatureKind::continuous && !model.column_ranges.empty()) {
      const auto& r = model.column_ranges[schema.column_offset(*f)];
      if (out[0] < r[0] || out[0] > r[1])
        warnings->push_back("feature '" + spec.name + "' value " + csv::format_double(out[0]) +
                            " outside training range [" + csv::format_double(r[0]) + ", " +
                            csv::format_double(r[1]) + "]");
    }
  }
  for (std::size_t c = 0; c < x.size(); ++c)
    if (is_missing(x[c])) x[c] = model.fill_values[c];
  return x;
}

PredictResult PredictionService::predict(const PredictRequest& request) const {
  if (!request.features.is_object()) throw RequestError("'features' must be an object");
  std::vector<const TreeOfPredictors*> chosen;
  if (request.horizons) {
    if (request.horizons->empty()) throw RequestError("'horizons' must not be empty");
    for (double h : *request.horizons) {
      auto it = std::find_if(models_.begin(), models_.end(), [&](const auto& m) { return m.horizon == h; });
      if (it == models_.end()) throw RequestError("no model for horizon " + horizon_key(h));
      if (std::find(chosen.begin(), chosen.end(), &*it) == chosen.end()) chosen.push_back(&*it);
    }
    std::sort(chosen.begin(), chosen.end(), [](auto a, auto b) { return a->horizon < b->horizon; });
  } else {
    for (const auto& m : models_) chosen.push_back(&m);
  }

  PredictResult r;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const TreeOfPredictors& m = *chosen[i];
    std::vector<double> x = encode(m, request.features, i == 0 ? &r.warnings : nullptr);
    r.horizons.push_back(m.horizon);
    r.probabilities.push_back(predict_overall(m, x));
    r.leaf_paths.push_back(route(m, x).path);
  }
  r.curve = individual_curve(r.probabilities, r.horizons).sample(curve_points_);
  return r;
}

std::vector<PredictResult> PredictionService::whatif(const PredictRequest& base,
                                                     const std::vector<std::pair<std::string, json>>& toggles) const {
  std::vector<PredictResult> out;
  out.push_back(predict(base));
  for (const auto& [name, value] : toggles) {
    PredictRequest copy = base;
    copy.features[name] = value;
    out.push_back(predict(copy));
  }
  return out;
}

ServiceResponse PredictionService::error_response(int status, const std::string& stage, const std::string& message) {
  return {status, {{"code", status}, {"stage", stage}, {"message", message}}};
}

PredictRequest PredictionService::parse_request(const json& body) {
  if (!body.is_object()) throw RequestError("request body must be a JSON object");
  PredictRequest r;
  if (auto it = body.find("features"); it != body.end()) {
    if (!it->is_object()) throw RequestError("'features' must be an object");
    r.features = *it;
  }
  if (auto it = body.find("horizons"); it != body.end() && !it->is_null()) {
    if (!it->is_array()) throw RequestError("'horizons' must be an array of numbers");
    std::vector<double> hs;
    for (const auto& h : *it) {
      if (!h.is_number()) throw RequestError("'horizons' must be an array of numbers");
      hs.push_back(h.get<double>());
    }
    r.horizons = std::move(hs);
  }
  for (auto it = body.begin(); it != body.end(); ++it)
    if (it.key() != "features" && it.key() != "horizons") throw RequestError("unknown request field '" + it.key() + "'");
  return r;
}

namespace {

template <class F>
ServiceResponse guarded(F&& f) {
  try {
    return f();
  } catch (const RequestError& e) {
    return PredictionService::error_response(400, e.stage(), e.what());
  } catch (const Error& e) {
    std::cerr << "service error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return PredictionService::error_response(500, e.stage().empty() ? "predict" : e.stage(), e.what());
  } catch (const std::exception& e) {
    std::cerr << "service error: " << e.what() << '\n';
    return PredictionService::error_response(500, "predict", e.what());
  }
}

}  // namespace

ServiceResponse PredictionService::handle_health() const {
  return {200, {{"status", "ok"}, {"models", models_.size()}, {"horizons", horizons()}}};
}

ServiceResponse PredictionService::handle_model_info() const {
  const TreeOfPredictors& first = models_.front();
  const Schema& schema = first.schema;
  json fields = json::array();
  for (std::size_t f = 0; f < schema.features().size(); ++f) {
    const FeatureSpec& spec = schema.features()[f];
    std::size_t off = schema.column_offset(f);
    json d = {{"name", spec.name}};
    switch (spec.kind) {
      case FeatureKind::continuous:
        d["kind"] = "continuous";
        d["fill"] = first.fill_values[off];
        if (!first.column_ranges.empty())
          d["range"] = {first.column_ranges[off][0], first.column_ranges[off][1]};
        break;
      case FeatureKind::binary:
        d["kind"] = "binary";
        d["fill"] = first.fill_values[off] >= 0.5 ? 1 : 0;
        break;
      case FeatureKind::categorical: {
        d["kind"] = "categorical";
        d["categories"] = spec.categories;
        std::size_t best = 0;
        for (std::size_t c = 1; c < spec.categories.size(); ++c)
          if (first.fill_values[off + c] > first.fill_values[off + best]) best = c;
        d["fill"] = spec.categories[best];
        break;
      }
    }
    fields.push_back(std::move(d));
  }
  json shapes = json::array();
  for (const auto& m : models_)
    shapes.push_back(
        {{"horizon", m.horizon}, {"nodes", m.nodes.size()}, {"leaves", m.leaves().size()}, {"depth", m.depth()}});
  return {200,
          {{"version", kModelVersion},
           {"horizons", horizons()},
           {"schema", schema.to_json()},
           {"schema_fingerprint", first.schema_fingerprint},
           {"fields", fields},
           {"fill_values", first.fill_values},
           {"tree_shapes", shapes}}};
}

ServiceResponse PredictionService::handle_predict(const json& body) const {
  return guarded([&] { return ServiceResponse{200, predict(parse_request(body)).to_json()}; });
}

ServiceResponse PredictionService::handle_whatif(const json& body) const {
  return guarded([&] {
    if (!body.is_object()) throw RequestError("request body must be a JSON object");
    PredictRequest base = parse_request(body.value("base", json::object()));
    std::vector<std::pair<std::string, json>> toggles;
    if (auto it = body.find("toggles"); it != body.end()) {
      if (!it->is_array()) throw RequestError("'toggles' must be an array");
      for (const auto& t : *it) {
        if (!t.is_object() || !t.contains("feature") || !t["feature"].is_string() || !t.contains("value"))
          throw RequestError("each toggle needs 'feature' (string) and 'value'");
        toggles.emplace_back(t["feature"].get<std::string>(), t["value"]);
      }
    }
    json responses = json::array();
    for (const auto& r : whatif(base, toggles)) responses.push_back(r.to_json());
    return ServiceResponse{200, {{"responses", responses}}};
  });
}

struct HttpServer::Impl {
  const PredictionService& service;
  httplib::Server server;
};

HttpServer::HttpServer(const PredictionService& service) : impl_(new Impl{service, {}}) {
  auto& server = impl_->server;
  const PredictionService* svc = &service;
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body.dump(), "application/json");
  };
  auto with_body = [reply](auto handler) {
    return [reply, handler](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        reply(res, PredictionService::error_response(400, "parse", e.what()));
        return;
      }
      reply(res, handler(body));
    };
  };
  server.Get("/api/v1/health",
             [svc, reply](const httplib::Request&, httplib::Response& res) { reply(res, svc->handle_health()); });
  server.Get("/api/v1/model-info",
             [svc, reply](const httplib::Request&, httplib::Response& res) { reply(res, svc->handle_model_info()); });
  server.Post("/api/v1/predict", with_body([svc](const json& b) { return svc->handle_predict(b); }));
  server.Post("/api/v1/whatif", with_body([svc](const json& b) { return svc->handle_whatif(b); }));
  server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorKind::io, "cannot bind " + host + ":" + std::to_string(port), "startup");
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void serve(const PredictionService& service, const std::string& host, int port) {
  HttpServer server(service);
  const int bound = server.bind(host, port);
  std::cerr << "serving " << service.models().size() << " models on http://" << host << ':' << bound << '\n';
  server.listen();
}

}  // namespace tops
