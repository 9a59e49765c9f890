#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tops/error.hpp"
#include "tops/tree.hpp"

namespace tops {

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

struct PredictRequest {
  nlohmann::json features = nlohmann::json::object();  // feature name -> raw value; absent = impute
  std::optional<std::vector<double>> horizons;          // subset of the loaded horizons
};

struct PredictResult {
  std::vector<double> horizons;
  std::vector<double> probabilities;
  std::vector<std::vector<int>> leaf_paths;
  std::vector<std::pair<double, double>> curve;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Request validation failure (HTTP 400).
class RequestError : public Error {
 public:
  explicit RequestError(const std::string& message) : Error(ErrorKind::usage, message, "validate") {}
};

/// Scores raw feature requests against a set of per-horizon models that
/// share one schema. Handlers are pure and safe to call concurrently.
class PredictionService {
 public:
  explicit PredictionService(std::vector<TreeOfPredictors> models, std::size_t curve_points = 50);

  /// Loads every model_*.json in `dir`; any unreadable model aborts startup.
  static PredictionService from_directory(const std::string& dir);

  const std::vector<TreeOfPredictors>& models() const noexcept { return models_; }
  std::vector<double> horizons() const;

  PredictResult predict(const PredictRequest& request) const;
  std::vector<PredictResult> whatif(const PredictRequest& base,
                                    const std::vector<std::pair<std::string, nlohmann::json>>& toggles) const;

  ServiceResponse handle_health() const;
  ServiceResponse handle_model_info() const;
  ServiceResponse handle_predict(const nlohmann::json& body) const;
  ServiceResponse handle_whatif(const nlohmann::json& body) const;

  static PredictRequest parse_request(const nlohmann::json& body);
  static ServiceResponse error_response(int status, const std::string& stage, const std::string& message);

 private:
  std::vector<double> encode(const TreeOfPredictors& model, const nlohmann::json& features,
                             std::vector<std::string>* warnings) const;

  std::vector<TreeOfPredictors> models_;
  std::size_t curve_points_;
};

/// HTTP front end exposing /api/v1/{health,model-info,predict,whatif}.
class HttpServer {
 public:
  explicit HttpServer(const PredictionService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocking convenience wrapper around HttpServer.
void serve(const PredictionService& service, const std::string& host, int port);

}  // namespace tops
