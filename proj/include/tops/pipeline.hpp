#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tops/cohort.hpp"
#include "tops/synth.hpp"
#include "tops/tree.hpp"

namespace tops {

struct RunConfig {
  std::vector<double> horizons{90.0, 365.0, 1095.0, 3650.0};
  std::array<double, 4> split{0.48, 0.16, 0.16, 0.20};  // S, V1, V2, T
  GrowthConfig growth{};
  WeightMode weight_mode = WeightMode::simplex;
  int bootstrap_reps = 1000;
  double level = 0.95;
  std::uint64_t seed = 42;

  void validate() const;
  /// Fields present in `j` override `base`.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

struct HorizonResult {
  TreeOfPredictors model;
  double v1_loss = 0.0;  // 1 - AUC of the final predictor on V1
  double v2_loss = 0.0;
  std::optional<double> test_auc;
  std::size_t n_train = 0, n_v1 = 0, n_v2 = 0, n_test = 0;
  std::size_t excluded = 0;
  std::vector<SplitRecord> splits;
};

/// One horizon of the offline pipeline on an already-imputed cohort:
/// label, split, grow on S/V1, fit path weights on V2, score T.
HorizonResult train_horizon(const Cohort& imputed, std::span<const double> fill_values, double horizon,
                            const RunConfig& config);

nlohmann::json horizon_report(const HorizonResult& r);

/// Predicted survival probability per cohort row (features must be filled).
std::vector<double> predict_cohort(const TreeOfPredictors& model, const Cohort& cohort);

/// Evaluation report: {horizon, auc, ci, roc_points, counts_at{spec80,sens80}, n_pos, n_neg, excluded}.
nlohmann::json evaluation_report(double horizon, std::span<const double> scores, std::span<const std::uint8_t> labels,
                                 std::size_t excluded, int reps, double level, std::uint64_t seed);

struct TrainOutputs {
  std::vector<std::string> model_paths;
  std::string report_path;
  nlohmann::json report;
};

std::string model_filename(double horizon);

/// Full offline pipeline for every configured horizon. Writes one model
/// file per horizon plus train_report.json into `out_dir`; on failure every
/// file written so far is removed and the error carries its stage tag.
TrainOutputs run_train(const std::string& data_path, const std::string& schema_path, const RunConfig& config,
                       const std::string& out_dir);

/// Writes "row_id,probability" rows. Returns the number of rows scored.
std::size_t run_predict(const std::string& model_path, const std::string& data_path, const std::string& out_path,
                        const Schema* expected_schema = nullptr);

nlohmann::json run_evaluate(const std::string& model_path, const std::string& data_path, const std::string& out_path,
                            const RunConfig& config, const Schema* expected_schema = nullptr);

struct CvFold {
  std::size_t fold = 0;
  double tops_auc = 0.0;
  std::array<std::optional<double>, 3> baseline_auc;  // linear, logistic, cox fitted globally on the development fold
  std::optional<std::size_t> root_split_column;
  std::size_t nodes = 0;
  std::size_t depth = 0;
  TreeOfPredictors model;
  std::vector<std::size_t> weight_rows;  // cohort rows used to fit the path weights
};

struct CvHorizon {
  double horizon = 0.0;
  std::vector<CvFold> folds;
  double mean_tops_auc = 0.0;
  std::array<std::optional<double>, 3> mean_baseline_auc;
};

std::vector<CvHorizon> cross_validate(const Cohort& imputed, const RunConfig& config, std::size_t k);
nlohmann::json cv_report(const std::vector<CvHorizon>& result, const Schema& schema, std::size_t k);
nlohmann::json run_cv(const std::string& data_path, const std::string& schema_path, const RunConfig& config,
                      std::size_t k, const std::string& out_path);

/// Writes the cohort CSV, `<out>.truth.json` (ground truth) and `<out>.schema.json`.
void write_cohort_csv(const Cohort& cohort, std::ostream& out);
void run_synth(const std::string& spec_path, const std::string& out_path);

}  // namespace tops
