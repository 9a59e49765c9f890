#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tops/error.hpp"
#include "tops/pipeline.hpp"
#include "tops/service.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::vector<double> horizons;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> min_leaf;
  std::optional<std::size_t> thresholds;
  std::optional<double> min_gain;
  std::optional<unsigned> threads;
  std::optional<int> reps;
  std::optional<double> level;
  std::string weight_mode;

  void attach(CLI::App* cmd, bool growth) {
    cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Random seed");
    if (growth) {
      cmd->add_option("--horizons", horizons, "Horizons in days")->delimiter(',');
      cmd->add_option("--min-leaf", min_leaf, "Minimum training rows per child");
      cmd->add_option("--thresholds", thresholds, "Candidate thresholds per continuous column");
      cmd->add_option("--min-gain", min_gain, "Minimum loss improvement to accept a split");
      cmd->add_option("--threads", threads, "Worker threads for split search");
      cmd->add_option("--weight-mode", weight_mode, "simplex or unconstrained")
          ->check(CLI::IsMember({"simplex", "unconstrained"}));
    }
    cmd->add_option("--reps", reps, "Bootstrap replicates");
    cmd->add_option("--level", level, "Confidence level");
  }

  tops::RunConfig resolve() const {
    tops::RunConfig c = config_path.empty() ? tops::RunConfig{} : tops::RunConfig::load(config_path);
    if (!horizons.empty()) c.horizons = horizons;
    if (seed) c.seed = *seed;
    if (min_leaf) c.growth.min_leaf = *min_leaf;
    if (thresholds) c.growth.thresholds_per_feature = *thresholds;
    if (min_gain) c.growth.min_gain = *min_gain;
    if (threads) c.growth.threads = *threads;
    if (reps) c.bootstrap_reps = *reps;
    if (level) c.level = *level;
    if (!weight_mode.empty())
      c.weight_mode = weight_mode == "simplex" ? tops::WeightMode::simplex : tops::WeightMode::unconstrained;
    c.growth.seed = c.seed;
    c.validate();
    return c;
  }
};

int exit_code(tops::ErrorKind k) {
  switch (k) {
    case tops::ErrorKind::usage: return 2;
    case tops::ErrorKind::numeric: return 4;
    default: return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trees of predictors for survival risk at fixed horizons"};
  app.require_subcommand(1);
  std::string input;  // named in error messages

  auto* train = app.add_subcommand("train", "Train one model per horizon");
  std::string data, schema, out, model, spec, models_dir, host = "127.0.0.1";
  std::size_t k = 5;
  int port = 8080;
  Overrides train_opt, cv_opt, eval_opt;
  train->add_option("--data", data, "Training CSV")->required();
  train->add_option("--schema", schema, "Schema JSON")->required();
  train->add_option("--out", out, "Output directory")->required();
  train_opt.attach(train, true);

  auto* predict = app.add_subcommand("predict", "Score rows with a saved model");
  predict->add_option("--model", model, "Model file")->required();
  predict->add_option("--data", data, "Feature CSV")->required();
  predict->add_option("--out", out, "Output CSV (- for stdout)")->default_val("-");
  predict->add_option("--schema", schema, "Schema the data follows; must match the model");

  auto* evaluate = app.add_subcommand("evaluate", "Discrimination report on labeled data");
  evaluate->add_option("--model", model, "Model file")->required();
  evaluate->add_option("--data", data, "Labeled CSV")->required();
  evaluate->add_option("--out", out, "Report JSON");
  evaluate->add_option("--schema", schema, "Schema the data follows; must match the model");
  eval_opt.attach(evaluate, false);

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation against global learners");
  cv->add_option("--data", data, "Cohort CSV")->required();
  cv->add_option("--schema", schema, "Schema JSON")->required();
  cv->add_option("--k", k, "Number of folds")->check(CLI::Range(2, 1000));
  cv->add_option("--out", out, "Report JSON");
  cv_opt.attach(cv, true);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth->add_option("--spec", spec, "Generator spec JSON")->required();
  synth->add_option("--out", out, "Output CSV")->required();

  auto* serve = app.add_subcommand("serve", "Serve saved models over HTTP");
  serve->add_option("--models", models_dir, "Directory of model_*.json files")->required();
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      input = data;
      auto config = train_opt.resolve();
      auto result = tops::run_train(data, schema, config, out);
      for (const auto& p : result.model_paths) std::cout << p << '\n';
      std::cout << result.report_path << '\n';
    } else if (*predict) {
      input = data;
      std::optional<tops::Schema> expected;
      if (!schema.empty()) expected = tops::Schema::load(schema);
      auto n = tops::run_predict(model, data, out, expected ? &*expected : nullptr);
      if (out != "-") std::cout << n << " rows scored\n";
    } else if (*evaluate) {
      input = data;
      std::optional<tops::Schema> expected;
      if (!schema.empty()) expected = tops::Schema::load(schema);
      auto report = tops::run_evaluate(model, data, out, eval_opt.resolve(), expected ? &*expected : nullptr);
      if (out.empty()) std::cout << report.dump(2) << '\n';
      else std::cout << "auc " << report["auc"] << " ci " << report["ci"] << '\n';
    } else if (*cv) {
      input = data;
      auto report = tops::run_cv(data, schema, cv_opt.resolve(), k, out);
      if (out.empty()) std::cout << report.dump(2) << '\n';
      for (const auto& h : report["horizons"])
        std::cerr << "horizon " << h["horizon"] << ": tops " << h["mean_tops_auc"] << '\n';
    } else if (*synth) {
      input = spec;
      tops::run_synth(spec, out);
      std::cout << out << '\n';
    } else if (*serve) {
      input = models_dir;
      auto service = tops::PredictionService::from_directory(models_dir);
      tops::serve(service, host, port);
    }
  } catch (const tops::Error& e) {
    std::cerr << "error [" << (e.stage().empty() ? app.get_subcommands().front()->get_name() : e.stage()) << "] ("
              << input << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error [" << app.get_subcommands().front()->get_name() << "] (" << input << "): " << e.what() << '\n';
    return 3;
  }
  return 0;
}
