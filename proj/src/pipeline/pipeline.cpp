#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "tops/analysis.hpp"
#include "tops/csv.hpp"
#include "tops/error.hpp"
#include "tops/kernels.hpp"
#include "tops/pipeline.hpp"
#include "tops/rng.hpp"

namespace tops {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, e.what(), stage);
  }
}

std::optional<double> auc_on(const TreeOfPredictors& tree, const LabeledSet& set) {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (std::size_t i : set.included()) {
    scores.push_back(predict_overall(tree, set.features.row(i)));
    labels.push_back(static_cast<std::uint8_t>(set.label[i]));
  }
  auto counts = set.class_counts();
  if (counts[0] == 0 || counts[1] == 0) return std::nullopt;
  return auc(scores, labels);
}

std::optional<double> auc_on(const Predictor& p, const LabeledSet& set) {
  auto counts = set.class_counts();
  if (counts[0] == 0 || counts[1] == 0) return std::nullopt;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (std::size_t i : set.included()) {
    scores.push_back(p.predict(set.features.row(i)));
    labels.push_back(static_cast<std::uint8_t>(set.label[i]));
  }
  return auc(scores, labels);
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string timestamp_utc() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "write failed for '" + path + "'");
}

void require_both_classes(const LabeledSet& set, const char* what, const char* stage) {
  auto counts = set.class_counts();
  if (set.included_count() == 0)
    throw Error(ErrorKind::data, std::string(what) + ": no labeled rows at horizon " + csv::format_double(set.horizon),
                stage);
  if (counts[0] == 0 || counts[1] == 0)
    throw Error(ErrorKind::data,
                std::string(what) + ": only one outcome class at horizon " + csv::format_double(set.horizon), stage);
}

Cohort load_filled(const std::string& data_path, const TreeOfPredictors& model, bool require_outcome) {
  Cohort c = load_cohort(data_path, model.schema, require_outcome);
  return apply_fill(std::move(c), model.fill_values);
}

}  // namespace

HorizonResult train_horizon(const Cohort& imputed, std::span<const double> fill_values, double horizon,
                            const RunConfig& config) {
  HorizonResult r;
  LabeledSet labeled = staged("label", [&] {
    LabeledSet l = label_at_horizon(imputed, horizon);
    require_both_classes(l, "training cohort", "label");
    return l;
  });
  r.excluded = labeled.excluded_count;

  SplitBundle bundle = staged("split", [&] { return split_dataset(imputed.size(), config.split, config.seed); });
  LabeledSet S = labeled.subset(bundle.train());
  LabeledSet V1 = labeled.subset(bundle.validate1());
  LabeledSet V2 = labeled.subset(bundle.validate2());
  LabeledSet T = labeled.subset(bundle.test());
  r.n_train = S.size();
  r.n_v1 = V1.size();
  r.n_v2 = V2.size();
  r.n_test = T.size();

  GrowthConfig growth = config.growth;
  growth.seed = config.seed;
  TreeOfPredictors tree = staged("grow", [&] { return grow(S, V1, growth, &r.splits); });
  tree = staged("weights", [&] { return fit_path_weights(std::move(tree), V2, config.weight_mode); });

  tree.horizon = horizon;
  tree.schema = imputed.schema;
  tree.schema_fingerprint = imputed.schema.fingerprint();
  tree.fill_values.assign(fill_values.begin(), fill_values.end());

  staged("score", [&] {
    auto a1 = auc_on(tree, V1);
    auto a2 = auc_on(tree, V2);
    r.v1_loss = a1 ? 1.0 - *a1 : std::numeric_limits<double>::quiet_NaN();
    r.v2_loss = a2 ? 1.0 - *a2 : std::numeric_limits<double>::quiet_NaN();
    r.test_auc = auc_on(tree, T);
  });
  r.model = std::move(tree);
  return r;
}

json horizon_report(const HorizonResult& r) {
  const auto& t = r.model;
  json splits = json::array();
  for (const auto& s : r.splits) {
    const Node& n = t.node(s.node);
    json rec = {{"node", s.node}, {"node_loss", s.node_loss}, {"joint_loss", s.joint_loss}};
    if (n.children) {
      rec["column"] = t.schema.columns()[n.children->feature_index].name;
      rec["threshold"] = n.children->threshold;
    }
    splits.push_back(rec);
  }
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {
      {"horizon", t.horizon},
      {"nodes", t.nodes.size()},
      {"leaves", t.leaves().size()},
      {"depth", t.depth()},
      {"v1_loss", finite_or_null(r.v1_loss)},
      {"v2_loss", finite_or_null(r.v2_loss)},
      {"test_auc", opt_json(r.test_auc)},
      {"rows", {{"train", r.n_train}, {"validate1", r.n_v1}, {"validate2", r.n_v2}, {"test", r.n_test}}},
      {"excluded", r.excluded},
      {"splits", splits},
  };
}

std::vector<double> predict_cohort(const TreeOfPredictors& model, const Cohort& cohort) {
  if (cohort.features.cols() != model.schema.width())
    throw Error(ErrorKind::schema, "cohort width does not match the model schema");
  std::vector<double> out(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) out[i] = predict_overall(model, cohort.features.row(i));
  return out;
}

json evaluation_report(double horizon, std::span<const double> scores, std::span<const std::uint8_t> labels,
                       std::size_t excluded, int reps, double level, std::uint64_t seed) {
  RocSummary roc = roc_curve(scores, labels);
  auto ci = auc_ci_bootstrap(scores, labels, reps, level, seed);
  json points = json::array();
  for (const auto& p : roc.points) points.push_back({p.fpr, p.tpr});
  auto op_json = [](const OperatingPoint& op) {
    return json{{"tp", op.tp},
                {"tn", op.tn},
                {"fp", op.fp},
                {"fn", op.fn},
                {"threshold", std::isfinite(op.threshold) ? json(op.threshold) : json(nullptr)},
                {"specificity", op.specificity},
                {"sensitivity", op.sensitivity}};
  };
  return {
      {"horizon", horizon},
      {"auc", roc.auc},
      {"ci", {ci.first, ci.second}},
      {"level", level},
      {"roc_points", points},
      {"counts_at",
       {{"spec80", op_json(counts_at_operating_point(scores, labels, FixedRate::specificity, 0.8))},
        {"sens80", op_json(counts_at_operating_point(scores, labels, FixedRate::sensitivity, 0.8))}}},
      {"n_pos", roc.n_pos},
      {"n_neg", roc.n_neg},
      {"excluded", excluded},
  };
}

std::string model_filename(double horizon) { return "model_h" + csv::format_double(horizon) + ".json"; }

TrainOutputs run_train(const std::string& data_path, const std::string& schema_path, const RunConfig& config,
                       const std::string& out_dir) {
  config.validate();
  Schema schema = staged("load", [&] { return Schema::load(schema_path); });
  Cohort raw = staged("load", [&] { return load_cohort(data_path, schema); });
  if (raw.size() == 0) throw Error(ErrorKind::data, "training file has no rows", "load");

  std::vector<double> fill = staged("impute", [&] { return compute_fill_values(raw); });
  auto ranges = column_ranges(raw);
  Cohort imputed = apply_fill(raw, fill);

  TrainOutputs out;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + out_dir + "'", "save");

  try {
    json horizons = json::array();
    for (double h : config.horizons) {
      HorizonResult r = train_horizon(imputed, fill, h, config);
      r.model.column_ranges = ranges;
      std::string path = (fs::path(out_dir) / model_filename(h)).string();
      staged("save", [&] { save_model(r.model, path); });
      out.model_paths.push_back(path);
      json rep = horizon_report(r);
      rep["model_file"] = fs::path(path).filename().string();
      horizons.push_back(std::move(rep));
    }
    out.report = {
        {"created", timestamp_utc()},
        {"data", data_path},
        {"rows", raw.size()},
        {"schema_fingerprint", schema.fingerprint()},
        {"config", config.to_json()},
        {"kernels", std::string(kernels::name(kernels::active().isa))},
        {"horizons", horizons},
    };
    out.report_path = (fs::path(out_dir) / "train_report.json").string();
    staged("save", [&] { write_json(out.report, out.report_path); });
  } catch (...) {
    for (const auto& p : out.model_paths) fs::remove(p, ec);
    if (!out.report_path.empty()) fs::remove(out.report_path, ec);
    throw;
  }
  return out;
}

std::size_t run_predict(const std::string& model_path, const std::string& data_path, const std::string& out_path,
                        const Schema* expected_schema) {
  TreeOfPredictors model = staged("load", [&] { return load_model(model_path, expected_schema); });
  std::error_code ec;
  bool empty_file = fs::exists(data_path, ec) && fs::file_size(data_path, ec) == 0;
  Cohort cohort = empty_file ? Cohort{model.schema, Matrix(0, model.schema.width()), {}, {}}
                             : staged("load", [&] { return load_filled(data_path, model, false); });
  std::vector<double> p = staged("predict", [&] { return predict_cohort(model, cohort); });

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path);
    if (!file) throw Error(ErrorKind::io, "cannot write '" + out_path + "'", "save");
    out = &file;
  }
  *out << "row_id,probability\n";
  for (std::size_t i = 0; i < p.size(); ++i) *out << i << ',' << csv::format_double(p[i]) << '\n';
  out->flush();
  return p.size();
}

json run_evaluate(const std::string& model_path, const std::string& data_path, const std::string& out_path,
                  const RunConfig& config, const Schema* expected_schema) {
  TreeOfPredictors model = staged("load", [&] { return load_model(model_path, expected_schema); });
  Cohort cohort = staged("load", [&] { return load_filled(data_path, model, true); });
  LabeledSet labeled = staged("label", [&] {
    LabeledSet l = label_at_horizon(cohort, model.horizon);
    require_both_classes(l, "evaluation cohort", "label");
    return l;
  });
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  staged("predict", [&] {
    for (std::size_t i : labeled.included()) {
      scores.push_back(predict_overall(model, labeled.features.row(i)));
      labels.push_back(static_cast<std::uint8_t>(labeled.label[i]));
    }
  });
  json report = staged("evaluate", [&] {
    return evaluation_report(model.horizon, scores, labels, labeled.excluded_count, config.bootstrap_reps,
                             config.level, config.seed);
  });
  if (!out_path.empty()) staged("save", [&] { write_json(report, out_path); });
  return report;
}

std::vector<CvHorizon> cross_validate(const Cohort& imputed, const RunConfig& config, std::size_t k) {
  config.validate();
  auto folds = staged("split", [&] { return kfold(imputed.size(), k, config.seed); });
  double inner_sum = config.split[0] + config.split[1] + config.split[2];
  std::array<double, 3> inner{config.split[0] / inner_sum, config.split[1] / inner_sum,
                              config.split[2] / inner_sum};
  GrowthConfig growth = config.growth;
  growth.seed = config.seed;

  std::vector<CvHorizon> result;
  for (double h : config.horizons) {
    LabeledSet labeled = staged("label", [&] {
      LabeledSet l = label_at_horizon(imputed, h);
      require_both_classes(l, "cv cohort", "label");
      return l;
    });
    CvHorizon ch;
    ch.horizon = h;
    std::array<double, 3> baseline_sum{};
    std::array<std::size_t, 3> baseline_n{};
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const Fold& fold = folds[f];
      auto parts = staged("split", [&] {
        return partition_rows(fold.development.size(), inner, derive_seed(config.seed, f));
      });
      std::array<std::vector<std::size_t>, 3> rows;
      for (int p = 0; p < 3; ++p)
        for (std::size_t i : parts[p]) rows[p].push_back(fold.development[i]);
      LabeledSet S = labeled.subset(rows[0]);
      LabeledSet V1 = labeled.subset(rows[1]);
      LabeledSet V2 = labeled.subset(rows[2]);
      LabeledSet T = labeled.subset(fold.test);
      require_both_classes(T, "cv test fold", "evaluate");

      TreeOfPredictors tree = staged("grow", [&] { return grow(S, V1, growth); });
      tree = staged("weights", [&] { return fit_path_weights(std::move(tree), V2, config.weight_mode); });
      tree.schema = imputed.schema;

      CvFold cf;
      cf.fold = f;
      cf.tops_auc = *auc_on(tree, T);
      cf.nodes = tree.nodes.size();
      cf.depth = tree.depth();
      if (const auto& c = tree.node(tree.root_id).children) cf.root_split_column = c->feature_index;
      cf.model = std::move(tree);
      cf.weight_rows = rows[2];
      for (LearnerKind kind : kAllLearners) {
        auto idx = static_cast<std::size_t>(kind);
        try {
          Predictor p = fit_kind(kind, labeled, fold.development, config.growth.learner);
          cf.baseline_auc[idx] = auc_on(p, T);
        } catch (const Error&) {
          cf.baseline_auc[idx] = std::nullopt;
        }
        if (cf.baseline_auc[idx]) {
          baseline_sum[idx] += *cf.baseline_auc[idx];
          ++baseline_n[idx];
        }
      }
      ch.mean_tops_auc += cf.tops_auc / static_cast<double>(folds.size());
      ch.folds.push_back(std::move(cf));
    }
    for (std::size_t i = 0; i < 3; ++i)
      if (baseline_n[i] == folds.size()) ch.mean_baseline_auc[i] = baseline_sum[i] / static_cast<double>(baseline_n[i]);
    result.push_back(std::move(ch));
  }
  return result;
}

json cv_report(const std::vector<CvHorizon>& result, const Schema& schema, std::size_t k) {
  json horizons = json::array();
  for (const auto& ch : result) {
    json folds = json::array();
    for (const auto& f : ch.folds) {
      json base;
      for (LearnerKind kind : kAllLearners) base[to_string(kind)] = opt_json(f.baseline_auc[static_cast<int>(kind)]);
      folds.push_back({{"fold", f.fold},
                       {"tops_auc", f.tops_auc},
                       {"baselines", base},
                       {"root_split", f.root_split_column ? json(schema.columns()[*f.root_split_column].name)
                                                          : json(nullptr)},
                       {"nodes", f.nodes},
                       {"depth", f.depth}});
    }
    json means;
    std::optional<std::pair<LearnerKind, double>> best;
    for (LearnerKind kind : kAllLearners) {
      const auto& m = ch.mean_baseline_auc[static_cast<int>(kind)];
      means[to_string(kind)] = opt_json(m);
      if (m && (!best || *m > best->second)) best = {kind, *m};
    }
    json h = {{"horizon", ch.horizon}, {"folds", folds}, {"mean_tops_auc", ch.mean_tops_auc}, {"mean_baselines", means}};
    if (best) {
      h["best_baseline"] = {{"learner", to_string(best->first)}, {"auc", best->second}};
      h["auc_gain"] = ch.mean_tops_auc - best->second;
      h["loss_reduction_pct"] = loss_reduction(ch.mean_tops_auc, best->second);
    }
    horizons.push_back(std::move(h));
  }
  return {{"k", k}, {"horizons", horizons}};
}

json run_cv(const std::string& data_path, const std::string& schema_path, const RunConfig& config, std::size_t k,
            const std::string& out_path) {
  config.validate();
  Schema schema = staged("load", [&] { return Schema::load(schema_path); });
  Cohort raw = staged("load", [&] { return load_cohort(data_path, schema); });
  Cohort imputed = staged("impute", [&] { return impute(raw); });
  auto result = cross_validate(imputed, config, k);
  json report = cv_report(result, schema, k);
  report["rows"] = raw.size();
  report["config"] = config.to_json();
  if (!out_path.empty()) staged("save", [&] { write_json(report, out_path); });
  return report;
}

void write_cohort_csv(const Cohort& cohort, std::ostream& out) {
  const Schema& schema = cohort.schema;
  std::vector<std::string> fields;
  for (const auto& f : schema.features()) fields.push_back(f.name);
  fields.push_back("time");
  fields.push_back("event");
  csv::write_row(out, fields);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    fields.clear();
    auto row = cohort.features.row(i);
    for (std::size_t f = 0; f < schema.features().size(); ++f) {
      const auto& spec = schema.features()[f];
      std::size_t off = schema.column_offset(f);
      if (is_missing(row[off])) {
        fields.emplace_back();
        continue;
      }
      switch (spec.kind) {
        case FeatureKind::continuous: fields.push_back(csv::format_double(row[off])); break;
        case FeatureKind::binary: fields.push_back(row[off] >= 0.5 ? "1" : "0"); break;
        case FeatureKind::categorical: {
          std::string name;
          for (std::size_t c = 0; c < spec.categories.size(); ++c)
            if (row[off + c] >= 0.5) name = spec.categories[c];
          fields.push_back(name);
          break;
        }
      }
    }
    fields.push_back(csv::format_double(cohort.time[i]));
    fields.push_back(cohort.event[i] ? "1" : "0");
    csv::write_row(out, fields);
  }
}

void run_synth(const std::string& spec_path, const std::string& out_path) {
  SynthSpec spec = staged("load", [&] { return SynthSpec::load(spec_path); });
  SynthCohort data = staged("synth", [&] { return synth_cohort(spec); });
  staged("save", [&] {
    std::ofstream out(out_path);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + out_path + "'");
    write_cohort_csv(data.cohort, out);
    write_json(sidecar_json(spec, data), out_path + ".truth.json");
    write_json(spec.schema().to_json(), out_path + ".schema.json");
  });
}

}  // namespace tops
