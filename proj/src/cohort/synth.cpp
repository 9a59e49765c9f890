#include "tops/synth.hpp"

#include <fstream>

#include "tops/error.hpp"
#include "tops/rng.hpp"

namespace tops {
namespace {

Side parse_side(const std::string& s) {
  if (s == "below") return Side::below;
  if (s == "at_or_above") return Side::at_or_above;
  throw Error(ErrorKind::data, "constraint side must be 'below' or 'at_or_above', got '" + s + "'");
}

std::size_t resolve_column(const Schema& schema, const nlohmann::json& ref) {
  if (ref.is_number_integer()) {
    const auto idx = ref.get<std::int64_t>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= schema.width())
      throw Error(ErrorKind::data, "column index " + std::to_string(idx) + " out of range");
    return static_cast<std::size_t>(idx);
  }
  const auto name = ref.get<std::string>();
  auto c = schema.column_index(name);
  if (!c) throw Error(ErrorKind::data, "unknown column '" + name + "' in synthetic spec");
  return *c;
}

}  // namespace

Schema SynthSpec::schema() const {
  std::vector<FeatureSpec> specs;
  for (const auto& f : features) specs.push_back(f.spec);
  return Schema(std::move(specs));
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  try {
    SynthSpec spec;
    for (const auto& item : j.at("features")) {
      SynthFeature f;
      Schema single = Schema::from_json(nlohmann::json::array({item}));
      f.spec = single.features().front();
      f.mean = item.value("mean", 0.0);
      f.sd = item.value("sd", 1.0);
      f.p = item.value("p", 0.5);
      f.missing_rate = item.value("missing_rate", 0.0);
      if (f.sd < 0.0 || f.p < 0.0 || f.p > 1.0 || f.missing_rate < 0.0 || f.missing_rate >= 1.0)
        throw Error(ErrorKind::data, "feature '" + f.spec.name + "' has invalid generator parameters");
      spec.features.push_back(std::move(f));
    }
    const Schema schema = spec.schema();
    for (const auto& item : j.at("regions")) {
      SynthRegion region;
      for (const auto& c : item.value("constraints", nlohmann::json::array())) {
        region.constraints.push_back(
            {resolve_column(schema, c.at("feature")), c.at("threshold").get<double>(),
             parse_side(c.at("side").get<std::string>())});
      }
      region.coefficients.assign(schema.width(), 0.0);
      const auto& coef = item.at("coefficients");
      if (coef.is_array()) {
        if (coef.size() != schema.width())
          throw Error(ErrorKind::data, "region coefficients need " + std::to_string(schema.width()) + " entries");
        for (std::size_t c = 0; c < coef.size(); ++c) region.coefficients[c] = coef[c].get<double>();
      } else {
        for (const auto& [name, value] : coef.items())
          region.coefficients[resolve_column(schema, name)] = value.get<double>();
      }
      region.baseline_hazard = item.at("baseline_hazard").get<double>();
      region.shape = item.value("shape", 1.0);
      if (!(region.baseline_hazard > 0.0) || !(region.shape > 0.0))
        throw Error(ErrorKind::data, "baseline_hazard and shape must be > 0");
      spec.regions.push_back(std::move(region));
    }
    spec.censor_rate = j.value("censor_rate", 0.0);
    spec.n = j.at("n").get<std::size_t>();
    spec.seed = j.value("seed", std::uint64_t{0});
    if (spec.regions.empty()) throw Error(ErrorKind::data, "synthetic spec needs at least one region");
    if (spec.censor_rate < 0.0 || spec.censor_rate >= 1.0)
      throw Error(ErrorKind::data, "censor_rate must be in [0, 1)");
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, std::string("malformed synthetic spec: ") + e.what());
  }
}

SynthSpec SynthSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open synthetic spec " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, "malformed synthetic spec " + path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json SynthSpec::to_json() const {
  const Schema sch = schema();
  nlohmann::json feats = nlohmann::json::array();
  for (std::size_t f = 0; f < features.size(); ++f) {
    nlohmann::json item = sch.to_json()[f];
    item["mean"] = features[f].mean;
    item["sd"] = features[f].sd;
    item["p"] = features[f].p;
    item["missing_rate"] = features[f].missing_rate;
    feats.push_back(std::move(item));
  }
  nlohmann::json regs = nlohmann::json::array();
  for (const auto& r : regions) {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : r.constraints)
      cs.push_back({{"feature", sch.columns()[c.feature_index].name},
                    {"threshold", c.threshold},
                    {"side", c.side == Side::below ? "below" : "at_or_above"}});
    regs.push_back({{"constraints", cs},
                    {"coefficients", r.coefficients},
                    {"baseline_hazard", r.baseline_hazard},
                    {"shape", r.shape}});
  }
  return {{"features", feats}, {"regions", regs}, {"censor_rate", censor_rate}, {"n", n}, {"seed", seed}};
}

SynthCohort synth_cohort(const SynthSpec& spec) {
  if (spec.n < 10) throw Error(ErrorKind::domain, "synthetic cohort needs n >= 10");
  if (spec.regions.empty()) throw Error(ErrorKind::domain, "synthetic spec needs at least one region");
  const Schema schema = spec.schema();
  const std::size_t w = schema.width();
  for (const auto& r : spec.regions)
    if (r.coefficients.size() != w) throw Error(ErrorKind::domain, "region coefficient width mismatch");

  Rng rng(spec.seed);
  SynthCohort out;
  out.cohort.schema = schema;
  out.cohort.features = Matrix(spec.n, w);
  out.true_time.resize(spec.n);
  out.region.resize(spec.n);

  for (std::size_t i = 0; i < spec.n; ++i) {
    auto row = out.cohort.features.row(i);
    for (std::size_t f = 0; f < spec.features.size(); ++f) {
      const auto& sf = spec.features[f];
      const std::size_t off = schema.column_offset(f);
      switch (sf.spec.kind) {
        case FeatureKind::continuous: row[off] = sf.mean + sf.sd * rng.normal(); break;
        case FeatureKind::binary: row[off] = rng.uniform() < sf.p ? 1.0 : 0.0; break;
        case FeatureKind::categorical: {
          const std::size_t k = sf.spec.categories.size();
          const std::size_t pick = rng.below(k);
          for (std::size_t c = 0; c < k; ++c) row[off + c] = c == pick ? 1.0 : 0.0;
          break;
        }
      }
    }
    std::size_t region = spec.regions.size();
    for (std::size_t r = 0; r < spec.regions.size(); ++r)
      if (satisfies_all(spec.regions[r].constraints, row)) {
        region = r;
        break;
      }
    if (region == spec.regions.size())
      throw Error(ErrorKind::domain, "synthetic row " + std::to_string(i) + " matches no region");
    const auto& reg = spec.regions[region];
    double eta = 0.0;
    for (std::size_t c = 0; c < w; ++c) eta += reg.coefficients[c] * row[c];
    const double rate = reg.baseline_hazard * std::exp(eta);
    // Cumulative hazard rate * t^shape; invert a unit exponential.
    out.true_time[i] = std::pow(rng.exponential(1.0) / rate, 1.0 / reg.shape);
    out.region[i] = region;
  }

  std::vector<double> u(spec.n);
  for (auto& v : u) v = rng.uniform();

  out.cohort.time.resize(spec.n);
  out.cohort.event.resize(spec.n);
  const auto censored_fraction = [&](double window) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < spec.n; ++i)
      if (u[i] * window < out.true_time[i]) ++c;
    return static_cast<double>(c) / static_cast<double>(spec.n);
  };

  double window = std::numeric_limits<double>::infinity();
  if (spec.censor_rate > 0.0) {
    // Smallest window whose censored fraction is <= censor_rate (fraction decreases in window).
    double lo = 0.0;
    double hi = 1.0;
    for (double t : out.true_time) hi = std::max(hi, t);
    hi *= 1e6;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (censored_fraction(mid) <= spec.censor_rate) hi = mid;
      else lo = mid;
    }
    window = hi;
  }
  out.censor_window = window;

  for (std::size_t i = 0; i < spec.n; ++i) {
    const double c = std::isinf(window) ? window : u[i] * window;
    const bool event = out.true_time[i] <= c;
    out.cohort.time[i] = event ? out.true_time[i] : c;
    out.cohort.event[i] = event ? 1 : 0;
  }

  for (std::size_t f = 0; f < spec.features.size(); ++f) {
    const auto& sf = spec.features[f];
    if (sf.missing_rate <= 0.0) continue;
    const std::size_t off = schema.column_offset(f);
    const std::size_t width = schema.feature_width(f);
    for (std::size_t i = 0; i < spec.n; ++i)
      if (rng.uniform() < sf.missing_rate)
        for (std::size_t c = 0; c < width; ++c) out.cohort.features(i, off + c) = kMissing;
  }
  return out;
}

nlohmann::json sidecar_json(const SynthSpec& spec, const SynthCohort& data) {
  nlohmann::json j;
  j["spec"] = spec.to_json();
  j["region"] = data.region;
  j["true_time"] = data.true_time;
  if (std::isinf(data.censor_window)) j["censor_window"] = nullptr;
  else j["censor_window"] = data.censor_window;
  return j;
}

}  // namespace tops
