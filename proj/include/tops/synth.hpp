#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tops/cohort.hpp"

namespace tops {

struct SynthFeature {
  FeatureSpec spec;
  double mean = 0.0;          // continuous: N(mean, sd)
  double sd = 1.0;
  double p = 0.5;             // binary: P(x = 1)
  double missing_rate = 0.0;  // fraction of cells blanked after generation
};

/// Region of feature space with its own survival model: hazard
/// baseline_hazard * exp(coefficients . x), event time Weibull with the
/// given shape (shape 1 = exponential).
struct SynthRegion {
  std::vector<Constraint> constraints;
  std::vector<double> coefficients;  // one per encoded column
  double baseline_hazard = 1e-3;
  double shape = 1.0;
};

struct SynthSpec {
  std::vector<SynthFeature> features;
  std::vector<SynthRegion> regions;  // first matching region wins
  double censor_rate = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;

  Schema schema() const;
  static SynthSpec from_json(const nlohmann::json& j);
  static SynthSpec load(const std::string& path);
  nlohmann::json to_json() const;
};

struct SynthCohort {
  Cohort cohort;
  std::vector<std::size_t> region;  // per row
  std::vector<double> true_time;    // uncensored event time per row
  double censor_window = 0.0;       // censoring times ~ U(0, window); inf when uncensored
};

SynthCohort synth_cohort(const SynthSpec& spec);

/// Ground-truth sidecar: region per row plus the generating spec.
nlohmann::json sidecar_json(const SynthSpec& spec, const SynthCohort& data);

}  // namespace tops
