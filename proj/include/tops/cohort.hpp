#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tops/constraint.hpp"
#include "tops/matrix.hpp"

namespace tops {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

enum class FeatureKind { binary, continuous, categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::string> categories;  // categorical only

  bool operator==(const FeatureSpec&) const = default;
};

enum class ColumnKind { binary, continuous };

/// One numeric column after encoding. Categorical features expand into one
/// binary column per category, named "feature=category".
struct EncodedColumn {
  std::string name;
  std::size_t feature = 0;
  ColumnKind kind = ColumnKind::continuous;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<FeatureSpec> features);

  static Schema from_json(const nlohmann::json& j);
  static Schema load(const std::string& path);
  nlohmann::json to_json() const;

  const std::vector<FeatureSpec>& features() const noexcept { return features_; }
  const std::vector<EncodedColumn>& columns() const noexcept { return columns_; }
  std::size_t width() const noexcept { return columns_.size(); }

  std::optional<std::size_t> feature_index(const std::string& name) const;
  std::optional<std::size_t> column_index(const std::string& name) const;
  /// First encoded column of feature `f`.
  std::size_t column_offset(std::size_t f) const { return offsets_[f]; }

  /// Encode one raw cell of feature `f` into `out` (width of the feature's
  /// columns). Empty text means missing.
  void encode_cell(std::size_t f, const std::string& text, std::span<double> out) const;
  std::size_t feature_width(std::size_t f) const;

  /// FNV-1a 64 over the canonical JSON of the ordered schema, as 16 hex digits.
  std::string fingerprint() const;

  bool operator==(const Schema& o) const { return features_ == o.features_; }

 private:
  std::vector<FeatureSpec> features_;
  std::vector<EncodedColumn> columns_;
  std::vector<std::size_t> offsets_;
};

struct Record {
  std::vector<double> features;
  double time = 0.0;
  bool event = false;
};

/// Encoded survival records. Missing feature cells hold NaN.
struct Cohort {
  Schema schema;
  Matrix features;
  std::vector<double> time;
  std::vector<std::uint8_t> event;

  std::size_t size() const noexcept { return time.size(); }
  Record record(std::size_t i) const;
  void add(const Record& r);
  Cohort subset(std::span<const std::size_t> rows) const;
};

/// Reads a CSV whose header holds every schema feature plus `time` and
/// `event` (any column order). With `require_outcome = false` the reserved
/// columns may be absent; time then defaults to 0 and event to false.
Cohort load_cohort(const std::string& path, const Schema& schema, bool require_outcome = true);
Cohort parse_cohort(std::istream& in, const Schema& schema, bool require_outcome = true);

/// Per-column fill values: mean over non-missing cells for continuous
/// columns, mode for binary/one-hot columns (ties resolve to 0).
std::vector<double> compute_fill_values(const Cohort& cohort);
Cohort apply_fill(Cohort cohort, std::span<const double> fill);
Cohort impute(const Cohort& cohort);

/// Per-column [min, max] over non-missing cells.
std::vector<std::array<double, 2>> column_ranges(const Cohort& cohort);

/// Binary outcome at a fixed horizon. Rows censored at or before the horizon
/// carry label -1 and are excluded from every label-based computation; they
/// are kept because partial-likelihood fits still use their (time, event).
struct LabeledSet {
  double horizon = 0.0;
  Matrix features;
  std::vector<double> time;
  std::vector<std::uint8_t> event;
  std::vector<std::int8_t> label;
  std::size_t excluded_count = 0;

  std::size_t size() const noexcept { return label.size(); }
  std::size_t included_count() const noexcept { return size() - excluded_count; }
  std::vector<std::size_t> included() const;
  std::array<std::size_t, 2> class_counts() const;
  LabeledSet subset(std::span<const std::size_t> rows) const;
};

LabeledSet label_at_horizon(const Cohort& cohort, double horizon);

struct SplitBundle {
  std::array<std::vector<std::size_t>, 4> parts;  // S, V1, V2, T as row indices

  const std::vector<std::size_t>& train() const { return parts[0]; }
  const std::vector<std::size_t>& validate1() const { return parts[1]; }
  const std::vector<std::size_t>& validate2() const { return parts[2]; }
  const std::vector<std::size_t>& test() const { return parts[3]; }
};

/// Seeded random partition of `n` rows into parts of sizes within one of
/// ratio*n (largest-remainder rounding). Throws if any part would be empty.
std::vector<std::vector<std::size_t>> partition_rows(std::size_t n, std::span<const double> ratios,
                                                     std::uint64_t seed);
SplitBundle split_dataset(std::size_t n, const std::array<double, 4>& ratios, std::uint64_t seed);

struct Fold {
  std::vector<std::size_t> development;
  std::vector<std::size_t> test;
};

std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed);

struct RelevanceReport {
  std::vector<std::pair<std::string, double>> scores;  // encoded-column order
  std::vector<std::string> selected;                  // in selection order
  double merit = 0.0;                                 // CFS merit of `selected`
};

/// CFS merit k*mean|r_cf| / sqrt(k + k(k-1)*mean|r_ff|) of a column subset.
double cfs_merit(std::span<const std::size_t> subset, std::span<const double> r_cf,
                 const Matrix& r_ff);

/// |Pearson| correlation; 0 when either side has zero variance.
double abs_correlation(std::span<const double> a, std::span<const double> b);

RelevanceReport relevance_scores(const LabeledSet& data, const Schema& schema);

}  // namespace tops
