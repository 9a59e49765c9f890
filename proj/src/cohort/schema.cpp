#include <charconv>
#include <fstream>
#include <set>

#include "tops/cohort.hpp"
#include "tops/error.hpp"

namespace tops {
namespace {

FeatureKind parse_kind(const std::string& s) {
  if (s == "binary") return FeatureKind::binary;
  if (s == "continuous") return FeatureKind::continuous;
  if (s == "categorical") return FeatureKind::categorical;
  throw Error(ErrorKind::schema, "unknown feature kind '" + s + "'");
}

const char* kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::binary: return "binary";
    case FeatureKind::continuous: return "continuous";
    case FeatureKind::categorical: return "categorical";
  }
  return "?";
}

bool parse_real(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first < last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

Schema::Schema(std::vector<FeatureSpec> features) : features_(std::move(features)) {
  std::set<std::string> names;
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const auto& spec = features_[f];
    if (spec.name.empty()) throw Error(ErrorKind::schema, "feature with empty name");
    if (spec.name == "time" || spec.name == "event")
      throw Error(ErrorKind::schema, "feature name '" + spec.name + "' is reserved");
    if (!names.insert(spec.name).second)
      throw Error(ErrorKind::schema, "duplicate feature name '" + spec.name + "'");
    offsets_.push_back(columns_.size());
    if (spec.kind == FeatureKind::categorical) {
      if (spec.categories.size() < 2)
        throw Error(ErrorKind::schema, "categorical feature '" + spec.name + "' needs >= 2 categories");
      std::set<std::string> cats(spec.categories.begin(), spec.categories.end());
      if (cats.size() != spec.categories.size())
        throw Error(ErrorKind::schema, "duplicate category in '" + spec.name + "'");
      for (const auto& c : spec.categories)
        columns_.push_back({spec.name + "=" + c, f, ColumnKind::binary});
    } else {
      if (!spec.categories.empty())
        throw Error(ErrorKind::schema, "feature '" + spec.name + "' is not categorical but lists categories");
      columns_.push_back({spec.name, f,
                          spec.kind == FeatureKind::binary ? ColumnKind::binary : ColumnKind::continuous});
    }
  }
}

Schema Schema::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::schema, "schema must be a JSON list");
  std::vector<FeatureSpec> features;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("name") || !item.contains("kind"))
      throw Error(ErrorKind::schema, "schema entries need 'name' and 'kind'");
    FeatureSpec spec;
    spec.name = item.at("name").get<std::string>();
    spec.kind = parse_kind(item.at("kind").get<std::string>());
    if (item.contains("categories"))
      spec.categories = item.at("categories").get<std::vector<std::string>>();
    features.push_back(std::move(spec));
  }
  return Schema(std::move(features));
}

Schema Schema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open schema " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema, "malformed schema " + path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json Schema::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : features_) {
    nlohmann::json item{{"name", f.name}, {"kind", kind_name(f.kind)}};
    if (f.kind == FeatureKind::categorical) item["categories"] = f.categories;
    out.push_back(std::move(item));
  }
  return out;
}

std::optional<std::size_t> Schema::feature_index(const std::string& name) const {
  for (std::size_t f = 0; f < features_.size(); ++f)
    if (features_[f].name == name) return f;
  return std::nullopt;
}

std::optional<std::size_t> Schema::column_index(const std::string& name) const {
  for (std::size_t c = 0; c < columns_.size(); ++c)
    if (columns_[c].name == name) return c;
  return std::nullopt;
}

std::size_t Schema::feature_width(std::size_t f) const {
  return features_[f].kind == FeatureKind::categorical ? features_[f].categories.size() : 1;
}

void Schema::encode_cell(std::size_t f, const std::string& text, std::span<double> out) const {
  const auto& spec = features_[f];
  if (text.empty()) {
    std::fill(out.begin(), out.end(), kMissing);
    return;
  }
  switch (spec.kind) {
    case FeatureKind::binary: {
      if (text == "1" || text == "true" || text == "TRUE" || text == "True") out[0] = 1.0;
      else if (text == "0" || text == "false" || text == "FALSE" || text == "False") out[0] = 0.0;
      else throw Error(ErrorKind::data, "binary feature '" + spec.name + "' has value '" + text + "'");
      return;
    }
    case FeatureKind::continuous: {
      double v = 0.0;
      if (!parse_real(text, v))
        throw Error(ErrorKind::data, "continuous feature '" + spec.name + "' has value '" + text + "'");
      out[0] = v;
      return;
    }
    case FeatureKind::categorical: {
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t c = 0; c < spec.categories.size(); ++c) {
        if (spec.categories[c] == text) {
          out[c] = 1.0;
          return;
        }
      }
      throw Error(ErrorKind::schema, "unknown category '" + text + "' for feature '" + spec.name + "'");
    }
  }
}

std::string Schema::fingerprint() const {
  const std::string canon = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace tops
