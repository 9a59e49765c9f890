#include <charconv>
#include <fstream>
#include <map>

#include "tops/cohort.hpp"
#include "tops/csv.hpp"
#include "tops/error.hpp"

namespace tops {

Record Cohort::record(std::size_t i) const {
  auto row = features.row(i);
  return {std::vector<double>(row.begin(), row.end()), time[i], event[i] != 0};
}

void Cohort::add(const Record& r) {
  if (r.features.size() != schema.width())
    throw Error(ErrorKind::data, "record width " + std::to_string(r.features.size()) +
                                     " does not match schema width " + std::to_string(schema.width()));
  if (!(r.time >= 0.0) || !std::isfinite(r.time))
    throw Error(ErrorKind::data, "record time must be finite and >= 0");
  if (features.cols() != schema.width()) features = Matrix(0, schema.width());
  features.append_row(r.features);
  time.push_back(r.time);
  event.push_back(r.event ? 1 : 0);
}

Cohort Cohort::subset(std::span<const std::size_t> rows) const {
  Cohort out;
  out.schema = schema;
  out.features = features.gather(rows);
  out.time.reserve(rows.size());
  out.event.reserve(rows.size());
  for (auto r : rows) {
    out.time.push_back(time[r]);
    out.event.push_back(event[r]);
  }
  return out;
}

Cohort parse_cohort(std::istream& in, const Schema& schema, bool require_outcome) {
  const csv::Table table = csv::read(in);

  std::map<std::string, std::size_t> header_pos;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (!header_pos.emplace(table.header[c], c).second)
      throw Error(ErrorKind::schema, "duplicate column '" + table.header[c] + "' in header");
  }
  std::vector<std::size_t> feature_col(schema.features().size());
  for (std::size_t f = 0; f < schema.features().size(); ++f) {
    auto it = header_pos.find(schema.features()[f].name);
    if (it == header_pos.end())
      throw Error(ErrorKind::schema, "header lacks feature column '" + schema.features()[f].name + "'");
    feature_col[f] = it->second;
  }
  auto time_it = header_pos.find("time");
  auto event_it = header_pos.find("event");
  const bool has_outcome = time_it != header_pos.end() && event_it != header_pos.end();
  if (require_outcome && !has_outcome)
    throw Error(ErrorKind::schema, "header lacks reserved columns 'time' and 'event'");
  const std::size_t expected = schema.features().size() + (has_outcome ? 2 : 0);
  if (table.header.size() != expected) {
    for (const auto& name : table.header) {
      if (name == "time" || name == "event") continue;
      if (!schema.feature_index(name))
        throw Error(ErrorKind::schema, "header column '" + name + "' is not in the schema");
    }
  }

  Cohort cohort;
  cohort.schema = schema;
  cohort.features = Matrix(0, schema.width());
  cohort.features.reserve_rows(table.rows.size());
  std::vector<double> encoded(schema.width());

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    try {
      for (std::size_t f = 0; f < schema.features().size(); ++f) {
        const std::size_t off = schema.column_offset(f);
        schema.encode_cell(f, row[feature_col[f]],
                           std::span<double>(encoded).subspan(off, schema.feature_width(f)));
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::schema) throw Error(ErrorKind::schema, "line " + std::to_string(line) + ": " + e.what());
      throw ParseError(e.what(), line);
    }
    double t = 0.0;
    bool ev = false;
    if (has_outcome) {
      const std::string& ts = row[time_it->second];
      const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), t);
      if (ts.empty() || ec != std::errc() || ptr != ts.data() + ts.size() || !std::isfinite(t) || t < 0.0)
        throw ParseError("time must be a finite number >= 0, found '" + ts + "'", line);
      const std::string& es = row[event_it->second];
      if (es == "1") ev = true;
      else if (es == "0") ev = false;
      else throw ParseError("event must be 0 or 1, found '" + es + "'", line);
    }
    cohort.features.append_row(encoded);
    cohort.time.push_back(t);
    cohort.event.push_back(ev ? 1 : 0);
  }
  return cohort;
}

Cohort load_cohort(const std::string& path, const Schema& schema, bool require_outcome) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open data file " + path);
  Cohort c = parse_cohort(in, schema, require_outcome);
  if (require_outcome && c.size() == 0) throw Error(ErrorKind::data, "data file " + path + " has no rows");
  return c;
}

std::vector<double> compute_fill_values(const Cohort& cohort) {
  const auto& cols = cohort.schema.columns();
  std::vector<double> fill(cols.size(), 0.0);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    double sum = 0.0;
    std::size_t count = 0, ones = 0;
    for (std::size_t r = 0; r < cohort.size(); ++r) {
      const double v = cohort.features(r, c);
      if (is_missing(v)) continue;
      sum += v;
      ++count;
      if (v == 1.0) ++ones;
    }
    if (count == 0)
      throw Error(ErrorKind::data, "feature '" + cols[c].name + "' has no non-missing values");
    if (cols[c].kind == ColumnKind::continuous) fill[c] = sum / static_cast<double>(count);
    else fill[c] = (2 * ones > count) ? 1.0 : 0.0;
  }
  return fill;
}

Cohort apply_fill(Cohort cohort, std::span<const double> fill) {
  if (fill.size() != cohort.schema.width())
    throw Error(ErrorKind::data, "fill vector width does not match schema");
  for (std::size_t r = 0; r < cohort.size(); ++r) {
    auto row = cohort.features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c)
      if (is_missing(row[c])) row[c] = fill[c];
  }
  return cohort;
}

Cohort impute(const Cohort& cohort) {
  bool any_missing = false;
  for (double v : cohort.features.values())
    if (is_missing(v)) {
      any_missing = true;
      break;
    }
  if (!any_missing) return cohort;
  return apply_fill(cohort, compute_fill_values(cohort));
}

std::vector<std::array<double, 2>> column_ranges(const Cohort& cohort) {
  const std::size_t w = cohort.schema.width();
  std::vector<std::array<double, 2>> out(w, {std::numeric_limits<double>::infinity(),
                                             -std::numeric_limits<double>::infinity()});
  for (std::size_t r = 0; r < cohort.size(); ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double v = cohort.features(r, c);
      if (is_missing(v)) continue;
      out[c][0] = std::min(out[c][0], v);
      out[c][1] = std::max(out[c][1], v);
    }
  return out;
}

}  // namespace tops
