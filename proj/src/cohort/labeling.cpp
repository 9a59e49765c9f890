#include "tops/cohort.hpp"
#include "tops/error.hpp"

namespace tops {

LabeledSet label_at_horizon(const Cohort& cohort, double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw Error(ErrorKind::domain, "horizon must be > 0, got " + std::to_string(horizon));
  LabeledSet out;
  out.horizon = horizon;
  out.features = cohort.features;
  out.time = cohort.time;
  out.event = cohort.event;
  out.label.resize(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (cohort.time[i] > horizon) {
      out.label[i] = 1;
    } else if (cohort.event[i]) {
      out.label[i] = 0;
    } else {
      out.label[i] = -1;
      ++out.excluded_count;
    }
  }
  return out;
}

std::vector<std::size_t> LabeledSet::included() const {
  std::vector<std::size_t> out;
  out.reserve(included_count());
  for (std::size_t i = 0; i < label.size(); ++i)
    if (label[i] >= 0) out.push_back(i);
  return out;
}

std::array<std::size_t, 2> LabeledSet::class_counts() const {
  std::array<std::size_t, 2> counts{0, 0};
  for (auto l : label)
    if (l >= 0) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
  LabeledSet out;
  out.horizon = horizon;
  out.features = features.gather(rows);
  for (auto r : rows) {
    out.time.push_back(time[r]);
    out.event.push_back(event[r]);
    out.label.push_back(label[r]);
    if (label[r] < 0) ++out.excluded_count;
  }
  return out;
}

}  // namespace tops
