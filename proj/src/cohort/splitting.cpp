#include <algorithm>
#include <cmath>

#include "tops/cohort.hpp"
#include "tops/error.hpp"
#include "tops/rng.hpp"

namespace tops {

std::vector<std::vector<std::size_t>> partition_rows(std::size_t n, std::span<const double> ratios,
                                                     std::uint64_t seed) {
  if (ratios.empty()) throw Error(ErrorKind::domain, "no split ratios given");
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorKind::domain, "split ratios must be > 0");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::domain, "split ratios must sum to 1");

  // Largest-remainder apportionment; ties go to the lower part index.
  const std::size_t k = ratios.size();
  std::vector<std::size_t> sizes(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += sizes[i];
    remainders.emplace_back(exact - static_cast<double>(sizes[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[remainders[i % k].second];
  for (std::size_t i = 0; i < k; ++i)
    if (sizes[i] == 0)
      throw Error(ErrorKind::domain, "split part " + std::to_string(i) + " would be empty for n=" +
                                         std::to_string(n));

  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> parts(k);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < k; ++i) {
    parts[i].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                    perm.begin() + static_cast<std::ptrdiff_t>(pos + sizes[i]));
    std::sort(parts[i].begin(), parts[i].end());
    pos += sizes[i];
  }
  return parts;
}

SplitBundle split_dataset(std::size_t n, const std::array<double, 4>& ratios, std::uint64_t seed) {
  auto parts = partition_rows(n, ratios, seed);
  SplitBundle out;
  for (std::size_t i = 0; i < 4; ++i) out.parts[i] = std::move(parts[i]);
  return out;
}

std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::domain, "k must be >= 2");
  if (k > n) throw Error(ErrorKind::domain, "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<std::size_t> fold_of(n);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold_of[perm[pos++]] = f;
  }
  std::vector<Fold> folds(k);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t f = 0; f < k; ++f) (fold_of[r] == f ? folds[f].test : folds[f].development).push_back(r);
  return folds;
}

}  // namespace tops
