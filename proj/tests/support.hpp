#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ccgm/tables.hpp"

namespace ccgm::testing {

inline std::string data_path(const std::string& rel) { return std::string(CCGM_DATA_DIR) + "/" + rel; }

inline ContingencyTable bundled() { return ingest_file(data_path("zatonski_selected.csv")); }

/// Variable names A0, A1, ... or single letters when k <= 26.
inline std::vector<std::string> names(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(1, static_cast<char>('A' + i));
  return out;
}

/// Strictly positive pseudo-random counts, uniform on [lo, hi).
inline ContingencyTable random_table(std::mt19937_64& rng, const std::vector<std::string>& vars,
                                     double lo = 0.5, double hi = 50.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> counts(std::size_t{1} << vars.size());
  for (auto& c : counts) c = u(rng);
  return ContingencyTable(Schema(vars), std::move(counts));
}

/// Integer counts from a Poisson-like draw; zeros allowed.
inline ContingencyTable random_integer_table(std::mt19937_64& rng, const std::vector<std::string>& vars,
                                             double mean = 8.0) {
  std::poisson_distribution<int> p(mean);
  std::vector<double> counts(std::size_t{1} << vars.size());
  double total = 0.0;
  for (auto& c : counts) total += (c = p(rng));
  if (total == 0.0) counts[0] = 1.0;
  return ContingencyTable(Schema(vars), std::move(counts));
}

}  // namespace ccgm::testing
