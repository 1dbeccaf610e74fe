#pragma once

// Reference values for the bundled dataset and the checks that
// recompute them. Every check is derived from the table passed in, so an
// altered dataset shows up as failures.

#include <string>
#include <vector>

#include "ccgm/tables.hpp"

namespace ccgm::reference {

struct Check {
  int criterion = 0;
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  /// Absolute tolerance; 0 demands an exact match.
  double tol = 0.0;
  bool pass = false;
};

/// Short title of an acceptance criterion, 1-based.
const char* criterion_title(int criterion);
inline constexpr int kCriteria = 10;

/// Recomputes every pinned value from `data`, a six-way table over
/// V, C, R, A, E, L. Criterion 9 (property suites) is not part of the
/// catalogue.
std::vector<Check> run_checks(const ContingencyTable& data);

}  // namespace ccgm::reference
