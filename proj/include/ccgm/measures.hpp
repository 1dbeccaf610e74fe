#pragma once

// Dependence measures for binary pairs: odds-ratio, relative risk, risk
// difference, binary correlation and the two chi-square statistics for
// independence. Undefined values (zero denominators) are std::nullopt;
// no continuity correction is ever applied.

#include <optional>
#include <string>
#include <vector>

#include "ccgm/tables.hpp"

namespace ccgm {

/// Counts n_{rf}: first index the response level, second the factor level.
struct TwoByTwo {
  double n11 = 0.0;
  double n10 = 0.0;
  double n01 = 0.0;
  double n00 = 0.0;

  double total() const { return n11 + n10 + n01 + n00; }
};

/// Collapses `t` onto (response, factor).
TwoByTwo two_by_two(const ContingencyTable& t, const std::string& response,
                    const std::string& factor);

/// (n11 n00) / (n01 n10); 0 when only the numerator vanishes.
std::optional<double> odds_ratio(const TwoByTwo& t);
/// Delta-method standard error of the log odds-ratio.
std::optional<double> log_or_se(const TwoByTwo& t);
/// Pr(response=1 | factor=1) / Pr(response=1 | factor=0).
std::optional<double> relative_risk(const TwoByTwo& t);
/// Pr(response=1 | factor=1) - Pr(response=1 | factor=0).
std::optional<double> risk_difference(const TwoByTwo& t);
/// Correlation of the two binary variables.
std::optional<double> pearson_r(const TwoByTwo& t);
/// Likelihood-ratio statistic against the independence fit; n log(n/m)
/// contributes 0 when n = 0.
double lr_chi2(const TwoByTwo& t);
double pearson_chi2(const TwoByTwo& t);

enum class DependenceSign { positive, zero, negative, undefined };
const char* to_string(DependenceSign s);

/// Sign of n11 n00 - n10 n01; undefined when any margin is empty.
DependenceSign dependence_sign(const TwoByTwo& t);

struct MeasureReport {
  std::string response;
  std::string factor;
  TwoByTwo counts;
  std::optional<double> odds_ratio;
  std::optional<double> log_or_se;
  std::optional<double> relative_risk;
  std::optional<double> risk_difference;
  std::optional<double> pearson_r;
  double lr_chi2 = 0.0;
  double pearson_chi2 = 0.0;
};

MeasureReport pairwise_report(const ContingencyTable& t, const std::string& a,
                              const std::string& b);

/// Per-stratum 2x2 measures of (response, factor) at each level combination
/// of `given`.
struct StratumMeasure {
  CellAddress stratum;
  TwoByTwo counts;
  std::optional<double> odds_ratio;
  std::optional<double> log_or_se;
  std::optional<double> relative_risk;
};

std::vector<StratumMeasure> stratified_measures(const ContingencyTable& t,
                                                const std::string& response,
                                                const std::string& factor,
                                                const std::vector<std::string>& given);

/// Weights expressing rr(A|B) as an average of rr(A|B, C=1) and
/// rr(A|B, C=0): alpha = Pr(C=1) Pr(A=1|B=0,C=1), beta = Pr(C=0) Pr(A=1|B=0,C=0).
struct MixtureWeights {
  double alpha = 0.0;
  double beta = 0.0;
  /// rr(A|B) minus the weighted average; 0 whenever B and C are independent.
  /// Undefined when a conditional rr is undefined.
  std::optional<double> residual;
};

std::optional<MixtureWeights> rr_mixture_weights(const ContingencyTable& t, const std::string& a,
                                                 const std::string& b, const std::string& c);

}  // namespace ccgm
