#pragma once

// Case-control synthesis: separate log-linear structures for the case and
// control samples, recombined into one fitted table, plus collapsibility
// diagnostics for odds-ratios and relative risks.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ccgm/graphs.hpp"
#include "ccgm/loglinear.hpp"
#include "ccgm/measures.hpp"

namespace ccgm {

/// Both specs are over the regressors, i.e. the table without the response.
struct CaseControlModel {
  LoglinearSpec case_spec;
  LoglinearSpec control_spec;

  /// {"case": {"generators": [...]}, "control": {"generators": [...]}}
  static CaseControlModel from_json(const Schema& regressors, const nlohmann::ordered_json& j);
};

struct SmoothedEstimates {
  std::string response;
  /// Same schema as the observed table.
  ContingencyTable fitted_joint;
  LoglinearFit case_fit;
  LoglinearFit control_fit;
  std::optional<CaseControlModel> model;
  double case_total = 0.0;
  double control_total = 0.0;
};

SmoothedEstimates smooth(const ContingencyTable& observed, const CaseControlModel& m,
                         const std::string& response = "L", const IpfOptions& opts = {});

/// Per-stratum odds-ratios of (response, factor) on the fitted counts. The
/// standard error of each log odds-ratio is the delta method through the
/// asymptotic covariance of the fitted log counts, X (X' diag(m) X)^-1 X',
/// summed over the independent case and control fits.
std::vector<StratumMeasure> smoothed_odds_ratios(const SmoothedEstimates& s,
                                                 const std::string& factor,
                                                 const std::vector<std::string>& given);

/// How a sufficient condition is judged: an LR test at level alpha on
/// sampled counts, or exact zero deviance (relative 1e-8) on a distribution.
struct CollapsibilityMode {
  enum class Kind { sampled, analytic };
  Kind kind = Kind::sampled;
  double alpha = 0.05;

  static CollapsibilityMode sampled(double alpha) { return {Kind::sampled, alpha}; }
  static CollapsibilityMode analytic() { return {Kind::analytic, 0.0}; }
};

struct ConditionTest {
  IndependenceStatement statement;
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool holds = false;
};

enum class SufficientCondition { a_indep_c_given_b, b_indep_c_given_a, both, neither };
const char* to_string(SufficientCondition c);

struct OrCollapsibility {
  std::string a, b, over;
  /// Odds-ratio of (a, b) at over = 0 and over = 1.
  std::array<std::optional<double>, 2> conditional_ors;
  std::optional<double> marginal_or;
  ConditionTest a_indep_c_given_b;
  ConditionTest b_indep_c_given_a;
  SufficientCondition which_condition = SufficientCondition::neither;
  /// Conditional and marginal odds-ratios agree: relative 1e-8 on analytic
  /// tables, equal after rounding to one decimal on sampled ones.
  bool ors_equal = false;
  /// A sufficient condition holds.
  bool collapsible = false;
};

OrCollapsibility check_or_collapsibility(const ContingencyTable& t, const std::string& a,
                                         const std::string& b, const std::string& over,
                                         const CollapsibilityMode& mode);

struct RrStratum {
  CellAddress stratum;
  /// rr(a | b) at each level combination of `over`, in strata order.
  std::vector<std::optional<double>> conditional_rrs;
  /// rr(a | b) with `over` summed out.
  std::optional<double> marginal_rr;
  /// Relative-risk mixture identity residual; only for a single `over`
  /// variable.
  std::optional<double> mixture_residual;
  bool rrs_equal = false;
};

struct RrCollapsibility {
  std::string a, b;
  std::vector<std::string> over;
  std::vector<std::string> given;
  ConditionTest a_indep_c_given_b;
  ConditionTest b_indep_c;
  std::vector<RrStratum> strata;
  /// A sufficient condition holds.
  bool collapsible = false;
  /// Whether odds-ratio and relative-risk conclusions differ on this table.
  std::optional<bool> differs_from_or;
};

/// Collapsibility of rr(a | b) over the variables `over`, within each level
/// combination of `given`. Conditions a ⫫ over | b, given and b ⫫ over | given.
RrCollapsibility check_rr_collapsibility(const ContingencyTable& t, const std::string& a,
                                         const std::string& b,
                                         const std::vector<std::string>& over,
                                         const std::vector<std::string>& given,
                                         const CollapsibilityMode& mode);

struct AssociationView {
  TwoByTwo counts;
  std::optional<double> odds_ratio;
  /// Pr(a = 1 | b = 1) and Pr(a = 1 | b = 0).
  std::optional<double> rate_b1;
  std::optional<double> rate_b0;
};

struct MixingStratum {
  CellAddress stratum;
  AssociationView controls;
  AssociationView cases;
  AssociationView mixed;
};

/// Association of (a, b) given `given`, in the response = 0 slice, the
/// response = 1 slice and the table with the response summed out.
std::vector<MixingStratum> mixing_artifact_demo(const ContingencyTable& t, const std::string& a,
                                                const std::string& b,
                                                const std::vector<std::string>& given,
                                                const std::string& response = "L");

}  // namespace ccgm
