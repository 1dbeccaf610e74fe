#pragma once

// Hierarchical log-linear models fitted by iterative proportional fitting.

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ccgm/graphs.hpp"
#include "ccgm/tables.hpp"

namespace ccgm {

/// Generating class of a hierarchical log-linear model. Generators are
/// stored in schema order; any generator contained in another is dropped.
class LoglinearSpec {
 public:
  LoglinearSpec(Schema schema, std::vector<std::vector<std::string>> generators);

  /// Generators equal to the maximal cliques of a full-line graph whose
  /// nodes are the schema variables.
  static LoglinearSpec from_graph(Schema schema, const MixedGraph& g);
  /// {"generators": [["V","C","R"], ["C","A"], ["E"]]}
  static LoglinearSpec from_json(Schema schema, const nlohmann::ordered_json& j);

  const Schema& schema() const { return schema_; }
  const std::vector<std::vector<std::string>>& generators() const { return generators_; }

  /// Free parameters of the hierarchical expansion, the empty set included.
  std::size_t parameter_count() const;
  int df() const { return static_cast<int>(schema_.cell_count() - parameter_count()); }

  std::string to_string() const;

 private:
  Schema schema_;
  std::vector<std::vector<std::string>> generators_;
};

struct IpfOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

struct LoglinearFit {
  ContingencyTable fitted;
  double deviance = 0.0;
  double pearson_chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  int iterations = 0;
  bool converged = false;
  /// Largest absolute difference between a fitted and observed generator margin.
  double max_margin_gap = 0.0;
};

/// 2 Σ n log(n / m), with 0 log 0 = 0.
double deviance(const ContingencyTable& observed, const ContingencyTable& fitted);

/// Cyclic margin rescaling from a uniform start until every generator margin
/// is within `tol`. Non-convergence is reported, not thrown.
LoglinearFit fit_ipf(const ContingencyTable& observed, const LoglinearSpec& spec,
                     const IpfOptions& opts = {});

/// Roles for the closed-form case-control estimator: controls follow
/// joint ⫫ separate, cases are saturated.
struct CaseControlRoles {
  std::string response = "L";
  std::vector<std::string> joint{"V", "C"};
  std::vector<std::string> separate{"R"};
};

struct CaseControlCounts {
  ContingencyTable controls;
  ContingencyTable cases;
};

/// Control counts n_{0,joint,+} n_{0,+,separate} / n_{0,+,+}; case counts
/// as observed. Both tables are over the regressors.
CaseControlCounts fit_closed_form_casecontrol(const ContingencyTable& observed,
                                              const CaseControlRoles& roles = {});

/// One test a ⫫ b | c carried out in the marginal table over `margin`;
/// margin must equal a ∪ b ∪ c and lie inside the previous step's margin.
struct DecompositionStep {
  IndependenceStatement statement;
  std::vector<std::string> margin;
};

struct DecompositionResult {
  DecompositionStep step;
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
};

std::vector<DecompositionResult> deviance_decomposition(
    const ContingencyTable& observed, const std::vector<DecompositionStep>& sequence,
    const IpfOptions& opts = {});

struct SelectionStep {
  std::string edge;
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool accepted = false;
};

struct SelectionResult {
  MixedGraph graph;
  std::vector<SelectionStep> steps;
  LoglinearFit fit;
};

/// Forward selection among concentration graphs: starting edgeless, add the
/// edge with the smallest deviance-difference p-value while it is below
/// alpha. Ties go to the lexicographically smaller edge name.
SelectionResult forward_select(const ContingencyTable& observed, double alpha,
                               const IpfOptions& opts = {});

}  // namespace ccgm
