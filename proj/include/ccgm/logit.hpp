#pragma once

// Logit regression of a binary response on binary regressors, fitted by
// iteratively reweighted least squares over grouped regressor cells.
//
// Coding is dummy 0/1 with level 1 active, so the intercept is the log-odds
// at all regressors 0 and a term's design column is the product of its
// variables' levels.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ccgm/measures.hpp"
#include "ccgm/tables.hpp"

namespace ccgm {

/// Malformed formula text. `position` is the 0-based offset of the problem.
class FormulaError : public std::invalid_argument {
 public:
  FormulaError(std::size_t position, const std::string& what);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

struct LogitFormula {
  std::string response;
  /// Hierarchically closed model terms without the intercept, ordered by
  /// size and then by first appearance of their variables.
  std::vector<std::vector<std::string>> terms;

  /// Regressors named in the terms, in order of first appearance.
  std::vector<std::string> variables() const;
  std::string to_string() const;
};

/// Parses `RESP : term + term ...` (`~` also separates). A term is a
/// product `a*b*c` of variables or parenthesised sums; `(a+b+c)^2` expands
/// to all terms of at most two factors.
LogitFormula parse_formula(std::string_view text);

/// Throws DataError if a variable of `f` is absent from `schema`.
void bind(const LogitFormula& f, const Schema& schema);

/// "const" for the intercept, otherwise the concatenated variable names
/// (joined by ':' when any name is longer than one character).
std::string term_name(const std::vector<std::string>& vars);

/// Grouped binomial data and design matrix for one formula. Regressor cells
/// are the cells of the table over every non-response variable; cells with
/// no observations are dropped.
class LogitProblem {
 public:
  LogitProblem(const ContingencyTable& observed, const LogitFormula& f);

  const LogitFormula& formula() const { return formula_; }
  const Schema& regressors() const { return regressors_; }
  std::size_t parameter_count() const { return formula_.terms.size() + 1; }
  /// Regressor cells kept in the likelihood.
  const std::vector<std::size_t>& cells() const { return cells_; }
  const std::vector<double>& successes() const { return successes_; }
  const std::vector<double>& trials() const { return trials_; }

  /// Design row of any regressor cell, intercept first.
  std::vector<double> design_row(std::size_t cell) const;

  double log_likelihood(const std::vector<double>& beta) const;
  /// Gradient of the log-likelihood: X'(y - n p).
  std::vector<double> score(const std::vector<double>& beta) const;
  /// Deviance against the saturated model at `beta`.
  double deviance(const std::vector<double>& beta) const;
  /// Pr(response = 1) at every regressor cell, dropped cells included.
  std::vector<double> probabilities(const std::vector<double>& beta) const;

 private:
  LogitFormula formula_;
  Schema regressors_;
  std::vector<std::vector<std::size_t>> term_positions_;
  std::vector<std::size_t> cells_;
  std::vector<double> successes_;
  std::vector<double> trials_;
};

struct LogitOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

struct LogitTerm {
  std::string name;
  std::vector<std::string> vars;
  double coef = 0.0;
  double se = 0.0;
  double z = 0.0;
  /// Not contained in any other term of the model.
  bool highest_order = false;
};

struct LogitFit {
  LogitFormula formula;
  Schema regressors;
  /// Intercept first, then the formula terms.
  std::vector<LogitTerm> terms;
  double deviance = 0.0;
  int df = 0;
  double p_value = 1.0;
  /// Indexed by regressor cell.
  std::vector<double> fitted_probabilities;
  bool converged = false;
  int iterations = 0;
  double max_score = 0.0;
  std::string diagnostics;

  const LogitTerm& term(std::string_view name) const;
};

LogitFit fit_logit(const ContingencyTable& observed, const LogitFormula& f,
                   const LogitOptions& opts = {});

/// Difference of differences of log odds-ratios over two binary modifiers.
struct InteractionEstimate {
  std::optional<double> estimate;
  std::optional<double> se;
  std::optional<double> z;
};

/// `strata[2 * m + k]` is the table at first modifier m, second modifier k.
/// estimate = log or11 - log or10 - log or01 + log or00.
InteractionEstimate interaction_from_odds_ratios(const std::array<TwoByTwo, 4>& strata);

struct FittedOddsRatio {
  CellAddress stratum;
  double odds_ratio = 0.0;
};

/// Odds-ratio of the response and `factor` from fitted probabilities at each
/// level combination of `given`. Every other model regressor must appear in
/// `given` or be fixed by `fixed`.
std::vector<FittedOddsRatio> fitted_odds_ratios(const LogitFit& fit, const std::string& factor,
                                                const std::vector<std::string>& given,
                                                const CellAddress& fixed = {});

}  // namespace ccgm
