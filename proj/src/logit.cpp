#include "ccgm/logit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "ccgm/special.hpp"

namespace ccgm {

FormulaError::FormulaError(std::size_t position, const std::string& what)
    : std::invalid_argument(fmt::format("formula position {}: {}", position, what)),
      position_(position) {}

namespace {

// Terms as sorted sets of variable ids; ids follow first appearance.
using Term = std::vector<int>;
using TermSet = std::set<Term>;

TermSet cross(const TermSet& a, const TermSet& b) {
  TermSet out = a;
  out.insert(b.begin(), b.end());
  for (const auto& x : a) {
    for (const auto& y : b) {
      Term u;
      std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(u));
      out.insert(std::move(u));
    }
  }
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  LogitFormula parse() {
    LogitFormula f;
    skip();
    const std::size_t at = pos_;
    f.response = identifier();
    if (f.response.empty()) fail(at, "expected the response variable");
    response_ = f.response;
    skip();
    if (!eat(':') && !eat('~')) fail(pos_, "expected ':' or '~' after the response");
    skip();
    TermSet terms;
    if (pos_ < text_.size()) terms = sum();
    skip();
    if (pos_ < text_.size()) fail(pos_, fmt::format("unexpected '{}'", text_[pos_]));

    TermSet closed;
    for (const auto& t : terms) {
      const auto n = t.size();
      for (unsigned m = 1; m < (1U << n); ++m) {
        Term sub;
        for (std::size_t i = 0; i < n; ++i) {
          if (m & (1U << i)) sub.push_back(t[i]);
        }
        closed.insert(std::move(sub));
      }
    }
    std::vector<Term> ordered(closed.begin(), closed.end());
    std::stable_sort(ordered.begin(), ordered.end(), [](const Term& a, const Term& b) {
      return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    for (const auto& t : ordered) {
      std::vector<std::string> vars;
      for (int id : t) vars.push_back(names_[id]);
      f.terms.push_back(std::move(vars));
    }
    return f;
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& what) { throw FormulaError(at, what); }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string identifier() {
    const std::size_t start = pos_;
    auto ok = [&](char c, bool first) {
      const auto u = static_cast<unsigned char>(c);
      return std::isalpha(u) || c == '_' || (!first && std::isdigit(u));
    };
    if (pos_ < text_.size() && ok(text_[pos_], true)) {
      ++pos_;
      while (pos_ < text_.size() && ok(text_[pos_], false)) ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  TermSet sum() {
    TermSet out = product();
    skip();
    while (eat('+')) {
      skip();
      const auto t = product();
      out.insert(t.begin(), t.end());
      skip();
    }
    return out;
  }

  TermSet product() {
    TermSet out = factor();
    skip();
    while (eat('*')) {
      skip();
      out = cross(out, factor());
      skip();
    }
    return out;
  }

  TermSet factor() {
    skip();
    const std::size_t at = pos_;
    if (eat('(')) {
      TermSet inner = sum();
      skip();
      if (!eat(')')) fail(pos_, "expected ')'");
      skip();
      if (eat('^')) {
        skip();
        const std::size_t num_at = pos_;
        int k = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          k = k * 10 + (text_[pos_++] - '0');
          if (k > 64) fail(num_at, "exponent too large");
        }
        if (pos_ == num_at || k < 1) fail(num_at, "expected a positive integer exponent");
        TermSet power = inner;
        for (int i = 1; i < k; ++i) power = cross(power, inner);
        return power;
      }
      return inner;
    }
    const std::string name = identifier();
    if (name.empty()) {
      fail(at, at < text_.size() ? fmt::format("unexpected '{}'", text_[at])
                                 : std::string("unexpected end of formula"));
    }
    if (name == response_) fail(at, fmt::format("response '{}' used as a regressor", name));
    auto it = std::find(names_.begin(), names_.end(), name);
    int id = static_cast<int>(it - names_.begin());
    if (it == names_.end()) names_.push_back(name);
    return TermSet{Term{id}};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::string response_;
  std::vector<std::string> names_;
};

double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double xlog(double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; }

}  // namespace

std::vector<std::string> LogitFormula::variables() const {
  std::vector<std::string> out;
  for (const auto& t : terms) {
    if (t.size() != 1) continue;
    out.push_back(t.front());
  }
  return out;
}

std::string LogitFormula::to_string() const {
  std::string out = response + " :";
  bool first = true;
  for (const auto& t : terms) {
    out += first ? " " : " + ";
    first = false;
    for (std::size_t i = 0; i < t.size(); ++i) out += (i ? "*" : "") + t[i];
  }
  return out;
}

LogitFormula parse_formula(std::string_view text) { return Parser(text).parse(); }

void bind(const LogitFormula& f, const Schema& schema) {
  if (!schema.contains(f.response)) {
    throw DataError(fmt::format("unknown response variable '{}'", f.response));
  }
  for (const auto& v : f.variables()) {
    if (!schema.contains(v)) throw DataError(fmt::format("unknown variable '{}' in formula", v));
  }
}

std::string term_name(const std::vector<std::string>& vars) {
  if (vars.empty()) return "const";
  const bool short_names =
      std::all_of(vars.begin(), vars.end(), [](const std::string& v) { return v.size() == 1; });
  std::string out;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (i && !short_names) out += ':';
    out += vars[i];
  }
  return out;
}

LogitProblem::LogitProblem(const ContingencyTable& observed, const LogitFormula& f)
    : formula_(f) {
  bind(f, observed.schema());
  const auto& s = observed.schema();
  const std::string resp[] = {f.response};
  regressors_ = s.subset(s.without(resp));
  for (const auto& t : f.terms) {
    std::vector<std::size_t> pos;
    for (const auto& v : t) pos.push_back(regressors_.position(v));
    term_positions_.push_back(std::move(pos));
  }
  auto add = [&](std::size_t c, double yes, double no) {
    if (yes + no <= 0.0) return;
    cells_.push_back(c);
    successes_.push_back(yes);
    trials_.push_back(yes + no);
  };
  if (s.size() == 1) {
    add(0, observed[1], observed[0]);
  } else {
    const auto cases = condition(observed, {{f.response, 1}});
    const auto controls = condition(observed, {{f.response, 0}});
    for (std::size_t c = 0; c < regressors_.cell_count(); ++c) add(c, cases[c], controls[c]);
  }
  if (cells_.empty()) throw DataError("no observations to fit");
}

std::vector<double> LogitProblem::design_row(std::size_t cell) const {
  std::vector<double> row(parameter_count(), 1.0);
  for (std::size_t j = 0; j < term_positions_.size(); ++j) {
    for (std::size_t p : term_positions_[j]) {
      if (regressors_.level(cell, p) == 0) {
        row[j + 1] = 0.0;
        break;
      }
    }
  }
  return row;
}

namespace {

double linear_predictor(const std::vector<double>& row, const std::vector<double>& beta) {
  double eta = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) eta += row[j] * beta[j];
  return eta;
}

}  // namespace

double LogitProblem::log_likelihood(const std::vector<double>& beta) const {
  double ll = 0.0;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const double eta = linear_predictor(design_row(cells_[i]), beta);
    ll += successes_[i] * eta - trials_[i] * log1pexp(eta);
  }
  return ll;
}

std::vector<double> LogitProblem::score(const std::vector<double>& beta) const {
  std::vector<double> g(parameter_count(), 0.0);
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const auto row = design_row(cells_[i]);
    const double r = successes_[i] - trials_[i] * logistic(linear_predictor(row, beta));
    for (std::size_t j = 0; j < row.size(); ++j) g[j] += row[j] * r;
  }
  return g;
}

double LogitProblem::deviance(const std::vector<double>& beta) const {
  double d = 0.0;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const double p = logistic(linear_predictor(design_row(cells_[i]), beta));
    const double y = successes_[i], n = trials_[i];
    d += xlog(y, n * p) + xlog(n - y, n * (1.0 - p));
  }
  return std::max(0.0, 2.0 * d);
}

std::vector<double> LogitProblem::probabilities(const std::vector<double>& beta) const {
  std::vector<double> p(regressors_.cell_count());
  for (std::size_t c = 0; c < p.size(); ++c) p[c] = logistic(linear_predictor(design_row(c), beta));
  return p;
}

const LogitTerm& LogitFit::term(std::string_view name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t;
  }
  throw DataError(fmt::format("no term '{}' in the model", name));
}

LogitFit fit_logit(const ContingencyTable& observed, const LogitFormula& f,
                   const LogitOptions& opts) {
  if (!(opts.tol > 0.0) || opts.max_iter < 1) throw DataError("logit needs tol > 0 and max_iter >= 1");
  const LogitProblem prob(observed, f);
  const auto k = static_cast<Eigen::Index>(prob.parameter_count());
  const auto m = static_cast<Eigen::Index>(prob.cells().size());

  Eigen::MatrixXd x(m, k);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto row = prob.design_row(prob.cells()[i]);
    for (Eigen::Index j = 0; j < k; ++j) x(i, j) = row[j];
  }
  const Eigen::Map<const Eigen::VectorXd> y(prob.successes().data(), m);
  const Eigen::Map<const Eigen::VectorXd> n(prob.trials().data(), m);

  auto as_vector = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto information = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd w(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double p = logistic(eta(i));
      w(i) = n(i) * p * (1.0 - p);
    }
    return Eigen::MatrixXd(x.transpose() * w.asDiagonal() * x);
  };
  auto score = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) r(i) = y(i) - n(i) * logistic(eta(i));
    return Eigen::VectorXd(x.transpose() * r);
  };

  LogitFit fit;
  fit.formula = f;
  fit.regressors = prob.regressors();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double dev = prob.deviance(as_vector(beta));
  Eigen::VectorXd g = score(beta);
  Eigen::MatrixXd info = information(beta);

  for (int it = 1; it <= opts.max_iter; ++it) {
    fit.iterations = it;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      fit.diagnostics = "singular information matrix (a term has no variation or is aliased)";
      break;
    }
    const Eigen::VectorXd delta = ldlt.solve(g);
    double step = 1.0;
    Eigen::VectorXd next = beta + delta;
    double next_dev = prob.deviance(as_vector(next));
    while (!(next_dev <= dev * (1.0 + 1e-12) + 1e-12) && step > 1e-10) {
      step *= 0.5;
      next = beta + step * delta;
      next_dev = prob.deviance(as_vector(next));
    }
    if (step <= 1e-10) {
      fit.diagnostics = "step-halving failed to reduce the deviance";
      break;
    }
    const double change = std::abs(dev - next_dev) / (std::abs(next_dev) + 0.1);
    beta = next;
    dev = next_dev;
    g = score(beta);
    info = information(beta);
    if (g.cwiseAbs().maxCoeff() < opts.tol && change < 1e-10) {
      fit.converged = true;
      break;
    }
  }
  if (fit.converged && beta.cwiseAbs().maxCoeff() > 30.0) {
    fit.converged = false;
    fit.diagnostics = "coefficients diverging; the maximum-likelihood estimate does not exist (separation)";
  }
  if (!fit.converged && fit.diagnostics.empty()) {
    fit.diagnostics = beta.cwiseAbs().maxCoeff() > 15.0
                          ? "iteration limit reached; coefficients diverging (possible separation)"
                          : "iteration limit reached";
  }
  fit.max_score = g.cwiseAbs().maxCoeff();

  Eigen::VectorXd var = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (lu.isInvertible()) var = lu.inverse().diagonal();

  std::vector<std::vector<std::string>> all_terms{{}};
  all_terms.insert(all_terms.end(), f.terms.begin(), f.terms.end());
  for (Eigen::Index j = 0; j < k; ++j) {
    LogitTerm t;
    t.vars = all_terms[j];
    t.name = term_name(t.vars);
    t.coef = beta(j);
    t.se = std::sqrt(var(j));
    t.z = t.coef / t.se;
    t.highest_order = !t.vars.empty();
    for (const auto& other : f.terms) {
      if (other.size() > t.vars.size() &&
          std::all_of(t.vars.begin(), t.vars.end(), [&](const std::string& v) {
            return std::find(other.begin(), other.end(), v) != other.end();
          })) {
        t.highest_order = false;
      }
    }
    fit.terms.push_back(std::move(t));
  }
  fit.deviance = dev;
  fit.df = static_cast<int>(m - k);
  fit.p_value = fit.df > 0 ? chi2_sf(dev, fit.df) : 1.0;
  fit.fitted_probabilities = prob.probabilities(as_vector(beta));
  return fit;
}

InteractionEstimate interaction_from_odds_ratios(const std::array<TwoByTwo, 4>& strata) {
  InteractionEstimate out;
  double est = 0.0, var = 0.0;
  bool defined = true, se_defined = true;
  const double sign[4] = {1.0, -1.0, -1.0, 1.0};
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& t = strata[s];
    const auto orr = odds_ratio(t);
    if (!orr || *orr <= 0.0) {
      defined = false;
    } else {
      est += sign[s] * std::log(*orr);
    }
    const auto se = log_or_se(t);
    if (!se) {
      se_defined = false;
    } else {
      var += *se * *se;
    }
  }
  if (!defined) return out;
  out.estimate = est;
  if (se_defined) {
    out.se = std::sqrt(var);
    out.z = est / *out.se;
  }
  return out;
}

std::vector<FittedOddsRatio> fitted_odds_ratios(const LogitFit& fit, const std::string& factor,
                                                const std::vector<std::string>& given,
                                                const CellAddress& fixed) {
  const auto& rs = fit.regressors;
  const auto fpos = rs.position(factor);
  const auto model_vars = fit.formula.variables();
  if (std::find(model_vars.begin(), model_vars.end(), factor) == model_vars.end()) {
    throw DataError(fmt::format("'{}' is not in the model", factor));
  }
  for (const auto& g : given) {
    rs.position(g);
    if (g == factor) throw DataError("the factor cannot also be conditioned on");
  }
  for (const auto& [v, level] : fixed) rs.position(v);
  for (const auto& v : model_vars) {
    if (v == factor) continue;
    const bool in_given = std::find(given.begin(), given.end(), v) != given.end();
    if (!in_given && !fixed.contains(v)) {
      throw DataError(fmt::format("regressor '{}' must be conditioned on or fixed", v));
    }
  }

  std::vector<FittedOddsRatio> out;
  for (auto& st : strata(rs, given)) {
    std::size_t base = 0;
    for (std::size_t p = 0; p < rs.size(); ++p) {
      const auto& name = rs.name(p);
      int level = 0;
      if (auto it = st.find(name); it != st.end()) level = it->second;
      else if (auto jt = fixed.find(name); jt != fixed.end()) level = jt->second;
      if (level) base |= std::size_t{1} << rs.bit(p);
    }
    const std::size_t fbit = std::size_t{1} << rs.bit(fpos);
    const double p1 = fit.fitted_probabilities[base | fbit];
    const double p0 = fit.fitted_probabilities[base & ~fbit];
    out.push_back({std::move(st), (p1 / (1.0 - p1)) / (p0 / (1.0 - p0))});
  }
  return out;
}

}  // namespace ccgm
