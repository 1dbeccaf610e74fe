#include "ccgm/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace ccgm {
namespace {

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void require_distinct(const std::vector<std::string>& vars) {
  std::set<std::string> seen;
  for (const auto& v : vars) {
    if (!seen.insert(v).second) throw DataError(fmt::format("variable '{}' given twice", v));
  }
}

// LR test of a ⫫ b | c in the marginal table over a ∪ b ∪ c.
ConditionTest test_condition(const ContingencyTable& t, IndependenceStatement st,
                             const CollapsibilityMode& mode) {
  const auto margin = marginalize(t, concat(concat(st.a, st.b), st.c));
  ConditionTest out;
  if (margin.zero_total()) throw DataError("cannot test independence in an empty table");
  const auto fit = fit_ipf(margin, LoglinearSpec(margin.schema(), {concat(st.a, st.c), concat(st.b, st.c)}));
  out.statement = std::move(st);
  out.chi2 = fit.deviance;
  out.df = fit.df;
  out.p_value = fit.p_value;
  out.holds = mode.kind == CollapsibilityMode::Kind::analytic
                  ? fit.deviance <= 1e-8 * std::max(1.0, margin.total())
                  : fit.p_value >= mode.alpha;
  return out;
}

bool values_equal(const std::vector<std::optional<double>>& conditional,
                  const std::optional<double>& marginal, const CollapsibilityMode& mode) {
  if (!marginal) return false;
  for (const auto& v : conditional) {
    if (!v) return false;
    if (mode.kind == CollapsibilityMode::Kind::analytic) {
      if (std::abs(*v - *marginal) > 1e-8 * std::abs(*marginal)) return false;
    } else if (std::round(*v * 10.0) != std::round(*marginal * 10.0)) {
      return false;
    }
  }
  return true;
}

AssociationView view(const ContingencyTable& t, const std::string& a, const std::string& b) {
  AssociationView v;
  if (t.zero_total()) return v;
  v.counts = two_by_two(t, a, b);
  v.odds_ratio = odds_ratio(v.counts);
  const double b1 = v.counts.n11 + v.counts.n01, b0 = v.counts.n10 + v.counts.n00;
  if (b1 > 0.0) v.rate_b1 = v.counts.n11 / b1;
  if (b0 > 0.0) v.rate_b0 = v.counts.n10 / b0;
  return v;
}

// Dummy-coded design over the regressor cells: intercept plus every nonempty
// subset of every generator.
Eigen::MatrixXd design(const LoglinearSpec& spec) {
  const auto& sc = spec.schema();
  std::set<std::vector<std::size_t>> terms;
  for (const auto& g : spec.generators()) {
    std::vector<std::size_t> pos;
    for (const auto& v : g) pos.push_back(sc.position(v));
    for (unsigned mask = 1; mask < (1U << pos.size()); ++mask) {
      std::vector<std::size_t> t;
      for (std::size_t i = 0; i < pos.size(); ++i)
        if (mask & (1U << i)) t.push_back(pos[i]);
      std::sort(t.begin(), t.end());
      terms.insert(std::move(t));
    }
  }
  const auto rows = static_cast<Eigen::Index>(sc.cell_count());
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(rows, static_cast<Eigen::Index>(terms.size() + 1));
  Eigen::Index col = 1;
  for (const auto& t : terms) {
    for (Eigen::Index i = 0; i < rows; ++i)
      for (std::size_t p : t)
        if (sc.level(static_cast<std::size_t>(i), p) == 0) x(i, col) = 0.0;
    ++col;
  }
  return x;
}

// Variance of w' log(m) under the fitted model; nullopt when a fitted cell
// carrying weight is zero or the information is singular.
std::optional<double> contrast_variance(const Eigen::MatrixXd& x, const ContingencyTable& fitted,
                                        const Eigen::VectorXd& w) {
  Eigen::VectorXd m(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) m(i) = fitted[static_cast<std::size_t>(i)];
  if (m.minCoeff() <= 0.0) return std::nullopt;
  const Eigen::MatrixXd info = x.transpose() * m.asDiagonal() * x;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  const Eigen::VectorXd xw = x.transpose() * w;
  return xw.dot(ldlt.solve(xw));
}

}  // namespace

CaseControlModel CaseControlModel::from_json(const Schema& regressors,
                                             const nlohmann::ordered_json& j) {
  if (!j.is_object() || !j.contains("case") || !j.contains("control")) {
    throw DataError("case-control model JSON needs 'case' and 'control' entries");
  }
  return {LoglinearSpec::from_json(regressors, j.at("case")),
          LoglinearSpec::from_json(regressors, j.at("control"))};
}

SmoothedEstimates smooth(const ContingencyTable& observed, const CaseControlModel& m,
                         const std::string& response, const IpfOptions& opts) {
  const auto& s = observed.schema();
  const auto rpos = s.position(response);
  const auto controls = condition(observed, {{response, 0}});
  const auto cases = condition(observed, {{response, 1}});
  if (!(m.case_spec.schema() == cases.schema()) || !(m.control_spec.schema() == controls.schema())) {
    throw DataError("case and control models must cover the regressors in table order");
  }
  SmoothedEstimates out;
  out.response = response;
  out.control_fit = fit_ipf(controls, m.control_spec, opts);
  out.case_fit = fit_ipf(cases, m.case_spec, opts);
  out.model = m;
  out.control_total = controls.total();
  out.case_total = cases.total();

  const std::size_t bit = s.bit(rpos);
  const std::size_t low = (std::size_t{1} << bit) - 1;
  std::vector<double> joint(observed.size());
  for (std::size_t i = 0; i < joint.size(); ++i) {
    const std::size_t j = ((i >> (bit + 1)) << bit) | (i & low);
    joint[i] = ((i >> bit) & 1U) ? out.case_fit.fitted[j] : out.control_fit.fitted[j];
  }
  out.fitted_joint = ContingencyTable(s, std::move(joint));
  return out;
}

std::vector<StratumMeasure> smoothed_odds_ratios(const SmoothedEstimates& s,
                                                 const std::string& factor,
                                                 const std::vector<std::string>& given) {
  auto out = stratified_measures(s.fitted_joint, s.response, factor, given);
  if (!s.model) return out;
  const auto& regs = s.model->case_spec.schema();
  const auto fpos = regs.position(factor);
  const Eigen::MatrixXd xcase = design(s.model->case_spec), xcontrol = design(s.model->control_spec);
  for (auto& sm : out) {
    sm.log_or_se.reset();
    // weight on each log cell: +-m_i / (2x2 entry that contains it)
    auto weights = [&](const ContingencyTable& fitted) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fitted.size()));
      double total[2] = {0.0, 0.0};
      std::vector<int> group(fitted.size(), -1);
      for (std::size_t i = 0; i < fitted.size(); ++i) {
        bool inside = true;
        for (const auto& [name, level] : sm.stratum) inside = inside && regs.level(i, regs.position(name)) == level;
        if (!inside) continue;
        group[i] = regs.level(i, fpos);
        total[group[i]] += fitted[i];
      }
      for (std::size_t i = 0; i < fitted.size(); ++i) {
        if (group[i] < 0 || total[group[i]] <= 0.0) continue;
        w(static_cast<Eigen::Index>(i)) = (group[i] ? 1.0 : -1.0) * fitted[i] / total[group[i]];
      }
      return w;
    };
    const auto vcase = contrast_variance(xcase, s.case_fit.fitted, weights(s.case_fit.fitted));
    const auto vcontrol = contrast_variance(xcontrol, s.control_fit.fitted, weights(s.control_fit.fitted));
    if (vcase && vcontrol && sm.odds_ratio && *sm.odds_ratio > 0.0) sm.log_or_se = std::sqrt(*vcase + *vcontrol);
  }
  return out;
}

const char* to_string(SufficientCondition c) {
  switch (c) {
    case SufficientCondition::a_indep_c_given_b: return "a_indep_c_given_b";
    case SufficientCondition::b_indep_c_given_a: return "b_indep_c_given_a";
    case SufficientCondition::both: return "both";
    case SufficientCondition::neither: return "neither";
  }
  return "neither";
}

OrCollapsibility check_or_collapsibility(const ContingencyTable& t, const std::string& a,
                                         const std::string& b, const std::string& over,
                                         const CollapsibilityMode& mode) {
  require_distinct({a, b, over});
  OrCollapsibility r;
  r.a = a;
  r.b = b;
  r.over = over;
  const auto m = marginalize(t, {a, b, over});
  for (int c : {0, 1}) {
    const auto slice = condition(m, {{over, c}});
    if (!slice.zero_total()) r.conditional_ors[c] = odds_ratio(two_by_two(slice, a, b));
  }
  r.marginal_or = odds_ratio(two_by_two(m, a, b));
  r.a_indep_c_given_b = test_condition(m, {{a}, {over}, {b}}, mode);
  r.b_indep_c_given_a = test_condition(m, {{b}, {over}, {a}}, mode);
  const bool first = r.a_indep_c_given_b.holds, second = r.b_indep_c_given_a.holds;
  r.which_condition = first && second ? SufficientCondition::both
                      : first         ? SufficientCondition::a_indep_c_given_b
                      : second        ? SufficientCondition::b_indep_c_given_a
                                      : SufficientCondition::neither;
  r.ors_equal = values_equal({r.conditional_ors[0], r.conditional_ors[1]}, r.marginal_or, mode);
  r.collapsible = first || second;
  return r;
}

RrCollapsibility check_rr_collapsibility(const ContingencyTable& t, const std::string& a,
                                         const std::string& b,
                                         const std::vector<std::string>& over,
                                         const std::vector<std::string>& given,
                                         const CollapsibilityMode& mode) {
  if (over.empty()) throw DataError("nothing to collapse over");
  require_distinct(concat(concat({a, b}, over), given));
  RrCollapsibility r;
  r.a = a;
  r.b = b;
  r.over = over;
  r.given = given;
  const auto m = marginalize(t, concat(concat({a, b}, over), given));
  r.a_indep_c_given_b = test_condition(m, {{a}, over, concat({b}, given)}, mode);
  r.b_indep_c = test_condition(m, {{b}, over, given}, mode);
  r.collapsible = r.a_indep_c_given_b.holds || r.b_indep_c.holds;

  bool all_rr_equal = true, all_or_equal = true;
  for (auto& g : strata(m.schema(), given)) {
    const auto table = condition(m, g);
    RrStratum st;
    st.stratum = std::move(g);
    if (table.zero_total()) {
      r.strata.push_back(std::move(st));
      all_rr_equal = all_or_equal = false;
      continue;
    }
    std::vector<std::optional<double>> ors;
    for (const auto& c : strata(table.schema(), over)) {
      const auto slice = condition(table, c);
      if (slice.zero_total()) {
        st.conditional_rrs.emplace_back();
        ors.emplace_back();
        continue;
      }
      const auto counts = two_by_two(slice, a, b);
      st.conditional_rrs.push_back(relative_risk(counts));
      ors.push_back(odds_ratio(counts));
    }
    const auto counts = two_by_two(table, a, b);
    st.marginal_rr = relative_risk(counts);
    if (over.size() == 1) {
      if (const auto w = rr_mixture_weights(table, a, b, over.front())) st.mixture_residual = w->residual;
    }
    st.rrs_equal = values_equal(st.conditional_rrs, st.marginal_rr, mode);
    all_rr_equal = all_rr_equal && st.rrs_equal;
    all_or_equal = all_or_equal && values_equal(ors, odds_ratio(counts), mode);
    r.strata.push_back(std::move(st));
  }
  r.differs_from_or = all_rr_equal != all_or_equal;
  return r;
}

std::vector<MixingStratum> mixing_artifact_demo(const ContingencyTable& t, const std::string& a,
                                                const std::string& b,
                                                const std::vector<std::string>& given,
                                                const std::string& response) {
  require_distinct(concat({a, b, response}, given));
  const auto m = marginalize(t, concat({response, a, b}, given));
  const auto controls = condition(m, {{response, 0}});
  const auto cases = condition(m, {{response, 1}});
  const auto mixed = marginalize(m, concat({a, b}, given));
  std::vector<MixingStratum> out;
  for (auto& g : strata(mixed.schema(), given)) {
    MixingStratum s;
    s.controls = view(condition(controls, g), a, b);
    s.cases = view(condition(cases, g), a, b);
    s.mixed = view(condition(mixed, g), a, b);
    s.stratum = std::move(g);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ccgm
