#include "ccgm/measures.hpp"

#include <array>
#include <cmath>

#include <fmt/format.h>

namespace ccgm {
namespace {

double xlogx_ratio(double n, double m) { return n > 0.0 ? n * std::log(n / m) : 0.0; }

// Independence fit m_rf = row_r col_f / n.
std::array<double, 4> independence_fit(const TwoByTwo& t) {
  const double n = t.total();
  const double r1 = t.n11 + t.n10, r0 = t.n01 + t.n00;
  const double f1 = t.n11 + t.n01, f0 = t.n10 + t.n00;
  return {r1 * f1 / n, r1 * f0 / n, r0 * f1 / n, r0 * f0 / n};
}

}  // namespace

TwoByTwo two_by_two(const ContingencyTable& t, const std::string& response,
                    const std::string& factor) {
  if (response == factor) throw DataError("response and factor must differ");
  const std::vector<std::string> keep{response, factor};
  const auto m = marginalize(t, keep);
  CellAddress at;
  auto get = [&](int r, int f) {
    at[response] = r;
    at[factor] = f;
    return cell(m, at);
  };
  return {get(1, 1), get(1, 0), get(0, 1), get(0, 0)};
}

std::optional<double> odds_ratio(const TwoByTwo& t) {
  const double den = t.n01 * t.n10;
  if (den == 0.0) return std::nullopt;
  return t.n11 * t.n00 / den;
}

std::optional<double> log_or_se(const TwoByTwo& t) {
  if (t.n11 == 0.0 || t.n10 == 0.0 || t.n01 == 0.0 || t.n00 == 0.0) return std::nullopt;
  return std::sqrt(1.0 / t.n11 + 1.0 / t.n10 + 1.0 / t.n01 + 1.0 / t.n00);
}

std::optional<double> relative_risk(const TwoByTwo& t) {
  const double f1 = t.n11 + t.n01, f0 = t.n10 + t.n00;
  if (f1 == 0.0 || f0 == 0.0 || t.n10 == 0.0) return std::nullopt;
  return (t.n11 / f1) / (t.n10 / f0);
}

std::optional<double> risk_difference(const TwoByTwo& t) {
  const double f1 = t.n11 + t.n01, f0 = t.n10 + t.n00;
  if (f1 == 0.0 || f0 == 0.0) return std::nullopt;
  return t.n11 / f1 - t.n10 / f0;
}

std::optional<double> pearson_r(const TwoByTwo& t) {
  const double r1 = t.n11 + t.n10, r0 = t.n01 + t.n00;
  const double f1 = t.n11 + t.n01, f0 = t.n10 + t.n00;
  const double den = r1 * r0 * f1 * f0;
  if (den == 0.0) return std::nullopt;
  return (t.n11 * t.n00 - t.n10 * t.n01) / std::sqrt(den);
}

double lr_chi2(const TwoByTwo& t) {
  const auto m = independence_fit(t);
  return 2.0 * (xlogx_ratio(t.n11, m[0]) + xlogx_ratio(t.n10, m[1]) + xlogx_ratio(t.n01, m[2]) +
                xlogx_ratio(t.n00, m[3]));
}

double pearson_chi2(const TwoByTwo& t) {
  const auto m = independence_fit(t);
  const std::array<double, 4> n{t.n11, t.n10, t.n01, t.n00};
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (m[i] > 0.0) s += (n[i] - m[i]) * (n[i] - m[i]) / m[i];
  }
  return s;
}

const char* to_string(DependenceSign s) {
  switch (s) {
    case DependenceSign::positive: return "positive";
    case DependenceSign::zero: return "zero";
    case DependenceSign::negative: return "negative";
    case DependenceSign::undefined: return "undefined";
  }
  return "undefined";
}

DependenceSign dependence_sign(const TwoByTwo& t) {
  if (t.n11 + t.n10 == 0.0 || t.n01 + t.n00 == 0.0 || t.n11 + t.n01 == 0.0 ||
      t.n10 + t.n00 == 0.0) {
    return DependenceSign::undefined;
  }
  const double d = t.n11 * t.n00 - t.n10 * t.n01;
  if (d > 0.0) return DependenceSign::positive;
  if (d < 0.0) return DependenceSign::negative;
  return DependenceSign::zero;
}

MeasureReport pairwise_report(const ContingencyTable& t, const std::string& a,
                              const std::string& b) {
  MeasureReport r;
  r.response = a;
  r.factor = b;
  r.counts = two_by_two(t, a, b);
  r.odds_ratio = odds_ratio(r.counts);
  r.log_or_se = log_or_se(r.counts);
  r.relative_risk = relative_risk(r.counts);
  r.risk_difference = risk_difference(r.counts);
  r.pearson_r = pearson_r(r.counts);
  r.lr_chi2 = lr_chi2(r.counts);
  r.pearson_chi2 = pearson_chi2(r.counts);
  return r;
}

std::vector<StratumMeasure> stratified_measures(const ContingencyTable& t,
                                                const std::string& response,
                                                const std::string& factor,
                                                const std::vector<std::string>& given) {
  for (const auto& g : given) {
    if (g == response || g == factor) {
      throw DataError(fmt::format("'{}' cannot be both measured and conditioned on", g));
    }
  }
  std::vector<std::string> keep{response, factor};
  keep.insert(keep.end(), given.begin(), given.end());
  const auto m = marginalize(t, keep);
  std::vector<StratumMeasure> out;
  for (auto& s : strata(m.schema(), given)) {
    StratumMeasure sm;
    sm.counts = two_by_two(condition(m, s), response, factor);
    sm.stratum = std::move(s);
    sm.odds_ratio = odds_ratio(sm.counts);
    sm.log_or_se = log_or_se(sm.counts);
    sm.relative_risk = relative_risk(sm.counts);
    out.push_back(std::move(sm));
  }
  return out;
}

std::optional<MixtureWeights> rr_mixture_weights(const ContingencyTable& t, const std::string& a,
                                                 const std::string& b, const std::string& c) {
  const std::vector<std::string> keep{a, b, c};
  const auto m = marginalize(t, keep);
  const double n = m.total();
  CellAddress at;
  auto p = [&](int ai, int bi, int ci) {
    at[a] = ai;
    at[b] = bi;
    at[c] = ci;
    return cell(m, at);
  };
  // Pr(A=1 | B=b, C=c)
  auto risk = [&](int bi, int ci) -> std::optional<double> {
    const double den = p(0, bi, ci) + p(1, bi, ci);
    if (den == 0.0) return std::nullopt;
    return p(1, bi, ci) / den;
  };
  double pc[2] = {0.0, 0.0};
  for (int ci : {0, 1}) {
    for (int ai : {0, 1}) {
      for (int bi : {0, 1}) pc[ci] += p(ai, bi, ci) / n;
    }
  }
  // Weight of stratum C=c; a level without mass carries weight 0.
  double weight[2] = {0.0, 0.0};
  std::optional<double> rr_c[2];
  for (int ci : {0, 1}) {
    if (pc[ci] == 0.0) continue;
    const auto r0 = risk(0, ci);
    if (!r0 || *r0 == 0.0) return std::nullopt;
    weight[ci] = pc[ci] * *r0;
    rr_c[ci] = relative_risk(two_by_two(condition(m, {{c, ci}}), a, b));
  }

  MixtureWeights w{weight[1], weight[0], std::nullopt};
  const auto rr = relative_risk(two_by_two(m, a, b));
  double mix = 0.0;
  for (int ci : {0, 1}) {
    if (weight[ci] == 0.0) continue;
    if (!rr_c[ci]) return w;
    mix += weight[ci] * *rr_c[ci];
  }
  if (rr) w.residual = *rr - mix / (w.alpha + w.beta);
  return w;
}

}  // namespace ccgm
