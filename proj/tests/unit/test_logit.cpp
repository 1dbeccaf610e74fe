#include <doctest.h>

#include <cmath>
#include <random>

#include "ccgm/error.hpp"
#include "ccgm/logit.hpp"
#include "ccgm/loglinear.hpp"
#include "support.hpp"

using namespace ccgm;

namespace {

std::vector<std::string> term_names(const LogitFormula& f) {
  std::vector<std::string> out;
  for (const auto& t : f.terms) out.push_back(term_name(t));
  return out;
}

std::vector<double> coefficients(const LogitFit& fit) {
  std::vector<double> out;
  for (const auto& t : fit.terms) out.push_back(t.coef);
  return out;
}

ContingencyTable margin_for(const ContingencyTable& t, const LogitFormula& f) {
  std::vector<std::string> keep{f.response};
  for (const auto& v : f.variables()) keep.push_back(v);
  return marginalize(t, keep);
}

}  // namespace

TEST_CASE("formula parser expands crossings, sums and powers hierarchically") {
  const auto f = parse_formula("L : V*C*R + A*E");
  CHECK(f.response == "L");
  CHECK(term_names(f) == std::vector<std::string>{"V", "C", "R", "A", "E", "VC", "VR", "CR", "AE", "VCR"});
  CHECK(f.variables() == std::vector<std::string>{"V", "C", "R", "A", "E"});

  const auto sq = parse_formula("L:(V+C+R)^2");
  CHECK(term_names(sq) == std::vector<std::string>{"V", "C", "R", "VC", "VR", "CR"});

  CHECK(parse_formula("L :").terms.empty());
  CHECK(parse_formula("L ~ V + V*C").terms.size() == 3);
  CHECK(term_names(parse_formula("Y : age*smoke")) == std::vector<std::string>{"age", "smoke", "age:smoke"});
  CHECK(term_names(parse_formula("L : (V+C)^1")) == std::vector<std::string>{"V", "C"});
}

TEST_CASE("formula parser reports the position of errors") {
  auto position_of = [](const char* text) -> long {
    try {
      parse_formula(text);
    } catch (const FormulaError& e) {
      return static_cast<long>(e.position());
    }
    return -1;
  };
  CHECK(position_of("L : V*") == 6);
  CHECK(position_of("L : V + + C") == 8);
  CHECK(position_of("L : (V+C") == 8);
  CHECK(position_of("L : (V+C)^0") == 10);
  CHECK(position_of("L : V + L") == 8);
  CHECK(position_of(": V") == 0);
  CHECK(position_of("L V") >= 0);
  CHECK(position_of("L : V )") >= 0);
  CHECK(position_of("") == 0);
}

TEST_CASE("binding checks variables against the table") {
  const auto t = testing::bundled();
  CHECK_NOTHROW(bind(parse_formula("L : V*C"), t.schema()));
  CHECK_THROWS_AS(bind(parse_formula("L : V*Q"), t.schema()), DataError);
  CHECK_THROWS_AS(bind(parse_formula("Q : V"), t.schema()), DataError);
  CHECK_THROWS_AS(fit_logit(t, parse_formula("L : Z")), DataError);
}

TEST_CASE("score equations hold at the fitted coefficients") {
  const auto t = testing::bundled();
  for (const char* text : {"L : V*C*R + A*E", "L : V*C*R+C*A+A*E+E*R", "L : (V+C+R)^2", "L : V*C*R + A", "L :"}) {
    CAPTURE(text);
    const auto f = parse_formula(text);
    const auto m = margin_for(t, f);
    const auto fit = fit_logit(m, f);
    REQUIRE(fit.converged);
    const LogitProblem p(m, f);
    for (double s : p.score(coefficients(fit))) CHECK(std::abs(s) < 1e-6);
    CHECK(fit.max_score < 1e-6);
  }
}

TEST_CASE("score equals the finite-difference gradient of the log-likelihood") {
  const auto t = testing::bundled();
  const auto f = parse_formula("L : V*C*R + A*E");
  const LogitProblem p(t, f);
  std::mt19937_64 rng(55);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> points{coefficients(fit_logit(t, f))};
  for (int i = 0; i < 5; ++i) {
    std::vector<double> b(p.parameter_count());
    for (auto& v : b) v = z(rng);
    points.push_back(b);
  }
  for (const auto& beta : points) {
    const auto g = p.score(beta);
    double scale = 0.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < beta.size(); ++k) {
      const double h = 1e-5;
      auto up = beta, down = beta;
      up[k] += h;
      down[k] -= h;
      const double fd = (p.log_likelihood(up) - p.log_likelihood(down)) / (2 * h);
      CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("logit deviance equals the equivalent log-linear model deviance") {
  const auto t = testing::bundled();
  const auto fit = fit_logit(t, parse_formula("L : V*C*R + A*E"));
  const auto ll = fit_ipf(t, LoglinearSpec(t.schema(), {{"L", "V", "C", "R"}, {"L", "A", "E"}, {"V", "C", "R", "A", "E"}}));
  CHECK(std::abs(fit.deviance - ll.deviance) < 1e-6);
  CHECK(fit.df == ll.df);

  // fitted probabilities agree cell by cell
  const auto cases = condition(ll.fitted, {{"L", 1}});
  const auto controls = condition(ll.fitted, {{"L", 0}});
  for (std::size_t c = 0; c < fit.fitted_probabilities.size(); ++c) {
    CHECK(fit.fitted_probabilities[c] == doctest::Approx(cases[c] / (cases[c] + controls[c])).epsilon(1e-6));
  }
}

TEST_CASE("reference logit fits") {
  const auto t = testing::bundled();
  auto fit_of = [&](const char* text) {
    const auto f = parse_formula(text);
    return fit_logit(margin_for(t, f), f);
  };
  const auto right = fit_of("L : V*C*R + A*E");
  CHECK(std::abs(right.term("VCR").coef - -3.39) <= 0.02);
  CHECK(std::abs(right.term("VCR").se - 1.32) <= 0.02);
  CHECK(std::abs(right.term("VCR").z - -2.56) <= 0.02);
  CHECK(std::abs(right.term("AE").coef - -1.87) <= 0.02);
  CHECK(std::abs(right.deviance - 21.4) <= 0.1);
  CHECK(right.df == 21);
  CHECK(right.term("VCR").highest_order);
  CHECK(right.term("AE").highest_order);
  CHECK_FALSE(right.term("VC").highest_order);
  CHECK(right.terms.front().name == "const");

  const auto left = fit_of("L : V*C*R+C*A+A*E+E*R");
  CHECK(std::abs(left.term("VCR").coef - -3.34) <= 0.02);
  CHECK(std::abs(left.deviance - 19.8) <= 0.1);
  CHECK(left.df == 19);

  const auto sq = fit_of("L : (V+C+R)^2");
  CHECK(std::abs(sq.deviance - 9.2) <= 0.1);
  CHECK(sq.df == 1);
  CHECK(std::abs(fit_of("L : V*C*R + A").deviance - 4.1) <= 0.1);
  CHECK(std::abs(fit_of("L : V*C*R + E").deviance - 10.1) <= 0.1);
  CHECK_THROWS_AS(right.term("XY"), DataError);
}

TEST_CASE("additively entered regressors leave the fitted odds-ratios constant over their levels") {
  const auto t = testing::bundled();
  const auto f = parse_formula("L : V*C*R + A");
  const auto fit = fit_logit(margin_for(t, f), f);
  const auto ors = fitted_odds_ratios(fit, "V", {"C", "R", "A"});
  REQUIRE(ors.size() == 8);
  for (std::size_t i = 0; i < 8; i += 2) {
    CHECK(ors[i].stratum.at("A") == 0);
    CHECK(ors[i].odds_ratio == doctest::Approx(ors[i + 1].odds_ratio).epsilon(1e-10));
  }
  const double expected[] = {3.1, 14.4, 27.3, 3.8};  // C, R with R fastest
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(ors[2 * k].odds_ratio - expected[k]) <= 0.1);
  CHECK_THROWS_AS(fitted_odds_ratios(fit, "V", {"C"}), DataError);
  CHECK_THROWS_AS(fitted_odds_ratios(fit, "E", {"C", "R", "A"}), DataError);
}

TEST_CASE("saturated logit reproduces observed stratum odds-ratios") {
  const auto t = marginalize(testing::bundled(), {"L", "V", "C", "R"});
  const auto f = parse_formula("L : V*C*R");
  const auto fit = fit_logit(t, f);
  CHECK(fit.deviance == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
  CHECK(fit.df == 0);
  const auto ors = fitted_odds_ratios(fit, "V", {"C", "R"});
  const auto obs = stratified_measures(t, "L", "V", {"C", "R"});
  for (std::size_t i = 0; i < 4; ++i) CHECK(ors[i].odds_ratio == doctest::Approx(*obs[i].odds_ratio).epsilon(1e-7));
}

TEST_CASE("interaction from four stratum odds-ratios") {
  const auto t = testing::bundled();
  std::array<TwoByTwo, 4> strata;
  for (int r : {0, 1})
    for (int c : {0, 1}) strata[2 * r + c] = two_by_two(condition(t, {{"R", r}, {"C", c}}), "L", "V");
  const auto e = interaction_from_odds_ratios(strata);
  CHECK(std::abs(*e.estimate - -3.52) <= 0.01);
  CHECK(std::abs(*e.se - 1.22) <= 0.01);
  CHECK(std::abs(*e.z - -2.9) <= 0.05);
  // oracle: difference of log odds-ratio contrasts
  CHECK(*e.estimate == doctest::Approx(std::log(*odds_ratio(strata[3]) / *odds_ratio(strata[2])) -
                                       std::log(*odds_ratio(strata[1]) / *odds_ratio(strata[0]))));

  const TwoByTwo same{10, 20, 30, 40};
  const auto flat = interaction_from_odds_ratios({same, same, same, same});
  CHECK(*flat.estimate == doctest::Approx(0.0).scale(1.0));
  CHECK(*flat.z == doctest::Approx(0.0).scale(1.0));

  const auto zero = interaction_from_odds_ratios({TwoByTwo{0, 1, 1, 1}, same, same, same});
  CHECK_FALSE(zero.se.has_value());
}

TEST_CASE("complete separation is diagnosed, not thrown") {
  const ContingencyTable t(Schema({"X", "Y"}), {10, 0, 0, 10});  // Y = X exactly
  const auto fit = fit_logit(t, parse_formula("Y : X"));
  CHECK_FALSE(fit.diagnostics.empty());
}

TEST_CASE("iteration limit is reported") {
  const auto t = testing::bundled();
  const auto fit = fit_logit(t, parse_formula("L : V*C*R + A*E"), LogitOptions{1e-8, 1});
  CHECK_FALSE(fit.converged);
  CHECK(fit.diagnostics.find("iteration") != std::string::npos);
}
