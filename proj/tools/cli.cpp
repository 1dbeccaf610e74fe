#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ccgm/graphs.hpp"
#include "ccgm/kernels.hpp"
#include "ccgm/logit.hpp"
#include "ccgm/loglinear.hpp"
#include "ccgm/measures.hpp"
#include "ccgm/smoothing.hpp"
#include "ccgm/tables.hpp"
#include "reference.hpp"

#ifndef CCGM_DATA_DIR
#define CCGM_DATA_DIR "data"
#endif

namespace ccgm::cli {

using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Global {
  std::string input = std::string(CCGM_DATA_DIR) + "/zatonski_selected.csv";
  std::string format = "text";
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::uint64_t seed = 1;
  std::string backend = "auto";
};

// ---------------------------------------------------------------- helpers

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v, std::string_view sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(sep) : "") + v[i];
  return out;
}

/// A variable set written "V:C:R", "V,C,R" or, for one-letter names, "VCR".
std::vector<std::string> parse_varset(const std::string& token, const Schema& schema) {
  if (token.find(':') != std::string::npos) return split_list(token, ':');
  if (token.find(',') != std::string::npos) return split_list(token, ',');
  if (schema.contains(token)) return {token};
  std::vector<std::string> out;
  for (char c : token) out.emplace_back(1, c);
  return out;
}

/// Generators separated by ',' or whitespace, e.g. "VCR,CA,E".
std::vector<std::vector<std::string>> parse_generators(const std::string& text, const Schema& schema) {
  std::vector<std::vector<std::string>> out;
  std::string norm = text;
  std::replace(norm.begin(), norm.end(), ' ', ',');
  for (const auto& tok : split_list(norm)) out.push_back(parse_varset(tok, schema));
  if (out.empty()) throw UsageError("no generators given");
  return out;
}

std::vector<std::string> union_of(const std::vector<std::vector<std::string>>& sets, const Schema& schema) {
  std::vector<std::string> all;
  for (const auto& s : sets) all.insert(all.end(), s.begin(), s.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return schema.subset(all).names();
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt_opt(const std::optional<double>& v, int decimals) {
  return v ? fmt::format("{:.{}f}", *v, decimals) : std::string("-");
}

json address_json(const CellAddress& a) {
  json j = json::object();
  for (const auto& [k, v] : a) j[k] = v;
  return j;
}

json table_json(const ContingencyTable& t) {
  json cells = json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    json c = json::object();
    for (std::size_t v = 0; v < t.schema().size(); ++v) c[t.schema().name(v)] = t.schema().level(i, v);
    c["count"] = t[i];
    cells.push_back(std::move(c));
  }
  return {{"variables", t.schema().names()}, {"total", t.total()}, {"cells", std::move(cells)}};
}

void print_table_text(const ContingencyTable& t, std::ostream& out) {
  for (const auto& n : t.schema().names()) out << fmt::format("{:>4}", n);
  out << fmt::format("{:>12}\n", "count");
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t p = 0; p < t.schema().size(); ++p) out << fmt::format("{:>4}", t.schema().level(i, p));
    out << fmt::format("{:>12.4f}\n", t[i]);
  }
  out << fmt::format("total {:.4f}\n", t.total());
}

json two_by_two_json(const TwoByTwo& t) {
  return {{"n11", t.n11}, {"n10", t.n10}, {"n01", t.n01}, {"n00", t.n00}};
}

json measure_json(const MeasureReport& r) {
  return {{"response", r.response},
          {"factor", r.factor},
          {"counts", two_by_two_json(r.counts)},
          {"odds_ratio", opt(r.odds_ratio)},
          {"log_or_se", opt(r.log_or_se)},
          {"relative_risk", opt(r.relative_risk)},
          {"risk_difference", opt(r.risk_difference)},
          {"pearson_r", opt(r.pearson_r)},
          {"lr_chi2", r.lr_chi2},
          {"pearson_chi2", r.pearson_chi2},
          {"dependence_sign", to_string(dependence_sign(r.counts))}};
}

json strata_json(const std::vector<StratumMeasure>& strata) {
  json arr = json::array();
  for (const auto& s : strata) {
    arr.push_back({{"stratum", address_json(s.stratum)},
                   {"counts", two_by_two_json(s.counts)},
                   {"odds_ratio", opt(s.odds_ratio)},
                   {"log_or_se", opt(s.log_or_se)},
                   {"relative_risk", opt(s.relative_risk)}});
  }
  return arr;
}

void print_strata_text(const std::vector<StratumMeasure>& strata, std::ostream& out) {
  out << fmt::format("{:<24}{:>10}{:>10}{:>10}\n", "stratum", "odr", "se(log)", "rr");
  for (const auto& s : strata) {
    out << fmt::format("{:<24}{:>10}{:>10}{:>10}\n", format_address(s.stratum), fmt_opt(s.odds_ratio, 2),
                       fmt_opt(s.log_or_se, 3), fmt_opt(s.relative_risk, 2));
  }
}

json loglinear_json(const LoglinearSpec& spec, const LoglinearFit& f, bool with_cells) {
  json j{{"model", spec.to_string()},
         {"generators", spec.generators()},
         {"deviance", f.deviance},
         {"pearson_chi2", f.pearson_chi2},
         {"df", f.df},
         {"p", f.p_value},
         {"iterations", f.iterations},
         {"converged", f.converged},
         {"margin_gap", f.max_margin_gap}};
  if (with_cells) j["fitted"] = table_json(f.fitted);
  return j;
}

void print_loglinear_text(const LoglinearSpec& spec, const LoglinearFit& f, std::ostream& out) {
  out << fmt::format("model       {}\n", spec.to_string());
  out << fmt::format("deviance    {:.3f} on {} df, p = {:.4f}\n", f.deviance, f.df, f.p_value);
  out << fmt::format("pearson     {:.3f}\n", f.pearson_chi2);
  out << fmt::format("iterations  {} ({}), margin gap {:.2e}\n", f.iterations,
                     f.converged ? "converged" : "not converged", f.max_margin_gap);
}

json logit_json(const LogitFit& f) {
  json terms = json::array();
  for (const auto& t : f.terms) {
    terms.push_back({{"term", t.name}, {"coeff", t.coef}, {"se", t.se}, {"z", t.z}, {"highest_order", t.highest_order}});
  }
  json probs = json::array();
  for (std::size_t c = 0; c < f.fitted_probabilities.size(); ++c) {
    json p = json::object();
    for (std::size_t v = 0; v < f.regressors.size(); ++v) p[f.regressors.name(v)] = f.regressors.level(c, v);
    p["probability"] = f.fitted_probabilities[c];
    probs.push_back(std::move(p));
  }
  return {{"formula", f.formula.to_string()}, {"terms", std::move(terms)}, {"deviance", f.deviance},
          {"df", f.df},       {"p", f.p_value},                         {"converged", f.converged},
          {"iterations", f.iterations}, {"max_score", f.max_score},   {"diagnostics", f.diagnostics},
          {"fitted_probabilities", std::move(probs)}};
}

void print_logit_text(const LogitFit& f, std::ostream& out) {
  out << fmt::format("formula  {}\n", f.formula.to_string());
  out << fmt::format("{:<10}{:>10}{:>10}{:>10}\n", "term", "coeff", "se", "z_obs");
  for (const auto& t : f.terms) {
    const std::string z = t.highest_order ? fmt::format("{:.2f}", t.z) : "---";
    out << fmt::format("{:<10}{:>10.2f}{:>10.2f}{:>10}\n", t.name, t.coef, t.se, z);
  }
  out << fmt::format("deviance {:.2f} on {} df, p = {:.4f}", f.deviance, f.df, f.p_value);
  out << (f.converged ? "\n" : fmt::format(" (not converged: {})\n", f.diagnostics));
}

json condition_json(const ConditionTest& c) {
  return {{"statement", to_string(c.statement)}, {"chi2", c.chi2}, {"df", c.df}, {"p", c.p_value}, {"holds", c.holds}};
}

json graph_report_json(const MixedGraph& g) {
  json j = graph_to_json(g);
  json vs = json::array();
  for (const auto& v : find_collision_vs(g)) vs.push_back({v.i, v.o, v.j});
  j["collision_vs"] = std::move(vs);
  j["markov_equivalent_to_concentration"] = is_markov_equivalent_to_concentration(g);
  return j;
}

IndependenceStatement parse_statement(const std::string& text, const Schema& schema) {
  const auto parts = split_list(text, '|');
  if (parts.size() < 2 || parts.size() > 3) {
    throw UsageError(fmt::format("statement '{}' must read a|b or a|b|c", text));
  }
  IndependenceStatement s{parse_varset(parts[0], schema), parse_varset(parts[1], schema), {}};
  if (parts.size() == 3) s.c = parse_varset(parts[2], schema);
  return s;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Draws `n` observations with replacement from the cell proportions of `t`.
ContingencyTable resample(const ContingencyTable& t, long long n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(t.counts().begin(), t.counts().end());
  std::vector<double> counts(t.size(), 0.0);
  for (long long i = 0; i < n; ++i) counts[pick(rng)] += 1.0;
  return ContingencyTable(t.schema(), std::move(counts));
}

// ---------------------------------------------------------------- commands

struct Context {
  Global global;
  std::istream* in = nullptr;
  std::ostream* out = nullptr;

  bool json_out() const { return global.format == "json"; }

  ContingencyTable table() const {
    if (global.input == "-") return ingest(*in);
    return ingest_file(global.input);
  }

  /// The input table restricted by a "X=1,Y=0" address.
  ContingencyTable table_where(const std::string& where) const {
    auto t = table();
    if (where.empty()) return t;
    auto s = condition(t, parse_address(where));
    if (s.zero_total()) throw DataError(fmt::format("no observations with {}", where));
    return s;
  }

  IpfOptions ipf() const {
    IpfOptions o;
    if (global.tol) o.tol = *global.tol;
    if (global.max_iter) o.max_iter = *global.max_iter;
    return o;
  }

  LogitOptions logit() const {
    LogitOptions o;
    if (global.tol) o.tol = *global.tol;
    if (global.max_iter) o.max_iter = *global.max_iter;
    return o;
  }
};

using Handler = std::function<int(Context&)>;

struct Command {
  CommandInfo info;
  std::function<Handler(CLI::App&)> setup;
};

std::vector<Command> make_commands() {
  std::vector<Command> cmds;

  cmds.push_back({{"ingest", "read a cell-CSV table and write it back in canonical form",
                   {"tables.ingest", "tables.emit"}},
                  [](CLI::App& app) -> Handler {
                    auto draws = std::make_shared<long long>(0);
                    app.add_option("--resample", *draws, "multinomial resample of this many observations (uses --seed)")
                        ->check(CLI::NonNegativeNumber);
                    return [=](Context& ctx) {
                      auto t = ctx.table();
                      if (*draws > 0) t = resample(t, *draws, ctx.global.seed);
                      if (ctx.json_out()) *ctx.out << dump(table_json(t));
                      else emit(t, *ctx.out);
                      return kOk;
                    };
                  }});

  cmds.push_back({{"marginal", "marginal or conditional table",
                   {"tables.marginalize", "tables.condition", "tables.cell"}},
                  [](CLI::App& app) -> Handler {
                    auto keep = std::make_shared<std::string>();
                    auto given = std::make_shared<std::string>();
                    auto at = std::make_shared<std::string>();
                    app.add_option("--keep", *keep, "variables to keep, e.g. L,V");
                    app.add_option("--given", *given, "condition on an address, e.g. C=0,R=0");
                    app.add_option("--cell", *at, "print one count at a full address");
                    return [=](Context& ctx) {
                      auto t = ctx.table();
                      if (!given->empty()) t = condition(t, parse_address(*given));
                      if (!keep->empty()) t = marginalize(t, split_list(*keep));
                      if (!at->empty()) {
                        const double v = cell(t, parse_address(*at));
                        if (ctx.json_out()) *ctx.out << dump({{"cell", *at}, {"count", v}});
                        else *ctx.out << fmt::format("{}\n", v);
                        return kOk;
                      }
                      if (ctx.json_out()) {
                        json j = table_json(t);
                        j["zero_total"] = t.zero_total();
                        *ctx.out << dump(j);
                      } else {
                        print_table_text(t, *ctx.out);
                      }
                      return kOk;
                    };
                  }});

  cmds.push_back({{"measure", "pairwise or stratified dependence measures",
                   {"measures.odds_ratio", "measures.log_or_se", "measures.relative_risk",
                    "measures.dependence_sign", "measures.pairwise_report", "measures.rr_mixture_weights",
                    "measures.stratified_measures"}},
                  [](CLI::App& app) -> Handler {
                    auto pair = std::make_shared<std::string>();
                    auto given = std::make_shared<std::string>();
                    auto where = std::make_shared<std::string>();
                    auto mixture = std::make_shared<std::string>();
                    app.add_option("--pair", *pair, "response,factor, e.g. L,V")->required();
                    app.add_option("--given", *given, "stratify by these variables");
                    app.add_option("--where", *where, "restrict to an address first, e.g. L=0");
                    app.add_option("--mixture", *mixture, "relative-risk mixture weights over this variable");
                    return [=](Context& ctx) {
                      const auto p = split_list(*pair);
                      if (p.size() != 2) throw UsageError("--pair needs exactly two variables");
                      const auto t = ctx.table_where(*where);
                      json j;
                      const auto rep = pairwise_report(t, p[0], p[1]);
                      j["marginal"] = measure_json(rep);
                      std::vector<StratumMeasure> strata;
                      if (!given->empty()) {
                        strata = stratified_measures(t, p[0], p[1], split_list(*given));
                        j["strata"] = strata_json(strata);
                      }
                      std::optional<MixtureWeights> w;
                      if (!mixture->empty()) {
                        w = rr_mixture_weights(t, p[0], p[1], *mixture);
                        j["mixture"] = w ? json{{"alpha", w->alpha}, {"beta", w->beta}, {"residual", opt(w->residual)}}
                                         : json(nullptr);
                      }
                      if (ctx.json_out()) {
                        *ctx.out << dump(j);
                        return kOk;
                      }
                      auto& o = *ctx.out;
                      o << fmt::format("pair           ({},{})\n", p[0], p[1]);
                      o << fmt::format("odds-ratio     {}\n", fmt_opt(rep.odds_ratio, 1));
                      o << fmt::format("se(log odr)    {}\n", fmt_opt(rep.log_or_se, 3));
                      o << fmt::format("relative risk  {}\n", fmt_opt(rep.relative_risk, 2));
                      o << fmt::format("risk diff.     {}\n", fmt_opt(rep.risk_difference, 3));
                      o << fmt::format("LR chi2        {:.1f}\n", rep.lr_chi2);
                      o << fmt::format("Pearson chi2   {:.1f}\n", rep.pearson_chi2);
                      o << fmt::format("binary r       {}\n", fmt_opt(rep.pearson_r, 2));
                      o << fmt::format("sign           {}\n", to_string(dependence_sign(rep.counts)));
                      if (!strata.empty()) print_strata_text(strata, o);
                      if (!mixture->empty()) {
                        if (w) o << fmt::format("mixture        alpha {:.4f} beta {:.4f} residual {}\n", w->alpha,
                                                w->beta, fmt_opt(w->residual, 6));
                        else o << "mixture        undefined\n";
                      }
                      return kOk;
                    };
                  }});

  cmds.push_back({{"fit-loglinear", "fit a hierarchical log-linear model by IPF",
                   {"loglinear.fit_ipf", "loglinear.fit_closed_form_casecontrol"}},
                  [](CLI::App& app) -> Handler {
                    auto gens = std::make_shared<std::string>();
                    auto model = std::make_shared<std::string>();
                    auto graph = std::make_shared<std::string>();
                    auto where = std::make_shared<std::string>();
                    auto closed = std::make_shared<bool>(false);
                    auto cells = std::make_shared<bool>(false);
                    auto g = app.add_option_group("model");
                    g->add_option("--generators", *gens, "generating class, e.g. VCR,CA,E");
                    g->add_option("--model", *model, "model spec JSON file")->check(CLI::ExistingFile);
                    g->add_option("--graph", *graph, "concentration graph JSON; cliques become generators")
                        ->check(CLI::ExistingFile);
                    g->add_flag("--closed-form", *closed, "closed-form case-control estimator over L,V,C,R");
                    g->require_option(1);
                    app.add_option("--where", *where, "restrict to an address first, e.g. L=1");
                    app.add_flag("--cells", *cells, "include fitted cells in the text report");
                    return [=](Context& ctx) {
                      const auto t = ctx.table_where(*where);
                      if (*closed) {
                        const auto r = fit_closed_form_casecontrol(marginalize(t, {"L", "V", "C", "R"}));
                        if (ctx.json_out()) {
                          *ctx.out << dump({{"controls", table_json(r.controls)}, {"cases", table_json(r.cases)}});
                        } else {
                          *ctx.out << "controls\n";
                          print_table_text(r.controls, *ctx.out);
                          *ctx.out << "cases\n";
                          print_table_text(r.cases, *ctx.out);
                        }
                        return kOk;
                      }
                      std::vector<std::vector<std::string>> generators;
                      if (!gens->empty()) {
                        generators = parse_generators(*gens, t.schema());
                      } else if (!model->empty()) {
                        std::ifstream f(*model);
                        generators = json::parse(f).at("generators").get<std::vector<std::vector<std::string>>>();
                      } else {
                        generators = cliques(read_graph_file(*graph));
                      }
                      const auto margin = marginalize(t, union_of(generators, t.schema()));
                      const LoglinearSpec spec(margin.schema(), generators);
                      const auto fit = fit_ipf(margin, spec, ctx.ipf());
                      if (ctx.json_out()) {
                        *ctx.out << dump(loglinear_json(spec, fit, true));
                      } else {
                        print_loglinear_text(spec, fit, *ctx.out);
                        if (*cells) print_table_text(fit.fitted, *ctx.out);
                      }
                      return fit.converged ? kOk : kDataError;
                    };
                  }});

  cmds.push_back({{"fit-logit", "fit a logit model given in Wilkinson notation",
                   {"logit.parse_formula", "logit.fit_logit", "logit.fitted_odds_ratios"}},
                  [](CLI::App& app) -> Handler {
                    auto formula = std::make_shared<std::string>();
                    auto where = std::make_shared<std::string>();
                    auto factor = std::make_shared<std::string>();
                    auto given = std::make_shared<std::string>();
                    auto fix = std::make_shared<std::string>();
                    app.add_option("--formula", *formula, "e.g. \"L : V*C*R + A*E\"")->required();
                    app.add_option("--where", *where, "restrict to an address first");
                    app.add_option("--odds-ratios", *factor, "report fitted odds-ratios of the response and this factor");
                    app.add_option("--given", *given, "strata for --odds-ratios");
                    app.add_option("--fix", *fix, "levels of remaining regressors for --odds-ratios, e.g. E=0");
                    return [=](Context& ctx) {
                      const auto f = parse_formula(*formula);
                      const auto t = ctx.table_where(*where);
                      bind(f, t.schema());
                      std::vector<std::string> keep{f.response};
                      for (const auto& v : f.variables()) keep.push_back(v);
                      const auto fit = fit_logit(marginalize(t, keep), f, ctx.logit());
                      json j = logit_json(fit);
                      std::vector<FittedOddsRatio> ors;
                      if (!factor->empty()) {
                        ors = fitted_odds_ratios(fit, *factor, split_list(*given),
                                                 fix->empty() ? CellAddress{} : parse_address(*fix));
                        json arr = json::array();
                        for (const auto& o : ors) arr.push_back({{"stratum", address_json(o.stratum)}, {"odds_ratio", o.odds_ratio}});
                        j["odds_ratios"] = std::move(arr);
                      }
                      if (ctx.json_out()) {
                        *ctx.out << dump(j);
                      } else {
                        print_logit_text(fit, *ctx.out);
                        for (const auto& o : ors) {
                          *ctx.out << fmt::format("odr({}{}|{}) {:.2f}\n", f.response, *factor,
                                                  format_address(o.stratum), o.odds_ratio);
                        }
                      }
                      return fit.converged ? kOk : kDataError;
                    };
                  }});

  cmds.push_back({{"smooth", "separate case and control models recombined into smoothed estimates",
                   {"smoothing.smooth", "smoothing.smoothed_odds_ratios"}},
                  [](CLI::App& app) -> Handler {
                    auto model = std::make_shared<std::string>();
                    auto cases = std::make_shared<std::string>();
                    auto controls = std::make_shared<std::string>();
                    auto response = std::make_shared<std::string>("L");
                    auto factor = std::make_shared<std::string>();
                    auto given = std::make_shared<std::string>();
                    auto cells = std::make_shared<bool>(false);
                    app.add_option("--model", *model, "case-control model JSON file")->check(CLI::ExistingFile);
                    app.add_option("--case", *cases, "case generators, e.g. VCR,CA,E");
                    app.add_option("--control", *controls, "control generators, e.g. VC,AE,ER");
                    app.add_option("--response", *response, "case indicator variable");
                    app.add_option("--odds-ratios", *factor, "smoothed odds-ratios of the response and this factor");
                    app.add_option("--given", *given, "strata for --odds-ratios");
                    app.add_flag("--cells", *cells, "include the fitted table in the text report");
                    return [=](Context& ctx) {
                      const auto t = ctx.table();
                      const auto sp = t.schema().position(*response);
                      (void)sp;
                      const std::string r[] = {*response};
                      const Schema regressors(t.schema().without(r));
                      std::optional<CaseControlModel> m;
                      if (!model->empty()) {
                        std::ifstream f(*model);
                        json spec = json::parse(f);
                        // Models may name only some regressors; sum the rest out.
                        std::vector<std::vector<std::string>> all;
                        for (const char* side : {"case", "control"}) {
                          for (auto& gset : spec.at(side).at("generators")) all.push_back(gset.get<std::vector<std::string>>());
                        }
                        const Schema used(union_of(all, regressors));
                        m = CaseControlModel::from_json(used, spec);
                      } else {
                        if (cases->empty() || controls->empty()) throw UsageError("give --model or both --case and --control");
                        const auto cg = parse_generators(*cases, regressors);
                        const auto kg = parse_generators(*controls, regressors);
                        auto all = cg;
                        all.insert(all.end(), kg.begin(), kg.end());
                        const Schema used(union_of(all, regressors));
                        m = CaseControlModel{LoglinearSpec(used, cg), LoglinearSpec(used, kg)};
                      }
                      auto keep = m->case_spec.schema().names();
                      keep.push_back(*response);
                      const auto margin = marginalize(t, keep);
                      const auto s = smooth(margin, *m, *response, ctx.ipf());
                      json j{{"response", *response},
                             {"case_model", loglinear_json(m->case_spec, s.case_fit, false)},
                             {"control_model", loglinear_json(m->control_spec, s.control_fit, false)},
                             {"case_total", s.case_total},
                             {"control_total", s.control_total},
                             {"fitted", table_json(s.fitted_joint)}};
                      std::vector<StratumMeasure> ors;
                      if (!factor->empty()) {
                        ors = smoothed_odds_ratios(s, *factor, split_list(*given));
                        j["odds_ratios"] = strata_json(ors);
                      }
                      if (ctx.json_out()) {
                        *ctx.out << dump(j);
                        return kOk;
                      }
                      *ctx.out << "cases\n";
                      print_loglinear_text(m->case_spec, s.case_fit, *ctx.out);
                      *ctx.out << "controls\n";
                      print_loglinear_text(m->control_spec, s.control_fit, *ctx.out);
                      if (*cells) print_table_text(s.fitted_joint, *ctx.out);
                      if (!ors.empty()) print_strata_text(ors, *ctx.out);
                      return kOk;
                    };
                  }});

  cmds.push_back({{"select", "forward selection of a concentration graph", {"loglinear.forward_select"}},
                  [](CLI::App& app) -> Handler {
                    auto where = std::make_shared<std::string>();
                    auto keep = std::make_shared<std::string>();
                    auto alpha = std::make_shared<double>(0.2);
                    app.add_option("--slice,--where", *where, "restrict to an address first, e.g. L=1");
                    app.add_option("--keep", *keep, "variables to select among (default: all remaining)");
                    app.add_option("--alpha", *alpha, "p-value threshold for adding an edge")
                        ->check(CLI::Range(0.0, 1.0));
                    return [=](Context& ctx) {
                      if (!(*alpha > 0.0 && *alpha < 1.0)) throw UsageError("--alpha must lie strictly between 0 and 1");
                      auto t = ctx.table_where(*where);
                      if (!keep->empty()) t = marginalize(t, split_list(*keep));
                      const auto r = forward_select(t, *alpha, ctx.ipf());
                      if (ctx.json_out()) {
                        json steps = json::array();
                        for (const auto& s : r.steps) {
                          steps.push_back({{"edge", s.edge}, {"chi2", s.chi2}, {"df", s.df}, {"p", s.p_value}, {"accepted", s.accepted}});
                        }
                        *ctx.out << dump({{"edges", r.graph.edge_names()},
                                          {"cliques", cliques(r.graph)},
                                          {"deviance", r.fit.deviance},
                                          {"df", r.fit.df},
                                          {"steps", std::move(steps)},
                                          {"graph", graph_to_json(r.graph)}});
                        return kOk;
                      }
                      auto& o = *ctx.out;
                      o << fmt::format("{:<8}{:>10}{:>5}{:>10}  {}\n", "edge", "chi2", "df", "p", "");
                      for (const auto& s : r.steps) {
                        o << fmt::format("{:<8}{:>10.3f}{:>5}{:>10.4f}  {}\n", s.edge, s.chi2, s.df, s.p_value,
                                         s.accepted ? "added" : "stop");
                      }
                      o << fmt::format("edges    {}\n", join(r.graph.edge_names(), " "));
                      std::vector<std::string> cl;
                      for (const auto& c : cliques(r.graph)) cl.push_back(join(c, ""));
                      o << fmt::format("cliques  {}\n", join(cl, " "));
                      o << fmt::format("fit      {:.2f} on {} df\n", r.fit.deviance, r.fit.df);
                      return kOk;
                    };
                  }});

  cmds.push_back({{"graph-check", "collision Vs, separation and marginalization for a graph file",
                   {"graphs.find_collision_vs", "graphs.is_markov_equivalent_to_concentration", "graphs.separates",
                    "graphs.implied_independencies", "graphs.marginalize_graph", "graphs.cliques", "graphs.concentration_equivalent"}},
                  [](CLI::App& app) -> Handler {
                    auto path = std::make_shared<std::string>();
                    auto sep = std::make_shared<std::vector<std::string>>();
                    auto implied = std::make_shared<int>(-1);
                    auto drop = std::make_shared<std::string>();
                    app.add_option("--graph", *path, "graph JSON file")->required()->check(CLI::ExistingFile);
                    app.add_option("--separates", *sep, "statement a|b|c to test, e.g. A|VR|CL");
                    app.add_option("--implied", *implied, "list pairwise statements with conditioning sets up to this size")
                        ->check(CLI::NonNegativeNumber);
                    app.add_option("--drop", *drop, "marginalize the graph over these nodes");
                    return [=](Context& ctx) {
                      auto g = read_graph_file(*path);
                      json j = graph_report_json(g);
                      const Schema nodes(g.nodes());
                      if (!g.full_lines_only() && j["markov_equivalent_to_concentration"].get<bool>()) {
                        g = concentration_equivalent(g);
                      }
                      if (!drop->empty()) {
                        const auto m = marginalize_graph(g, split_list(*drop));
                        j["marginal"] = graph_to_json(m);
                        j["marginal_edges"] = m.edge_names();
                        if (m.full_lines_only()) j["marginal_cliques"] = cliques(m);
                      }
                      if (g.full_lines_only()) j["cliques"] = cliques(g);
                      json sj = json::array();
                      for (const auto& text : *sep) {
                        const auto st = parse_statement(text, nodes);
                        sj.push_back({{"statement", to_string(st)}, {"separates", separates(g, st)}});
                      }
                      if (!sep->empty()) j["separation"] = std::move(sj);
                      if (*implied >= 0) {
                        json arr = json::array();
                        for (const auto& s : implied_independencies(g, static_cast<std::size_t>(*implied))) {
                          arr.push_back(to_string(s));
                        }
                        j["implied"] = std::move(arr);
                      }
                      if (ctx.json_out()) {
                        *ctx.out << dump(j);
                        return kOk;
                      }
                      auto& o = *ctx.out;
                      o << fmt::format("nodes        {}\n", join(g.nodes(), " "));
                      o << fmt::format("edges        {}\n", join(g.edge_names(), " "));
                      o << fmt::format("collision Vs {}\n", j["collision_vs"].empty() ? "none" : j["collision_vs"].dump());
                      o << fmt::format("concentration-graph equivalent  {}\n",
                                       j["markov_equivalent_to_concentration"].get<bool>() ? "yes" : "no");
                      auto clique_line = [](const json& list) {
                        std::vector<std::string> cl;
                        for (const auto& c : list) cl.push_back(join(c.get<std::vector<std::string>>(), ""));
                        return join(cl, " ");
                      };
                      if (j.contains("cliques")) o << fmt::format("cliques      {}\n", clique_line(j["cliques"]));
                      if (j.contains("marginal_edges")) {
                        o << fmt::format("marginal     {}\n", join(j["marginal_edges"].get<std::vector<std::string>>(), " "));
                        if (j.contains("marginal_cliques")) {
                          o << fmt::format("marginal cliques {}\n", clique_line(j["marginal_cliques"]));
                        }
                      }
                      if (j.contains("separation")) {
                        for (const auto& s : j["separation"]) {
                          o << fmt::format("{}  {}\n", s["statement"].get<std::string>(),
                                           s["separates"].get<bool>() ? "separated" : "not separated");
                        }
                      }
                      if (j.contains("implied")) {
                        for (const auto& s : j["implied"]) o << s.get<std::string>() << "\n";
                      }
                      return kOk;
                    };
                  }});

  cmds.push_back({{"collapse", "odds-ratio or relative-risk collapsibility check",
                   {"smoothing.check_or_collapsibility", "smoothing.check_rr_collapsibility"}},
                  [](CLI::App& app) -> Handler {
                    auto pair = std::make_shared<std::string>();
                    auto over = std::make_shared<std::string>();
                    auto given = std::make_shared<std::string>();
                    auto where = std::make_shared<std::string>();
                    auto mode = std::make_shared<std::string>("sampled");
                    auto alpha = std::make_shared<double>(0.05);
                    auto rr = std::make_shared<bool>(false);
                    app.add_option("--pair", *pair, "a,b")->required();
                    app.add_option("--over", *over, "variable(s) to collapse over")->required();
                    app.add_option("--given", *given, "relative risk only: strata held fixed");
                    app.add_option("--where", *where, "restrict to an address first, e.g. L=0");
                    app.add_option("--mode", *mode, "sampled or analytic")->check(CLI::IsMember({"sampled", "analytic"}));
                    app.add_option("--alpha", *alpha, "test level in sampled mode")->check(CLI::Range(0.0, 1.0));
                    app.add_flag("--rr", *rr, "check relative risks instead of odds-ratios");
                    return [=](Context& ctx) {
                      const auto p = split_list(*pair);
                      if (p.size() != 2) throw UsageError("--pair needs exactly two variables");
                      const auto md = *mode == "analytic" ? CollapsibilityMode::analytic() : CollapsibilityMode::sampled(*alpha);
                      const auto t = ctx.table_where(*where);
                      const auto o_vars = split_list(*over);
                      auto& o = *ctx.out;
                      if (!*rr) {
                        if (o_vars.size() != 1) throw UsageError("odds-ratio collapsibility takes one --over variable");
                        if (!given->empty()) throw UsageError("--given applies to --rr only");
                        const auto r = check_or_collapsibility(t, p[0], p[1], o_vars[0], md);
                        if (ctx.json_out()) {
                          o << dump({{"a", r.a}, {"b", r.b}, {"over", r.over},
                                     {"conditional_ors", {opt(r.conditional_ors[0]), opt(r.conditional_ors[1])}},
                                     {"marginal_or", opt(r.marginal_or)},
                                     {"a_indep_c_given_b", condition_json(r.a_indep_c_given_b)},
                                     {"b_indep_c_given_a", condition_json(r.b_indep_c_given_a)},
                                     {"which_condition", to_string(r.which_condition)},
                                     {"ors_equal", r.ors_equal},
                                     {"collapsible", r.collapsible}});
                          return kOk;
                        }
                        o << fmt::format("odr({}{}|{}=0) {}\n", r.a, r.b, r.over, fmt_opt(r.conditional_ors[0], 1));
                        o << fmt::format("odr({}{}|{}=1) {}\n", r.a, r.b, r.over, fmt_opt(r.conditional_ors[1], 1));
                        o << fmt::format("odr({}{})     {}\n", r.a, r.b, fmt_opt(r.marginal_or, 1));
                        for (const auto* c : {&r.a_indep_c_given_b, &r.b_indep_c_given_a}) {
                          o << fmt::format("{:<16} chi2 {:.2f} on {} df, p = {:.4f}  {}\n", to_string(c->statement),
                                           c->chi2, c->df, c->p_value, c->holds ? "holds" : "rejected");
                        }
                        o << fmt::format("condition  {}\ncollapsible {}\n", to_string(r.which_condition),
                                         r.collapsible ? "yes" : "no");
                        return kOk;
                      }
                      const auto r = check_rr_collapsibility(t, p[0], p[1], o_vars, split_list(*given), md);
                      if (ctx.json_out()) {
                        json strata = json::array();
                        for (const auto& s : r.strata) {
                          json c = json::array();
                          for (const auto& v : s.conditional_rrs) c.push_back(opt(v));
                          strata.push_back({{"stratum", address_json(s.stratum)}, {"conditional_rrs", std::move(c)},
                                            {"marginal_rr", opt(s.marginal_rr)}, {"mixture_residual", opt(s.mixture_residual)},
                                            {"rrs_equal", s.rrs_equal}});
                        }
                        o << dump({{"a", r.a}, {"b", r.b}, {"over", r.over}, {"given", r.given},
                                   {"a_indep_c_given_b", condition_json(r.a_indep_c_given_b)},
                                   {"b_indep_c", condition_json(r.b_indep_c)},
                                   {"collapsible", r.collapsible},
                                   {"differs_from_or", r.differs_from_or ? json(*r.differs_from_or) : json(nullptr)},
                                   {"strata", std::move(strata)}});
                        return kOk;
                      }
                      for (const auto* c : {&r.a_indep_c_given_b, &r.b_indep_c}) {
                        o << fmt::format("{:<20} chi2 {:.2f} on {} df, p = {:.4f}  {}\n", to_string(c->statement), c->chi2,
                                         c->df, c->p_value, c->holds ? "holds" : "rejected");
                      }
                      for (const auto& s : r.strata) {
                        std::vector<std::string> c;
                        for (const auto& v : s.conditional_rrs) c.push_back(fmt_opt(v, 2));
                        o << fmt::format("{:<16} rr by {}: {}  marginal {}  {}\n", format_address(s.stratum), join(r.over, ""),
                                         join(c, " "), fmt_opt(s.marginal_rr, 2), s.rrs_equal ? "equal" : "differ");
                      }
                      o << fmt::format("collapsible {}\n", r.collapsible ? "yes" : "no");
                      return kOk;
                    };
                  }});

  cmds.push_back({{"decompose", "split a joint independence test into a sequence of marginal tests",
                   {"loglinear.deviance_decomposition"}},
                  [](CLI::App& app) -> Handler {
                    auto steps = std::make_shared<std::vector<std::string>>();
                    auto where = std::make_shared<std::string>();
                    app.add_option("--step", *steps, "a|b|c[@margin], repeatable, e.g. E|A|VCR")->required();
                    app.add_option("--where", *where, "restrict to an address first, e.g. L=1");
                    return [=](Context& ctx) {
                      const auto t = ctx.table_where(*where);
                      std::vector<DecompositionStep> seq;
                      for (const auto& s : *steps) {
                        const auto at = s.find('@');
                        DecompositionStep st;
                        st.statement = parse_statement(s.substr(0, at), t.schema());
                        if (at != std::string::npos) {
                          st.margin = parse_varset(s.substr(at + 1), t.schema());
                        } else {
                          st.margin = union_of({st.statement.a, st.statement.b, st.statement.c}, t.schema());
                        }
                        seq.push_back(std::move(st));
                      }
                      const auto parts = deviance_decomposition(t, seq, ctx.ipf());
                      double total = 0.0;
                      int df = 0;
                      json arr = json::array();
                      for (const auto& p : parts) {
                        total += p.chi2;
                        df += p.df;
                        arr.push_back({{"statement", to_string(p.step.statement)}, {"margin", p.step.margin},
                                       {"chi2", p.chi2}, {"df", p.df}, {"p", p.p_value}});
                      }
                      if (ctx.json_out()) {
                        *ctx.out << dump({{"steps", std::move(arr)}, {"total_chi2", total}, {"total_df", df}});
                        return kOk;
                      }
                      for (const auto& p : parts) {
                        *ctx.out << fmt::format("{:<20}{:>10.2f}{:>5}{:>10.4f}\n", to_string(p.step.statement), p.chi2,
                                                p.df, p.p_value);
                      }
                      *ctx.out << fmt::format("{:<20}{:>10.2f}{:>5}\n", "total", total, df);
                      return kOk;
                    };
                  }});

  cmds.push_back({{"interaction", "three-factor interaction from four stratum odds-ratios",
                   {"logit.interaction_from_odds_ratios"}},
                  [](CLI::App& app) -> Handler {
                    auto pair = std::make_shared<std::string>("L,V");
                    auto modifiers = std::make_shared<std::string>("R,C");
                    app.add_option("--pair", *pair, "response,factor");
                    app.add_option("--modifiers", *modifiers, "two binary modifiers m,k");
                    return [=](Context& ctx) {
                      const auto p = split_list(*pair);
                      const auto m = split_list(*modifiers);
                      if (p.size() != 2 || m.size() != 2) throw UsageError("--pair and --modifiers take two variables each");
                      const auto t = ctx.table();
                      std::array<TwoByTwo, 4> strata;
                      for (int a : {0, 1}) {
                        for (int b : {0, 1}) strata[2 * a + b] = two_by_two(condition(t, {{m[0], a}, {m[1], b}}), p[0], p[1]);
                      }
                      const auto e = interaction_from_odds_ratios(strata);
                      if (ctx.json_out()) {
                        *ctx.out << dump({{"estimate", opt(e.estimate)}, {"se", opt(e.se)}, {"z", opt(e.z)}});
                      } else {
                        *ctx.out << fmt::format("estimate {}\nse       {}\nz        {}\n", fmt_opt(e.estimate, 2),
                                                fmt_opt(e.se, 2), fmt_opt(e.z, 1));
                      }
                      return kOk;
                    };
                  }});

  cmds.push_back({{"mixing", "association within the case and control slices and after mixing them",
                   {"smoothing.mixing_artifact_demo"}},
                  [](CLI::App& app) -> Handler {
                    auto pair = std::make_shared<std::string>();
                    auto given = std::make_shared<std::string>();
                    auto response = std::make_shared<std::string>("L");
                    auto gens = std::make_shared<std::string>();
                    app.add_option("--pair", *pair, "a,b")->required();
                    app.add_option("--given", *given, "strata, e.g. R,C");
                    app.add_option("--response", *response, "case indicator");
                    app.add_option("--generators", *gens, "use fitted counts of this log-linear model instead of the data");
                    return [=](Context& ctx) {
                      const auto p = split_list(*pair);
                      if (p.size() != 2) throw UsageError("--pair needs exactly two variables");
                      auto t = ctx.table();
                      if (!gens->empty()) {
                        const auto g = parse_generators(*gens, t.schema());
                        t = marginalize(t, union_of(g, t.schema()));
                        t = fit_ipf(t, LoglinearSpec(t.schema(), g), ctx.ipf()).fitted;
                      }
                      const auto rows = mixing_artifact_demo(t, p[0], p[1], split_list(*given), *response);
                      auto view_json = [](const AssociationView& v) {
                        return json{{"counts", two_by_two_json(v.counts)}, {"odds_ratio", opt(v.odds_ratio)},
                                    {"rate_b1", opt(v.rate_b1)}, {"rate_b0", opt(v.rate_b0)}};
                      };
                      if (ctx.json_out()) {
                        json arr = json::array();
                        for (const auto& r : rows) {
                          arr.push_back({{"stratum", address_json(r.stratum)}, {"controls", view_json(r.controls)},
                                         {"cases", view_json(r.cases)}, {"mixed", view_json(r.mixed)}});
                        }
                        *ctx.out << dump(arr);
                        return kOk;
                      }
                      auto& o = *ctx.out;
                      o << fmt::format("{:<16}{:>24}{:>24}{:>24}\n", "stratum", "controls odr (%b1/%b0)",
                                       "cases odr (%b1/%b0)", "mixed odr (%b1/%b0)");
                      auto cellf = [](const AssociationView& v) {
                        auto pct = [](const std::optional<double>& x) { return x ? fmt::format("{:.1f}", 100 * *x) : "-"; };
                        return fmt::format("{} ({}/{})", fmt_opt(v.odds_ratio, 2), pct(v.rate_b1), pct(v.rate_b0));
                      };
                      for (const auto& r : rows) {
                        o << fmt::format("{:<16}{:>24}{:>24}{:>24}\n", format_address(r.stratum), cellf(r.controls),
                                         cellf(r.cases), cellf(r.mixed));
                      }
                      return kOk;
                    };
                  }});

  cmds.push_back({{"reproduce", "recompute every pinned reference value", {}},
                  [](CLI::App& app) -> Handler {
                    (void)app;
                    return [](Context& ctx) {
                      const auto checks = reference::run_checks(ctx.table());
                      const bool all = std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
                      if (ctx.json_out()) {
                        json arr = json::array();
                        for (const auto& c : checks) {
                          arr.push_back({{"criterion", c.criterion}, {"name", c.name},
                                         {"observed", std::isfinite(c.observed) ? json(c.observed) : json(nullptr)},
                                         {"expected", c.expected}, {"tol", c.tol}, {"pass", c.pass}});
                        }
                        *ctx.out << dump({{"pass", all}, {"checks", std::move(arr)}});
                      } else {
                        std::size_t passed = 0;
                        for (const auto& c : checks) {
                          passed += c.pass;
                          *ctx.out << fmt::format("{} [{:>2}] {}: observed {:.4f}, expected {} (tol {})\n",
                                                  c.pass ? "PASS" : "FAIL", c.criterion, c.name, c.observed, c.expected, c.tol);
                        }
                        *ctx.out << fmt::format("{}/{} reference values reproduced\n", passed, checks.size());
                      }
                      return all ? kOk : kDataError;
                    };
                  }});

  return cmds;
}

void configure_backend(const std::string& name) {
  if (name == "auto") return;
  const auto b = name == "avx2" ? kernels::Backend::avx2 : kernels::Backend::scalar;
  if (!kernels::set_backend(b)) throw DataError(fmt::format("backend '{}' is not available on this machine", name));
}

}  // namespace

const std::vector<CommandInfo>& command_registry() {
  static const std::vector<CommandInfo> registry = [] {
    std::vector<CommandInfo> out;
    for (auto& c : make_commands()) out.push_back(c.info);
    return out;
  }();
  return registry;
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Case-control analysis of binary contingency tables", "ccgm"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  ctx.in = &in;
  ctx.out = &out;
  auto& g = ctx.global;
  app.add_option("--input", g.input, "cell-CSV table, '-' for standard input")->capture_default_str();
  app.add_option("--format", g.format, "json or text")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--tol", g.tol, "convergence tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-iter", g.max_iter, "iteration limit")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "seed for simulation-backed commands");
  app.add_option("--backend", g.backend, "kernel backend")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  auto commands = make_commands();
  std::vector<std::pair<CLI::App*, Handler>> handlers;
  for (auto& c : commands) {
    auto* sub = app.add_subcommand(c.info.name, c.info.summary);
    handlers.emplace_back(sub, c.setup(*sub));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    configure_backend(g.backend);
    for (auto& [sub, handler] : handlers) {
      if (sub->parsed()) return handler(ctx);
    }
    err << "usage error: no command given\n";
    return kUsageError;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const FormulaError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: invalid JSON: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace ccgm::cli
