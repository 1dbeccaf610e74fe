#include "ccgm/loglinear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ccgm/kernels.hpp"
#include "ccgm/special.hpp"

namespace ccgm {
namespace {

using Mask = std::uint32_t;

Mask mask_of(const Schema& s, const std::vector<std::string>& vars) {
  Mask m = 0;
  for (const auto& v : vars) m |= Mask{1} << s.position(v);
  return m;
}

std::vector<std::string> names_of(const Schema& s, Mask m) {
  std::vector<std::string> out;
  for (std::size_t p = 0; p < s.size(); ++p) {
    if (m & (Mask{1} << p)) out.push_back(s.name(p));
  }
  return out;
}

std::string join(const std::vector<std::string>& v, std::string_view sep = "") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

struct Margin {
  std::vector<std::uint32_t> index;
  std::vector<double> observed;
};

}  // namespace

LoglinearSpec::LoglinearSpec(Schema schema, std::vector<std::vector<std::string>> generators)
    : schema_(std::move(schema)) {
  if (generators.empty()) throw DataError("a log-linear model needs at least one generator");
  std::vector<Mask> masks;
  for (const auto& g : generators) {
    if (g.empty()) throw DataError("generators must be nonempty");
    const Mask m = mask_of(schema_, g);
    if (static_cast<std::size_t>(std::popcount(m)) != g.size()) {
      throw DataError(fmt::format("generator '{}' repeats a variable", join(g)));
    }
    masks.push_back(m);
  }
  // Keep first occurrences of maximal sets only.
  for (std::size_t i = 0; i < masks.size(); ++i) {
    bool redundant = false;
    for (std::size_t j = 0; j < masks.size() && !redundant; ++j) {
      if (i == j) continue;
      const bool inside = (masks[i] & ~masks[j]) == 0;
      redundant = inside && (masks[i] != masks[j] || j < i);
    }
    if (!redundant) generators_.push_back(names_of(schema_, masks[i]));
  }
}

LoglinearSpec LoglinearSpec::from_graph(Schema schema, const MixedGraph& g) {
  for (const auto& n : g.nodes()) schema.position(n);
  if (g.size() != schema.size()) throw DataError("graph nodes must match the table variables");
  return LoglinearSpec(std::move(schema), cliques(g));
}

LoglinearSpec LoglinearSpec::from_json(Schema schema, const nlohmann::ordered_json& j) {
  try {
    return LoglinearSpec(std::move(schema),
                         j.at("generators").get<std::vector<std::vector<std::string>>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("invalid model spec JSON: {}", e.what()));
  }
}

std::size_t LoglinearSpec::parameter_count() const {
  std::vector<bool> present(schema_.cell_count(), false);
  for (const auto& g : generators_) {
    const Mask m = mask_of(schema_, g);
    // Every submask of m, the empty one included.
    for (Mask s = m;; s = (s - 1) & m) {
      present[s] = true;
      if (s == 0) break;
    }
  }
  return static_cast<std::size_t>(std::count(present.begin(), present.end(), true));
}

std::string LoglinearSpec::to_string() const {
  std::vector<std::string> parts;
  for (const auto& g : generators_) parts.push_back(join(g));
  return join(parts, ",");
}

double deviance(const ContingencyTable& observed, const ContingencyTable& fitted) {
  double d = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double n = observed[i];
    if (n <= 0.0) continue;
    const double m = fitted[i];
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    d += n * std::log(n / m);
  }
  return 2.0 * d;
}

LoglinearFit fit_ipf(const ContingencyTable& observed, const LoglinearSpec& spec,
                     const IpfOptions& opts) {
  if (!(observed.schema() == spec.schema())) {
    throw DataError("model and table variables differ");
  }
  if (observed.zero_total()) throw DataError("cannot fit an empty table");
  if (!(opts.tol > 0.0) || opts.max_iter < 1) throw DataError("IPF needs tol > 0 and max_iter >= 1");

  const auto& schema = observed.schema();
  std::vector<Margin> margins;
  for (const auto& g : spec.generators()) {
    const Schema sub = schema.subset(g);
    Margin m{projection_index(schema, sub), std::vector<double>(sub.cell_count(), 0.0)};
    kernels::accumulate(observed.counts(), m.index, m.observed);
    margins.push_back(std::move(m));
  }

  std::vector<double> fitted(observed.size(), 1.0);
  std::vector<double> fm, ratio;
  LoglinearFit fit;
  for (int it = 1; it <= opts.max_iter; ++it) {
    for (const auto& m : margins) {
      fm.assign(m.observed.size(), 0.0);
      kernels::accumulate(fitted, m.index, fm);
      ratio.resize(fm.size());
      for (std::size_t j = 0; j < fm.size(); ++j) ratio[j] = fm[j] > 0.0 ? m.observed[j] / fm[j] : 0.0;
      kernels::scale_gathered(fitted, m.index, ratio);
    }
    double gap = 0.0;
    for (const auto& m : margins) {
      fm.assign(m.observed.size(), 0.0);
      kernels::accumulate(fitted, m.index, fm);
      gap = std::max(gap, kernels::max_abs_diff(fm, m.observed));
    }
    fit.iterations = it;
    fit.max_margin_gap = gap;
    if (gap < opts.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.fitted = ContingencyTable(schema, std::move(fitted));
  fit.deviance = std::max(0.0, deviance(observed, fit.fitted));
  fit.pearson_chi2 = kernels::pearson_sum(observed.counts(), fit.fitted.counts());
  fit.df = spec.df();
  fit.p_value = chi2_sf(fit.deviance, fit.df);
  return fit;
}

CaseControlCounts fit_closed_form_casecontrol(const ContingencyTable& observed,
                                              const CaseControlRoles& roles) {
  const auto& s = observed.schema();
  std::vector<std::string> expected{roles.response};
  expected.insert(expected.end(), roles.joint.begin(), roles.joint.end());
  expected.insert(expected.end(), roles.separate.begin(), roles.separate.end());
  if (s.subset(expected).size() != expected.size() || expected.size() != s.size()) {
    throw DataError(fmt::format("table must hold exactly the variables {}", join(expected, ",")));
  }
  const auto controls_obs = condition(observed, {{roles.response, 0}});
  const auto cases_obs = condition(observed, {{roles.response, 1}});
  if (controls_obs.zero_total()) throw DataError("no controls in the table");

  const auto& rs = controls_obs.schema();
  const auto joint = marginalize(controls_obs, roles.joint);
  const auto sep = marginalize(controls_obs, roles.separate);
  const auto pj = projection_index(rs, joint.schema());
  const auto ps = projection_index(rs, sep.schema());
  const double n0 = controls_obs.total();
  std::vector<double> est(rs.cell_count());
  for (std::size_t i = 0; i < est.size(); ++i) est[i] = joint[pj[i]] * sep[ps[i]] / n0;
  return {ContingencyTable(rs, std::move(est)),
          ContingencyTable(cases_obs.schema(), {cases_obs.counts().begin(), cases_obs.counts().end()},
                           ContingencyTable::ZeroTotal::allow)};
}

std::vector<DecompositionResult> deviance_decomposition(
    const ContingencyTable& observed, const std::vector<DecompositionStep>& sequence,
    const IpfOptions& opts) {
  if (sequence.empty()) throw DataError("malformed sequence: no steps");
  const auto& schema = observed.schema();
  std::vector<DecompositionResult> out;
  Mask previous = schema.size() >= 32 ? ~Mask{0} : (Mask{1} << schema.size()) - 1;
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    const auto& step = sequence[k];
    const auto& st = step.statement;
    if (st.a.empty() || st.b.empty()) {
      throw DataError(fmt::format("malformed sequence: step {} needs nonempty a and b", k + 1));
    }
    const Mask a = mask_of(schema, st.a), b = mask_of(schema, st.b), c = mask_of(schema, st.c);
    const Mask margin = mask_of(schema, step.margin);
    if ((a & b) || (a & c) || (b & c)) {
      throw DataError(fmt::format("malformed sequence: step {} sets overlap", k + 1));
    }
    if ((a | b | c) != margin) {
      throw DataError(fmt::format("malformed sequence: step {} statement does not span its margin",
                                  k + 1));
    }
    if ((margin & ~previous) != 0) {
      throw DataError(fmt::format("malformed sequence: step {} margin is not inside the previous one",
                                  k + 1));
    }
    previous = margin;

    const auto table = marginalize(observed, names_of(schema, margin));
    const LoglinearSpec spec(table.schema(), {names_of(schema, a | c), names_of(schema, b | c)});
    const auto fit = fit_ipf(table, spec, opts);
    out.push_back({step, fit.deviance, fit.df, fit.p_value});
  }
  return out;
}

SelectionResult forward_select(const ContingencyTable& observed, double alpha,
                               const IpfOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0, 1)");
  const auto& schema = observed.schema();
  const auto& names = schema.names();
  std::vector<std::pair<std::string, std::string>> edges;

  auto graph_with = [&](const std::vector<std::pair<std::string, std::string>>& e) {
    return MixedGraph::undirected(names, e);
  };
  auto fit_graph = [&](const MixedGraph& g) {
    return fit_ipf(observed, LoglinearSpec::from_graph(schema, g), opts);
  };

  SelectionResult result;
  result.graph = graph_with(edges);
  result.fit = fit_graph(result.graph);
  while (true) {
    std::optional<SelectionStep> best;
    std::optional<LoglinearFit> best_fit;
    std::pair<std::string, std::string> best_edge;
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        if (result.graph.adjacent(i, j)) continue;
        auto candidate = edges;
        candidate.emplace_back(names[i], names[j]);
        auto fit = fit_graph(graph_with(candidate));
        SelectionStep step;
        step.edge = names[i] + "-" + names[j];
        step.chi2 = std::max(0.0, result.fit.deviance - fit.deviance);
        step.df = result.fit.df - fit.df;
        step.p_value = chi2_sf(step.chi2, step.df);
        if (!best || step.p_value < best->p_value ||
            (step.p_value == best->p_value && step.edge < best->edge)) {
          best = step;
          best_fit = std::move(fit);
          best_edge = {names[i], names[j]};
        }
      }
    }
    if (!best) break;
    best->accepted = best->p_value < alpha;
    result.steps.push_back(*best);
    if (!best->accepted) break;
    edges.push_back(best_edge);
    result.graph = graph_with(edges);
    result.fit = std::move(*best_fit);
  }
  return result;
}

}  // namespace ccgm
