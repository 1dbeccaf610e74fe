#include <doctest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "ccgm/error.hpp"
#include <nlohmann/json.hpp>

#include "ccgm/graphs.hpp"
#include "support.hpp"

using namespace ccgm;

namespace {

MixedGraph fixture(const std::string& name) { return read_graph_file(testing::data_path("graphs/" + name + ".json")); }

/// Graph on n nodes A, B, ... whose edges are the set bits of `code` over
/// the pairs (i<j) in lexicographic order.
MixedGraph graph_from_code(std::size_t n, unsigned code) {
  std::vector<std::pair<std::string, std::string>> pairs;
  const auto nm = testing::names(n);
  unsigned bitpos = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++bitpos)
      if ((code >> bitpos) & 1U) pairs.emplace_back(nm[i], nm[j]);
  return MixedGraph::undirected(nm, pairs);
}

/// Oracle: true when every simple path from a node of a to a node of b
/// passes through c, found by enumerating paths depth-first.
bool separated_by_paths(const MixedGraph& g, unsigned a, unsigned b, unsigned c) {
  const std::size_t n = g.size();
  bool found = false;
  std::function<void(std::size_t, unsigned)> walk = [&](std::size_t v, unsigned visited) {
    if (found) return;
    for (std::size_t w = 0; w < n; ++w) {
      if (!g.adjacent(v, w) || ((visited >> w) & 1U)) continue;
      if ((b >> w) & 1U) {
        found = true;
        return;
      }
      if ((c >> w) & 1U) continue;
      walk(w, visited | (1U << w));
    }
  };
  for (std::size_t s = 0; s < n && !found; ++s) {
    if ((a >> s) & 1U) walk(s, 1U << s);
  }
  return !found;
}

std::vector<std::string> members(const MixedGraph& g, unsigned m) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if ((m >> i) & 1U) out.push_back(g.nodes()[i]);
  return out;
}

bool contains(const std::vector<IndependenceStatement>& list, const std::string& text) {
  return std::any_of(list.begin(), list.end(), [&](const auto& s) { return to_string(s) == text; });
}

}  // namespace

TEST_CASE("separation agrees with path enumeration on every graph up to five nodes") {
  long long compared = 0;
  for (std::size_t n = 2; n <= 5; ++n) {
    const unsigned pairs = static_cast<unsigned>(n * (n - 1) / 2);
    for (unsigned code = 0; code < (1U << pairs); ++code) {
      const auto g = graph_from_code(n, code);
      // each node goes to a, b, c or nowhere
      std::size_t combos = 1;
      for (std::size_t i = 0; i < n; ++i) combos *= 4;
      for (std::size_t k = 0; k < combos; ++k) {
        unsigned a = 0, b = 0, c = 0;
        std::size_t r = k;
        for (std::size_t i = 0; i < n; ++i, r /= 4) {
          if (r % 4 == 1) a |= 1U << i;
          if (r % 4 == 2) b |= 1U << i;
          if (r % 4 == 3) c |= 1U << i;
        }
        if (!a || !b) continue;
        const IndependenceStatement st{members(g, a), members(g, b), members(g, c)};
        const bool expected = separated_by_paths(g, a, b, c);
        if (separates(g, st) != expected) {
          FAIL_CHECK("mismatch on " << to_string(st) << " edges " << code);
        }
        ++compared;
      }
    }
  }
  CHECK(compared == 590868);  // sum of 2^C(n,2) (4^n - 2*3^n + 2^n)
}

TEST_CASE("implied independencies match brute force on every graph up to five nodes") {
  for (std::size_t n = 2; n <= 5; ++n) {
    const unsigned pairs = static_cast<unsigned>(n * (n - 1) / 2);
    for (unsigned code = 0; code < (1U << pairs); ++code) {
      const auto g = graph_from_code(n, code);
      for (std::size_t max_size : {0UL, 1UL, 2UL, 5UL}) {
        std::set<std::string> expected;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j)
            for (unsigned c = 0; c < (1U << n); ++c) {
              if ((c >> i) & 1U || (c >> j) & 1U) continue;
              if (static_cast<std::size_t>(__builtin_popcount(c)) > max_size) continue;
              if (separated_by_paths(g, 1U << i, 1U << j, c)) {
                expected.insert(to_string(IndependenceStatement{members(g, 1U << i), members(g, 1U << j), members(g, c)}));
              }
            }
        std::set<std::string> got;
        for (const auto& s : implied_independencies(g, max_size)) got.insert(to_string(s));
        CHECK(got == expected);
      }
    }
  }
}

TEST_CASE("separation is symmetric and inherited by subsets") {
  const auto g = fixture("fig3");
  const IndependenceStatement s{{"A"}, {"V", "R"}, {"C", "L"}};
  CHECK(separates(g, s));
  CHECK(separates(g, {{"V", "R"}, {"A"}, {"C", "L"}}));
  CHECK(separates(g, {{"A"}, {"V"}, {"C", "L"}}));
  CHECK(separates(g, {{"A"}, {"R"}, {"C", "L"}}));
  CHECK_FALSE(separates(g, {{"A"}, {"V", "R"}, {"C"}}));
}

TEST_CASE("fixture separation statements") {
  CHECK(separates(fixture("fig2a"), {{"V", "C"}, {"R"}, {}}));
  CHECK_FALSE(separates(fixture("fig2b"), {{"V"}, {"R"}, {}}));
  CHECK_FALSE(separates(fixture("fig2b"), {{"V"}, {"R"}, {"C"}}));
}

TEST_CASE("implied independencies on fixtures") {
  const auto a = implied_independencies(fixture("fig2a"), 1);
  CHECK(contains(a, to_string(IndependenceStatement{{"V"}, {"R"}, {"C"}})));
  CHECK(contains(a, to_string(IndependenceStatement{{"V"}, {"R"}, {}})));
  const auto three = implied_independencies(fixture("fig3"), 3);
  CHECK(contains(three, to_string(IndependenceStatement{{"V"}, {"A"}, {"R", "C", "L"}})));
  CHECK(implied_independencies(fixture("fig2b"), 2).empty());
}

TEST_CASE("statement ordering is deterministic") {
  const auto list = implied_independencies(fixture("fig4a"), 2);
  const auto again = implied_independencies(fixture("fig4a"), 2);
  REQUIRE(list.size() == again.size());
  for (std::size_t i = 0; i < list.size(); ++i) CHECK(to_string(list[i]) == to_string(again[i]));
}

TEST_CASE("collision Vs") {
  const MixedGraph arrows({"I", "O", "J"}, {{"O", "I", EdgeKind::arrow}, {"O", "J", EdgeKind::arrow}},
                          {{"O"}, {"I", "J"}});
  const auto vs = find_collision_vs(arrows);
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].o == "O");
  CHECK_FALSE(is_markov_equivalent_to_concentration(arrows));
  CHECK_THROWS_AS(concentration_equivalent(arrows), DataError);

  const MixedGraph dashed_arrow({"I", "O", "J"}, {{"I", "O", EdgeKind::dashed}, {"O", "J", EdgeKind::arrow}},
                                {{"I", "O"}, {"J"}});
  CHECK(find_collision_vs(dashed_arrow).size() == 1);

  const MixedGraph dashed({"I", "O", "J"}, {{"I", "O", EdgeKind::dashed}, {"O", "J", EdgeKind::dashed}});
  CHECK(find_collision_vs(dashed).size() == 1);

  // a V whose outer nodes are adjacent is not a collision V
  const MixedGraph closed({"I", "O", "J"}, {{"I", "O", EdgeKind::dashed}, {"O", "J", EdgeKind::dashed},
                                            {"I", "J", EdgeKind::dashed}});
  CHECK(find_collision_vs(closed).empty());

  // arrow out of the inner node is a transition, not a collision
  const MixedGraph chain({"I", "O", "J"}, {{"O", "I", EdgeKind::arrow}, {"J", "O", EdgeKind::arrow}},
                         {{"J"}, {"O"}, {"I"}});
  CHECK(find_collision_vs(chain).empty());
}

TEST_CASE("full-line graphs never have collision Vs") {
  for (unsigned code = 0; code < (1U << 10); ++code) {
    const auto g = graph_from_code(5, code);
    CHECK(find_collision_vs(g).empty());
    CHECK(is_markov_equivalent_to_concentration(g));
  }
}

TEST_CASE("regression graph of the controls is equivalent to a concentration graph") {
  const auto g = fixture("fig4b");
  CHECK(find_collision_vs(g).empty());
  CHECK(is_markov_equivalent_to_concentration(g));
  const auto u = concentration_equivalent(g);
  CHECK(u.full_lines_only());
  CHECK(cliques(u) == std::vector<std::vector<std::string>>{{"V", "C"}, {"R", "E"}, {"A", "E"}});
  CHECK(separates(u, {{"V"}, {"A", "E"}, {"C", "R"}}));
}

TEST_CASE("cliques") {
  CHECK(cliques(fixture("fig4a")) == std::vector<std::vector<std::string>>{{"V", "C", "R"}, {"C", "A"}, {"E"}});
  CHECK(cliques(fixture("fig2b")) == std::vector<std::vector<std::string>>{{"V", "C", "R"}});
  CHECK(cliques(graph_from_code(4, 0)).size() == 4);
  CHECK_THROWS_AS(cliques(fixture("fig4b")), DataError);
}

TEST_CASE("cliques are maximal and cover every edge on random graphs") {
  for (unsigned code = 0; code < (1U << 10); code += 7) {
    const auto g = graph_from_code(5, code);
    const auto cl = cliques(g);
    for (const auto& c : cl) {
      for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) CHECK(g.adjacent(g.index(c[i]), g.index(c[j])));
      // maximal: no outside node adjacent to every member
      for (std::size_t v = 0; v < g.size(); ++v) {
        if (std::find(c.begin(), c.end(), g.nodes()[v]) != c.end()) continue;
        const bool joins_all = std::all_of(c.begin(), c.end(), [&](const auto& m) { return g.adjacent(v, g.index(m)); });
        CHECK_FALSE(joins_all);
      }
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        if (!g.adjacent(i, j)) continue;
        const bool covered = std::any_of(cl.begin(), cl.end(), [&](const auto& c) {
          return std::find(c.begin(), c.end(), g.nodes()[i]) != c.end() &&
                 std::find(c.begin(), c.end(), g.nodes()[j]) != c.end();
        });
        CHECK(covered);
      }
  }
}

TEST_CASE("marginalizing the selected graphs over A and E") {
  const auto a = marginalize_graph(fixture("fig4a"), {"E", "A"});
  CHECK(a.edge_names() == std::vector<std::string>{"V-C", "V-R", "C-R"});
  const auto b = marginalize_graph(concentration_equivalent(fixture("fig4b")), {"E", "A"});
  CHECK(b.edge_names() == std::vector<std::string>{"V-C"});
  CHECK(b.nodes() == std::vector<std::string>{"V", "C", "R"});
  const auto same = marginalize_graph(fixture("fig3"), {});
  CHECK(same.edge_names() == fixture("fig3").edge_names());
}

TEST_CASE("marginalize_graph adds an edge for a path through dropped nodes") {
  const auto path = graph_from_code(3, 0b101);  // A-B, B-C
  const auto m = marginalize_graph(path, {"B"});
  CHECK(m.edge_names() == std::vector<std::string>{"A-C"});
}

TEST_CASE("successive disjoint drops equal one combined drop") {
  for (unsigned code = 0; code < (1U << 10); code += 3) {
    const auto g = graph_from_code(5, code);
    const auto stepwise = marginalize_graph(marginalize_graph(g, {"B"}), {"D"});
    const auto joint = marginalize_graph(g, {"B", "D"});
    CHECK(stepwise.edge_names() == joint.edge_names());
  }
}

TEST_CASE("graph JSON round-trips and rejects malformed input") {
  const auto g = fixture("fig4b");
  const auto back = graph_from_json(graph_to_json(g));
  CHECK(back.nodes() == g.nodes());
  CHECK(back.edge_names() == g.edge_names());
  CHECK(back.blocks() == g.blocks());
  CHECK_THROWS_AS(graph_from_json(nlohmann::ordered_json::parse(R"({"nodes":["A","A"],"edges":[]})")), DataError);
  CHECK_THROWS_AS(graph_from_json(nlohmann::ordered_json::parse(R"({"nodes":["A"],"edges":[{"a":"A","b":"A","kind":"full"}]})")),
                  DataError);
  CHECK_THROWS_AS(
      graph_from_json(nlohmann::ordered_json::parse(R"({"nodes":["A","B"],"edges":[{"a":"A","b":"B","kind":"wavy"}]})")),
      DataError);
  CHECK_THROWS_AS(graph_from_json(nlohmann::ordered_json::parse(R"({"edges":[]})")), DataError);
  CHECK_THROWS_AS(separates(g, {{"V"}, {"V"}, {}}), DataError);
  CHECK_THROWS_AS(separates(g, {{"V"}, {"A"}, {}}), DataError);
}
