#include "ccgm/graphs.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ccgm/error.hpp"

namespace ccgm {
namespace {

using Mask = std::uint64_t;

Mask bit(std::size_t i) { return Mask{1} << i; }

std::vector<std::size_t> members(Mask m) {
  std::vector<std::size_t> out;
  while (m) {
    out.push_back(static_cast<std::size_t>(std::countr_zero(m)));
    m &= m - 1;
  }
  return out;
}

Mask mask_of(const MixedGraph& g, const std::vector<std::string>& names) {
  Mask m = 0;
  for (const auto& n : names) {
    const Mask b = bit(g.index(n));
    if (m & b) throw DataError(fmt::format("node '{}' listed twice", n));
    m |= b;
  }
  return m;
}

// Nodes reachable from `from` moving only through `allowed`, full lines only.
Mask reach(const MixedGraph& g, Mask from, Mask allowed) {
  Mask seen = from;
  Mask frontier = from;
  while (frontier) {
    Mask next = 0;
    for (auto v : members(frontier)) next |= g.neighbours(v);
    next &= allowed & ~seen;
    seen |= next;
    frontier = next;
  }
  return seen;
}

void require_full_lines(const MixedGraph& g, const char* op) {
  if (!g.full_lines_only()) {
    throw DataError(fmt::format("{} needs a graph with full-line edges only", op));
  }
}

void bron_kerbosch(const MixedGraph& g, Mask r, Mask p, Mask x, std::vector<Mask>& out) {
  if (!p && !x) {
    out.push_back(r);
    return;
  }
  // Pivot on the node with most neighbours in p.
  std::size_t pivot = 0;
  int best = -1;
  for (auto u : members(p | x)) {
    const int c = std::popcount(p & g.neighbours(u));
    if (c > best) {
      best = c;
      pivot = u;
    }
  }
  for (auto v : members(p & ~g.neighbours(pivot))) {
    const Mask nv = g.neighbours(v);
    bron_kerbosch(g, r | bit(v), p & nv, x & nv, out);
    p &= ~bit(v);
    x |= bit(v);
  }
}

std::vector<std::string> names_of(const MixedGraph& g, Mask m) {
  std::vector<std::string> out;
  for (auto i : members(m)) out.push_back(g.nodes()[i]);
  return out;
}

bool index_less(Mask a, Mask b) {
  const auto ma = members(a), mb = members(b);
  return std::lexicographical_compare(ma.begin(), ma.end(), mb.begin(), mb.end());
}

}  // namespace

const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::arrow: return "arrow";
    case EdgeKind::dashed: return "dashed";
    case EdgeKind::full: return "full";
  }
  return "full";
}

EdgeKind parse_edge_kind(const std::string& s) {
  if (s == "arrow") return EdgeKind::arrow;
  if (s == "dashed") return EdgeKind::dashed;
  if (s == "full") return EdgeKind::full;
  throw DataError(fmt::format("unknown edge kind '{}'", s));
}

std::string to_string(const IndependenceStatement& s) {
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& x : v) out += x;
    return out;
  };
  std::string out = join(s.a) + " _||_ " + join(s.b);
  if (!s.c.empty()) out += " | " + join(s.c);
  return out;
}

MixedGraph::MixedGraph(std::vector<std::string> nodes, std::vector<Edge> edges,
                       std::vector<std::vector<std::string>> blocks)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), blocks_(std::move(blocks)) {
  if (nodes_.size() > kMaxNodes) {
    throw DataError(fmt::format("graphs are limited to {} nodes", kMaxNodes));
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].empty()) throw DataError("node names must be nonempty");
    for (std::size_t j = 0; j < i; ++j) {
      if (nodes_[i] == nodes_[j]) throw DataError(fmt::format("duplicate node '{}'", nodes_[i]));
    }
  }
  adj_.assign(nodes_.size(), 0);
  for (const auto& e : edges_) {
    const auto i = index(e.a), j = index(e.b);
    if (i == j) throw DataError(fmt::format("self-loop on '{}'", e.a));
    if (adjacent(i, j)) {
      throw DataError(fmt::format("more than one edge between '{}' and '{}'", e.a, e.b));
    }
    adj_[i] |= bit(j);
    adj_[j] |= bit(i);
  }
  if (!blocks_.empty()) {
    std::vector<int> block_of(nodes_.size(), -1);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      for (const auto& n : blocks_[b]) {
        auto& slot = block_of[index(n)];
        if (slot != -1) throw DataError(fmt::format("node '{}' appears in two blocks", n));
        slot = static_cast<int>(b);
      }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (block_of[i] == -1) throw DataError(fmt::format("node '{}' is in no block", nodes_[i]));
    }
    for (const auto& e : edges_) {
      if (e.kind == EdgeKind::arrow && block_of[index(e.b)] <= block_of[index(e.a)]) {
        throw DataError(fmt::format("arrow {} -> {} does not point from a later block", e.b, e.a));
      }
    }
  }
}

MixedGraph MixedGraph::undirected(std::vector<std::string> nodes,
                                  const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<Edge> edges;
  for (const auto& [a, b] : pairs) edges.push_back({a, b, EdgeKind::full});
  return MixedGraph(std::move(nodes), std::move(edges));
}

std::size_t MixedGraph::index(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i] == name) return i;
  }
  throw DataError(fmt::format("unknown node '{}'", name));
}

std::optional<EdgeKind> MixedGraph::edge_kind(std::size_t i, std::size_t j) const {
  if (!adjacent(i, j)) return std::nullopt;
  for (const auto& e : edges_) {
    const auto a = index(e.a), b = index(e.b);
    if ((a == i && b == j) || (a == j && b == i)) return e.kind;
  }
  return std::nullopt;
}

bool MixedGraph::full_lines_only() const {
  return std::all_of(edges_.begin(), edges_.end(),
                     [](const Edge& e) { return e.kind == EdgeKind::full; });
}

std::vector<std::string> MixedGraph::edge_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes_.size(); ++j) {
      if (adjacent(i, j)) out.push_back(nodes_[i] + "-" + nodes_[j]);
    }
  }
  return out;
}

MixedGraph graph_from_json(const nlohmann::ordered_json& j) {
  try {
    auto nodes = j.at("nodes").get<std::vector<std::string>>();
    std::vector<Edge> edges;
    if (j.contains("edges")) {
      for (const auto& e : j.at("edges")) {
        edges.push_back({e.at("a").get<std::string>(), e.at("b").get<std::string>(),
                         parse_edge_kind(e.value("kind", std::string("full")))});
      }
    }
    std::vector<std::vector<std::string>> blocks;
    if (j.contains("blocks")) blocks = j.at("blocks").get<std::vector<std::vector<std::string>>>();
    return MixedGraph(std::move(nodes), std::move(edges), std::move(blocks));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("invalid graph JSON: {}", e.what()));
  }
}

nlohmann::ordered_json graph_to_json(const MixedGraph& g) {
  nlohmann::ordered_json j;
  j["nodes"] = g.nodes();
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges()) {
    j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"kind", to_string(e.kind)}});
  }
  if (!g.blocks().empty()) j["blocks"] = g.blocks();
  return j;
}

MixedGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  try {
    return graph_from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("{}: {}", path, e.what()));
  }
}

std::vector<CollisionV> find_collision_vs(const MixedGraph& g) {
  // An edge end at o "collides" when it is dashed or an arrowhead into o.
  auto collides_at = [&](std::size_t o, std::size_t other) {
    for (const auto& e : g.edges()) {
      const auto a = g.index(e.a), b = g.index(e.b);
      if (!((a == o && b == other) || (a == other && b == o))) continue;
      if (e.kind == EdgeKind::dashed) return true;
      return e.kind == EdgeKind::arrow && a == o;
    }
    return false;
  };
  std::vector<CollisionV> out;
  for (std::size_t o = 0; o < g.size(); ++o) {
    const auto nb = members(g.neighbours(o));
    for (std::size_t x = 0; x < nb.size(); ++x) {
      for (std::size_t y = x + 1; y < nb.size(); ++y) {
        const auto i = nb[x], j = nb[y];
        if (g.adjacent(i, j)) continue;
        if (collides_at(o, i) && collides_at(o, j)) {
          out.push_back({g.nodes()[i], g.nodes()[o], g.nodes()[j]});
        }
      }
    }
  }
  return out;
}

bool is_markov_equivalent_to_concentration(const MixedGraph& g) {
  return find_collision_vs(g).empty();
}

bool separates(const MixedGraph& g, const IndependenceStatement& s) {
  require_full_lines(g, "separation");
  if (s.a.empty() || s.b.empty()) throw DataError("independence statement needs nonempty a and b");
  const Mask a = mask_of(g, s.a), b = mask_of(g, s.b), c = mask_of(g, s.c);
  if ((a & b) || (a & c) || (b & c)) throw DataError("independence statement sets must be disjoint");
  const Mask all = g.size() == 64 ? ~Mask{0} : bit(g.size()) - 1;
  return (reach(g, a, all & ~c) & b) == 0;
}

std::vector<IndependenceStatement> implied_independencies(const MixedGraph& g,
                                                          std::size_t max_size) {
  require_full_lines(g, "implied_independencies");
  if (g.size() > kMaxEnumerationNodes) {
    throw DataError(fmt::format("enumeration is capped at {} nodes", kMaxEnumerationNodes));
  }
  const std::size_t n = g.size();
  std::vector<IndependenceStatement> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Mask rest = (bit(n) - 1) & ~bit(i) & ~bit(j);
      std::vector<Mask> subsets;
      for (Mask c = rest;; c = (c - 1) & rest) {
        if (static_cast<std::size_t>(std::popcount(c)) <= max_size) subsets.push_back(c);
        if (c == 0) break;
      }
      std::sort(subsets.begin(), subsets.end(), [](Mask x, Mask y) {
        const int px = std::popcount(x), py = std::popcount(y);
        return px != py ? px < py : index_less(x, y);
      });
      for (Mask c : subsets) {
        if ((reach(g, bit(i), (bit(n) - 1) & ~c) & bit(j)) == 0) {
          out.push_back({{g.nodes()[i]}, {g.nodes()[j]}, names_of(g, c)});
        }
      }
    }
  }
  return out;
}

MixedGraph marginalize_graph(const MixedGraph& g, const std::vector<std::string>& drop) {
  require_full_lines(g, "marginalize_graph");
  const Mask dropped = mask_of(g, drop);
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(dropped & bit(i))) kept.push_back(g.nodes()[i]);
  }
  if (kept.empty()) throw DataError("cannot drop every node");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (dropped & bit(i)) continue;
    // Kept nodes adjacent to i directly or through a dropped-only path.
    Mask via = reach(g, bit(i), dropped);
    Mask linked = g.neighbours(i);
    for (auto d : members(via & dropped)) linked |= g.neighbours(d);
    linked &= ~dropped;
    for (auto j : members(linked)) {
      if (j > i) pairs.emplace_back(g.nodes()[i], g.nodes()[j]);
    }
  }
  return MixedGraph::undirected(std::move(kept), pairs);
}

MixedGraph concentration_equivalent(const MixedGraph& g) {
  if (!is_markov_equivalent_to_concentration(g)) {
    throw DataError("graph has a collision V and is not equivalent to a concentration graph");
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& e : g.edges()) pairs.emplace_back(e.a, e.b);
  return MixedGraph::undirected(g.nodes(), pairs);
}

std::vector<std::vector<std::string>> cliques(const MixedGraph& g) {
  require_full_lines(g, "cliques");
  std::vector<Mask> found;
  const Mask all = g.size() == 64 ? ~Mask{0} : bit(g.size()) - 1;
  if (g.size() > 0) bron_kerbosch(g, 0, all, 0, found);
  std::sort(found.begin(), found.end(), index_less);
  std::vector<std::vector<std::string>> out;
  for (Mask m : found) out.push_back(names_of(g, m));
  return out;
}

}  // namespace ccgm
