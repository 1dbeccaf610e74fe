#pragma once

// Mixed graphs with arrows, dashed lines and full lines.
//
// An arrow edge {a, b, arrow} points from parent b to offspring a. When
// blocks are given they are ordered left to right, responses first, and an
// arrow's parent must sit in a strictly later block than its offspring.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ccgm {

enum class EdgeKind { arrow, dashed, full };
const char* to_string(EdgeKind k);
EdgeKind parse_edge_kind(const std::string& s);

struct Edge {
  std::string a;
  std::string b;
  EdgeKind kind = EdgeKind::full;
};

/// Disjoint variable sets; reads "a is independent of b given c".
struct IndependenceStatement {
  std::vector<std::string> a;
  std::vector<std::string> b;
  std::vector<std::string> c;
};

std::string to_string(const IndependenceStatement& s);

class MixedGraph {
 public:
  static constexpr std::size_t kMaxNodes = 64;

  MixedGraph() = default;
  MixedGraph(std::vector<std::string> nodes, std::vector<Edge> edges,
             std::vector<std::vector<std::string>> blocks = {});

  /// Full-line graph from node names and unordered pairs.
  static MixedGraph undirected(std::vector<std::string> nodes,
                               const std::vector<std::pair<std::string, std::string>>& pairs);

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::vector<std::string>>& blocks() const { return blocks_; }

  std::size_t size() const { return nodes_.size(); }
  std::size_t index(const std::string& name) const;
  std::optional<EdgeKind> edge_kind(std::size_t i, std::size_t j) const;
  bool adjacent(std::size_t i, std::size_t j) const { return (adj_[i] >> j) & 1U; }
  /// Neighbours of node i, any edge kind.
  std::uint64_t neighbours(std::size_t i) const { return adj_[i]; }
  bool full_lines_only() const;

  /// Unordered node pairs as "X-Y" strings, node order within and across pairs.
  std::vector<std::string> edge_names() const;

 private:
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::string>> blocks_;
  std::vector<std::uint64_t> adj_;
};

MixedGraph graph_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json graph_to_json(const MixedGraph& g);
MixedGraph read_graph_file(const std::string& path);

/// Three-node, two-edge configuration with inner node `o`.
struct CollisionV {
  std::string i;
  std::string o;
  std::string j;
};

/// All induced subgraphs i→o←j, i--o←j and i--o--j.
std::vector<CollisionV> find_collision_vs(const MixedGraph& g);
/// Same skeleton can be read as a concentration graph iff no collision V.
bool is_markov_equivalent_to_concentration(const MixedGraph& g);
/// The full-line graph on the same skeleton; throws DataError when `g` has a
/// collision V and so reads differently as a concentration graph.
MixedGraph concentration_equivalent(const MixedGraph& g);

/// Separation in a full-line graph: every path from a to b meets c.
bool separates(const MixedGraph& g, const IndependenceStatement& s);

/// Pairwise statements i ⫫ j | c with |c| <= max_size implied by separation.
/// Ordered by (i, j) in node order, then |c|, then c lexicographically.
std::vector<IndependenceStatement> implied_independencies(const MixedGraph& g,
                                                          std::size_t max_size);
inline constexpr std::size_t kMaxEnumerationNodes = 12;

/// Full-line graph on the kept nodes with an edge wherever the original had
/// one or a path ran entirely through dropped nodes.
MixedGraph marginalize_graph(const MixedGraph& g, const std::vector<std::string>& drop);

/// Maximal cliques of a full-line graph, each in node order, sorted.
std::vector<std::vector<std::string>> cliques(const MixedGraph& g);

}  // namespace ccgm
