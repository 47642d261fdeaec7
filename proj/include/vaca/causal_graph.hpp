#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vaca {

using NodeIndex = std::size_t;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VarKind { Continuous, Binary, Categorical };

/// Type of a single data column belonging to a causal node.
struct ColumnKind {
  VarKind kind = VarKind::Continuous;
  int cardinality = 0;  // number of categories; 2 for binary, 0 for continuous

  static ColumnKind continuous() { return {VarKind::Continuous, 0}; }
  static ColumnKind binary() { return {VarKind::Binary, 2}; }
  static ColumnKind categorical(int k) { return {VarKind::Categorical, k}; }

  bool is_discrete() const { return kind != VarKind::Continuous; }
  /// Width of the column once one-hot encoded (categoricals expand).
  int encoded_width() const { return kind == VarKind::Categorical ? cardinality : 1; }
  /// Number of likelihood parameters the decoder head emits for this column.
  int param_width() const { return kind == VarKind::Categorical ? cardinality : 1; }

  bool operator==(const ColumnKind&) const = default;
};

std::string to_string(const ColumnKind& kind);
ColumnKind parse_column_kind(const std::string& token);

struct NodeInfo {
  std::string name;
  std::vector<ColumnKind> columns;

  std::size_t dim() const { return columns.size(); }
};

using Edge = std::pair<NodeIndex, NodeIndex>;  // (parent, child)

/// Causal adjacency with self loops: entry (i, j) is set
/// when j == i or j is a parent of i in the (possibly intervened) graph.
class VacaAdjacency {
 public:
  VacaAdjacency() = default;
  VacaAdjacency(std::size_t d, std::vector<std::uint8_t> entries, std::set<NodeIndex> intervened);

  std::size_t size() const { return d_; }
  bool operator()(NodeIndex i, NodeIndex j) const { return entries_[i * d_ + j] != 0; }
  const std::set<NodeIndex>& intervened() const { return intervened_; }
  /// Column indices j with A[i][j] = 1, ascending (includes i).
  std::vector<NodeIndex> row(NodeIndex i) const;
  std::size_t nonzeros() const;

 private:
  std::size_t d_ = 0;
  std::vector<std::uint8_t> entries_;
  std::set<NodeIndex> intervened_;
};

/// Topological order with ties broken by ascending node index.
/// Throws GraphError when the edge set contains a directed cycle.
std::vector<NodeIndex> topological_order(std::size_t node_count, const std::vector<Edge>& edges);

/// Immutable directed acyclic graph over causal nodes.
class CausalGraph {
 public:
  CausalGraph() = default;
  CausalGraph(std::vector<NodeInfo> nodes, std::vector<Edge> edges);

  /// Convenience constructor: one-dimensional continuous nodes named by `names`,
  /// edges given by name pairs.
  static CausalGraph from_names(const std::vector<std::string>& names,
                                const std::vector<std::pair<std::string, std::string>>& edges);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeInfo>& nodes() const { return nodes_; }
  const NodeInfo& node(NodeIndex i) const { return nodes_.at(i); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<NodeIndex>& parents(NodeIndex i) const { return parents_.at(i); }
  const std::vector<NodeIndex>& children(NodeIndex i) const { return children_.at(i); }
  bool has_edge(NodeIndex from, NodeIndex to) const;
  NodeIndex index_of(const std::string& name) const;

  /// Longest shortest directed path over connected ordered pairs (0 when edgeless).
  std::size_t diameter() const;
  /// Longest directed path length in edges.
  std::size_t longest_path() const;
  std::set<NodeIndex> ancestors(NodeIndex i) const;
  std::set<NodeIndex> descendants(NodeIndex i) const;
  const std::vector<NodeIndex>& topological_order() const { return topo_; }
  bool is_leaf(NodeIndex i) const { return children(i).empty(); }

  VacaAdjacency adjacency(const std::set<NodeIndex>& intervened = {}) const;

  /// Text form `nodes = [...]` / `edges = [...]`, stable across runs.
  std::string canonical_text() const;
  /// FNV-1a hash of canonical_text(), used to tie checkpoints to graphs.
  std::uint64_t hash() const;

 private:
  void check_index(NodeIndex i) const;

  std::vector<NodeInfo> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeIndex>> parents_;
  std::vector<std::vector<NodeIndex>> children_;
  std::vector<NodeIndex> topo_;
};

/// Parses the graph block of an experiment config: `nodes` is a bracketed
/// list of `name:dim:kind` items, `edges` a bracketed list of `a->b` items.
/// `kind` is one of cont, bin, catK, or a `|`-separated per-dimension list.
CausalGraph parse_graph(const std::string& nodes_value, const std::string& edges_value);

}  // namespace vaca
