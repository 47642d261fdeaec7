#include "vaca/causal_graph.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <sstream>

namespace vaca {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::string body = trim(value);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']') {
    throw GraphError("expected a bracketed list, got '" + value + "'");
  }
  body = body.substr(1, body.size() - 2);
  std::vector<std::string> items;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

std::string to_string(const ColumnKind& kind) {
  switch (kind.kind) {
    case VarKind::Continuous:
      return "cont";
    case VarKind::Binary:
      return "bin";
    case VarKind::Categorical:
      return "cat" + std::to_string(kind.cardinality);
  }
  return "?";
}

ColumnKind parse_column_kind(const std::string& token) {
  const std::string t = trim(token);
  if (t == "cont") return ColumnKind::continuous();
  if (t == "bin") return ColumnKind::binary();
  if (t.rfind("cat", 0) == 0 && t.size() > 3) {
    int k = 0;
    try {
      k = std::stoi(t.substr(3));
    } catch (const std::exception&) {
      throw GraphError("bad categorical kind '" + t + "'");
    }
    if (k < 2) throw GraphError("categorical kind needs at least 2 categories: '" + t + "'");
    return ColumnKind::categorical(k);
  }
  throw GraphError("unknown column kind '" + t + "'");
}

VacaAdjacency::VacaAdjacency(std::size_t d, std::vector<std::uint8_t> entries,
                             std::set<NodeIndex> intervened)
    : d_(d), entries_(std::move(entries)), intervened_(std::move(intervened)) {}

std::vector<NodeIndex> VacaAdjacency::row(NodeIndex i) const {
  std::vector<NodeIndex> out;
  for (NodeIndex j = 0; j < d_; ++j) {
    if ((*this)(i, j)) out.push_back(j);
  }
  return out;
}

std::size_t VacaAdjacency::nonzeros() const {
  return static_cast<std::size_t>(std::count(entries_.begin(), entries_.end(), 1));
}

std::vector<NodeIndex> topological_order(std::size_t node_count, const std::vector<Edge>& edges) {
  std::vector<std::size_t> in_degree(node_count, 0);
  std::vector<std::vector<NodeIndex>> children(node_count);
  for (const auto& [from, to] : edges) {
    if (from >= node_count || to >= node_count) throw GraphError("edge endpoint out of range");
    children[from].push_back(to);
    ++in_degree[to];
  }
  // min-heap keeps the order deterministic: smallest ready index first
  std::priority_queue<NodeIndex, std::vector<NodeIndex>, std::greater<>> ready;
  for (NodeIndex i = 0; i < node_count; ++i) {
    if (in_degree[i] == 0) ready.push(i);
  }
  std::vector<NodeIndex> order;
  order.reserve(node_count);
  while (!ready.empty()) {
    const NodeIndex n = ready.top();
    ready.pop();
    order.push_back(n);
    for (NodeIndex c : children[n]) {
      if (--in_degree[c] == 0) ready.push(c);
    }
  }
  if (order.size() != node_count) throw GraphError("graph contains a directed cycle");
  return order;
}

CausalGraph::CausalGraph(std::vector<NodeInfo> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  const std::size_t d = nodes_.size();
  if (d == 0) throw GraphError("graph must contain at least one node");
  std::set<std::string> names;
  for (const auto& n : nodes_) {
    if (n.name.empty()) throw GraphError("node name must not be empty");
    if (n.columns.empty()) throw GraphError("node '" + n.name + "' has no columns");
    if (!names.insert(n.name).second) throw GraphError("duplicate node name '" + n.name + "'");
  }
  std::set<Edge> seen;
  for (const auto& e : edges_) {
    if (e.first >= d || e.second >= d) throw GraphError("edge endpoint out of range");
    if (e.first == e.second) throw GraphError("self-edge on node '" + nodes_[e.first].name + "'");
    if (!seen.insert(e).second) {
      throw GraphError("duplicate edge " + nodes_[e.first].name + "->" + nodes_[e.second].name);
    }
  }
  std::sort(edges_.begin(), edges_.end());
  parents_.assign(d, {});
  children_.assign(d, {});
  for (const auto& [from, to] : edges_) {
    parents_[to].push_back(from);
    children_[from].push_back(to);
  }
  for (auto& p : parents_) std::sort(p.begin(), p.end());
  for (auto& c : children_) std::sort(c.begin(), c.end());
  topo_ = vaca::topological_order(d, edges_);
}

CausalGraph CausalGraph::from_names(const std::vector<std::string>& names,
                                    const std::vector<std::pair<std::string, std::string>>& edges) {
  std::vector<NodeInfo> nodes;
  for (const auto& n : names) nodes.push_back({n, {ColumnKind::continuous()}});
  auto find = [&](const std::string& n) {
    auto it = std::find(names.begin(), names.end(), n);
    if (it == names.end()) throw GraphError("unknown node '" + n + "' in edge");
    return static_cast<NodeIndex>(it - names.begin());
  };
  std::vector<Edge> e;
  for (const auto& [a, b] : edges) e.emplace_back(find(a), find(b));
  return CausalGraph(std::move(nodes), std::move(e));
}

void CausalGraph::check_index(NodeIndex i) const {
  if (i >= nodes_.size()) {
    throw std::out_of_range("node index " + std::to_string(i) + " out of range");
  }
}

bool CausalGraph::has_edge(NodeIndex from, NodeIndex to) const {
  check_index(from);
  check_index(to);
  const auto& p = parents_[to];
  return std::binary_search(p.begin(), p.end(), from);
}

NodeIndex CausalGraph::index_of(const std::string& name) const {
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  throw GraphError("unknown node '" + name + "'");
}

std::size_t CausalGraph::diameter() const {
  std::size_t best = 0;
  const std::size_t d = size();
  for (NodeIndex s = 0; s < d; ++s) {
    std::vector<std::size_t> dist(d, SIZE_MAX);
    std::deque<NodeIndex> queue{s};
    dist[s] = 0;
    while (!queue.empty()) {
      const NodeIndex u = queue.front();
      queue.pop_front();
      for (NodeIndex v : children_[u]) {
        if (dist[v] == SIZE_MAX) {
          dist[v] = dist[u] + 1;
          best = std::max(best, dist[v]);
          queue.push_back(v);
        }
      }
    }
  }
  return best;
}

std::size_t CausalGraph::longest_path() const {
  // longest path ending at each node, filled in topological order
  std::vector<std::size_t> ending(size(), 0);
  std::size_t best = 0;
  for (NodeIndex v : topo_) {
    for (NodeIndex p : parents_[v]) ending[v] = std::max(ending[v], ending[p] + 1);
    best = std::max(best, ending[v]);
  }
  return best;
}

std::set<NodeIndex> CausalGraph::ancestors(NodeIndex i) const {
  check_index(i);
  std::set<NodeIndex> out;
  std::vector<NodeIndex> stack(parents_[i].begin(), parents_[i].end());
  while (!stack.empty()) {
    const NodeIndex n = stack.back();
    stack.pop_back();
    if (out.insert(n).second) stack.insert(stack.end(), parents_[n].begin(), parents_[n].end());
  }
  return out;
}

std::set<NodeIndex> CausalGraph::descendants(NodeIndex i) const {
  check_index(i);
  std::set<NodeIndex> out;
  std::vector<NodeIndex> stack(children_[i].begin(), children_[i].end());
  while (!stack.empty()) {
    const NodeIndex n = stack.back();
    stack.pop_back();
    if (out.insert(n).second) stack.insert(stack.end(), children_[n].begin(), children_[n].end());
  }
  return out;
}

VacaAdjacency CausalGraph::adjacency(const std::set<NodeIndex>& intervened) const {
  const std::size_t d = size();
  for (NodeIndex i : intervened) check_index(i);
  std::vector<std::uint8_t> a(d * d, 0);
  for (NodeIndex i = 0; i < d; ++i) a[i * d + i] = 1;
  for (const auto& [from, to] : edges_) {
    if (!intervened.count(to)) a[to * d + from] = 1;
  }
  return VacaAdjacency(d, std::move(a), intervened);
}

std::string CausalGraph::canonical_text() const {
  std::ostringstream os;
  os << "nodes = [";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    os << (i ? ", " : "") << n.name << ':' << n.dim() << ':';
    const bool uniform = std::all_of(n.columns.begin(), n.columns.end(),
                                     [&](const ColumnKind& c) { return c == n.columns.front(); });
    if (uniform) {
      os << to_string(n.columns.front());
    } else {
      for (std::size_t k = 0; k < n.columns.size(); ++k) os << (k ? "|" : "") << to_string(n.columns[k]);
    }
  }
  os << "]\nedges = [";
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    os << (k ? ", " : "") << nodes_[edges_[k].first].name << "->" << nodes_[edges_[k].second].name;
  }
  os << "]\n";
  return os.str();
}

std::uint64_t CausalGraph::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

CausalGraph parse_graph(const std::string& nodes_value, const std::string& edges_value) {
  std::vector<NodeInfo> nodes;
  for (const auto& item : split_list(nodes_value)) {
    const auto first = item.find(':');
    const auto second = first == std::string::npos ? std::string::npos : item.find(':', first + 1);
    if (second == std::string::npos) throw GraphError("node item must be name:dim:kind, got '" + item + "'");
    NodeInfo info;
    info.name = trim(item.substr(0, first));
    int dim = 0;
    try {
      dim = std::stoi(item.substr(first + 1, second - first - 1));
    } catch (const std::exception&) {
      throw GraphError("bad dimension in node item '" + item + "'");
    }
    if (dim < 1) throw GraphError("node dimension must be positive in '" + item + "'");
    const std::string kinds = item.substr(second + 1);
    std::vector<ColumnKind> parsed;
    std::stringstream ks(kinds);
    std::string tok;
    while (std::getline(ks, tok, '|')) parsed.push_back(parse_column_kind(tok));
    if (parsed.size() == 1) {
      info.columns.assign(static_cast<std::size_t>(dim), parsed.front());
    } else if (parsed.size() == static_cast<std::size_t>(dim)) {
      info.columns = parsed;
    } else {
      throw GraphError("kind list length does not match dimension in '" + item + "'");
    }
    nodes.push_back(std::move(info));
  }
  auto find = [&](const std::string& n) {
    for (NodeIndex i = 0; i < nodes.size(); ++i) {
      if (nodes[i].name == n) return i;
    }
    throw GraphError("unknown node '" + n + "' in edge list");
  };
  std::vector<Edge> edges;
  for (const auto& item : split_list(edges_value)) {
    const auto arrow = item.find("->");
    if (arrow == std::string::npos) throw GraphError("edge item must be a->b, got '" + item + "'");
    edges.emplace_back(find(trim(item.substr(0, arrow))), find(trim(item.substr(arrow + 2))));
  }
  return CausalGraph(std::move(nodes), std::move(edges));
}

}  // namespace vaca
