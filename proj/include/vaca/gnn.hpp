#pragma once

#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "vaca/causal_graph.hpp"
#include "vaca/nn.hpp"

namespace vaca {

enum class GnnMode { Shared, Disjoint };

struct GnnLayerSpec {
  int in_width = 0;
  int out_width = 0;
  std::vector<int> message_hidden;  // hidden widths of the message net
  int message_width = 16;
  std::vector<int> update_hidden;
  Activation output_activation = Activation::Relu;
  bool residual = false;  // adds the layer input when in_width == out_width
};

/// Per-node state: one (batch × width) tensor per graph node.
using NodeStates = std::vector<ad::Tensor>;

/// Per-node keep masks (batch × 1, entries 0 or 1) applied to every message
/// a node receives from its parents. The self-message is never masked.
using ParentMasks = std::vector<ad::Tensor>;

/// One message-passing layer: m_ij = f_m(h_i, h_j) for every j with
/// adj(i, j) = 1, M_i = sum_j m_ij, h'_i = f_u(h_i, M_i).
class GnnLayer {
 public:
  /// `support` fixes which (i, j) pairs own message nets in disjoint mode;
  /// forward passes may use any adjacency whose nonzeros are a subset of it.
  GnnLayer(const VacaAdjacency& support, GnnMode mode, GnnLayerSpec spec, std::mt19937_64& rng);
  GnnLayer(GnnLayer&&) = default;
  GnnLayer& operator=(GnnLayer&&) = default;

  NodeStates forward(const NodeStates& h, const VacaAdjacency& adj, const ParentMasks* masks = nullptr) const;

  GnnMode mode() const { return mode_; }
  const GnnLayerSpec& spec() const { return spec_; }
  std::size_t message_net_count() const { return message_nets_.size(); }
  std::size_t update_net_count() const { return update_nets_.size(); }
  void collect(const std::string& prefix, ad::NamedParameters& out);

 private:
  const Mlp& message_net(NodeIndex i, NodeIndex j) const;
  const Mlp& update_net(NodeIndex i) const;

  std::size_t d_ = 0;
  GnnMode mode_;
  GnnLayerSpec spec_;
  VacaAdjacency support_;
  std::vector<Mlp> message_nets_;
  std::map<std::pair<NodeIndex, NodeIndex>, std::size_t> message_index_;
  std::vector<Mlp> update_nets_;
};

/// Sequence of layers; N_h = layers - 1.
class GnnStack {
 public:
  GnnStack() = default;
  explicit GnnStack(std::vector<GnnLayer> layers);

  /// With dropout_prob > 0 and an rng, every call draws a fresh keep/drop flag
  /// per node and per sample; a dropped node receives no parent messages in
  /// any layer of this pass.
  NodeStates forward(const NodeStates& h0, const VacaAdjacency& adj, double dropout_prob = 0.0,
                     std::mt19937_64* rng = nullptr) const;
  /// Same, with masks drawn by the caller (null: no dropout).
  NodeStates forward(const NodeStates& h0, const VacaAdjacency& adj, const ParentMasks* masks) const;

  /// One keep/drop flag per node and per row, dropped with probability `p`.
  static ParentMasks draw_masks(std::size_t nodes, Eigen::Index rows, double p, std::mt19937_64& rng);

  std::size_t hidden_layer_count() const { return layers_.empty() ? 0 : layers_.size() - 1; }
  std::size_t size() const { return layers_.size(); }
  std::vector<GnnLayer>& layers() { return layers_; }
  void collect(const std::string& prefix, ad::NamedParameters& out);

 private:
  std::vector<GnnLayer> layers_;
};

}  // namespace vaca
