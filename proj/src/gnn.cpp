#include "vaca/gnn.hpp"

#include <stdexcept>

namespace vaca {

namespace {

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

GnnLayer::GnnLayer(const VacaAdjacency& support, GnnMode mode, GnnLayerSpec spec, std::mt19937_64& rng)
    : d_(support.size()), mode_(mode), spec_(std::move(spec)), support_(support) {
  if (spec_.in_width <= 0 || spec_.out_width <= 0 || spec_.message_width <= 0) {
    throw std::invalid_argument("GNN layer widths must be positive");
  }
  const auto msg_widths = widths(2 * spec_.in_width, spec_.message_hidden, spec_.message_width);
  const auto upd_widths = widths(spec_.in_width + spec_.message_width, spec_.update_hidden, spec_.out_width);
  if (mode_ == GnnMode::Shared) {
    message_nets_.emplace_back(msg_widths, rng, Activation::Relu);
    update_nets_.emplace_back(upd_widths, rng, spec_.output_activation);
    return;
  }
  for (NodeIndex i = 0; i < d_; ++i) {
    for (NodeIndex j : support_.row(i)) {
      message_index_[{i, j}] = message_nets_.size();
      message_nets_.emplace_back(msg_widths, rng, Activation::Relu);
    }
  }
  for (NodeIndex i = 0; i < d_; ++i) update_nets_.emplace_back(upd_widths, rng, spec_.output_activation);
}

const Mlp& GnnLayer::message_net(NodeIndex i, NodeIndex j) const {
  if (mode_ == GnnMode::Shared) return message_nets_.front();
  const auto it = message_index_.find({i, j});
  if (it == message_index_.end()) {
    throw std::invalid_argument("adjacency entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                ") has no message net in this layer");
  }
  return message_nets_[it->second];
}

const Mlp& GnnLayer::update_net(NodeIndex i) const {
  return mode_ == GnnMode::Shared ? update_nets_.front() : update_nets_[i];
}

NodeStates GnnLayer::forward(const NodeStates& h, const VacaAdjacency& adj, const ParentMasks* masks) const {
  if (h.size() != d_ || adj.size() != d_) throw std::invalid_argument("GNN layer: node count mismatch");
  for (const auto& t : h) {
    if (t.cols() != spec_.in_width) {
      throw std::invalid_argument("GNN layer: expected width " + std::to_string(spec_.in_width) + ", got " +
                                  std::to_string(t.cols()));
    }
  }
  NodeStates out;
  out.reserve(d_);
  for (NodeIndex i = 0; i < d_; ++i) {
    ad::Tensor agg;
    for (NodeIndex j : adj.row(i)) {
      ad::Tensor m = message_net(i, j).forward(ad::concat_cols({h[i], h[j]}));
      if (j != i && masks) m = ad::mul_col(m, (*masks)[i]);
      agg = agg ? agg + m : m;
    }
    if (!agg) agg = ad::constant(Matrix::Zero(h[i].rows(), spec_.message_width));
    ad::Tensor next = update_net(i).forward(ad::concat_cols({h[i], agg}));
    if (spec_.residual && spec_.in_width == spec_.out_width) next = next + h[i];
    out.push_back(std::move(next));
  }
  return out;
}

void GnnLayer::collect(const std::string& prefix, ad::NamedParameters& out) {
  if (mode_ == GnnMode::Shared) {
    message_nets_.front().collect(prefix + ".message", out);
    update_nets_.front().collect(prefix + ".update", out);
    return;
  }
  for (const auto& [key, idx] : message_index_) {
    message_nets_[idx].collect(prefix + ".message_" + std::to_string(key.first) + "_" + std::to_string(key.second),
                               out);
  }
  for (NodeIndex i = 0; i < d_; ++i) update_nets_[i].collect(prefix + ".update_" + std::to_string(i), out);
}

GnnStack::GnnStack(std::vector<GnnLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t k = 1; k < layers_.size(); ++k) {
    if (layers_[k].spec().in_width != layers_[k - 1].spec().out_width) {
      throw std::invalid_argument("GNN stack: layer " + std::to_string(k) + " width mismatch");
    }
  }
}

ParentMasks GnnStack::draw_masks(std::size_t nodes, Eigen::Index rows, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  ParentMasks masks;
  for (std::size_t i = 0; i < nodes; ++i) {
    Matrix m(rows, 1);
    for (Eigen::Index r = 0; r < rows; ++r) m(r, 0) = keep(rng) ? 1.0 : 0.0;
    masks.push_back(ad::constant(std::move(m)));
  }
  return masks;
}

NodeStates GnnStack::forward(const NodeStates& h0, const VacaAdjacency& adj, double dropout_prob,
                             std::mt19937_64* rng) const {
  if (dropout_prob > 0.0 && rng != nullptr) {
    const auto masks = draw_masks(h0.size(), h0.empty() ? 0 : h0.front().rows(), dropout_prob, *rng);
    return forward(h0, adj, &masks);
  }
  return forward(h0, adj, nullptr);
}

NodeStates GnnStack::forward(const NodeStates& h0, const VacaAdjacency& adj, const ParentMasks* masks) const {
  NodeStates h = h0;
  for (const auto& layer : layers_) h = layer.forward(h, adj, masks);
  return h;
}

void GnnStack::collect(const std::string& prefix, ad::NamedParameters& out) {
  for (std::size_t k = 0; k < layers_.size(); ++k) layers_[k].collect(prefix + "." + std::to_string(k), out);
}

}  // namespace vaca
