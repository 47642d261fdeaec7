#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaca/causal_graph.hpp"
#include "vaca/dataset.hpp"
#include "vaca/gnn.hpp"

namespace vaca {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// elbo: continuous likelihood variance lambda/2, KL weight 1.
/// beta: continuous likelihood variance 1/2, KL weight lambda.
enum class Objective { Elbo, Beta };

struct VacaConfig {
  int latent_dim = 4;                     // per node
  int adapter_width = 8;                  // per-node input adapter output
  std::vector<int> encoder_hidden{16};    // message net hidden widths; last is the message width
  int decoder_hidden_layers = -1;         // N_h; -1 picks longest_path - 1
  int decoder_width = 16;
  std::vector<int> head_hidden;           // output head hidden widths
  double dropout = 0.0;                   // parents dropout probability
  bool dropout_encoder = true;
  bool dropout_decoder = true;
  bool residual = false;
  GnnMode mode = GnnMode::Disjoint;
  Objective objective = Objective::Elbo;
  double lambda_kld = 0.05;
  double learning_rate = 0.005;
  std::size_t batch_size = 1000;
  std::size_t max_epochs = 500;
  std::size_t patience = 50;
  std::size_t iwae_k = 100;
  std::size_t valid_rows = 0;             // early-stopping rows; 0 = the whole validation split
  bool allow_shallow_decoder = false;     // permits N_h < longest_path - 1 (ablations)
  std::uint64_t seed = 0;

  double likelihood_variance() const { return objective == Objective::Elbo ? lambda_kld / 2.0 : 0.5; }
  double kl_weight() const { return objective == Objective::Elbo ? 1.0 : lambda_kld; }
  int hidden_layers_for(const CausalGraph& g) const;
  void validate(const CausalGraph& g) const;

  nlohmann::json to_json() const;
  static VacaConfig from_json(const nlohmann::json& j);
};

/// Per-node diagonal Gaussian posterior parameters (batch × latent_dim each).
struct Posterior {
  std::vector<ad::Tensor> mean;
  std::vector<ad::Tensor> log_scale;
};

/// Variational graph autoencoder over a causal graph. Inputs and outputs use
/// the dataset column layout; continuous columns are expected normalized.
class VacaModel {
 public:
  VacaModel(CausalGraph graph, VacaConfig config);
  VacaModel(VacaModel&&) = default;
  VacaModel& operator=(VacaModel&&) = default;

  const CausalGraph& graph() const { return graph_; }
  const VacaConfig& config() const { return config_; }
  std::size_t data_width() const { return width_; }
  const std::vector<ColumnSlice>& node_slices() const { return slices_; }
  const std::vector<ColumnKind>& column_kinds() const { return kinds_; }
  std::size_t decoder_hidden_layers() const { return decoder_.hidden_layer_count(); }
  std::size_t encoder_layers() const { return encoder_.size(); }
  std::size_t latent_width() const { return graph_.size() * static_cast<std::size_t>(config_.latent_dim); }

  Posterior encode(const Matrix& x, const VacaAdjacency& adj, double dropout = 0.0,
                   std::mt19937_64* rng = nullptr) const;
  Posterior encode(const Matrix& x, const VacaAdjacency& adj, const ParentMasks* masks) const;
  /// Likelihood parameters per node, concatenated over the node's columns:
  /// mean for continuous, logit for binary, K logits for categorical.
  std::vector<ad::Tensor> decode(const std::vector<ad::Tensor>& z, const VacaAdjacency& adj, double dropout = 0.0,
                                 std::mt19937_64* rng = nullptr) const;
  std::vector<ad::Tensor> decode(const std::vector<ad::Tensor>& z, const VacaAdjacency& adj,
                                 const ParentMasks* masks) const;
  std::vector<ad::Tensor> decode(const Matrix& z, const VacaAdjacency& adj) const;

  /// log p(x | eta) per row (n × 1).
  ad::Tensor log_likelihood(const std::vector<ad::Tensor>& eta, const Matrix& x) const;
  /// Analytic KL(q || N(0, I)) per row (n × 1).
  static ad::Tensor kl_divergence(const Posterior& q);
  /// Batch-mean single-sample ELBO; parents dropout applies when `train`.
  ad::Tensor elbo(const Matrix& x, const VacaAdjacency& adj, std::mt19937_64& rng, bool train = true) const;
  /// Batch-mean importance-weighted bound with K samples, no dropout.
  double iwae(const Matrix& x, const VacaAdjacency& adj, std::size_t k, std::mt19937_64& rng) const;

  /// Continuous means, argmax for discrete columns.
  Matrix likelihood_mean(const std::vector<ad::Tensor>& eta) const;
  /// One draw per column and row; every column consumes exactly one random
  /// number per row whatever its value, so paired calls stay aligned.
  Matrix sample_likelihood(const std::vector<ad::Tensor>& eta, std::mt19937_64& rng) const;

  /// Splits a (n × d·latent) matrix into per-node blocks and back.
  std::vector<ad::Tensor> split_latent(const Matrix& z) const;
  Matrix join_latent(const std::vector<ad::Tensor>& z) const;

  ad::NamedParameters parameters();
  std::size_t parameter_count() const;
  /// Hash of the graph and every parameter bit.
  std::uint64_t fingerprint() const;

  /// Normalization statistics of the training data, if known.
  std::optional<Normalization> normalization;
  /// Free-form provenance stored in the sidecar (data source, seed, splits).
  nlohmann::json metadata = nlohmann::json::object();

  /// Writes params.bin and model.json into `dir`.
  void save(const std::filesystem::path& dir) const;
  /// Loads a model; when `expected` is given its hash must match the stored one.
  static VacaModel load(const std::filesystem::path& dir, const CausalGraph* expected = nullptr);

 private:
  std::vector<ad::Tensor> adapt(const Matrix& x) const;

  CausalGraph graph_;
  VacaConfig config_;
  std::vector<ColumnSlice> slices_;
  std::vector<ColumnKind> kinds_;
  std::size_t width_ = 0;
  std::vector<Linear> adapters_;
  GnnStack encoder_;
  GnnStack decoder_;
  std::vector<Mlp> heads_;
};

}  // namespace vaca
