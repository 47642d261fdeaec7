#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaca/vaca_model.hpp"

namespace vaca {

enum class QueryKind { Observational, Interventional, Counterfactual };
std::string to_string(QueryKind kind);

/// do(X_node = alpha). `alpha` has one entry per column of the node and is in
/// normalized units unless `raw_units` is set.
struct InterventionSpec {
  NodeIndex node = 0;
  std::vector<double> alpha;
  bool raw_units = false;
};

enum class CfMode { Mean, Sample };

struct QueryOptions {
  bool clamp = false;  // overwrite the intervened columns of the output with alpha
};

struct QueryResult {
  Matrix samples;  // dataset column layout, normalized units
  QueryKind kind = QueryKind::Observational;
  std::uint64_t model_fingerprint = 0;
  std::uint64_t seed = 0;
  std::optional<InterventionSpec> intervention;

  /// Samples as a headered CSV at `csv_path` plus a JSON provenance file
  /// next to it (same stem, .json extension).
  void save(const std::filesystem::path& csv_path, const std::vector<std::string>& column_names) const;
  nlohmann::json provenance() const;
};

/// Alpha of `spec` in normalized units, using the model's stored statistics.
std::vector<double> normalized_alpha(const VacaModel& model, const InterventionSpec& spec);

/// z ~ N(0, I), decode under the causal adjacency, sample the likelihood.
QueryResult sample_observational_vaca(const VacaModel& model, std::size_t n, std::uint64_t seed);

/// Encodes a filler row carrying alpha under the intervened adjacency to get
/// the intervened node's latent, draws every other latent from the prior, and
/// decodes under the intervened adjacency.
QueryResult sample_interventional_vaca(const VacaModel& model, const InterventionSpec& spec, std::size_t n,
                                       std::uint64_t seed, const QueryOptions& opts = {});

/// Abduction with the causal adjacency, action with the intervened one,
/// prediction by decoding under the intervened adjacency. One output row per
/// factual row (normalized units).
Matrix counterfactual_vaca(const VacaModel& model, const Matrix& factual, const InterventionSpec& spec,
                           CfMode mode = CfMode::Mean, std::uint64_t seed = 0, const QueryOptions& opts = {});

/// Likelihood means of the plain reconstruction (posterior means, causal adjacency).
Matrix reconstruct(const VacaModel& model, const Matrix& x);

/// Posterior means of all latent blocks (n × d·latent).
Matrix posterior_means(const VacaModel& model, const Matrix& x);

}  // namespace vaca
