#include "vaca/queries.hpp"

#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

namespace vaca {

namespace {

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n01(rng);
  return m;
}

void check_spec(const VacaModel& model, const InterventionSpec& spec) {
  if (spec.node >= model.graph().size()) throw ModelError("intervened node out of range");
  if (spec.alpha.size() != model.node_slices()[spec.node].width) {
    throw ModelError("intervention on " + model.graph().node(spec.node).name + " needs " +
                     std::to_string(model.node_slices()[spec.node].width) + " value(s)");
  }
}

void write_alpha(Matrix& x, const VacaModel& model, NodeIndex node, const std::vector<double>& alpha) {
  const auto& s = model.node_slices()[node];
  for (std::size_t k = 0; k < s.width; ++k) x.col(static_cast<Eigen::Index>(s.offset + k)).setConstant(alpha[k]);
}

}  // namespace

std::string to_string(QueryKind kind) {
  switch (kind) {
    case QueryKind::Observational:
      return "observational";
    case QueryKind::Interventional:
      return "interventional";
    case QueryKind::Counterfactual:
      return "counterfactual";
  }
  return "unknown";
}

std::vector<double> normalized_alpha(const VacaModel& model, const InterventionSpec& spec) {
  check_spec(model, spec);
  if (!spec.raw_units) return spec.alpha;
  if (!model.normalization) throw ModelError("raw-unit alpha needs the model's normalization statistics");
  std::vector<double> out;
  const auto& s = model.node_slices()[spec.node];
  for (std::size_t k = 0; k < s.width; ++k) out.push_back(model.normalization->apply(s.offset + k, spec.alpha[k]));
  return out;
}

nlohmann::json QueryResult::provenance() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["model_fingerprint"] = model_fingerprint;
  j["seed"] = seed;
  j["rows"] = samples.rows();
  if (intervention) {
    j["intervention"] = {
        {"node", intervention->node}, {"alpha", intervention->alpha}, {"raw_units", intervention->raw_units}};
  }
  return j;
}

void QueryResult::save(const std::filesystem::path& csv_path, const std::vector<std::string>& column_names) const {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  write_csv(csv_path, column_names, samples);
  auto json_path = csv_path;
  json_path.replace_extension(".json");
  std::ofstream out(json_path);
  out.precision(std::numeric_limits<double>::max_digits10);
  out << provenance().dump(2) << '\n';
  if (!out) throw ModelError("cannot write " + json_path.string());
}

QueryResult sample_observational_vaca(const VacaModel& model, std::size_t n, std::uint64_t seed) {
  QueryResult res;
  res.kind = QueryKind::Observational;
  res.seed = seed;
  res.model_fingerprint = model.fingerprint();
  if (n == 0) {
    res.samples.resize(0, static_cast<Eigen::Index>(model.data_width()));
    return res;
  }
  std::mt19937_64 rng(seed);
  const Matrix z = standard_normal(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.latent_width()), rng);
  const auto eta = model.decode(z, model.graph().adjacency());
  res.samples = model.sample_likelihood(eta, rng);
  return res;
}

QueryResult sample_interventional_vaca(const VacaModel& model, const InterventionSpec& spec, std::size_t n,
                                       std::uint64_t seed, const QueryOptions& opts) {
  const auto alpha = normalized_alpha(model, spec);
  QueryResult res;
  res.kind = QueryKind::Interventional;
  res.seed = seed;
  res.model_fingerprint = model.fingerprint();
  res.intervention = spec;
  if (n == 0) {
    res.samples.resize(0, static_cast<Eigen::Index>(model.data_width()));
    return res;
  }
  const auto rows = static_cast<Eigen::Index>(n);
  const auto L = model.config().latent_dim;
  const VacaAdjacency adj = model.graph().adjacency({spec.node});
  std::mt19937_64 rng(seed);

  // the intervened row of adj keeps only its self-loop, so zero fillers are never read
  Matrix xi = Matrix::Zero(rows, static_cast<Eigen::Index>(model.data_width()));
  write_alpha(xi, model, spec.node, alpha);
  const Posterior q = model.encode(xi, adj);

  Matrix z = standard_normal(rows, static_cast<Eigen::Index>(model.latent_width()), rng);
  const auto block = static_cast<Eigen::Index>(spec.node) * L;
  z.middleCols(block, L) = q.mean[spec.node].value() +
                           (q.log_scale[spec.node].value().array().exp() * z.middleCols(block, L).array()).matrix();
  const auto eta = model.decode(z, adj);
  res.samples = model.sample_likelihood(eta, rng);
  if (opts.clamp) write_alpha(res.samples, model, spec.node, alpha);
  return res;
}

Matrix counterfactual_vaca(const VacaModel& model, const Matrix& factual, const InterventionSpec& spec, CfMode mode,
                           std::uint64_t seed, const QueryOptions& opts) {
  const auto alpha = normalized_alpha(model, spec);
  if (static_cast<std::size_t>(factual.cols()) != model.data_width()) {
    throw ModelError("factual rows have " + std::to_string(factual.cols()) + " columns, model expects " +
                     std::to_string(model.data_width()));
  }
  const auto L = model.config().latent_dim;
  const Eigen::Index n = factual.rows();
  std::mt19937_64 rng(seed);

  // abduction
  const Posterior qf = model.encode(factual, model.graph().adjacency());
  // action
  const VacaAdjacency adj_i = model.graph().adjacency({spec.node});
  Matrix xi = factual;
  write_alpha(xi, model, spec.node, alpha);
  const Posterior qi = model.encode(xi, adj_i);

  std::vector<ad::Tensor> z;
  for (NodeIndex i = 0; i < model.graph().size(); ++i) {
    const Posterior& q = i == spec.node ? qi : qf;
    if (mode == CfMode::Mean) {
      z.push_back(q.mean[i]);
    } else {
      const Matrix eps = standard_normal(n, L, rng);
      z.push_back(ad::constant(q.mean[i].value() + (q.log_scale[i].value().array().exp() * eps.array()).matrix()));
    }
  }
  // prediction
  const auto eta = model.decode(z, adj_i);
  Matrix out = mode == CfMode::Mean ? model.likelihood_mean(eta) : model.sample_likelihood(eta, rng);
  if (opts.clamp) write_alpha(out, model, spec.node, alpha);
  return out;
}

Matrix reconstruct(const VacaModel& model, const Matrix& x) {
  const auto adj = model.graph().adjacency();
  const Posterior q = model.encode(x, adj);
  return model.likelihood_mean(model.decode(q.mean, adj));
}

Matrix posterior_means(const VacaModel& model, const Matrix& x) {
  return model.join_latent(model.encode(x, model.graph().adjacency()).mean);
}

}  // namespace vaca
