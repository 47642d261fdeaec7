#include "vaca/vaca_model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "vaca/checkpoint.hpp"

namespace vaca {

using nlohmann::json;

int VacaConfig::hidden_layers_for(const CausalGraph& g) const {
  if (decoder_hidden_layers >= 0) return decoder_hidden_layers;
  const auto gamma = static_cast<int>(g.longest_path());
  return gamma > 0 ? gamma - 1 : 0;
}

void VacaConfig::validate(const CausalGraph& g) const {
  auto fail = [](const std::string& m) { throw ModelError("model." + m); };
  if (latent_dim < 1) fail("latent_dim must be at least 1");
  if (adapter_width < 1) fail("adapter_width must be at least 1");
  if (encoder_hidden.empty()) fail("encoder_hidden needs at least one width");
  for (int w : encoder_hidden) {
    if (w < 1) fail("encoder_hidden widths must be positive");
  }
  for (int w : head_hidden) {
    if (w < 1) fail("head_hidden widths must be positive");
  }
  if (decoder_width < 1) fail("decoder_width must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(lambda_kld > 0.0)) fail("lambda_kld must be positive");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be non-negative");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (iwae_k < 1) fail("iwae_k must be at least 1");
  const int needed = g.longest_path() > 0 ? static_cast<int>(g.longest_path()) - 1 : 0;
  if (hidden_layers_for(g) < needed && !allow_shallow_decoder) {
    fail("decoder_hidden_layers = " + std::to_string(hidden_layers_for(g)) + " is below longest_path - 1 = " +
         std::to_string(needed) + " (set allow_shallow_decoder to override)");
  }
}

json VacaConfig::to_json() const {
  return {{"latent_dim", latent_dim},
          {"adapter_width", adapter_width},
          {"encoder_hidden", encoder_hidden},
          {"decoder_hidden_layers", decoder_hidden_layers},
          {"decoder_width", decoder_width},
          {"head_hidden", head_hidden},
          {"dropout", dropout},
          {"dropout_encoder", dropout_encoder},
          {"dropout_decoder", dropout_decoder},
          {"residual", residual},
          {"mode", mode == GnnMode::Disjoint ? "disjoint" : "shared"},
          {"objective", objective == Objective::Elbo ? "elbo" : "beta"},
          {"lambda_kld", lambda_kld},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"iwae_k", iwae_k},
          {"valid_rows", valid_rows},
          {"allow_shallow_decoder", allow_shallow_decoder},
          {"seed", seed}};
}

VacaConfig VacaConfig::from_json(const json& j) {
  VacaConfig c;
  c.latent_dim = j.at("latent_dim").get<int>();
  c.adapter_width = j.at("adapter_width").get<int>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
  c.decoder_hidden_layers = j.at("decoder_hidden_layers").get<int>();
  c.decoder_width = j.at("decoder_width").get<int>();
  c.head_hidden = j.at("head_hidden").get<std::vector<int>>();
  c.dropout = j.at("dropout").get<double>();
  c.dropout_encoder = j.at("dropout_encoder").get<bool>();
  c.dropout_decoder = j.at("dropout_decoder").get<bool>();
  c.residual = j.at("residual").get<bool>();
  c.mode = j.at("mode").get<std::string>() == "shared" ? GnnMode::Shared : GnnMode::Disjoint;
  c.objective = j.at("objective").get<std::string>() == "beta" ? Objective::Beta : Objective::Elbo;
  c.lambda_kld = j.at("lambda_kld").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.iwae_k = j.at("iwae_k").get<std::size_t>();
  c.valid_rows = j.value("valid_rows", std::size_t{0});
  c.allow_shallow_decoder = j.at("allow_shallow_decoder").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

int params_of(const NodeInfo& n) {
  int w = 0;
  for (const auto& c : n.columns) w += c.param_width();
  return w;
}

int encoded_of(const NodeInfo& n) {
  int w = 0;
  for (const auto& c : n.columns) w += c.encoded_width();
  return w;
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n01(rng);
  return m;
}

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

VacaModel::VacaModel(CausalGraph graph, VacaConfig config) : graph_(std::move(graph)), config_(std::move(config)) {
  config_.validate(graph_);
  for (const auto& n : graph_.nodes()) {
    slices_.push_back({width_, n.dim()});
    width_ += n.dim();
    kinds_.insert(kinds_.end(), n.columns.begin(), n.columns.end());
  }
  std::mt19937_64 rng(config_.seed);
  const auto full = graph_.adjacency();

  for (const auto& n : graph_.nodes()) adapters_.emplace_back(encoded_of(n), config_.adapter_width, rng);

  GnnLayerSpec enc;
  enc.in_width = config_.adapter_width;
  enc.out_width = 2 * config_.latent_dim;
  enc.message_hidden.assign(config_.encoder_hidden.begin(), config_.encoder_hidden.end() - 1);
  enc.message_width = config_.encoder_hidden.back();
  enc.output_activation = Activation::None;
  std::vector<GnnLayer> enc_layers;
  enc_layers.emplace_back(full, config_.mode, enc, rng);
  encoder_ = GnnStack(std::move(enc_layers));

  std::vector<GnnLayer> dec_layers;
  const int layers = config_.hidden_layers_for(graph_) + 1;
  for (int l = 0; l < layers; ++l) {
    GnnLayerSpec spec;
    spec.in_width = l == 0 ? config_.latent_dim : config_.decoder_width;
    spec.out_width = config_.decoder_width;
    spec.message_width = config_.decoder_width;
    spec.output_activation = Activation::Relu;
    spec.residual = config_.residual;
    dec_layers.emplace_back(full, config_.mode, spec, rng);
  }
  decoder_ = GnnStack(std::move(dec_layers));

  for (const auto& n : graph_.nodes()) {
    std::vector<int> w{config_.decoder_width};
    w.insert(w.end(), config_.head_hidden.begin(), config_.head_hidden.end());
    w.push_back(params_of(n));
    heads_.emplace_back(w, rng, Activation::None);
  }
}

std::vector<ad::Tensor> VacaModel::adapt(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != width_) {
    throw ModelError("input has " + std::to_string(x.cols()) + " columns, model expects " + std::to_string(width_));
  }
  std::vector<ad::Tensor> out;
  for (NodeIndex i = 0; i < graph_.size(); ++i) {
    const auto& node = graph_.node(i);
    Matrix enc(x.rows(), encoded_of(node));
    Eigen::Index col = 0;
    for (std::size_t k = 0; k < node.dim(); ++k) {
      const auto src = static_cast<Eigen::Index>(slices_[i].offset + k);
      const auto& kind = node.columns[k];
      if (kind.kind == VarKind::Categorical) {
        enc.middleCols(col, kind.cardinality).setZero();
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
          const double v = x(r, src);
          const auto code = static_cast<Eigen::Index>(v);
          if (v != static_cast<double>(code) || code < 0 || code >= kind.cardinality) {
            throw ModelError("categorical column of node " + node.name + " holds invalid code " + std::to_string(v));
          }
          enc(r, col + code) = 1.0;
        }
        col += kind.cardinality;
      } else {
        enc.col(col++) = x.col(src);
      }
    }
    out.push_back(adapters_[i].forward(ad::constant(std::move(enc))));
  }
  return out;
}

Posterior VacaModel::encode(const Matrix& x, const VacaAdjacency& adj, double dropout, std::mt19937_64* rng) const {
  if (dropout > 0.0 && rng != nullptr) {
    const auto masks = GnnStack::draw_masks(graph_.size(), x.rows(), dropout, *rng);
    return encode(x, adj, &masks);
  }
  return encode(x, adj, nullptr);
}

Posterior VacaModel::encode(const Matrix& x, const VacaAdjacency& adj, const ParentMasks* masks) const {
  const auto h = encoder_.forward(adapt(x), adj, config_.dropout_encoder ? masks : nullptr);
  Posterior q;
  for (const auto& t : h) {
    q.mean.push_back(ad::slice_cols(t, 0, config_.latent_dim));
    q.log_scale.push_back(ad::slice_cols(t, config_.latent_dim, config_.latent_dim));
  }
  return q;
}

std::vector<ad::Tensor> VacaModel::decode(const std::vector<ad::Tensor>& z, const VacaAdjacency& adj, double dropout,
                                          std::mt19937_64* rng) const {
  if (dropout > 0.0 && rng != nullptr && !z.empty()) {
    const auto masks = GnnStack::draw_masks(graph_.size(), z.front().rows(), dropout, *rng);
    return decode(z, adj, &masks);
  }
  return decode(z, adj, nullptr);
}

std::vector<ad::Tensor> VacaModel::decode(const std::vector<ad::Tensor>& z, const VacaAdjacency& adj,
                                          const ParentMasks* masks) const {
  if (z.size() != graph_.size()) throw ModelError("latent block count does not match node count");
  for (const auto& t : z) {
    if (t.cols() != config_.latent_dim) throw ModelError("latent block has the wrong width");
  }
  const auto h = decoder_.forward(z, adj, config_.dropout_decoder ? masks : nullptr);
  std::vector<ad::Tensor> eta;
  for (NodeIndex i = 0; i < graph_.size(); ++i) eta.push_back(heads_[i].forward(h[i]));
  return eta;
}

std::vector<ad::Tensor> VacaModel::decode(const Matrix& z, const VacaAdjacency& adj) const {
  return decode(split_latent(z), adj);
}

std::vector<ad::Tensor> VacaModel::split_latent(const Matrix& z) const {
  if (static_cast<std::size_t>(z.cols()) != latent_width()) throw ModelError("latent matrix has the wrong width");
  std::vector<ad::Tensor> out;
  for (NodeIndex i = 0; i < graph_.size(); ++i) {
    out.push_back(ad::constant(z.middleCols(static_cast<Eigen::Index>(i) * config_.latent_dim, config_.latent_dim)));
  }
  return out;
}

Matrix VacaModel::join_latent(const std::vector<ad::Tensor>& z) const {
  Matrix out(z.empty() ? 0 : z[0].rows(), static_cast<Eigen::Index>(latent_width()));
  for (std::size_t i = 0; i < z.size(); ++i) {
    out.middleCols(static_cast<Eigen::Index>(i) * config_.latent_dim, config_.latent_dim) = z[i].value();
  }
  return out;
}

ad::Tensor VacaModel::log_likelihood(const std::vector<ad::Tensor>& eta, const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != width_) throw ModelError("data width mismatch in log_likelihood");
  const double var = config_.likelihood_variance();
  const double gauss_const = -0.5 * (kLog2Pi + std::log(var));
  ad::Tensor total;
  auto add = [&](const ad::Tensor& t) { total = total ? total + t : t; };
  for (NodeIndex i = 0; i < graph_.size(); ++i) {
    const auto& node = graph_.node(i);
    const auto off = static_cast<Eigen::Index>(slices_[i].offset);
    const bool all_cont = std::all_of(node.columns.begin(), node.columns.end(),
                                      [](const ColumnKind& c) { return c.kind == VarKind::Continuous; });
    if (all_cont) {
      const auto k = static_cast<Eigen::Index>(node.dim());
      ad::Tensor sq = ad::row_sum(ad::square(eta[i] - ad::constant(x.middleCols(off, k))));
      add(ad::add_scalar(ad::scale(sq, -0.5 / var), gauss_const * static_cast<double>(k)));
      continue;
    }
    Eigen::Index p = 0;
    for (std::size_t c = 0; c < node.dim(); ++c) {
      const auto& kind = node.columns[c];
      const Matrix xc = x.col(off + static_cast<Eigen::Index>(c));
      if (kind.kind == VarKind::Continuous) {
        ad::Tensor d = ad::square(ad::slice_cols(eta[i], p, 1) - ad::constant(xc));
        add(ad::add_scalar(ad::scale(d, -0.5 / var), gauss_const));
        p += 1;
      } else if (kind.kind == VarKind::Binary) {
        ad::Tensor l = ad::slice_cols(eta[i], p, 1);
        add(ad::constant(xc) * l - ad::softplus(l));
        p += 1;
      } else {
        Matrix onehot = Matrix::Zero(x.rows(), kind.cardinality);
        for (Eigen::Index r = 0; r < x.rows(); ++r) onehot(r, static_cast<Eigen::Index>(xc(r, 0))) = 1.0;
        ad::Tensor lp = ad::log_softmax_rows(ad::slice_cols(eta[i], p, kind.cardinality));
        add(ad::row_sum(lp * ad::constant(std::move(onehot))));
        p += kind.cardinality;
      }
    }
  }
  return total;
}

ad::Tensor VacaModel::kl_divergence(const Posterior& q) {
  ad::Tensor total;
  for (std::size_t i = 0; i < q.mean.size(); ++i) {
    const ad::Tensor& mu = q.mean[i];
    const ad::Tensor& ls = q.log_scale[i];
    // 0.5 * (mu^2 + sigma^2 - 1 - 2 log sigma)
    ad::Tensor t = ad::square(mu) + ad::exp(ad::scale(ls, 2.0)) - ad::scale(ls, 2.0);
    ad::Tensor k = ad::scale(ad::add_scalar(ad::row_sum(t), -static_cast<double>(mu.cols())), 0.5);
    total = total ? total + k : k;
  }
  return total;
}

ad::Tensor VacaModel::elbo(const Matrix& x, const VacaAdjacency& adj, std::mt19937_64& rng, bool train) const {
  // one mask set per pass, shared by encoder and decoder
  ParentMasks masks;
  const ParentMasks* m = nullptr;
  if (train && config_.dropout > 0.0) {
    masks = GnnStack::draw_masks(graph_.size(), x.rows(), config_.dropout, rng);
    m = &masks;
  }
  const Posterior q = encode(x, adj, m);
  std::vector<ad::Tensor> z;
  for (NodeIndex i = 0; i < graph_.size(); ++i) {
    ad::Tensor eps = ad::constant(standard_normal(x.rows(), config_.latent_dim, rng));
    z.push_back(q.mean[i] + ad::exp(q.log_scale[i]) * eps);
  }
  const auto eta = decode(z, adj, m);
  ad::Tensor rows = log_likelihood(eta, x) - ad::scale(kl_divergence(q), config_.kl_weight());
  return ad::mean(rows);
}

double VacaModel::iwae(const Matrix& x, const VacaAdjacency& adj, std::size_t k, std::mt19937_64& rng) const {
  if (k < 1) throw ModelError("IWAE needs K >= 1");
  const Posterior q = encode(x, adj);
  const Eigen::Index n = x.rows();
  const auto L = config_.latent_dim;
  Matrix logw(n, static_cast<Eigen::Index>(k));
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<ad::Tensor> z;
    Vector log_ratio = Vector::Zero(n);  // log p(z) - log q(z | x)
    for (NodeIndex i = 0; i < graph_.size(); ++i) {
      const Matrix eps = standard_normal(n, L, rng);
      const Matrix& mu = q.mean[i].value();
      const Matrix& ls = q.log_scale[i].value();
      Matrix zi = mu + (ls.array().exp() * eps.array()).matrix();
      log_ratio += (-0.5 * zi.array().square() + 0.5 * eps.array().square() + ls.array()).rowwise().sum().matrix();
      z.push_back(ad::constant(std::move(zi)));
    }
    const auto eta = decode(z, adj);
    logw.col(static_cast<Eigen::Index>(s)) = log_likelihood(eta, x).value().col(0) + log_ratio;
  }
  const Vector m = logw.rowwise().maxCoeff();
  const Vector lme =
      ((logw.colwise() - m).array().exp().rowwise().sum() / static_cast<double>(k)).log().matrix() + m;
  const double out = lme.mean();
  if (!std::isfinite(out)) throw ad::NumericError("IWAE bound is not finite");
  return out;
}

Matrix VacaModel::likelihood_mean(const std::vector<ad::Tensor>& eta) const {
  const Eigen::Index n = eta.empty() ? 0 : eta[0].rows();
  Matrix out(n, static_cast<Eigen::Index>(width_));
  for (NodeIndex i = 0; i < graph_.size(); ++i) {
    const auto& node = graph_.node(i);
    const Matrix& e = eta[i].value();
    Eigen::Index p = 0;
    for (std::size_t c = 0; c < node.dim(); ++c) {
      const auto col = static_cast<Eigen::Index>(slices_[i].offset + c);
      const auto& kind = node.columns[c];
      if (kind.kind == VarKind::Continuous) {
        out.col(col) = e.col(p++);
      } else if (kind.kind == VarKind::Binary) {
        out.col(col) = (e.col(p++).array() > 0.0).cast<double>();
      } else {
        for (Eigen::Index r = 0; r < n; ++r) {
          Eigen::Index best = 0;
          e.row(r).segment(p, kind.cardinality).maxCoeff(&best);
          out(r, col) = static_cast<double>(best);
        }
        p += kind.cardinality;
      }
    }
  }
  return out;
}

Matrix VacaModel::sample_likelihood(const std::vector<ad::Tensor>& eta, std::mt19937_64& rng) const {
  const Eigen::Index n = eta.empty() ? 0 : eta[0].rows();
  Matrix out(n, static_cast<Eigen::Index>(width_));
  const double sd = std::sqrt(config_.likelihood_variance());
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (NodeIndex i = 0; i < graph_.size(); ++i) {
      const auto& node = graph_.node(i);
      const Matrix& e = eta[i].value();
      Eigen::Index p = 0;
      for (std::size_t c = 0; c < node.dim(); ++c) {
        const auto col = static_cast<Eigen::Index>(slices_[i].offset + c);
        const auto& kind = node.columns[c];
        if (kind.kind == VarKind::Continuous) {
          out(r, col) = e(r, p++) + sd * n01(rng);
        } else if (kind.kind == VarKind::Binary) {
          const double prob = 1.0 / (1.0 + std::exp(-e(r, p++)));
          out(r, col) = u01(rng) < prob ? 1.0 : 0.0;
        } else {
          const auto logits = e.row(r).segment(p, kind.cardinality);
          const double mx = logits.maxCoeff();
          const Eigen::ArrayXd w = (logits.array() - mx).exp().transpose();
          const double u = u01(rng) * w.sum();
          double acc = 0.0;
          Eigen::Index pick = kind.cardinality - 1;
          for (Eigen::Index k = 0; k < kind.cardinality; ++k) {
            acc += w(k);
            if (u < acc) {
              pick = k;
              break;
            }
          }
          out(r, col) = static_cast<double>(pick);
          p += kind.cardinality;
        }
      }
    }
  }
  return out;
}

ad::NamedParameters VacaModel::parameters() {
  ad::NamedParameters out;
  for (std::size_t i = 0; i < adapters_.size(); ++i) adapters_[i].collect("adapter_" + std::to_string(i), out);
  encoder_.collect("encoder", out);
  decoder_.collect("decoder", out);
  for (std::size_t i = 0; i < heads_.size(); ++i) heads_[i].collect("head_" + std::to_string(i), out);
  return out;
}

std::size_t VacaModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : const_cast<VacaModel*>(this)->parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

std::uint64_t VacaModel::fingerprint() const {
  std::uint64_t h = graph_.hash();
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, p] : const_cast<VacaModel*>(this)->parameters()) {
    for (Eigen::Index k = 0; k < p->value().size(); ++k) mix(std::bit_cast<std::uint64_t>(p->value().data()[k]));
  }
  return h;
}

namespace {

std::pair<std::string, std::string> graph_blocks(const CausalGraph& g) {
  const std::string text = g.canonical_text();
  const auto nl = text.find('\n');
  auto value_of = [](const std::string& line) { return line.substr(line.find('=') + 1); };
  return {value_of(text.substr(0, nl)), value_of(text.substr(nl + 1, text.find('\n', nl + 1) - nl - 1))};
}

}  // namespace

void VacaModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  ad::save_parameters(dir / "params.bin", const_cast<VacaModel*>(this)->parameters());
  const auto [nodes, edges] = graph_blocks(graph_);
  json side;
  side["format"] = 1;
  side["config"] = config_.to_json();
  side["graph"] = {{"nodes", nodes}, {"edges", edges}};
  side["graph_hash"] = graph_.hash();
  side["fingerprint"] = fingerprint();
  if (normalization) {
    side["normalization"] = {
        {"mean", normalization->mean}, {"stddev", normalization->stddev}, {"applied", normalization->applied}};
  }
  side["metadata"] = metadata;
  std::ofstream out(dir / "model.json");
  if (!out) throw ModelError("cannot write " + (dir / "model.json").string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << side.dump(2) << '\n';
}

VacaModel VacaModel::load(const std::filesystem::path& dir, const CausalGraph* expected) {
  std::ifstream in(dir / "model.json");
  if (!in) throw ModelError("no model.json in " + dir.string());
  json side;
  try {
    in >> side;
  } catch (const json::exception& e) {
    throw ModelError("malformed model.json: " + std::string(e.what()));
  }
  const auto stored_hash = side.at("graph_hash").get<std::uint64_t>();
  CausalGraph graph = parse_graph(side.at("graph").at("nodes").get<std::string>(),
                                  side.at("graph").at("edges").get<std::string>());
  if (graph.hash() != stored_hash) throw ModelError("checkpoint sidecar is inconsistent: graph hash mismatch");
  if (expected && expected->hash() != stored_hash) {
    throw ModelError("graph does not match the checkpoint (hash mismatch)");
  }
  VacaModel model(std::move(graph), VacaConfig::from_json(side.at("config")));
  ad::load_parameters(dir / "params.bin", model.parameters());
  if (side.contains("normalization")) {
    Normalization n;
    n.mean = side["normalization"].at("mean").get<std::vector<double>>();
    n.stddev = side["normalization"].at("stddev").get<std::vector<double>>();
    n.applied = side["normalization"].at("applied").get<std::vector<bool>>();
    model.normalization = std::move(n);
  }
  model.metadata = side.value("metadata", json::object());
  return model;
}

}  // namespace vaca
