#pragma once

// Structural checks shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vaca/autodiff.hpp"
#include "vaca/causal_graph.hpp"
#include "vaca/scm.hpp"
#include "vaca/vaca_model.hpp"

namespace vaca_checks {

using vaca::CausalGraph;
using vaca::Matrix;
using vaca::NodeIndex;

struct CheckResult {
  bool ok = true;
  std::string detail;
};

/// (scm, sem) of every builtin family exercised by structural checks.
inline std::vector<std::pair<std::string, std::string>> builtin_families() {
  return {{"collider", "LIN"}, {"triangle", "NLIN"}, {"chain", "LIN"},
          {"mgraph", "LIN"},   {"loan", ""},         {"adult", ""}};
}

/// Random DAG: edge i -> j for i < j with probability p, nodes relabeled by a
/// random permutation so that index order is not topological.
inline CausalGraph random_dag(std::size_t d, double p, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(d);
  for (std::size_t i = 0; i < d; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::bernoulli_distribution coin(p);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d; ++i) names.push_back("N" + std::to_string(i));
  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      if (coin(rng)) edges.emplace_back(names[perm[a]], names[perm[b]]);
    }
  }
  return CausalGraph::from_names(names, edges);
}

/// Nodes with a directed path to `i` (including `i`) once the incoming edges
/// of `intervened` are removed. Plain fixpoint iteration over the edge list.
inline std::set<NodeIndex> ancestors_or_self(const CausalGraph& g, NodeIndex i,
                                             std::optional<NodeIndex> intervened = std::nullopt) {
  std::set<NodeIndex> out{i};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [from, to] : g.edges()) {
      if (intervened && to == *intervened) continue;
      if (out.count(to) && !out.count(from)) {
        out.insert(from);
        grew = true;
      }
    }
  }
  return out;
}

/// Rows with valid values for every column kind.
inline Matrix random_rows(const CausalGraph& g, std::size_t n, std::mt19937_64& rng) {
  std::vector<vaca::ColumnKind> kinds;
  for (const auto& node : g.nodes()) kinds.insert(kinds.end(), node.columns.begin(), node.columns.end());
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kinds.size()));
  std::normal_distribution<double> n01(0.0, 1.0);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < kinds.size(); ++c) {
      const auto& k = kinds[c];
      x(r, static_cast<Eigen::Index>(c)) =
          k.is_discrete() ? static_cast<double>(std::uniform_int_distribution<int>(0, k.cardinality - 1)(rng))
                          : n01(rng);
    }
  }
  return x;
}

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n01(rng);
  return m;
}

/// Largest absolute change of any posterior parameter of every node when one
/// input column moves. Continuous columns move by `h` (result divided by h),
/// discrete ones switch to another code.
inline std::vector<std::vector<double>> encoder_sensitivity(const vaca::VacaModel& model, const Matrix& x,
                                                            double h = 1e-3) {
  const auto& g = model.graph();
  const auto adj = g.adjacency();
  auto params = [&](const Matrix& in) {
    const auto q = model.encode(in, adj);
    std::vector<Matrix> out;
    for (std::size_t i = 0; i < g.size(); ++i) {
      Matrix m(in.rows(), 2 * q.mean[i].cols());
      m << q.mean[i].value(), q.log_scale[i].value();
      out.push_back(std::move(m));
    }
    return out;
  };
  const auto base = params(x);
  std::vector<std::vector<double>> sens(g.size(), std::vector<double>(model.data_width(), 0.0));
  for (std::size_t c = 0; c < model.data_width(); ++c) {
    const auto& kind = model.column_kinds()[c];
    Matrix moved = x;
    double scale = 1.0;
    if (kind.is_discrete()) {
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        moved(r, static_cast<Eigen::Index>(c)) =
            std::fmod(x(r, static_cast<Eigen::Index>(c)) + 1.0, static_cast<double>(kind.cardinality));
      }
    } else {
      moved.col(static_cast<Eigen::Index>(c)).array() += h;
      scale = 1.0 / h;
    }
    const auto after = params(moved);
    for (std::size_t i = 0; i < g.size(); ++i) {
      sens[i][c] = (after[i] - base[i]).cwiseAbs().maxCoeff() * scale;
    }
  }
  return sens;
}

/// Posterior parameters of node i must not react to columns of nodes outside
/// pa(i) + {i}, and must react to at least one column of each node inside.
inline CheckResult encoder_locality(const CausalGraph& g, int draws, double tolerance = 1e-8) {
  CheckResult res;
  std::ostringstream msg;
  std::vector<std::vector<bool>> reacted(g.size(), std::vector<bool>(g.size(), false));
  double worst = 0.0;
  for (int draw = 0; draw < draws; ++draw) {
    vaca::VacaConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(draw) + 1;
    const vaca::VacaModel model(g, cfg);
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(draw));
    const Matrix x = random_rows(g, 6, rng);
    const auto sens = encoder_sensitivity(model, x);
    for (NodeIndex i = 0; i < g.size(); ++i) {
      const auto& pa = g.parents(i);
      for (NodeIndex j = 0; j < g.size(); ++j) {
        const bool local = j == i || std::find(pa.begin(), pa.end(), j) != pa.end();
        const auto& sl = model.node_slices()[j];
        double s = 0.0;
        for (std::size_t c = sl.offset; c < sl.offset + sl.width; ++c) s = std::max(s, sens[i][c]);
        if (local) {
          if (s > 0.0) reacted[i][j] = true;
        } else {
          worst = std::max(worst, s);
        }
      }
    }
  }
  if (worst >= tolerance) {
    res.ok = false;
    msg << "leak " << worst << " outside the parent set; ";
  }
  for (NodeIndex i = 0; i < g.size(); ++i) {
    for (NodeIndex j : g.parents(i)) {
      if (!reacted[i][j]) {
        res.ok = false;
        msg << g.node(i).name << " never reacts to parent " << g.node(j).name << "; ";
      }
    }
  }
  msg << "max out-of-neighbourhood sensitivity " << worst;
  res.detail = msg.str();
  return res;
}

/// Largest absolute change of each node's likelihood parameters when latent
/// block j moves (central differences, step h). Entry [i][j].
inline std::vector<std::vector<double>> decoder_sensitivity(const vaca::VacaModel& model, const Matrix& z,
                                                            const vaca::VacaAdjacency& adj, double h = 1e-4) {
  const std::size_t d = model.graph().size();
  const int L = model.config().latent_dim;
  std::vector<std::vector<double>> out(d, std::vector<double>(d, 0.0));
  for (std::size_t j = 0; j < d; ++j) {
    for (int k = 0; k < L; ++k) {
      const auto col = static_cast<Eigen::Index>(j) * L + k;
      Matrix up = z, down = z;
      up.col(col).array() += h;
      down.col(col).array() -= h;
      const auto eu = model.decode(up, adj);
      const auto ed = model.decode(down, adj);
      for (std::size_t i = 0; i < d; ++i) {
        out[i][j] = std::max(out[i][j], (eu[i].value() - ed[i].value()).cwiseAbs().maxCoeff() / (2 * h));
      }
    }
  }
  return out;
}

/// With `hidden_layers` decoder hidden layers the block d eta_i / d z_j must
/// be nonzero exactly when j reaches i in the (possibly intervened) graph.
inline CheckResult decoder_reachability(const CausalGraph& g, int hidden_layers,
                                        std::optional<NodeIndex> intervened = std::nullopt,
                                        std::uint64_t seed = 7) {
  vaca::VacaConfig cfg;
  cfg.seed = seed;
  cfg.decoder_hidden_layers = hidden_layers;
  cfg.allow_shallow_decoder = true;
  const vaca::VacaModel model(g, cfg);
  std::mt19937_64 rng(seed + 99);
  const Matrix z = standard_normal(32, static_cast<Eigen::Index>(model.latent_width()), rng);
  std::set<NodeIndex> iv;
  if (intervened) iv.insert(*intervened);
  const auto sens = decoder_sensitivity(model, z, g.adjacency(iv));
  CheckResult res;
  std::ostringstream msg;
  std::size_t wrong = 0, nonzero = 0;
  for (NodeIndex i = 0; i < g.size(); ++i) {
    const auto an = ancestors_or_self(g, i, intervened);
    for (NodeIndex j = 0; j < g.size(); ++j) {
      const bool expect = an.count(j) > 0;
      const bool got = sens[i][j] > 0.0;
      nonzero += got;
      if (expect != got) {
        ++wrong;
        msg << "d" << g.node(i).name << "/dz_" << g.node(j).name << (got ? " nonzero" : " zero") << "; ";
      }
    }
  }
  res.ok = wrong == 0;
  msg << wrong << " mismatched blocks, " << nonzero << " nonzero";
  res.detail = msg.str();
  return res;
}

/// Small graph mixing binary, continuous and categorical nodes.
inline CausalGraph mixed_graph() {
  using vaca::ColumnKind;
  std::vector<vaca::NodeInfo> nodes{{"A", {ColumnKind::binary()}},
                                    {"B", {ColumnKind::continuous()}},
                                    {"C", {ColumnKind::categorical(3)}}};
  return CausalGraph(std::move(nodes), {{0, 1}, {1, 2}, {0, 2}});
}

/// Model of under 500 parameters on mixed_graph().
inline vaca::VacaConfig tiny_config(std::uint64_t seed = 3) {
  vaca::VacaConfig cfg;
  cfg.latent_dim = 2;
  cfg.adapter_width = 2;
  cfg.encoder_hidden = {2};
  cfg.decoder_width = 2;
  cfg.seed = seed;
  return cfg;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

/// Reverse-mode ELBO gradient against central finite differences over every
/// parameter entry. The reparameterization noise is replayed from `seed`.
/// Parameters are jittered first, so the model is modified.
inline GradientCheck elbo_gradient_check(vaca::VacaModel& model, const Matrix& x, std::uint64_t seed,
                                         double eps = 1e-5, double floor = 1e-6) {
  const auto adj = model.graph().adjacency();
  auto value = [&] {
    std::mt19937_64 rng(seed);
    return model.elbo(x, adj, rng, false).item();
  };
  auto params = model.parameters();
  // zero biases and dead states put ReLU inputs exactly on the kink; move to a generic point
  {
    std::mt19937_64 jitter(seed ^ 0x5bd1e995u);
    std::normal_distribution<double> n(0.0, 0.1);
    for (auto& [name, p] : params) {
      for (Eigen::Index k = 0; k < p->value().size(); ++k) p->value().data()[k] += n(jitter);
    }
  }
  for (auto& [name, p] : params) p->zero_grad();
  {
    std::mt19937_64 rng(seed);
    vaca::ad::Tape tape;
    vaca::ad::RecordScope scope(tape);
    tape.backward(model.elbo(x, adj, rng, false));
  }
  GradientCheck out;
  for (auto& [name, p] : params) {
    const Matrix analytic = p->grad();
    for (Eigen::Index k = 0; k < p->value().size(); ++k) {
      const double orig = p->value().data()[k];
      p->value().data()[k] = orig + eps;
      const double up = value();
      p->value().data()[k] = orig - eps;
      const double down = value();
      p->value().data()[k] = orig;
      const double fd = (up - down) / (2 * eps);
      const double a = analytic.data()[k];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
      out.max_relative_error = std::max(out.max_relative_error, rel);
      ++out.parameters;
    }
  }
  return out;
}

}  // namespace vaca_checks
