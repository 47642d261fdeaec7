#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "vaca/scm.hpp"
#include "vaca/trainer.hpp"
#include "vaca/vaca_model.hpp"
#include "vaca_checks.hpp"

using namespace vaca;
namespace ad = vaca::ad;

namespace {

Dataset small_data(const std::string& scm, const std::string& sem, std::size_t n, std::uint64_t seed = 0) {
  return normalize(sample_observational(builtin_scm(scm, sem), SplitSizes::halves(n), seed));
}

VacaConfig quick(std::size_t epochs) {
  VacaConfig c;
  c.max_epochs = epochs;
  c.batch_size = 100;
  c.iwae_k = 5;
  c.dropout = 0.1;
  return c;
}

}  // namespace

TEST(VacaModel, EncoderIsLocalOnEveryBuiltinGraph) {
  for (const auto& [name, sem] : vaca_checks::builtin_families()) {
    const auto r = vaca_checks::encoder_locality(builtin_scm(name, sem).graph, 3);
    EXPECT_TRUE(r.ok) << name << ": " << r.detail;
  }
}

TEST(VacaModel, DecoderReachesAncestorsAtDiameterDepth) {
  for (const auto& [name, sem] : vaca_checks::builtin_families()) {
    const auto g = builtin_scm(name, sem).graph;
    const int nh = static_cast<int>(g.diameter()) - 1;
    const auto r = vaca_checks::decoder_reachability(g, nh);
    EXPECT_TRUE(r.ok) << name << ": " << r.detail;
  }
}

TEST(VacaModel, InterventionSeversExactlyTheCrossingPaths) {
  for (const auto& [name, sem] : vaca_checks::builtin_families()) {
    const auto g = builtin_scm(name, sem).graph;
    const int nh = static_cast<int>(g.longest_path()) - 1;
    for (NodeIndex k = 0; k < g.size(); ++k) {
      const auto r = vaca_checks::decoder_reachability(g, nh, k);
      EXPECT_TRUE(r.ok) << name << " do(" << g.node(k).name << "): " << r.detail;
    }
  }
}

TEST(VacaModel, ShallowDecoderMissesDistantAncestors) {
  // chain with no hidden layer: X3 cannot see z1
  const auto g = builtin_scm("chain", "LIN").graph;
  VacaConfig c;
  c.decoder_hidden_layers = 0;
  c.allow_shallow_decoder = true;
  const VacaModel m(g, c);
  std::mt19937_64 rng(1);
  const auto s = vaca_checks::decoder_sensitivity(m, vaca_checks::standard_normal(8, 12, rng), g.adjacency());
  EXPECT_EQ(s[2][0], 0.0);
  EXPECT_GT(s[2][1], 0.0);
}

TEST(VacaModel, ConfigValidation) {
  const auto g = builtin_scm("chain", "LIN").graph;
  VacaConfig c;
  EXPECT_EQ(c.hidden_layers_for(g), 1);
  c.decoder_hidden_layers = 0;
  EXPECT_THROW(VacaModel(g, c), ModelError);
  c.allow_shallow_decoder = true;
  EXPECT_NO_THROW(VacaModel(g, c));
  VacaConfig bad;
  bad.lambda_kld = 0.0;
  EXPECT_THROW(VacaModel(g, bad), ModelError);
  VacaConfig j = VacaConfig::from_json(c.to_json());
  EXPECT_EQ(j.to_json(), c.to_json());
}

TEST(VacaModel, ObjectiveVariances) {
  VacaConfig c;
  c.lambda_kld = 0.05;
  EXPECT_DOUBLE_EQ(c.likelihood_variance(), 0.025);
  EXPECT_DOUBLE_EQ(c.kl_weight(), 1.0);
  c.objective = Objective::Beta;
  EXPECT_DOUBLE_EQ(c.likelihood_variance(), 0.5);
  EXPECT_DOUBLE_EQ(c.kl_weight(), 0.05);
}

TEST(VacaModel, GaussianLikelihoodAtTheMean) {
  // -0.5 (log 2 pi + log 0.025) per continuous dimension
  const double per_dim = -0.5 * (std::log(2 * std::numbers::pi) + std::log(0.025));
  EXPECT_NEAR(per_dim, 0.9255, 1e-4);
  const VacaModel m(builtin_scm("collider", "LIN").graph, VacaConfig{});
  std::mt19937_64 rng(2);
  const Matrix x = vaca_checks::standard_normal(4, 3, rng);
  std::vector<ad::Tensor> eta;
  for (int i = 0; i < 3; ++i) eta.push_back(ad::constant(x.col(i)));
  const Matrix ll = m.log_likelihood(eta, x).value();
  for (Eigen::Index r = 0; r < 4; ++r) EXPECT_NEAR(ll(r, 0), 3 * per_dim, 1e-12);
}

TEST(VacaModel, DiscreteLikelihoods) {
  const VacaModel m(vaca_checks::mixed_graph(), vaca_checks::tiny_config());
  Matrix x{{1.0, 0.0, 2.0}};
  // logit 0 for the binary column, equal logits for the categorical one
  std::vector<ad::Tensor> eta{ad::constant(Matrix{{0.0}}), ad::constant(Matrix{{0.0}}),
                              ad::constant(Matrix{{0.0, 0.0, 0.0}})};
  const double cont = -0.5 * (std::log(2 * std::numbers::pi) + std::log(0.025));
  EXPECT_NEAR(m.log_likelihood(eta, x).item(), std::log(0.5) + cont + std::log(1.0 / 3.0), 1e-12);
  std::vector<ad::Tensor> sharp{ad::constant(Matrix{{3.0}}), ad::constant(Matrix{{0.7}}),
                                ad::constant(Matrix{{0.0, 1.0, 5.0}})};
  EXPECT_EQ(m.likelihood_mean(sharp), (Matrix{{1.0, 0.7, 2.0}}));
}

TEST(VacaModel, KlIsNonNegativeAndZeroAtThePrior) {
  Posterior prior, other;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 3; ++i) {
    prior.mean.push_back(ad::constant(Matrix::Zero(5, 4)));
    prior.log_scale.push_back(ad::constant(Matrix::Zero(5, 4)));
    other.mean.push_back(ad::constant(vaca_checks::standard_normal(5, 4, rng)));
    other.log_scale.push_back(ad::constant(vaca_checks::standard_normal(5, 4, rng)));
  }
  EXPECT_EQ(VacaModel::kl_divergence(prior).value().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(VacaModel::kl_divergence(other).value().minCoeff(), 0.0);
}

TEST(VacaModel, ElboGradientMatchesFiniteDifferences) {
  for (const auto& g : {vaca_checks::mixed_graph(), builtin_scm("chain", "LIN").graph}) {
    VacaModel m(g, vaca_checks::tiny_config());
    ASSERT_LE(m.parameter_count(), 500u);
    std::mt19937_64 rng(4);
    const Matrix x = vaca_checks::random_rows(m.graph(), 6, rng);
    const auto r = vaca_checks::elbo_gradient_check(m, x, 11);
    EXPECT_EQ(r.parameters, m.parameter_count());
    EXPECT_LE(r.max_relative_error, 1e-3);
  }
}

TEST(VacaModel, ImportanceWeightedBoundTightensWithSamples) {
  const auto data = small_data("triangle", "NLIN", 400);
  const VacaModel m(builtin_scm("triangle", "NLIN").graph, VacaConfig{});
  const auto adj = m.graph().adjacency();
  std::mt19937_64 r1(5), r2(5);
  const double k1 = m.iwae(data.valid(), adj, 1, r1);
  const double k100 = m.iwae(data.valid(), adj, 100, r2);
  EXPECT_TRUE(std::isfinite(k1));
  EXPECT_GE(k100, k1);
  std::mt19937_64 r3(6);
  EXPECT_THROW(m.iwae(data.valid(), adj, 0, r3), ModelError);
}

TEST(VacaModel, SaveLoadIsBitwise) {
  const auto dir = std::filesystem::temp_directory_path() / "vaca_unit_model";
  std::filesystem::remove_all(dir);
  VacaModel m(builtin_scm("loan").graph, VacaConfig{});
  m.metadata["note"] = "x";
  const auto data = small_data("loan", "", 80);
  m.normalization = data.normalization;
  m.save(dir);
  const VacaModel back = VacaModel::load(dir);
  EXPECT_EQ(back.fingerprint(), m.fingerprint());
  EXPECT_EQ(back.metadata["note"], "x");
  EXPECT_EQ(back.normalization->mean, m.normalization->mean);
  const auto adj = m.graph().adjacency();
  const auto a = m.encode(data.x, adj);
  const auto b = back.encode(data.x, adj);
  for (std::size_t i = 0; i < a.mean.size(); ++i) EXPECT_EQ(a.mean[i].value(), b.mean[i].value());
  const auto other = builtin_scm("chain", "LIN").graph;
  EXPECT_THROW(VacaModel::load(dir, &other), ModelError);
  std::filesystem::remove_all(dir);
}

TEST(Trainer, RunsAreDeterministicGivenTheSeed) {
  const auto data = small_data("collider", "LIN", 400);
  const auto g = builtin_scm("collider", "LIN").graph;
  VacaModel a(g, quick(3)), b(g, quick(3));
  const auto ra = train(a, data);
  const auto rb = train(b, data);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(ra.valid_iwae, rb.valid_iwae);
  auto cfg = quick(3);
  cfg.seed = 1;
  VacaModel c(g, cfg);
  train(c, data);
  EXPECT_NE(c.fingerprint(), a.fingerprint());
}

TEST(Trainer, ValidationBoundImprovesEarly) {
  const auto data = small_data("chain", "LIN", 1000);
  VacaModel m(builtin_scm("chain", "LIN").graph, quick(10));
  const auto r = train(m, data);
  ASSERT_EQ(r.valid_iwae.size(), 10u);
  EXPECT_GT(r.best_valid_iwae, r.initial_valid_iwae);
  EXPECT_EQ(r.best_valid_iwae, *std::max_element(r.valid_iwae.begin(), r.valid_iwae.end()));
  EXPECT_EQ(r.stop_reason, "max_epochs");
  // best parameters are restored
  std::mt19937_64 rng(0);
  EXPECT_TRUE(std::isfinite(m.iwae(data.valid(), m.graph().adjacency(), 5, rng)));
}

TEST(Trainer, ZeroPatienceStopsAtTheFirstSetback) {
  const auto data = small_data("chain", "LIN", 400);
  auto cfg = quick(200);
  cfg.patience = 0;
  cfg.learning_rate = 0.05;
  VacaModel m(builtin_scm("chain", "LIN").graph, cfg);
  const auto r = train(m, data);
  EXPECT_EQ(r.stop_reason, "patience");
  ASSERT_GE(r.valid_iwae.size(), 2u);
  // every epoch but the last improved on its predecessor
  for (std::size_t e = 1; e + 1 < r.valid_iwae.size(); ++e) EXPECT_GT(r.valid_iwae[e], r.valid_iwae[e - 1]);
  EXPECT_LE(r.valid_iwae.back(), r.best_valid_iwae);
  EXPECT_EQ(r.best_epoch, r.valid_iwae.size() - 1);
}

TEST(Trainer, RejectsRawData) {
  const auto raw = sample_observational(builtin_scm("chain", "LIN"), SplitSizes::halves(40), 0);
  VacaModel m(builtin_scm("chain", "LIN").graph, quick(1));
  EXPECT_ANY_THROW(train(m, raw));
}
