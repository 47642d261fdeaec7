#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "vaca/dataset.hpp"
#include "vaca/scm.hpp"

using namespace vaca;

namespace {

RowVector eval(const ScmSpec& scm, std::vector<double> u, const Intervention* iv = nullptr) {
  return evaluate_scm(scm, u, iv);
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vaca_unit_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Scm, TriangleNonlinearAtZeroNoise) {
  // X1 = 0, X2 = -1 + 3 / (1 + e^0) = 0.5, X3 = 0 + 0.25 * 0.5^2 = 0.0625
  const auto x = eval(builtin_scm("triangle", "NLIN"), {0, 0, 0});
  EXPECT_DOUBLE_EQ(x(0), 0.0);
  EXPECT_DOUBLE_EQ(x(1), 0.5);
  EXPECT_DOUBLE_EQ(x(2), 0.0625);
}

TEST(Scm, ColliderInterventionReplacesMechanism) {
  // do(X1 = 2): X3 = 0.05 * 2 + 0.25 * 0 + 0
  const Intervention iv{0, {2.0}};
  const auto x = eval(builtin_scm("collider", "LIN"), {-7.0, 0, 0}, &iv);
  EXPECT_DOUBLE_EQ(x(0), 2.0);
  EXPECT_DOUBLE_EQ(x(1), 0.0);
  EXPECT_NEAR(x(2), 0.1, 1e-15);
}

TEST(Scm, ChainInterventionOnMediatorCutsRoot) {
  // do(X2 = 0) in the linear chain: X3 = 0.25 * 0 + U3
  const Intervention iv{1, {0.0}};
  const auto x = eval(builtin_scm("chain", "LIN"), {5.0, 1.0, 0.0}, &iv);
  EXPECT_DOUBLE_EQ(x(1), 0.0);
  EXPECT_DOUBLE_EQ(x(2), 0.0);
}

TEST(Scm, ChainCounterfactualHandExample) {
  // factual x = (1, 0, 1) has u = (1, 1, 1); under do(X1 = 0): X2 = 1, X3 = 1.25
  const auto scm = builtin_scm("chain", "LIN");
  Dataset d = sample_observational(scm, 1, 0);
  d.u = Matrix{{1.0, 1.0, 1.0}};
  d.x = Matrix{{1.0, 0.0, 1.0}};
  EXPECT_EQ(eval(scm, {1, 1, 1}), d.x.row(0));
  const auto cf = counterfactual_oracle(scm, d, 0, Intervention{0, {0.0}});
  EXPECT_EQ(cf(0), 0.0);
  EXPECT_EQ(cf(1), 1.0);
  EXPECT_EQ(cf(2), 1.25);
}

TEST(Scm, NullInterventionIsIdentity) {
  for (const auto& [name, sem] : std::vector<std::pair<std::string, std::string>>{
           {"collider", "NLIN"}, {"triangle", "NADD"}, {"mgraph", "NLIN"}, {"loan", ""}, {"adult", ""}}) {
    const auto scm = builtin_scm(name, sem);
    const Dataset d = sample_observational(scm, 50, 3);
    for (std::size_t r = 0; r < d.rows(); ++r) {
      for (NodeIndex i = 0; i < scm.graph.size(); ++i) {
        const auto sl = scm.x_slices()[i];
        Intervention iv{i, {}};
        for (std::size_t k = 0; k < sl.width; ++k) iv.value.push_back(d.x(r, sl.offset + k));
        const auto cf = counterfactual_oracle(scm, d, r, iv);
        ASSERT_EQ(cf, d.x.row(r)) << name << " row " << r << " node " << i;
      }
    }
  }
}

TEST(Scm, NonDescendantsAreBitwiseInvariant) {
  const auto scm = builtin_scm("loan");
  const Dataset d = sample_observational(scm, 100, 5);
  for (NodeIndex i = 0; i < scm.graph.size(); ++i) {
    const auto des = scm.graph.descendants(i);
    const auto sl = scm.x_slices()[i];
    for (std::size_t r = 0; r < d.rows(); ++r) {
      const auto cf = counterfactual_oracle(scm, d, r, Intervention{i, {d.x(r, sl.offset) + 1.0}});
      for (NodeIndex j = 0; j < scm.graph.size(); ++j) {
        if (j == i || des.count(j)) continue;
        const auto o = scm.x_slices()[j].offset;
        ASSERT_EQ(cf(o), d.x(r, o));
      }
    }
  }
}

TEST(Scm, InterventionalMeanSlopeInCollider) {
  // E[X3 | do(X1 = a)] = 0.05 a + 0.25 E[U2]: shared noise makes the slope exact
  const auto scm = builtin_scm("collider", "LIN");
  const auto lo = sample_interventional(scm, Intervention{0, {0.0}}, 2000, 9);
  const auto hi = sample_interventional(scm, Intervention{0, {1.0}}, 2000, 9);
  EXPECT_NEAR(hi.x.col(2).mean() - lo.x.col(2).mean(), 0.05, 1e-12);
  EXPECT_TRUE((hi.x.col(0).array() == 1.0).all());
}

TEST(Scm, ExogenousMomentsMatchPriors) {
  const auto scm = builtin_scm("collider", "LIN");
  const std::size_t n = 100000;
  const Matrix u = sample_exogenous(scm, n, 11);
  const double tol = 3.0 / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(u.col(1).mean(), 0.0, tol);
  // mixture 0.5 N(-2, 1.5) + 0.5 N(1.5, 1): mean -0.25, variance 1.25 + 1.75^2
  const double mix_var = 1.25 + 1.75 * 1.75;
  EXPECT_NEAR(u.col(0).mean(), -0.25, 3.0 * std::sqrt(mix_var / n));
  EXPECT_DOUBLE_EQ(scm.priors[0][0].mean(), -0.25);
  EXPECT_DOUBLE_EQ(scm.priors[0][0].variance(), mix_var);
}

TEST(Scm, PriorValidation) {
  EXPECT_THROW(ExogenousPrior::normal(0, 0), ScmError);
  EXPECT_THROW(ExogenousPrior::mixture({0.5, 0.6}, {0, 1}, {1, 1}), ScmError);
  EXPECT_THROW(ExogenousPrior::bernoulli(1.5), ScmError);
  EXPECT_THROW(ExogenousPrior::gamma(0, 1), ScmError);
  EXPECT_THROW(ExogenousPrior::categorical({1.0}), ScmError);
  EXPECT_THROW(builtin_scm("nope"), ScmError);
}

TEST(Scm, SamplingIsReproducible) {
  const auto scm = builtin_scm("adult");
  const auto a = sample_observational(scm, 200, 4);
  const auto b = sample_observational(scm, 200, 4);
  const auto c = sample_observational(scm, 200, 5);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(*a.u, *b.u);
  EXPECT_NE(a.x, c.x);
}

TEST(Scm, DiscreteColumnsHoldValidCodes) {
  const auto scm = builtin_scm("adult");
  const auto d = sample_observational(scm, 500, 1);
  for (std::size_t c = 0; c < d.width(); ++c) {
    const auto& k = d.column_kinds[c];
    if (!k.is_discrete()) continue;
    for (std::size_t r = 0; r < d.rows(); ++r) {
      const double v = d.x(r, c);
      ASSERT_EQ(v, std::floor(v));
      ASSERT_GE(v, 0.0);
      ASSERT_LT(v, k.cardinality);
    }
  }
}

TEST(Dataset, SplitSizes) {
  const auto h = SplitSizes::halves(10000);
  EXPECT_EQ(h.train, 5000u);
  EXPECT_EQ(h.valid, 2500u);
  EXPECT_EQ(h.test, 2500u);
  const auto e = SplitSizes::eighty(1000);
  EXPECT_EQ(e.train, 800u);
  EXPECT_EQ(e.total(), 1000u);
}

TEST(Dataset, NormalizationUsesTrainingStatistics) {
  const auto scm = builtin_scm("loan");
  const Dataset raw = sample_observational(scm, SplitSizes::halves(2000), 2);
  const Dataset n = normalize(raw);
  const Matrix tr = n.train();
  for (std::size_t c = 0; c < n.width(); ++c) {
    if (raw.column_kinds[c].is_discrete()) {
      EXPECT_EQ(n.x.col(c), raw.x.col(c));
      continue;
    }
    EXPECT_NEAR(tr.col(c).mean(), 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt((tr.col(c).array() - tr.col(c).mean()).square().mean()), 1.0, 1e-12);
  }
  EXPECT_LT((n.raw_x() - raw.x).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(normalize(n).x, n.x);
  EXPECT_EQ(denormalize(n).normalized(), false);
}

TEST(Dataset, ConstantContinuousColumnIsRejected) {
  Dataset d = sample_observational(builtin_scm("chain", "LIN"), 10, 0);
  d.x.col(1).setConstant(3.0);
  EXPECT_THROW(normalize(d), DataError);
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto dir = scratch("dataset");
  const auto d = sample_observational(builtin_scm("adult"), SplitSizes::halves(40), 6);
  save_dataset(d, dir);
  const auto back = load_dataset(dir);
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(*back.u, *d.u);
  EXPECT_EQ(back.node_names, d.node_names);
  EXPECT_EQ(back.column_kinds, d.column_kinds);
  EXPECT_EQ(back.splits.train, d.splits.train);
  EXPECT_EQ(back.source, d.source);
  std::filesystem::remove_all(dir);
}

TEST(Dataset, TableImportShufflesAndSplits) {
  const auto g = CausalGraph::from_names({"a", "b"}, {{"a", "b"}});
  CsvTable t;
  t.header = {"b", "y", "a"};
  t.values.resize(20, 3);
  for (int r = 0; r < 20; ++r) t.values.row(r) << 2.0 * r, r % 2, r;
  std::vector<double> labels;
  const auto d = dataset_from_table(g, t, 1, &labels, "y");
  EXPECT_EQ(d.splits.train, 16u);
  ASSERT_EQ(labels.size(), 20u);
  for (std::size_t r = 0; r < 20; ++r) {
    EXPECT_EQ(d.x(r, 1), 2.0 * d.x(r, 0));  // columns reordered to graph order, rows kept intact
    EXPECT_EQ(labels[r], std::fmod(d.x(r, 0), 2.0));
  }
  t.header = {"b", "y", "c"};
  EXPECT_THROW(dataset_from_table(g, t, 1), DataError);
}

TEST(Dataset, CsvRoundTrip) {
  const auto dir = scratch("csv");
  std::filesystem::create_directories(dir);
  Matrix m{{1.5, -2.0}, {0.1, 1e-300}};
  write_csv(dir / "m.csv", {"p", "q"}, m);
  const auto t = read_csv(dir / "m.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"p", "q"}));
  EXPECT_EQ(t.values, m);
  std::filesystem::remove_all(dir);
}
