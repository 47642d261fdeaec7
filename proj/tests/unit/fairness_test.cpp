#include <gtest/gtest.h>

#include "vaca/fairness.hpp"
#include "vaca/scm.hpp"

using namespace vaca;

namespace {

struct LoanFixture {
  Dataset data;
  VacaModel model;
};

LoanFixture loan(std::size_t n = 200) {
  auto scm = builtin_scm("loan");
  auto data = normalize(sample_observational(scm, SplitSizes::halves(n), 1));
  VacaModel model(scm.graph, VacaConfig{});
  model.normalization = data.normalization;
  return {std::move(data), std::move(model)};
}

ClassifierSpec fixed(InputSelector sel, Vector w, double b) {
  ClassifierSpec c;
  c.selector = sel;
  c.sensitive = 0;
  c.weights = std::move(w);
  c.bias = b;
  return c;
}

}  // namespace

TEST(Logreg, SeparatesTwoPoints) {
  const Matrix x{{-1.0}, {1.0}};
  const auto clf = train_logreg(x, {0.0, 1.0}, {1e-6, 2000});
  const Vector p = clf.probability(x);
  EXPECT_LT(p(0), 0.05);
  EXPECT_GT(p(1), 0.95);
}

TEST(Logreg, BalancedWeightsCentreAConstantModel) {
  // constant feature: the class-weighted optimum is p = 0.5 whatever the base rate
  const Matrix x = Matrix::Zero(10, 1);
  const std::vector<double> y{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const auto clf = train_logreg(x, y);
  EXPECT_DOUBLE_EQ(clf.weight_positive, 10.0 / 6.0);
  EXPECT_DOUBLE_EQ(clf.weight_negative, 10.0 / 14.0);
  EXPECT_NEAR(clf.probability(x)(0), 0.5, 1e-6);
  EXPECT_LT(clf.grad_norm, 1e-6);
}

TEST(Logreg, RecoversAKnownSlope) {
  // labels drawn from sigmoid(2 x) on a symmetric grid
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 20000;
  Matrix x(n, 1);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = -3.0 + 6.0 * (i + 0.5) / n;
    y[i] = u(rng) < 1.0 / (1.0 + std::exp(-2.0 * x(i, 0))) ? 1.0 : 0.0;
  }
  const auto clf = train_logreg(x, y);
  EXPECT_NEAR(clf.weights(0), 2.0, 0.15);
  EXPECT_NEAR(clf.bias, 0.0, 0.1);
}

TEST(Logreg, RejectsBadLabels) {
  const Matrix x = Matrix::Zero(3, 1);
  EXPECT_THROW(train_logreg(x, {1, 1, 1}), FairnessError);
  EXPECT_THROW(train_logreg(x, {0, 1, 2}), FairnessError);
  EXPECT_THROW(train_logreg(x, {0, 1}), FairnessError);
}

TEST(Scores, HandCheckedTable) {
  // tp 3, fp 1, fn 2, tn 4: f1 = 6 / 9, accuracy = 7 / 10
  const std::vector<int> truth{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  const std::vector<int> pred{1, 1, 1, 0, 0, 1, 0, 0, 0, 0};
  const auto s = binary_scores(truth, pred);
  EXPECT_DOUBLE_EQ(s.f1, 6.0 / 9.0);
  EXPECT_DOUBLE_EQ(s.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(binary_scores({0, 0}, {0, 0}).f1, 0.0);
  EXPECT_THROW(binary_scores({1}, {1, 0}), FairnessError);
}

TEST(Selectors, FairXDropsTheSensitiveNodeAndItsDescendants) {
  const auto g = builtin_scm("loan").graph;
  // G reaches L, D, E, I, S; only A remains
  EXPECT_EQ(selector_nodes(g, InputSelector::FairX, 0), (std::vector<NodeIndex>{1}));
  EXPECT_EQ(selector_nodes(g, InputSelector::Unaware, 0).size(), 6u);
  EXPECT_EQ(selector_nodes(g, InputSelector::Full, 0).size(), 7u);
  EXPECT_EQ(parse_input_selector("fair-z"), InputSelector::FairZ);
  EXPECT_THROW(parse_input_selector("fair"), FairnessError);
}

TEST(Selectors, FeatureLayouts) {
  const auto f = loan();
  const Matrix x = f.data.test();
  EXPECT_EQ(classifier_features(f.model, x, InputSelector::Full, 0), x);
  EXPECT_EQ(classifier_features(f.model, x, InputSelector::FairX, 0).cols(), 1);
  EXPECT_EQ(classifier_features(f.model, x, InputSelector::FairZ, 0).cols(), 6 * f.model.config().latent_dim);
}

TEST(Unfairness, ConstantClassifierIsFair) {
  const auto f = loan();
  const auto clf = fixed(InputSelector::Full, Vector::Zero(7), 0.3);
  EXPECT_EQ(unfairness(clf, f.model, f.data.test()), 0.0);
}

TEST(Unfairness, ClassifierOnTheClampedAttributeIsMaximallyUnfair) {
  const auto f = loan();
  Vector w = Vector::Zero(7);
  w(0) = 100.0;
  const auto clf = fixed(InputSelector::Full, w, -50.0);
  EXPECT_NEAR(unfairness(clf, f.model, f.data.test(), {4, 0, true, 1}), 1.0, 1e-12);
}

TEST(Unfairness, NonDescendantClassifierHasNoGap) {
  const auto f = loan();
  Vector w(1);
  w << 1.3;
  const auto clf = fixed(InputSelector::FairX, w, 0.1);
  EXPECT_EQ(unfairness(clf, f.model, f.data.test(), {5, 2, false, 1}), 0.0);
}

TEST(Unfairness, BoundedAndIndependentOfThreading) {
  const auto f = loan(600);
  Vector w = Vector::Constant(6, 0.5);
  const auto clf = fixed(InputSelector::Unaware, w, 0.0);
  const double one = unfairness(clf, f.model, f.data.test(), {3, 9, true, 1});
  const double many = unfairness(clf, f.model, f.data.test(), {3, 9, true, 3});
  EXPECT_EQ(one, many);
  EXPECT_GE(one, 0.0);
  EXPECT_LE(one, 1.0);
}

TEST(Unfairness, SensitiveNodeMustBeBinary) {
  const auto f = loan();
  auto clf = fixed(InputSelector::Full, Vector::Zero(7), 0.0);
  clf.sensitive = 1;
  EXPECT_THROW(unfairness(clf, f.model, f.data.test()), FairnessError);
}

TEST(Audit, ReportsAllClassifiersOnTheTestSplit) {
  const auto f = loan(400);
  const auto labels = loan_labels(f.data, 0);
  EXPECT_EQ(labels, loan_labels(f.data, 0));
  const auto r = audit(f.model, f.data, labels, 0, {3, 0, true, 1});
  ASSERT_EQ(r.classifiers.size(), 4u);
  EXPECT_EQ(r.sensitive, "G");
  EXPECT_EQ(r.test_rows, 100u);
  EXPECT_EQ(r.at(InputSelector::FairX).uf, 0.0);
  for (const auto& c : r.classifiers) {
    EXPECT_GE(c.uf, 0.0);
    EXPECT_LE(c.uf, 1.0);
    EXPECT_GE(c.f1, 0.0);
    EXPECT_LE(c.accuracy, 1.0);
  }
  const auto back = AuditReport::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
}

TEST(Audit, LoanLabelFollowsItsFormula) {
  // noise-free part 0.3 I + 0.2 G - 0.1 D - 0.1 L must correlate with the label
  const auto f = loan(2000);
  const auto y = loan_labels(f.data, 4);
  const Matrix raw = f.data.raw_x();
  double pos = 0, neg = 0;
  int np = 0, nn = 0;
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    const double s = 0.3 * raw(r, 5) + 0.2 * raw(r, 0) - 0.1 * raw(r, 4) - 0.1 * raw(r, 3);
    (y[r] == 1.0 ? pos : neg) += s;
    (y[r] == 1.0 ? np : nn) += 1;
  }
  ASSERT_GT(np, 0);
  ASSERT_GT(nn, 0);
  EXPECT_GT(pos / np, neg / nn + 0.5);
}
