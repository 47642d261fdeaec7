#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <filesystem>
#include <limits>
#include <random>

#include "vaca/autodiff.hpp"
#include "vaca/checkpoint.hpp"
#include "vaca/nn.hpp"
#include "vaca_checks.hpp"

using namespace vaca;
namespace ad = vaca::ad;

namespace {

double scalar_grad(ad::Parameter& p, const std::function<ad::Tensor(const ad::Tensor&)>& f) {
  p.zero_grad();
  ad::Tape tape;
  ad::RecordScope scope(tape);
  tape.backward(f(p.tensor()));
  return p.grad()(0, 0);
}

}  // namespace

TEST(Autodiff, ForwardValues) {
  const ad::Tensor a = ad::constant(Matrix{{-1.0, 2.0}});
  EXPECT_EQ(ad::relu(a).value(), (Matrix{{0.0, 2.0}}));
  EXPECT_DOUBLE_EQ(ad::sigmoid(ad::constant(Matrix{{0.0}})).item(), 0.5);
  const Matrix m{{1, 2}, {3, 4}};
  EXPECT_EQ(ad::matmul(ad::constant(m), ad::constant(Matrix::Identity(2, 2))).value(), m);
  EXPECT_NEAR(ad::softplus(ad::constant(Matrix{{800.0}})).item(), 800.0, 1e-12);
  const auto ls = ad::log_softmax_rows(ad::constant(Matrix{{1.0, 2.0, 3.0}})).value();
  EXPECT_NEAR(ls.array().exp().sum(), 1.0, 1e-15);
}

TEST(Autodiff, ElementaryGradients) {
  ad::Parameter w(Matrix{{3.0}});
  EXPECT_DOUBLE_EQ(scalar_grad(w, [](const ad::Tensor& t) { return ad::sum(ad::square(t)); }), 6.0);
  ad::Parameter v(Matrix{{-1.0}});
  EXPECT_DOUBLE_EQ(scalar_grad(v, [](const ad::Tensor& t) { return ad::sum(ad::relu(t)); }), 0.0);
  ad::Parameter s(Matrix{{0.0}});
  EXPECT_DOUBLE_EQ(scalar_grad(s, [](const ad::Tensor& t) { return ad::sum(ad::sigmoid(t)); }), 0.25);
}

TEST(Autodiff, GradientsAccumulateAcrossBackwardCalls) {
  ad::Parameter w(Matrix{{2.0}});
  w.zero_grad();
  for (int k = 0; k < 2; ++k) {
    ad::Tape tape;
    ad::RecordScope scope(tape);
    tape.backward(ad::sum(ad::scale(w.tensor(), 5.0)));
  }
  EXPECT_DOUBLE_EQ(w.grad()(0, 0), 10.0);
}

TEST(Autodiff, MlpMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  Mlp net({3, 5, 4, 2}, rng);
  ad::NamedParameters params;
  net.collect("net", params);
  const Matrix x = vaca_checks::standard_normal(7, 3, rng);
  auto loss = [&] {
    return ad::mean(ad::softplus(net.forward(ad::constant(x))) + ad::tanh(net.forward(ad::constant(x))));
  };
  for (auto& [n, p] : params) p->zero_grad();
  {
    ad::Tape tape;
    ad::RecordScope scope(tape);
    tape.backward(loss());
  }
  const double eps = 1e-5;
  for (auto& [n, p] : params) {
    const Matrix g = p->grad();
    for (Eigen::Index k = 0; k < p->size(); ++k) {
      const double orig = p->value().data()[k];
      p->value().data()[k] = orig + eps;
      const double up = loss().item();
      p->value().data()[k] = orig - eps;
      const double down = loss().item();
      p->value().data()[k] = orig;
      const double fd = (up - down) / (2 * eps);
      EXPECT_LE(std::abs(fd - g.data()[k]), 1e-3 * std::max({std::abs(fd), std::abs(g.data()[k]), 1e-6}))
          << n << "[" << k << "]";
    }
  }
}

TEST(Autodiff, BackwardIsLinearInTheLoss) {
  std::mt19937_64 rng(2);
  Mlp net({2, 3, 1}, rng);
  ad::NamedParameters params;
  net.collect("net", params);
  const Matrix x = vaca_checks::standard_normal(4, 2, rng);
  auto grads = [&](double c) {
    for (auto& [n, p] : params) p->zero_grad();
    ad::Tape tape;
    ad::RecordScope scope(tape);
    tape.backward(ad::scale(ad::sum(net.forward(ad::constant(x))), c));
    std::vector<Matrix> out;
    for (auto& [n, p] : params) out.push_back(p->grad());
    return out;
  };
  const auto g1 = grads(1.0);
  const auto g3 = grads(3.0);
  for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_LT((3.0 * g1[k] - g3[k]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Autodiff, BackwardRejectsBadLosses) {
  ad::Parameter w(Matrix{{1.0, 2.0}});
  ad::Tape tape;
  ad::RecordScope scope(tape);
  EXPECT_ANY_THROW(tape.backward(ad::square(w.tensor())));  // not a scalar
  ad::Tape other;
  ad::Tensor off_tape;
  {
    ad::RecordScope inner(other);
    off_tape = ad::sum(w.tensor());
  }
  EXPECT_ANY_THROW(tape.backward(off_tape));
}

TEST(Autodiff, NonFiniteValuesRaise) {
  EXPECT_THROW(ad::log(ad::constant(Matrix{{-1.0}})), ad::NumericError);
  EXPECT_THROW(ad::exp(ad::constant(Matrix{{1000.0}})), ad::NumericError);
  EXPECT_THROW(ad::constant(Matrix{{std::numeric_limits<double>::quiet_NaN()}}) + ad::constant(Matrix{{1.0}}),
               ad::NumericError);
}

TEST(Autodiff, ShapeMismatchRaises) {
  EXPECT_THROW(ad::matmul(ad::constant(Matrix::Zero(2, 3)), ad::constant(Matrix::Zero(2, 3))), ad::ShapeError);
  EXPECT_THROW(ad::constant(Matrix::Zero(2, 3)) + ad::constant(Matrix::Zero(3, 2)), ad::ShapeError);
}

TEST(Autodiff, NothingRecordedOutsideScope) {
  ad::Parameter w(Matrix{{1.0}});
  const auto y = ad::square(w.tensor());
  EXPECT_FALSE(ad::recording());
  EXPECT_TRUE(y.node()->inputs.empty());
}

TEST(Adam, FirstStepMovesByLearningRateAgainstTheSign) {
  ad::Parameter w(Matrix{{1.0, -1.0, 0.5}});
  ad::Adam opt({&w}, 0.01);
  {
    ad::Tape tape;
    ad::RecordScope scope(tape);
    tape.backward(ad::sum(w.tensor() * ad::constant(Matrix{{2.0, -3.0, 1e-3}})));
  }
  opt.step();
  EXPECT_NEAR(w.value()(0, 0), 1.0 - 0.01, 1e-8);
  EXPECT_NEAR(w.value()(0, 1), -1.0 + 0.01, 1e-8);
  EXPECT_NEAR(w.value()(0, 2), 0.5 - 0.01, 1e-6);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, ZeroGradientOrZeroRateLeavesParameters) {
  ad::Parameter w(Matrix{{1.0, 2.0}});
  ad::Adam still({&w}, 0.1);
  w.zero_grad();
  still.step();
  EXPECT_EQ(w.value(), (Matrix{{1.0, 2.0}}));
  ad::Adam frozen({&w}, 0.0);
  {
    ad::Tape tape;
    ad::RecordScope scope(tape);
    tape.backward(ad::sum(w.tensor()));
  }
  frozen.step();
  EXPECT_EQ(w.value(), (Matrix{{1.0, 2.0}}));
}

TEST(Checkpoint, RoundTripIsBitwise) {
  std::mt19937_64 rng(3);
  Mlp a({4, 6, 2}, rng);
  Mlp b({4, 6, 2}, rng);
  ad::NamedParameters pa, pb;
  a.collect("net", pa);
  b.collect("net", pb);
  const auto file = std::filesystem::temp_directory_path() / "vaca_unit_params.bin";
  ad::save_parameters(file, pa);
  ad::load_parameters(file, pb);
  for (std::size_t k = 0; k < pa.size(); ++k) {
    ASSERT_EQ(std::memcmp(pa[k].second->value().data(), pb[k].second->value().data(),
                          sizeof(double) * static_cast<std::size_t>(pa[k].second->size())),
              0);
  }
  Mlp c({4, 5, 2}, rng);
  ad::NamedParameters pc;
  c.collect("net", pc);
  EXPECT_THROW(ad::load_parameters(file, pc), ad::CheckpointError);
  ad::NamedParameters renamed;
  a.collect("other", renamed);
  EXPECT_THROW(ad::load_parameters(file, renamed), ad::CheckpointError);
  std::filesystem::remove(file);
  EXPECT_THROW(ad::load_parameters(file, pa), ad::CheckpointError);
}
