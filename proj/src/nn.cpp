#include "vaca/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace vaca {

namespace {

Matrix glorot(int in, int out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(in, out);
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
  return w;
}

}  // namespace

Linear::Linear(int in, int out, std::mt19937_64& rng)
    : weight((in > 0 && out > 0) ? glorot(in, out, rng) : throw std::invalid_argument("Linear widths must be positive")),
      bias(Matrix::Zero(1, out)) {}

ad::Tensor Linear::forward(const ad::Tensor& x) const {
  return ad::add_row(ad::matmul(x, weight.tensor()), bias.tensor());
}

void Linear::collect(const std::string& prefix, ad::NamedParameters& out) {
  out.emplace_back(prefix + ".weight", &weight);
  out.emplace_back(prefix + ".bias", &bias);
}

Mlp::Mlp(const std::vector<int>& widths, std::mt19937_64& rng, Activation final) : final_(final) {
  if (widths.size() < 2) throw std::invalid_argument("an MLP needs input and output widths");
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) layers_.emplace_back(widths[k], widths[k + 1], rng);
}

ad::Tensor Mlp::forward(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    h = layers_[k].forward(h);
    if (k + 1 < layers_.size() || final_ == Activation::Relu) h = ad::relu(h);
  }
  return h;
}

void Mlp::collect(const std::string& prefix, ad::NamedParameters& out) {
  for (std::size_t k = 0; k < layers_.size(); ++k) layers_[k].collect(prefix + "." + std::to_string(k), out);
}

}  // namespace vaca
