#pragma once

#include <random>
#include <string>
#include <vector>

#include "vaca/autodiff.hpp"
#include "vaca/checkpoint.hpp"

namespace vaca {

enum class Activation { None, Relu };

/// y = x W + b with W uniform in ±sqrt(6 / (in + out)) and b = 0.
class Linear {
 public:
  Linear(int in, int out, std::mt19937_64& rng);
  Linear(Linear&&) = default;
  Linear& operator=(Linear&&) = default;

  ad::Tensor forward(const ad::Tensor& x) const;
  int in() const { return static_cast<int>(weight.value().rows()); }
  int out() const { return static_cast<int>(weight.value().cols()); }
  void collect(const std::string& prefix, ad::NamedParameters& out);

  ad::Parameter weight;
  ad::Parameter bias;
};

/// Stack of Linear layers with ReLU between them; `final` applies after the last.
class Mlp {
 public:
  /// widths = {in, hidden..., out}; needs at least two entries.
  Mlp(const std::vector<int>& widths, std::mt19937_64& rng, Activation final = Activation::None);
  Mlp(Mlp&&) = default;
  Mlp& operator=(Mlp&&) = default;

  ad::Tensor forward(const ad::Tensor& x) const;
  int in() const { return layers_.front().in(); }
  int out() const { return layers_.back().out(); }
  void collect(const std::string& prefix, ad::NamedParameters& out);
  std::vector<Linear>& layers() { return layers_; }

 private:
  std::vector<Linear> layers_;
  Activation final_;
};

}  // namespace vaca
