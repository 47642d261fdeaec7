#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaca/causal_graph.hpp"
#include "vaca/dataset.hpp"
#include "vaca/matrix.hpp"

namespace vaca {

class ScmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AbductionUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Distribution of one exogenous coordinate. Normal and mixture components
/// are parameterized by variance, Gamma by (shape, scale).
class ExogenousPrior {
 public:
  enum class Kind { Normal, MixtureOfGaussians, Bernoulli, Gamma, ShiftedGamma, Categorical };

  static ExogenousPrior normal(double mean, double variance);
  static ExogenousPrior mixture(std::vector<double> weights, std::vector<double> means,
                                std::vector<double> variances);
  static ExogenousPrior bernoulli(double p);
  static ExogenousPrior gamma(double shape, double scale);
  static ExogenousPrior shifted_gamma(double shape, double scale, double shift);
  /// Integer codes 0..K-1 with the given probabilities.
  static ExogenousPrior categorical(std::vector<double> probs);

  Kind kind() const { return kind_; }
  double sample(std::mt19937_64& rng) const;
  double mean() const;
  double variance() const;
  std::string describe() const;

 private:
  ExogenousPrior with_kind(Kind k) const;

  Kind kind_ = Kind::Normal;
  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> variances_;
  double p_ = 0.5;
  double shape_ = 1.0;
  double scale_ = 1.0;
  double shift_ = 0.0;
};

/// Deterministic mechanism of one node. `parents` holds the concatenated
/// values of pa(node) in ascending node order, `u` the node's own exogenous
/// draw; the result has the node's dimension.
using EquationFn =
    std::function<void(std::span<const double> parents, std::span<const double> u, std::span<double> out)>;

struct StructuralEquation {
  NodeIndex node = 0;
  EquationFn evaluate;
};

struct ScmSpec {
  std::string name;
  std::string sem;  // LIN | NLIN | NADD for the synthetic graphs, empty otherwise
  CausalGraph graph;
  std::vector<std::vector<ExogenousPrior>> priors;  // per node, one per exogenous coordinate
  std::vector<StructuralEquation> equations;        // per node

  void validate() const;
  std::size_t x_width() const;
  std::size_t u_width() const;
  std::vector<ColumnSlice> x_slices() const;
  std::vector<ColumnSlice> u_slices() const;
  std::vector<ColumnKind> column_kinds() const;
};

/// Single-node intervention do(X_node = value), value in raw data units.
struct Intervention {
  NodeIndex node = 0;
  std::vector<double> value;
};

/// Returns one of the SCMs shipped with the library. `sem` selects the
/// LIN/NLIN/NADD family for collider, triangle, chain and mgraph and must be
/// empty (or "fixed") for loan and adult.
ScmSpec builtin_scm(const std::string& name, const std::string& sem = "");
std::vector<std::string> builtin_scm_names();

/// Pushes exogenous values through the equations in topological order,
/// replacing the mechanism of the intervened node (if any) by its constant.
RowVector evaluate_scm(const ScmSpec& scm, std::span<const double> u,
                       const Intervention* intervention = nullptr);

/// Draws n exogenous rows (node by node, row by row) from the priors.
Matrix sample_exogenous(const ScmSpec& scm, std::size_t n, std::uint64_t seed);

Dataset sample_observational(const ScmSpec& scm, std::size_t n, std::uint64_t seed);
Dataset sample_observational(const ScmSpec& scm, SplitSizes splits, std::uint64_t seed);
Dataset sample_interventional(const ScmSpec& scm, const Intervention& intervention, std::size_t n,
                              std::uint64_t seed);

/// Exact counterfactual of a stored factual row: reuse its exogenous draw,
/// apply the intervention, re-evaluate. Returned in raw units.
RowVector counterfactual_oracle(const ScmSpec& scm, const Dataset& data, std::size_t row,
                                const Intervention& intervention);

}  // namespace vaca
