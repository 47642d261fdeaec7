#include "vaca/scm.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace vaca {

ExogenousPrior ExogenousPrior::normal(double mean, double variance) {
  if (!(variance > 0.0)) throw ScmError("normal prior needs a positive variance");
  ExogenousPrior p;
  p.kind_ = Kind::Normal;
  p.means_ = {mean};
  p.variances_ = {variance};
  return p;
}

ExogenousPrior ExogenousPrior::mixture(std::vector<double> weights, std::vector<double> means,
                                       std::vector<double> variances) {
  if (weights.empty() || weights.size() != means.size() || weights.size() != variances.size()) {
    throw ScmError("mixture prior needs matching, non-empty weight/mean/variance lists");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ScmError("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ScmError("mixture weights must sum to one");
  for (double v : variances) {
    if (!(v > 0.0)) throw ScmError("mixture variances must be positive");
  }
  ExogenousPrior p;
  p.kind_ = Kind::MixtureOfGaussians;
  p.weights_ = std::move(weights);
  p.means_ = std::move(means);
  p.variances_ = std::move(variances);
  return p;
}

ExogenousPrior ExogenousPrior::bernoulli(double prob) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw ScmError("bernoulli probability must lie in [0, 1]");
  ExogenousPrior p;
  p.kind_ = Kind::Bernoulli;
  p.p_ = prob;
  return p;
}

ExogenousPrior ExogenousPrior::gamma(double shape, double scale) {
  return shifted_gamma(shape, scale, 0.0).with_kind(Kind::Gamma);
}

ExogenousPrior ExogenousPrior::shifted_gamma(double shape, double scale, double shift) {
  if (!(shape > 0.0 && scale > 0.0)) throw ScmError("gamma prior needs positive shape and scale");
  ExogenousPrior p;
  p.kind_ = Kind::ShiftedGamma;
  p.shape_ = shape;
  p.scale_ = scale;
  p.shift_ = shift;
  return p;
}

ExogenousPrior ExogenousPrior::categorical(std::vector<double> probs) {
  if (probs.size() < 2) throw ScmError("categorical prior needs at least two categories");
  std::vector<double> means(probs.size());
  std::iota(means.begin(), means.end(), 0.0);
  double total = 0.0;
  for (double w : probs) {
    if (w < 0.0) throw ScmError("categorical probabilities must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ScmError("categorical probabilities must sum to one");
  ExogenousPrior p;
  p.kind_ = Kind::Categorical;
  p.weights_ = std::move(probs);
  p.means_ = std::move(means);
  return p;
}

ExogenousPrior ExogenousPrior::with_kind(Kind k) const {
  ExogenousPrior p = *this;
  p.kind_ = k;
  return p;
}

double ExogenousPrior::sample(std::mt19937_64& rng) const {
  switch (kind_) {
    case Kind::Normal: {
      std::normal_distribution<double> dist(means_[0], std::sqrt(variances_[0]));
      return dist(rng);
    }
    case Kind::MixtureOfGaussians: {
      std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
      const std::size_t c = pick(rng);
      std::normal_distribution<double> dist(means_[c], std::sqrt(variances_[c]));
      return dist(rng);
    }
    case Kind::Bernoulli: {
      std::bernoulli_distribution dist(p_);
      return dist(rng) ? 1.0 : 0.0;
    }
    case Kind::Gamma:
    case Kind::ShiftedGamma: {
      std::gamma_distribution<double> dist(shape_, scale_);
      return dist(rng) + shift_;
    }
    case Kind::Categorical: {
      std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
      return static_cast<double>(pick(rng));
    }
  }
  return 0.0;
}

double ExogenousPrior::mean() const {
  switch (kind_) {
    case Kind::Normal:
      return means_[0];
    case Kind::MixtureOfGaussians:
    case Kind::Categorical: {
      double m = 0.0;
      for (std::size_t c = 0; c < weights_.size(); ++c) m += weights_[c] * means_[c];
      return m;
    }
    case Kind::Bernoulli:
      return p_;
    case Kind::Gamma:
    case Kind::ShiftedGamma:
      return shape_ * scale_ + shift_;
  }
  return 0.0;
}

double ExogenousPrior::variance() const {
  switch (kind_) {
    case Kind::Normal:
      return variances_[0];
    case Kind::MixtureOfGaussians: {
      const double m = mean();
      double second = 0.0;
      for (std::size_t c = 0; c < weights_.size(); ++c) {
        second += weights_[c] * (variances_[c] + means_[c] * means_[c]);
      }
      return second - m * m;
    }
    case Kind::Categorical: {
      const double m = mean();
      double second = 0.0;
      for (std::size_t c = 0; c < weights_.size(); ++c) second += weights_[c] * means_[c] * means_[c];
      return second - m * m;
    }
    case Kind::Bernoulli:
      return p_ * (1.0 - p_);
    case Kind::Gamma:
    case Kind::ShiftedGamma:
      return shape_ * scale_ * scale_;
  }
  return 0.0;
}

std::string ExogenousPrior::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Normal:
      os << "Normal(" << means_[0] << ", " << variances_[0] << ")";
      break;
    case Kind::MixtureOfGaussians:
      os << "MoG(";
      for (std::size_t c = 0; c < weights_.size(); ++c) {
        os << (c ? " + " : "") << weights_[c] << " N(" << means_[c] << ", " << variances_[c] << ")";
      }
      os << ")";
      break;
    case Kind::Bernoulli:
      os << "Bernoulli(" << p_ << ")";
      break;
    case Kind::Gamma:
      os << "Gamma(" << shape_ << ", " << scale_ << ")";
      break;
    case Kind::ShiftedGamma:
      os << "Gamma(" << shape_ << ", " << scale_ << ") + " << shift_;
      break;
    case Kind::Categorical:
      os << "Categorical(";
      for (std::size_t c = 0; c < weights_.size(); ++c) os << (c ? ", " : "") << weights_[c];
      os << ")";
      break;
  }
  return os.str();
}

void ScmSpec::validate() const {
  const std::size_t d = graph.size();
  if (priors.size() != d || equations.size() != d) {
    throw ScmError("SCM '" + name + "' needs one prior list and one equation per node");
  }
  for (NodeIndex i = 0; i < d; ++i) {
    if (equations[i].node != i || !equations[i].evaluate) {
      throw ScmError("SCM '" + name + "' has a missing or misplaced equation for node " +
                     graph.node(i).name);
    }
  }
}

std::size_t ScmSpec::x_width() const {
  std::size_t w = 0;
  for (const auto& n : graph.nodes()) w += n.dim();
  return w;
}

std::size_t ScmSpec::u_width() const {
  std::size_t w = 0;
  for (const auto& p : priors) w += p.size();
  return w;
}

std::vector<ColumnSlice> ScmSpec::x_slices() const {
  std::vector<ColumnSlice> out;
  std::size_t off = 0;
  for (const auto& n : graph.nodes()) {
    out.push_back({off, n.dim()});
    off += n.dim();
  }
  return out;
}

std::vector<ColumnSlice> ScmSpec::u_slices() const {
  std::vector<ColumnSlice> out;
  std::size_t off = 0;
  for (const auto& p : priors) {
    out.push_back({off, p.size()});
    off += p.size();
  }
  return out;
}

std::vector<ColumnKind> ScmSpec::column_kinds() const {
  std::vector<ColumnKind> out;
  for (const auto& n : graph.nodes()) out.insert(out.end(), n.columns.begin(), n.columns.end());
  return out;
}

RowVector evaluate_scm(const ScmSpec& scm, std::span<const double> u, const Intervention* intervention) {
  const auto xs = scm.x_slices();
  const auto us = scm.u_slices();
  if (u.size() != scm.u_width()) throw ScmError("exogenous row has the wrong width");
  RowVector x = RowVector::Zero(static_cast<Eigen::Index>(scm.x_width()));
  std::vector<double> parent_values;
  for (NodeIndex i : scm.graph.topological_order()) {
    std::span<double> out(x.data() + xs[i].offset, xs[i].width);
    if (intervention && intervention->node == i) {
      if (intervention->value.size() != xs[i].width) {
        throw ScmError("intervention value has the wrong dimension for node " + scm.graph.node(i).name);
      }
      std::copy(intervention->value.begin(), intervention->value.end(), out.begin());
      continue;
    }
    parent_values.clear();
    for (NodeIndex p : scm.graph.parents(i)) {
      for (std::size_t k = 0; k < xs[p].width; ++k) parent_values.push_back(x[xs[p].offset + k]);
    }
    scm.equations[i].evaluate(parent_values, u.subspan(us[i].offset, us[i].width), out);
  }
  return x;
}

Matrix sample_exogenous(const ScmSpec& scm, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto us = scm.u_slices();
  Matrix u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(scm.u_width()));
  for (std::size_t r = 0; r < n; ++r) {
    for (NodeIndex i = 0; i < scm.priors.size(); ++i) {
      for (std::size_t k = 0; k < scm.priors[i].size(); ++k) {
        u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(us[i].offset + k)) =
            scm.priors[i][k].sample(rng);
      }
    }
  }
  return u;
}

namespace {

Dataset push_forward(const ScmSpec& scm, Matrix u, SplitSizes splits, std::uint64_t seed,
                     const Intervention* intervention) {
  scm.validate();
  Dataset ds;
  for (const auto& n : scm.graph.nodes()) ds.node_names.push_back(n.name);
  ds.node_slices = scm.x_slices();
  ds.column_kinds = scm.column_kinds();
  ds.u_slices = scm.u_slices();
  ds.splits = splits;
  ds.seed = seed;
  ds.source = scm.sem.empty() ? scm.name : scm.name + "/" + scm.sem;
  ds.x.resize(u.rows(), static_cast<Eigen::Index>(scm.x_width()));
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    ds.x.row(r) = evaluate_scm(scm, std::span<const double>(u.row(r).data(), static_cast<std::size_t>(u.cols())),
                               intervention);
  }
  if (!ds.x.allFinite()) throw ScmError("SCM '" + scm.name + "' produced non-finite values");
  ds.u = std::move(u);
  return ds;
}

}  // namespace

Dataset sample_observational(const ScmSpec& scm, SplitSizes splits, std::uint64_t seed) {
  if (splits.total() == 0) throw ScmError("sample size must be at least 1");
  return push_forward(scm, sample_exogenous(scm, splits.total(), seed), splits, seed, nullptr);
}

Dataset sample_observational(const ScmSpec& scm, std::size_t n, std::uint64_t seed) {
  return sample_observational(scm, SplitSizes::halves(n), seed);
}

Dataset sample_interventional(const ScmSpec& scm, const Intervention& intervention, std::size_t n,
                              std::uint64_t seed) {
  if (n == 0) throw ScmError("sample size must be at least 1");
  if (intervention.node >= scm.graph.size()) throw ScmError("intervened node out of range");
  for (double v : intervention.value) {
    if (!std::isfinite(v)) throw ScmError("intervention value must be finite");
  }
  return push_forward(scm, sample_exogenous(scm, n, seed), SplitSizes{n, 0, 0}, seed, &intervention);
}

RowVector counterfactual_oracle(const ScmSpec& scm, const Dataset& data, std::size_t row,
                                const Intervention& intervention) {
  if (!data.u) throw AbductionUnavailable("dataset does not carry stored exogenous draws");
  if (row >= data.rows()) throw std::out_of_range("factual row out of range");
  if (static_cast<std::size_t>(data.u->cols()) != scm.u_width()) {
    throw AbductionUnavailable("stored exogenous draws do not match the SCM");
  }
  const auto r = static_cast<Eigen::Index>(row);
  return evaluate_scm(scm, std::span<const double>(data.u->row(r).data(), scm.u_width()), &intervention);
}

}  // namespace vaca
