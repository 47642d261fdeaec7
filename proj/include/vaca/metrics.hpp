#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaca/dataset.hpp"
#include "vaca/scm.hpp"
#include "vaca/vaca_model.hpp"

namespace vaca {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// k(x, y) = sum_b exp(-gamma_b * |x - y|^2)
struct KernelSpec {
  std::vector<double> gammas{0.01, 0.1, 1.0, 10.0, 100.0};
  /// Replace `gammas` by {0.25, 0.5, 1, 2, 4} / median pairwise squared distance.
  bool median_heuristic = false;
};

enum class MmdEstimator {
  Verbatim,  // full index grids, every term scaled by 1 / (n (n - 1))
  Textbook   // unbiased U-statistic: diagonals dropped, cross term scaled by 1 / n^2
};

double mmd2(const Matrix& xs, const Matrix& ys, const KernelSpec& kernel = {},
            MmdEstimator estimator = MmdEstimator::Verbatim);

/// Anything that can answer the three query types in normalized units.
class CausalEstimator {
 public:
  virtual ~CausalEstimator() = default;
  virtual Matrix observational(std::size_t n, std::uint64_t seed) const = 0;
  virtual Matrix interventional(NodeIndex node, const std::vector<double>& alpha, std::size_t n,
                                std::uint64_t seed) const = 0;
  /// Counterfactuals for the given dataset rows.
  virtual Matrix counterfactual(const Dataset& data, const std::vector<std::size_t>& rows, NodeIndex node,
                                const std::vector<double>& alpha) const = 0;
};

class VacaEstimator final : public CausalEstimator {
 public:
  explicit VacaEstimator(const VacaModel& model) : model_(model) {}
  Matrix observational(std::size_t n, std::uint64_t seed) const override;
  Matrix interventional(NodeIndex node, const std::vector<double>& alpha, std::size_t n,
                        std::uint64_t seed) const override;
  Matrix counterfactual(const Dataset& data, const std::vector<std::size_t>& rows, NodeIndex node,
                        const std::vector<double>& alpha) const override;

 private:
  const VacaModel& model_;
};

/// Ground truth from the SCM, mapped into the normalized space of `norm`.
class OracleEstimator final : public CausalEstimator {
 public:
  OracleEstimator(const ScmSpec& scm, Normalization norm) : scm_(scm), norm_(std::move(norm)) {}
  Matrix observational(std::size_t n, std::uint64_t seed) const override;
  Matrix interventional(NodeIndex node, const std::vector<double>& alpha, std::size_t n,
                        std::uint64_t seed) const override;
  /// Uses the exogenous draws stored in `data`.
  Matrix counterfactual(const Dataset& data, const std::vector<std::size_t>& rows, NodeIndex node,
                        const std::vector<double>& alpha) const override;

 private:
  std::vector<double> raw_alpha(NodeIndex node, const std::vector<double>& alpha) const;

  const ScmSpec& scm_;
  Normalization norm_;
};

struct GridCell {
  NodeIndex node = 0;
  double multiplier = 0.0;    // grid entry (a category code for discrete nodes)
  std::vector<double> alpha;  // normalized units
};

/// For every non-leaf node: alpha = m * sigma for each multiplier m, where
/// sigma is the empirical std of the node's normalized training column(s).
/// One-dimensional discrete nodes use every category code instead;
/// multi-dimensional nodes with discrete columns are skipped.
std::vector<GridCell> intervention_grid(const CausalGraph& graph, const Dataset& data,
                                        const std::vector<double>& multipliers = {-1.0, -0.5, 0.0, 0.5, 1.0});

struct MetricOptions {
  std::vector<double> multipliers{-1.0, -0.5, 0.0, 0.5, 1.0};
  std::size_t samples = 1000;  // per side, for MMD and moments
  KernelSpec kernel;
  MmdEstimator estimator = MmdEstimator::Verbatim;
  std::uint64_t seed = 0;
  std::size_t cf_rows = 0;     // factual test rows for counterfactuals; 0 = the whole test split
};

struct CellReport {
  std::string node_name;
  NodeIndex node = 0;
  double multiplier = 0.0;
  std::vector<double> alpha;
  double mmd = 0.0;
  double mean_e = 0.0;
  double std_e = 0.0;
  double mse_cf = 0.0;
  double sdse_cf = 0.0;
};

struct MetricReport {
  double mmd_obs = 0.0;
  double mmd_int = 0.0;
  double mean_e = 0.0;
  double std_e = 0.0;
  double mse_cf = 0.0;
  double sdse_cf = 0.0;
  std::vector<CellReport> cells;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  /// report.json plus cells.csv (one row per grid cell).
  void save(const std::filesystem::path& dir) const;
};

/// Observational MMD plus, over the grid, interventional MMD, MeanE and StdE
/// on the descendant columns of each intervened node.
void interventional_suite(const CausalEstimator& model, const CausalEstimator& truth, const CausalGraph& graph,
                          const Dataset& data,
                          const MetricOptions& opts, MetricReport& report);

/// Squared counterfactual error over descendant columns on test rows:
/// per cell T_r = |x_cf - x_cf_hat|^2, MSE = mean(T) / |des|, SDSE = std(T) / |des|.
void counterfactual_suite(const CausalEstimator& model, const CausalEstimator& truth, const CausalGraph& graph,
                          const Dataset& data,
                          const MetricOptions& opts, MetricReport& report);

MetricReport evaluate(const CausalEstimator& model, const CausalEstimator& truth, const CausalGraph& graph,
                          const Dataset& data,
                      const MetricOptions& opts);

/// Column indices of every descendant of `node`.
std::vector<Eigen::Index> descendant_columns(const CausalGraph& graph, const std::vector<ColumnSlice>& slices,
                                             NodeIndex node);

}  // namespace vaca
