#include "vaca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "vaca/queries.hpp"

namespace vaca {

using nlohmann::json;

namespace {

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix d(a.rows(), b.rows());
  d.noalias() = -2.0 * a * b.transpose();
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

double kernel_sum(const Matrix& a, const Matrix& b, const std::vector<double>& gammas) {
  const Matrix d = squared_distances(a, b);
  double total = 0.0;
  for (double g : gammas) total += (-g * d.array()).exp().sum();
  return total;
}

std::vector<double> median_gammas(const Matrix& xs, const Matrix& ys) {
  Matrix pooled(xs.rows() + ys.rows(), xs.cols());
  pooled << xs, ys;
  const Matrix d = squared_distances(pooled, pooled);
  std::vector<double> off;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) off.push_back(d(i, j));
  }
  if (off.empty()) throw MetricError("median heuristic needs at least two points");
  std::nth_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(off.size() / 2), off.end());
  const double med = std::max(off[off.size() / 2], 1e-12);
  return {0.25 / med, 0.5 / med, 1.0 / med, 2.0 / med, 4.0 / med};
}

Matrix take_columns(const Matrix& m, const std::vector<Eigen::Index>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
  return out;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

double column_std(const Eigen::Ref<const Vector>& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().mean());
}

std::uint64_t cell_seed(std::uint64_t base, std::size_t cell) { return base + 7919ULL * (cell + 1); }

}  // namespace

double mmd2(const Matrix& xs, const Matrix& ys, const KernelSpec& kernel, MmdEstimator estimator) {
  if (xs.cols() != ys.cols()) throw MetricError("mmd2: sample sets have different widths");
  const auto n = static_cast<double>(xs.rows());
  const auto m = static_cast<double>(ys.rows());
  if (xs.rows() < 2 || ys.rows() < 2) throw MetricError("mmd2 needs at least two rows per sample set");
  const std::vector<double> gammas = kernel.median_heuristic ? median_gammas(xs, ys) : kernel.gammas;
  for (double g : gammas) {
    if (!(g > 0.0)) throw MetricError("kernel bandwidth coefficients must be positive");
  }
  const double sxx = kernel_sum(xs, xs, gammas);
  const double syy = kernel_sum(ys, ys, gammas);
  const double sxy = kernel_sum(xs, ys, gammas);
  if (estimator == MmdEstimator::Verbatim) {
    if (xs.rows() != ys.rows()) throw MetricError("mmd2 needs equal sample sizes");
    return (sxx + syy - 2.0 * sxy) / (n * (n - 1.0));
  }
  const double diag = static_cast<double>(gammas.size());  // k(x, x) for every x
  return (sxx - n * diag) / (n * (n - 1.0)) + (syy - m * diag) / (m * (m - 1.0)) - 2.0 * sxy / (n * m);
}

Matrix VacaEstimator::observational(std::size_t n, std::uint64_t seed) const {
  return sample_observational_vaca(model_, n, seed).samples;
}

Matrix VacaEstimator::interventional(NodeIndex node, const std::vector<double>& alpha, std::size_t n,
                                     std::uint64_t seed) const {
  return sample_interventional_vaca(model_, InterventionSpec{node, alpha, false}, n, seed).samples;
}

Matrix VacaEstimator::counterfactual(const Dataset& data, const std::vector<std::size_t>& rows, NodeIndex node,
                                     const std::vector<double>& alpha) const {
  return counterfactual_vaca(model_, take_rows(data.x, rows), InterventionSpec{node, alpha, false}, CfMode::Mean);
}

std::vector<double> OracleEstimator::raw_alpha(NodeIndex node, const std::vector<double>& alpha) const {
  const auto s = scm_.x_slices().at(node);
  if (alpha.size() != s.width) throw MetricError("intervention value has the wrong dimension");
  std::vector<double> raw;
  for (std::size_t k = 0; k < s.width; ++k) raw.push_back(norm_.invert(s.offset + k, alpha[k]));
  return raw;
}

Matrix OracleEstimator::observational(std::size_t n, std::uint64_t seed) const {
  return norm_.apply(sample_observational(scm_, SplitSizes{n, 0, 0}, seed).x);
}

Matrix OracleEstimator::interventional(NodeIndex node, const std::vector<double>& alpha, std::size_t n,
                                       std::uint64_t seed) const {
  return norm_.apply(sample_interventional(scm_, Intervention{node, raw_alpha(node, alpha)}, n, seed).x);
}

Matrix OracleEstimator::counterfactual(const Dataset& data, const std::vector<std::size_t>& rows, NodeIndex node,
                                       const std::vector<double>& alpha) const {
  const Intervention iv{node, raw_alpha(node, alpha)};
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(scm_.x_width()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = counterfactual_oracle(scm_, data, rows[r], iv);
  }
  return norm_.apply(out);
}

std::vector<Eigen::Index> descendant_columns(const CausalGraph& graph, const std::vector<ColumnSlice>& slices,
                                             NodeIndex node) {
  std::vector<Eigen::Index> cols;
  for (NodeIndex d : graph.descendants(node)) {
    for (std::size_t k = 0; k < slices[d].width; ++k) cols.push_back(static_cast<Eigen::Index>(slices[d].offset + k));
  }
  return cols;
}

std::vector<GridCell> intervention_grid(const CausalGraph& graph, const Dataset& data,
                                        const std::vector<double>& multipliers) {
  std::vector<GridCell> grid;
  const Matrix train = data.train();
  for (NodeIndex i = 0; i < graph.size(); ++i) {
    if (graph.is_leaf(i)) continue;
    const auto& node = graph.node(i);
    const auto& s = data.node_slices.at(i);
    const bool any_discrete =
        std::any_of(node.columns.begin(), node.columns.end(), [](const ColumnKind& c) { return c.is_discrete(); });
    if (any_discrete) {
      if (node.dim() != 1) continue;
      for (int code = 0; code < node.columns[0].cardinality; ++code) {
        grid.push_back({i, static_cast<double>(code), {static_cast<double>(code)}});
      }
      continue;
    }
    for (double m : multipliers) {
      GridCell cell{i, m, {}};
      for (std::size_t k = 0; k < s.width; ++k) {
        cell.alpha.push_back(m * column_std(train.col(static_cast<Eigen::Index>(s.offset + k))));
      }
      grid.push_back(std::move(cell));
    }
  }
  return grid;
}

namespace {

CellReport& cell_entry(MetricReport& report, const CausalGraph& graph, const GridCell& cell) {
  for (auto& c : report.cells) {
    if (c.node == cell.node && c.multiplier == cell.multiplier) return c;
  }
  CellReport c;
  c.node = cell.node;
  c.node_name = graph.node(cell.node).name;
  c.multiplier = cell.multiplier;
  c.alpha = cell.alpha;
  report.cells.push_back(std::move(c));
  return report.cells.back();
}

}  // namespace

void interventional_suite(const CausalEstimator& model, const CausalEstimator& truth, const CausalGraph& graph,
                          const Dataset& data, const MetricOptions& opts, MetricReport& report) {
  report.mmd_obs = mmd2(truth.observational(opts.samples, opts.seed), model.observational(opts.samples, opts.seed),
                        opts.kernel, opts.estimator);
  const auto grid = intervention_grid(graph, data, opts.multipliers);
  if (grid.empty()) return;
  double mmd_sum = 0.0, mean_sum = 0.0, std_sum = 0.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const auto& cell = grid[c];
    const auto cols = descendant_columns(graph, data.node_slices, cell.node);
    const std::uint64_t seed = cell_seed(opts.seed, c);
    const Matrix t = take_columns(truth.interventional(cell.node, cell.alpha, opts.samples, seed), cols);
    const Matrix e = take_columns(model.interventional(cell.node, cell.alpha, opts.samples, seed), cols);
    CellReport& out = cell_entry(report, graph, cell);
    out.mmd = mmd2(t, e, opts.kernel, opts.estimator);
    double me = 0.0, se = 0.0;
    for (Eigen::Index k = 0; k < t.cols(); ++k) {
      me += std::pow(t.col(k).mean() - e.col(k).mean(), 2);
      se += std::pow(column_std(t.col(k)) - column_std(e.col(k)), 2);
    }
    out.mean_e = me / static_cast<double>(t.cols());
    out.std_e = se / static_cast<double>(t.cols());
    mmd_sum += out.mmd;
    mean_sum += out.mean_e;
    std_sum += out.std_e;
  }
  const auto cells = static_cast<double>(grid.size());
  report.mmd_int = mmd_sum / cells;
  report.mean_e = mean_sum / cells;
  report.std_e = std_sum / cells;
}

void counterfactual_suite(const CausalEstimator& model, const CausalEstimator& truth, const CausalGraph& graph,
                          const Dataset& data, const MetricOptions& opts, MetricReport& report) {
  std::size_t count = data.splits.test;
  if (opts.cf_rows > 0) count = std::min(count, opts.cf_rows);
  if (count == 0) throw MetricError("counterfactual evaluation needs test rows");
  std::vector<std::size_t> rows(count);
  for (std::size_t r = 0; r < count; ++r) rows[r] = data.test_offset() + r;

  const auto grid = intervention_grid(graph, data, opts.multipliers);
  if (grid.empty()) return;
  double mse_sum = 0.0, sd_sum = 0.0;
  for (const auto& cell : grid) {
    const auto cols = descendant_columns(graph, data.node_slices, cell.node);
    const Matrix t = take_columns(truth.counterfactual(data, rows, cell.node, cell.alpha), cols);
    const Matrix e = take_columns(model.counterfactual(data, rows, cell.node, cell.alpha), cols);
    const Vector sq = (t - e).rowwise().squaredNorm();
    const auto des = static_cast<double>(cols.size());
    CellReport& out = cell_entry(report, graph, cell);
    out.mse_cf = sq.mean() / des;
    out.sdse_cf = column_std(sq) / des;
    mse_sum += out.mse_cf;
    sd_sum += out.sdse_cf;
  }
  report.mse_cf = mse_sum / static_cast<double>(grid.size());
  report.sdse_cf = sd_sum / static_cast<double>(grid.size());
}

MetricReport evaluate(const CausalEstimator& model, const CausalEstimator& truth, const CausalGraph& graph,
                      const Dataset& data, const MetricOptions& opts) {
  MetricReport report;
  interventional_suite(model, truth, graph, data, opts, report);
  counterfactual_suite(model, truth, graph, data, opts, report);
  return report;
}

json MetricReport::to_json() const {
  json cells_json = json::array();
  for (const auto& c : cells) {
    cells_json.push_back({{"node", c.node_name},
                          {"node_index", c.node},
                          {"multiplier", c.multiplier},
                          {"alpha", c.alpha},
                          {"mmd", c.mmd},
                          {"mean_e", c.mean_e},
                          {"std_e", c.std_e},
                          {"mse_cf", c.mse_cf},
                          {"sdse_cf", c.sdse_cf}});
  }
  return {{"mmd_obs", mmd_obs}, {"mmd_int", mmd_int}, {"mean_e", mean_e}, {"std_e", std_e},
          {"mse_cf", mse_cf},   {"sdse_cf", sdse_cf}, {"cells", cells_json}};
}

MetricReport MetricReport::from_json(const json& j) {
  MetricReport r;
  r.mmd_obs = j.at("mmd_obs").get<double>();
  r.mmd_int = j.at("mmd_int").get<double>();
  r.mean_e = j.at("mean_e").get<double>();
  r.std_e = j.at("std_e").get<double>();
  r.mse_cf = j.at("mse_cf").get<double>();
  r.sdse_cf = j.at("sdse_cf").get<double>();
  for (const auto& c : j.at("cells")) {
    CellReport cell;
    cell.node_name = c.at("node").get<std::string>();
    cell.node = c.at("node_index").get<NodeIndex>();
    cell.multiplier = c.at("multiplier").get<double>();
    cell.alpha = c.at("alpha").get<std::vector<double>>();
    cell.mmd = c.at("mmd").get<double>();
    cell.mean_e = c.at("mean_e").get<double>();
    cell.std_e = c.at("std_e").get<double>();
    cell.mse_cf = c.at("mse_cf").get<double>();
    cell.sdse_cf = c.at("sdse_cf").get<double>();
    r.cells.push_back(std::move(cell));
  }
  return r;
}

void MetricReport::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    out.precision(std::numeric_limits<double>::max_digits10);
    out << to_json().dump(2) << '\n';
  }
  std::ofstream csv(dir / "cells.csv");
  csv.precision(std::numeric_limits<double>::max_digits10);
  csv << "node,multiplier,mmd,mean_e,std_e,mse_cf,sdse_cf\n";
  for (const auto& c : cells) {
    csv << c.node_name << ',' << c.multiplier << ',' << c.mmd << ',' << c.mean_e << ',' << c.std_e << ','
        << c.mse_cf << ',' << c.sdse_cf << '\n';
  }
  if (!csv) throw MetricError("cannot write metric report to " + dir.string());
}

}  // namespace vaca
