#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaca/causal_graph.hpp"
#include "vaca/matrix.hpp"

namespace vaca {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ColumnSlice {
  std::size_t offset = 0;
  std::size_t width = 0;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + valid + test; }
  /// 50/25/25 split of n rows (5000/2500/2500 for n = 10000).
  static SplitSizes halves(std::size_t n);
  /// 80/10/10 split, used for external tabular data.
  static SplitSizes eighty(std::size_t n);
};

/// Per-column standardization fitted on the training split. Discrete
/// columns keep mean 0 / std 1 and `applied == false`.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> applied;

  Matrix apply(const Matrix& raw) const;
  Matrix invert(const Matrix& normalized) const;
  double apply(std::size_t column, double raw) const;
  double invert(std::size_t column, double normalized) const;
};

/// Observations (rows = samples, ordered train | valid | test), optional
/// stored exogenous draws, and column metadata.
struct Dataset {
  std::vector<std::string> node_names;
  std::vector<ColumnSlice> node_slices;
  std::vector<ColumnKind> column_kinds;
  Matrix x;
  std::optional<Matrix> u;  // raw exogenous draws, when generated by an oracle
  std::vector<ColumnSlice> u_slices;
  SplitSizes splits;
  std::optional<Normalization> normalization;  // set once `x` is normalized
  std::uint64_t seed = 0;
  std::string source;  // e.g. "triangle/NLIN" or a CSV path

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t width() const { return static_cast<std::size_t>(x.cols()); }
  bool normalized() const { return normalization.has_value(); }
  Matrix train() const { return x.topRows(static_cast<Eigen::Index>(splits.train)); }
  Matrix valid() const {
    return x.middleRows(static_cast<Eigen::Index>(splits.train), static_cast<Eigen::Index>(splits.valid));
  }
  Matrix test() const { return x.bottomRows(static_cast<Eigen::Index>(splits.test)); }
  std::size_t test_offset() const { return splits.train + splits.valid; }
  /// x in raw units regardless of normalization state.
  Matrix raw_x() const;
  std::vector<std::string> column_names() const;
  void validate() const;
};

/// Standardizes continuous columns with training-split statistics. Throws
/// DataError on a zero-variance continuous column or an empty train split.
Dataset normalize(const Dataset& data);
Dataset denormalize(const Dataset& data);
/// Fits the statistics only.
Normalization fit_normalization(const Matrix& train_rows, const std::vector<ColumnKind>& kinds);

/// Directory layout: header.json + x.csv (raw units) [+ u.csv].
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Reads a headered CSV of numbers.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& values);

/// Builds a dataset from a CSV whose columns are named after the graph
/// nodes (`name` for 1-d nodes, `name.k` for multi-dimensional ones).
/// Rows are shuffled with `seed` and split 80/10/10.
Dataset dataset_from_table(const CausalGraph& graph, const CsvTable& table, std::uint64_t seed,
                           std::vector<double>* labels = nullptr, const std::string& label_column = "");

}  // namespace vaca
