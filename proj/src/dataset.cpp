#include "vaca/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace vaca {

using nlohmann::json;

SplitSizes SplitSizes::halves(std::size_t n) {
  const std::size_t train = n / 2;
  const std::size_t valid = n / 4;
  return {train, valid, n - train - valid};
}

SplitSizes SplitSizes::eighty(std::size_t n) {
  const std::size_t train = (n * 8) / 10;
  const std::size_t valid = n / 10;
  return {train, valid, n - train - valid};
}

Matrix Normalization::apply(const Matrix& raw) const {
  Matrix out = raw;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (applied[c]) out.col(c) = (out.col(c).array() - mean[c]) / stddev[c];
  }
  return out;
}

Matrix Normalization::invert(const Matrix& normalized) const {
  Matrix out = normalized;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (applied[c]) out.col(c) = out.col(c).array() * stddev[c] + mean[c];
  }
  return out;
}

double Normalization::apply(std::size_t column, double raw) const {
  return applied.at(column) ? (raw - mean[column]) / stddev[column] : raw;
}

double Normalization::invert(std::size_t column, double normalized) const {
  return applied.at(column) ? normalized * stddev[column] + mean[column] : normalized;
}

Matrix Dataset::raw_x() const { return normalization ? normalization->invert(x) : x; }

std::vector<std::string> Dataset::column_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < node_names.size(); ++i) {
    if (node_slices[i].width == 1) {
      names.push_back(node_names[i]);
    } else {
      for (std::size_t k = 0; k < node_slices[i].width; ++k) names.push_back(node_names[i] + "." + std::to_string(k));
    }
  }
  return names;
}

void Dataset::validate() const {
  if (node_names.size() != node_slices.size()) throw DataError("node names and slices disagree");
  std::size_t off = 0;
  for (const auto& s : node_slices) {
    if (s.offset != off || s.width == 0) throw DataError("node slices do not partition the columns");
    off += s.width;
  }
  if (off != width()) throw DataError("node slices do not cover the data width");
  if (column_kinds.size() != width()) throw DataError("one column kind per data column is required");
  if (splits.total() != rows()) throw DataError("split sizes do not add up to the row count");
  if (u && static_cast<std::size_t>(u->rows()) != rows()) throw DataError("exogenous rows do not match data rows");
  if (normalization && normalization->mean.size() != width()) throw DataError("normalization width mismatch");
}

Normalization fit_normalization(const Matrix& train_rows, const std::vector<ColumnKind>& kinds) {
  if (train_rows.rows() == 0) throw DataError("cannot normalize: training split is empty");
  if (static_cast<std::size_t>(train_rows.cols()) != kinds.size()) throw DataError("column kinds do not match data");
  Normalization norm;
  const auto n = static_cast<double>(train_rows.rows());
  for (Eigen::Index c = 0; c < train_rows.cols(); ++c) {
    if (kinds[c].is_discrete()) {
      norm.mean.push_back(0.0);
      norm.stddev.push_back(1.0);
      norm.applied.push_back(false);
      continue;
    }
    const double m = train_rows.col(c).mean();
    const double var = (train_rows.col(c).array() - m).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
      throw DataError("continuous column " + std::to_string(c) + " has zero variance on the training split");
    }
    norm.mean.push_back(m);
    norm.stddev.push_back(sd);
    norm.applied.push_back(true);
  }
  return norm;
}

Dataset normalize(const Dataset& data) {
  if (data.normalized()) return data;
  Dataset out = data;
  out.normalization = fit_normalization(data.train(), data.column_kinds);
  out.x = out.normalization->apply(data.x);
  return out;
}

Dataset denormalize(const Dataset& data) {
  if (!data.normalized()) return data;
  Dataset out = data;
  out.x = data.normalization->invert(data.x);
  out.normalization.reset();
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      out.push_back(cell);
    }
    return out;
  };
  table.header = split(line);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(table.header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size()) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) table.values(r, c) = rows[r][c];
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values) {
  if (static_cast<std::size_t>(values.cols()) != header.size()) throw DataError("CSV header/column mismatch");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << values(r, c);
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

json slices_to_json(const std::vector<ColumnSlice>& slices) {
  json arr = json::array();
  for (const auto& s : slices) arr.push_back({s.offset, s.width});
  return arr;
}

std::vector<ColumnSlice> slices_from_json(const json& arr) {
  std::vector<ColumnSlice> out;
  for (const auto& s : arr) out.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  return out;
}

std::vector<std::string> u_names(const Dataset& d) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d.u_slices.size(); ++i) {
    for (std::size_t k = 0; k < d.u_slices[i].width; ++k) {
      names.push_back("U_" + d.node_names[i] + (d.u_slices[i].width > 1 ? "." + std::to_string(k) : ""));
    }
  }
  return names;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  data.validate();
  std::filesystem::create_directories(dir);
  json h;
  h["node_names"] = data.node_names;
  h["node_slices"] = slices_to_json(data.node_slices);
  std::vector<std::string> kinds;
  for (const auto& k : data.column_kinds) kinds.push_back(to_string(k));
  h["column_kinds"] = kinds;
  h["splits"] = {{"train", data.splits.train}, {"valid", data.splits.valid}, {"test", data.splits.test}};
  h["seed"] = data.seed;
  h["source"] = data.source;
  h["has_u"] = data.u.has_value();
  h["u_slices"] = slices_to_json(data.u_slices);
  if (data.normalization) {
    h["normalization"] = {{"mean", data.normalization->mean},
                          {"stddev", data.normalization->stddev},
                          {"applied", data.normalization->applied}};
  }
  std::ofstream out(dir / "header.json");
  out.precision(std::numeric_limits<double>::max_digits10);
  out << h.dump(2) << '\n';
  write_csv(dir / "x.csv", data.column_names(), data.raw_x());
  if (data.u) write_csv(dir / "u.csv", u_names(data), *data.u);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "header.json");
  if (!in) throw DataError("no header.json in " + dir.string());
  json h;
  try {
    in >> h;
    Dataset d;
    d.node_names = h.at("node_names").get<std::vector<std::string>>();
    d.node_slices = slices_from_json(h.at("node_slices"));
    for (const auto& k : h.at("column_kinds")) d.column_kinds.push_back(parse_column_kind(k.get<std::string>()));
    d.splits = {h.at("splits").at("train").get<std::size_t>(), h.at("splits").at("valid").get<std::size_t>(),
                h.at("splits").at("test").get<std::size_t>()};
    d.seed = h.at("seed").get<std::uint64_t>();
    d.source = h.value("source", "");
    d.u_slices = slices_from_json(h.value("u_slices", json::array()));
    d.x = read_csv(dir / "x.csv").values;
    if (h.value("has_u", false)) d.u = read_csv(dir / "u.csv").values;
    if (h.contains("normalization")) {
      Normalization n;
      n.mean = h["normalization"].at("mean").get<std::vector<double>>();
      n.stddev = h["normalization"].at("stddev").get<std::vector<double>>();
      n.applied = h["normalization"].at("applied").get<std::vector<bool>>();
      d.x = n.apply(d.x);
      d.normalization = std::move(n);
    }
    d.validate();
    return d;
  } catch (const json::exception& e) {
    throw DataError("malformed dataset header in " + dir.string() + ": " + e.what());
  } catch (const GraphError& e) {
    throw DataError("malformed dataset header in " + dir.string() + ": " + e.what());
  }
}

Dataset dataset_from_table(const CausalGraph& graph, const CsvTable& table, std::uint64_t seed,
                           std::vector<double>* labels, const std::string& label_column) {
  auto find = [&](const std::string& name) -> Eigen::Index {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw DataError("CSV has no column '" + name + "'");
    return static_cast<Eigen::Index>(it - table.header.begin());
  };

  Dataset d;
  std::vector<Eigen::Index> source_cols;
  std::size_t off = 0;
  for (const auto& node : graph.nodes()) {
    d.node_names.push_back(node.name);
    d.node_slices.push_back({off, node.dim()});
    off += node.dim();
    for (std::size_t k = 0; k < node.dim(); ++k) {
      source_cols.push_back(find(node.dim() == 1 ? node.name : node.name + "." + std::to_string(k)));
      d.column_kinds.push_back(node.columns[k]);
    }
  }
  const Eigen::Index n = table.values.rows();
  if (n < 10) throw DataError("need at least 10 rows to split a table, got " + std::to_string(n));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  d.x.resize(n, static_cast<Eigen::Index>(source_cols.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < source_cols.size(); ++c) {
      const double v = table.values(order[r], source_cols[c]);
      const auto& kind = d.column_kinds[c];
      if (!std::isfinite(v)) throw DataError("non-finite value in column " + table.header[source_cols[c]]);
      if (kind.is_discrete() && (v != std::floor(v) || v < 0 || v >= kind.cardinality)) {
        throw DataError("column " + table.header[source_cols[c]] + " holds " + std::to_string(v) +
                        ", outside the categories of " + to_string(kind));
      }
      d.x(r, static_cast<Eigen::Index>(c)) = v;
    }
  }
  if (labels) {
    const Eigen::Index lc = find(label_column);
    labels->clear();
    for (Eigen::Index r = 0; r < n; ++r) labels->push_back(table.values(order[r], lc));
  }
  d.splits = SplitSizes::eighty(static_cast<std::size_t>(n));
  d.seed = seed;
  d.validate();
  return d;
}

}  // namespace vaca
