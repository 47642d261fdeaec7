#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaca/config.hpp"
#include "vaca/dataset.hpp"
#include "vaca/fairness.hpp"
#include "vaca/metrics.hpp"
#include "vaca/queries.hpp"
#include "vaca/scm.hpp"
#include "vaca/trainer.hpp"

namespace vaca {

inline constexpr const char* kToolVersion = "0.1.0";

/// $VACA_OUTPUT_ROOT when set, ./runs otherwise.
std::filesystem::path default_output_root();
/// cfg.run.output when set, else default_output_root().
std::filesystem::path output_root(const ExperimentConfig& cfg);

/// Normalized dataset described by cfg.data. For CSV input `labels`
/// receives the label column when data.label is set.
Dataset build_dataset(const ExperimentConfig& cfg, std::vector<double>* labels = nullptr);

/// Restandardizes a dataset with the given statistics.
Dataset with_normalization(const Dataset& data, const Normalization& norm);

/// The builtin SCM a generated dataset came from ("triangle/NLIN" -> triangle, NLIN).
ScmSpec scm_of(const Dataset& data);

/// Self-describing record written next to every command's outputs.
struct RunArtifact {
  std::string command;
  std::string config_text;
  std::string checkpoint;
  std::optional<TrainReport> train;
  std::string dataset;
  std::string metric_report;
  std::string audit_report;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
  /// artifact.json plus config.cfg holding `config_text`.
  void save(const std::filesystem::path& dir) const;
};

/// Writes the raw dataset to `out`.
Dataset cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct TrainOutcome {
  TrainReport report;
  std::filesystem::path checkpoint;
};
/// Trains one model (seed cfg.model.seed) on `data_dir` or, when empty, on
/// the dataset described by cfg.data. The checkpoint goes to `out`/model.
TrainOutcome cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out,
                       const std::filesystem::path& data_dir = {});

/// Scores a model against the oracle of the SCM that generated `data_dir`.
/// Without a directory the dataset is regenerated from the model's recorded
/// seed and splits, using `source` ("triangle/NLIN") or the recorded source.
MetricReport cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& model_dir,
                          const std::filesystem::path& data_dir, const std::filesystem::path& out,
                          const std::string& source = "");

struct QueryRequest {
  QueryKind kind = QueryKind::Observational;
  std::string node;
  std::vector<double> alpha;
  bool raw_units = false;             // alpha, factuals and output in raw units
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  CfMode mode = CfMode::Mean;
  bool clamp = false;
  std::filesystem::path factuals;     // CSV for counterfactuals
};
QueryResult cmd_query(const std::filesystem::path& model_dir, const QueryRequest& req,
                      const std::filesystem::path& out_csv);

struct AuditRequest {
  std::filesystem::path data;   // dataset directory or CSV
  std::filesystem::path graph;  // graph file, CSV input only
  std::string sensitive;
  std::string label;            // CSV label column; empty uses the loan demonstration label
  std::size_t draws = 10;
  std::uint64_t seed = 0;
  std::uint64_t label_seed = 0;
  bool clamp = true;
};
AuditReport cmd_audit(const std::filesystem::path& model_dir, const AuditRequest& req,
                      const std::filesystem::path& out_json);

/// One configuration of a sweep grid, aggregated over seeds.
struct SweepRow {
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<std::string> metric_names;
  std::vector<std::vector<double>> values;  // per metric, one entry per seed
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  std::filesystem::path csv;
  std::filesystem::path table;
};

/// Cartesian grid over cfg.sweep times cfg.run.seeds. Every job trains,
/// evaluates against the oracle (builtin SCMs) and audits (when
/// audit.sensitive is set) in its own directory. Writes aggregate.csv
/// (raw mean and std) and aggregate.txt (mean ± std, ×100).
SweepSummary cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out, std::size_t jobs);

}  // namespace vaca
