#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vaca/causal_graph.hpp"
#include "vaca/metrics.hpp"
#include "vaca/vaca_model.hpp"

namespace vaca {

/// Invalid configuration; `field` is the dotted path of the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct DataConfig {
  std::string scm;              // builtin SCM name; empty when reading a CSV
  std::string sem;              // LIN | NLIN | NADD for the synthetic families
  std::size_t samples = 10000;  // rows generated, split 50/25/25
  std::uint64_t seed = 0;
  std::string csv;              // external data
  std::string graph;            // graph file describing the CSV columns
  std::string label;            // optional label column of the CSV
};

struct AuditConfig {
  std::string sensitive;
  std::size_t draws = 10;
  std::uint64_t label_seed = 0;  // noise of the loan demonstration label
  bool clamp = true;
};

struct RunConfig {
  std::vector<std::uint64_t> seeds{0};
  std::string output;  // empty: $VACA_OUTPUT_ROOT or ./runs
  std::size_t jobs = 1;
};

/// One sweep axis: a dotted key and the values it takes.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct ExperimentConfig {
  DataConfig data;
  VacaConfig model;
  MetricOptions eval;
  AuditConfig audit;
  RunConfig run;
  std::vector<SweepAxis> sweep;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  /// Canonical text; parsing it yields an equal configuration.
  std::string to_text() const;
  bool uses_builtin() const { return !data.scm.empty(); }
};

/// Sections [data] [model] [eval] [audit] [run] [sweep], `key = value` lines,
/// `#` comments. Unknown sections or keys are rejected. Unless
/// `model.preset = false`, model settings start from the builtin preset of
/// the selected SCM.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one dotted key (e.g. "model.dropout") from its text value.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Tuned model settings for a builtin SCM (unknown names get the defaults).
VacaConfig preset_config(const std::string& scm, const std::string& sem);

/// Graph file with a [graph] section holding `nodes` and `edges`.
CausalGraph load_graph_file(const std::filesystem::path& path);

}  // namespace vaca
