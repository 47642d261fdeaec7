#include "vaca/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace vaca {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << j.dump(2) << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<std::string> column_names_of(const CausalGraph& g) {
  std::vector<std::string> names;
  for (const auto& n : g.nodes()) {
    if (n.dim() == 1) {
      names.push_back(n.name);
    } else {
      for (std::size_t k = 0; k < n.dim(); ++k) names.push_back(n.name + "." + std::to_string(k));
    }
  }
  return names;
}

VacaModel load_model(const fs::path& dir) {
  if (!fs::exists(dir / "model.json")) throw ad::CheckpointError("no checkpoint in " + dir.string());
  return VacaModel::load(dir);
}

Dataset load_normalized(const fs::path& dir, const VacaModel& model) {
  Dataset data = load_dataset(dir);
  if (data.node_names.size() != model.graph().size() || data.width() != model.data_width()) {
    throw DataError("dataset " + dir.string() + " does not match the model's graph");
  }
  for (NodeIndex i = 0; i < model.graph().size(); ++i) {
    if (data.node_names[i] != model.graph().node(i).name) {
      throw DataError("dataset node " + data.node_names[i] + " does not match model node " + model.graph().node(i).name);
    }
  }
  if (model.normalization) return with_normalization(data, *model.normalization);
  return normalize(data);
}

/// The training data of a model rebuilt from its provenance (builtin SCMs only).
Dataset regenerate(const VacaModel& model, std::string source) {
  if (source.empty()) source = model.metadata.value("data_source", std::string{});
  if (source.empty()) throw DataError("model records no data source; pass a dataset directory");
  const auto& splits = model.metadata.at("splits");
  Dataset probe;
  probe.source = source;
  probe.u = Matrix();
  const ScmSpec scm = scm_of(probe);
  const SplitSizes sizes{splits.at(0).get<std::size_t>(), splits.at(1).get<std::size_t>(),
                         splits.at(2).get<std::size_t>()};
  Dataset data = sample_observational(scm, sizes, model.metadata.value("data_seed", std::uint64_t{0}));
  return model.normalization ? with_normalization(data, *model.normalization) : normalize(data);
}

}  // namespace

fs::path default_output_root() {
  if (const char* env = std::getenv("VACA_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

fs::path output_root(const ExperimentConfig& cfg) {
  return cfg.run.output.empty() ? default_output_root() : fs::path(cfg.run.output);
}

Dataset build_dataset(const ExperimentConfig& cfg, std::vector<double>* labels) {
  if (cfg.uses_builtin()) {
    const ScmSpec scm = builtin_scm(cfg.data.scm, cfg.data.sem);
    return normalize(sample_observational(scm, SplitSizes::halves(cfg.data.samples), cfg.data.seed));
  }
  const CausalGraph graph = load_graph_file(cfg.data.graph);
  Dataset d = dataset_from_table(graph, read_csv(cfg.data.csv), cfg.data.seed, labels, cfg.data.label);
  return normalize(d);
}

Dataset with_normalization(const Dataset& data, const Normalization& norm) {
  Dataset out = data;
  out.x = norm.apply(data.raw_x());
  out.normalization = norm;
  return out;
}

ScmSpec scm_of(const Dataset& data) {
  if (!data.u) throw DataError("dataset " + data.source + " carries no exogenous draws; no oracle available");
  const auto slash = data.source.find('/');
  const std::string name = data.source.substr(0, slash);
  const std::string sem = slash == std::string::npos ? "" : data.source.substr(slash + 1);
  try {
    return builtin_scm(name, sem);
  } catch (const std::exception& e) {
    throw DataError("dataset source '" + data.source + "' is not a builtin SCM: " + e.what());
  }
}

json RunArtifact::to_json() const {
  json j{{"command", command}, {"tool_version", kToolVersion}, {"wall_seconds", wall_seconds}};
  if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
  if (train) j["train_report"] = train->to_json();
  if (!dataset.empty()) j["dataset"] = dataset;
  if (!metric_report.empty()) j["metric_report"] = metric_report;
  if (!audit_report.empty()) j["audit_report"] = audit_report;
  return j;
}

void RunArtifact::save(const fs::path& dir) const {
  write_json(dir / "artifact.json", to_json());
  std::ofstream cfg(dir / "config.cfg");
  cfg << config_text;
  if (!cfg) throw DataError("cannot write " + (dir / "config.cfg").string());
}

Dataset cmd_generate(const ExperimentConfig& cfg, const fs::path& out) {
  const auto t0 = Clock::now();
  cfg.validate();
  if (!cfg.uses_builtin()) throw ConfigError("data.scm", "generate needs a builtin SCM");
  Dataset data = build_dataset(cfg);
  save_dataset(data, out);
  RunArtifact art;
  art.command = "generate";
  art.config_text = cfg.to_text();
  art.dataset = out.string();
  art.wall_seconds = seconds_since(t0);
  art.save(out);
  return data;
}

TrainOutcome cmd_train(const ExperimentConfig& cfg, const fs::path& out, const fs::path& data_dir) {
  const auto t0 = Clock::now();
  cfg.validate();
  Dataset data;
  if (data_dir.empty()) {
    data = build_dataset(cfg);
  } else {
    data = load_dataset(data_dir);
    if (!data.normalized()) data = normalize(data);
  }
  const CausalGraph graph =
      cfg.uses_builtin() ? builtin_scm(cfg.data.scm, cfg.data.sem).graph : load_graph_file(cfg.data.graph);
  if (data.node_names.size() != graph.size()) throw DataError("dataset does not match the configured graph");
  VacaModel model(graph, cfg.model);
  TrainOutcome outcome;
  outcome.report = train(model, data);
  outcome.checkpoint = out / "model";
  model.save(outcome.checkpoint);
  write_json(out / "train_report.json", outcome.report.to_json());

  RunArtifact art;
  art.command = "train";
  art.config_text = cfg.to_text();
  art.checkpoint = outcome.checkpoint.string();
  art.train = outcome.report;
  art.dataset = data_dir.empty() ? data.source : data_dir.string();
  art.wall_seconds = seconds_since(t0);
  art.save(out);
  return outcome;
}

MetricReport cmd_evaluate(const ExperimentConfig& cfg, const fs::path& model_dir, const fs::path& data_dir,
                          const fs::path& out, const std::string& source) {
  const auto t0 = Clock::now();
  const VacaModel model = load_model(model_dir);
  const Dataset data = data_dir.empty() ? regenerate(model, source) : load_normalized(data_dir, model);
  const ScmSpec scm = scm_of(data);
  if (scm.graph.hash() != model.graph().hash()) throw ad::CheckpointError("model graph does not match the dataset's SCM");
  const VacaEstimator est(model);
  const OracleEstimator truth(scm, *data.normalization);
  MetricReport report = evaluate(est, truth, model.graph(), data, cfg.eval);
  report.save(out);

  RunArtifact art;
  art.command = "evaluate";
  art.config_text = cfg.to_text();
  art.checkpoint = model_dir.string();
  art.dataset = data_dir.empty() ? data.source : data_dir.string();
  art.metric_report = (out / "report.json").string();
  art.wall_seconds = seconds_since(t0);
  art.save(out);
  return report;
}

QueryResult cmd_query(const fs::path& model_dir, const QueryRequest& req, const fs::path& out_csv) {
  const VacaModel model = load_model(model_dir);
  if (req.raw_units && !model.normalization) throw DataError("model has no normalization statistics for raw units");
  QueryResult res;
  if (req.kind == QueryKind::Observational) {
    res = sample_observational_vaca(model, req.samples, req.seed);
  } else {
    const InterventionSpec spec{model.graph().index_of(req.node), req.alpha, req.raw_units};
    if (req.kind == QueryKind::Interventional) {
      res = sample_interventional_vaca(model, spec, req.samples, req.seed, QueryOptions{req.clamp});
    } else {
      const CsvTable table = read_csv(req.factuals);
      if (table.header != column_names_of(model.graph())) {
        throw DataError("factual CSV columns do not match the model's columns");
      }
      const Matrix factual = req.raw_units ? model.normalization->apply(table.values) : table.values;
      res.kind = QueryKind::Counterfactual;
      res.seed = req.seed;
      res.model_fingerprint = model.fingerprint();
      res.intervention = spec;
      res.samples = counterfactual_vaca(model, factual, spec, req.mode, req.seed, QueryOptions{req.clamp});
    }
  }
  QueryResult saved = res;
  if (req.raw_units) saved.samples = model.normalization->invert(res.samples);
  saved.save(out_csv, column_names_of(model.graph()));
  return res;
}

AuditReport cmd_audit(const fs::path& model_dir, const AuditRequest& req, const fs::path& out_json) {
  const auto t0 = Clock::now();
  const VacaModel model = load_model(model_dir);
  Dataset data;
  std::vector<double> labels;
  if (fs::is_directory(req.data)) {
    data = load_normalized(req.data, model);
    if (!req.label.empty()) throw DataError("dataset directories carry no label column; use a CSV");
    labels = loan_labels(data, req.label_seed);
  } else {
    if (req.graph.empty()) throw ConfigError("graph", "CSV input needs a graph file");
    const CausalGraph graph = load_graph_file(req.graph);
    if (graph.hash() != model.graph().hash()) throw ad::CheckpointError("graph file does not match the checkpoint");
    if (req.label.empty()) throw ConfigError("label", "CSV input needs a label column");
    const std::uint64_t seed = model.metadata.value("data_seed", std::uint64_t{0});
    Dataset raw = dataset_from_table(graph, read_csv(req.data), seed, &labels, req.label);
    data = model.normalization ? with_normalization(raw, *model.normalization) : normalize(raw);
  }
  UnfairnessOptions opts;
  opts.draws = req.draws;
  opts.seed = req.seed;
  opts.clamp = req.clamp;
  AuditReport report = audit(model, data, labels, model.graph().index_of(req.sensitive), opts);
  json j = report.to_json();
  j["tool_version"] = kToolVersion;
  j["wall_seconds"] = seconds_since(t0);
  write_json(out_json, j);
  return report;
}

namespace {

struct JobResult {
  std::vector<std::pair<std::string, double>> metrics;
};

JobResult run_sweep_job(const ExperimentConfig& cfg, const Dataset& data, const std::vector<double>& labels,
                        const fs::path& dir) {
  JobResult r;
  const auto t0 = Clock::now();
  const CausalGraph graph =
      cfg.uses_builtin() ? builtin_scm(cfg.data.scm, cfg.data.sem).graph : load_graph_file(cfg.data.graph);
  VacaModel model(graph, cfg.model);
  const TrainReport tr = train(model, data);
  model.save(dir / "model");
  write_json(dir / "train_report.json", tr.to_json());
  r.metrics.emplace_back("best_valid_iwae", tr.best_valid_iwae);

  RunArtifact art;
  art.command = "sweep";
  art.config_text = cfg.to_text();
  art.checkpoint = (dir / "model").string();
  art.train = tr;
  art.dataset = data.source;
  if (data.u) {
    const ScmSpec scm = scm_of(data);
    const VacaEstimator est(model);
    const OracleEstimator truth(scm, *data.normalization);
    const MetricReport mr = evaluate(est, truth, graph, data, cfg.eval);
    mr.save(dir / "metrics");
    art.metric_report = (dir / "metrics" / "report.json").string();
    for (const auto& [k, v] : std::vector<std::pair<std::string, double>>{{"mmd_obs", mr.mmd_obs},
                                                                          {"mmd_int", mr.mmd_int},
                                                                          {"mean_e", mr.mean_e},
                                                                          {"std_e", mr.std_e},
                                                                          {"mse_cf", mr.mse_cf},
                                                                          {"sdse_cf", mr.sdse_cf}}) {
      r.metrics.emplace_back(k, v);
    }
  }
  if (!cfg.audit.sensitive.empty()) {
    UnfairnessOptions opts;
    opts.draws = cfg.audit.draws;
    opts.seed = cfg.model.seed;
    opts.clamp = cfg.audit.clamp;
    opts.threads = 1;
    const AuditReport ar = audit(model, data, labels, graph.index_of(cfg.audit.sensitive), opts);
    write_json(dir / "audit.json", ar.to_json());
    art.audit_report = (dir / "audit.json").string();
    for (const auto& c : ar.classifiers) {
      r.metrics.emplace_back("uf_" + to_string(c.selector), c.uf);
      r.metrics.emplace_back("f1_" + to_string(c.selector), c.f1);
      r.metrics.emplace_back("acc_" + to_string(c.selector), c.accuracy);
    }
  }
  art.wall_seconds = seconds_since(t0);
  art.save(dir);
  return r;
}

std::string grid_label(const std::vector<std::pair<std::string, std::string>>& settings) {
  if (settings.empty()) return "base";
  std::string s;
  for (const auto& [k, v] : settings) {
    if (!s.empty()) s += ",";
    s += k + "=" + v;
  }
  return s;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

SweepSummary cmd_sweep(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs) {
  cfg.validate();
  if (jobs < 1) throw ConfigError("run.jobs", "need at least one job");

  // cartesian grid, first axis varying slowest
  std::vector<std::vector<std::pair<std::string, std::string>>> grid{{}};
  for (const auto& axis : cfg.sweep) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& g : grid) {
      for (const auto& v : axis.values) {
        auto point = g;
        point.emplace_back(axis.key, v);
        next.push_back(std::move(point));
      }
    }
    grid = std::move(next);
  }
  std::vector<ExperimentConfig> point_cfgs;
  for (const auto& point : grid) {
    ExperimentConfig c = cfg;
    c.sweep.clear();
    for (const auto& [k, v] : point) apply_setting(c, k, v);
    c.validate();
    point_cfgs.push_back(std::move(c));
  }

  std::vector<double> labels;
  const Dataset data = build_dataset(cfg, &labels);
  if (!cfg.audit.sensitive.empty() && labels.empty()) labels = loan_labels(data, cfg.audit.label_seed);
  fs::create_directories(out);
  {
    std::ofstream f(out / "config.cfg");
    f << cfg.to_text();
  }

  struct Job {
    std::size_t point;
    std::size_t seed_index;
  };
  std::vector<Job> queue;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (std::size_t s = 0; s < cfg.run.seeds.size(); ++s) queue.push_back({p, s});
  }
  std::vector<JobResult> results(queue.size());
  std::vector<std::exception_ptr> errors(queue.size());
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t j = 0;
      {
        std::lock_guard lock(mu);
        if (next == queue.size()) return;
        j = next++;
      }
      try {
        ExperimentConfig c = point_cfgs[queue[j].point];
        c.model.seed = cfg.run.seeds[queue[j].seed_index];
        const fs::path dir = out / grid_label(grid[queue[j].point]) / ("seed_" + std::to_string(c.model.seed));
        fs::create_directories(dir);
        results[j] = run_sweep_job(c, data, labels, dir);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(jobs, queue.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SweepSummary summary;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    SweepRow row;
    row.settings = grid[p];
    for (std::size_t j = 0; j < queue.size(); ++j) {
      if (queue[j].point != p) continue;
      if (row.metric_names.empty()) {
        for (const auto& m : results[j].metrics) row.metric_names.push_back(m.first);
        row.values.resize(row.metric_names.size());
      }
      for (std::size_t k = 0; k < row.metric_names.size(); ++k) row.values[k].push_back(results[j].metrics[k].second);
    }
    summary.rows.push_back(std::move(row));
  }

  summary.csv = out / "aggregate.csv";
  summary.table = out / "aggregate.txt";
  std::ofstream csv(summary.csv);
  std::ofstream txt(summary.table);
  csv << std::setprecision(std::numeric_limits<double>::max_digits10);
  txt << std::fixed << std::setprecision(2);
  const auto& names = summary.rows.front().metric_names;
  for (const auto& axis : cfg.sweep) csv << axis.key << ',';
  csv << "runs";
  for (const auto& n : names) csv << ',' << n << "_mean," << n << "_std";
  csv << '\n';
  txt << "configuration";
  for (const auto& n : names) txt << '\t' << n;
  txt << "\n";
  for (const auto& row : summary.rows) {
    for (const auto& s : row.settings) csv << s.second << ',';
    csv << row.values.front().size();
    txt << grid_label(row.settings);
    for (const auto& v : row.values) {
      csv << ',' << mean_of(v) << ',' << std_of(v);
      txt << '\t' << 100.0 * mean_of(v) << " ± " << 100.0 * std_of(v);
    }
    csv << '\n';
    txt << '\n';
  }
  if (!csv || !txt) throw DataError("cannot write sweep aggregates to " + out.string());
  return summary;
}

}  // namespace vaca
