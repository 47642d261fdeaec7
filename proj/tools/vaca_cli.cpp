// Command-line entry point: generate, train, evaluate, query, audit, sweep.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vaca/checkpoint.hpp"
#include "vaca/experiment.hpp"

namespace fs = std::filesystem;
using namespace vaca;

namespace {

constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kNumericError = 4;

ExperimentConfig read_config(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "--set expects key=value");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

fs::path or_default(const std::string& out, const fs::path& fallback) { return out.empty() ? fallback : fs::path(out); }

QueryKind parse_kind(const std::string& s) {
  if (s == "obs" || s == "observational") return QueryKind::Observational;
  if (s == "int" || s == "interventional") return QueryKind::Interventional;
  if (s == "cf" || s == "counterfactual") return QueryKind::Counterfactual;
  throw ConfigError("kind", "expected obs, int or cf, got '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational causal graph autoencoder toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::string config_path, out, data, model, factuals, graph, sensitive, label, kind = "obs", node, mode = "mean";
  std::vector<std::string> overrides;
  std::vector<double> alpha;
  std::size_t jobs = 0, samples = 1000, draws = 10;
  std::uint64_t seed = 0, label_seed = 0;
  bool raw = false, clamp = false, no_clamp = false, have_seed = false;

  auto* gen = app.add_subcommand("generate", "Sample a dataset from a builtin SCM");
  std::string gen_scm, gen_sem;
  std::size_t gen_n = 0;
  gen->add_option("-c,--config", config_path, "Experiment config")->check(CLI::ExistingFile);
  gen->add_option("--set", overrides, "Override a config key (section.key=value)");
  gen->add_option("--scm", gen_scm, "Builtin SCM (overrides data.scm)");
  gen->add_option("--sem", gen_sem, "LIN | NLIN | NADD (overrides data.sem)");
  gen->add_option("-n", gen_n, "Rows to generate (overrides data.samples)");
  auto* gen_seed = gen->add_option("--seed", seed, "Data seed (overrides data.seed)");
  gen->add_option("-o,--out", out, "Output directory");

  auto* tr = app.add_subcommand("train", "Train one model");
  tr->add_option("-c,--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  tr->add_option("--set", overrides, "Override a config key (section.key=value)");
  tr->add_option("-d,--data", data, "Dataset directory written by generate")->check(CLI::ExistingDirectory);
  auto* seed_opt = tr->add_option("--seed", seed, "Model seed (default: first of run.seeds)");
  tr->add_option("-o,--out", out, "Output directory");

  auto* ev = app.add_subcommand("evaluate", "Score a model against the SCM oracle");
  ev->add_option("-m,--model", model, "Checkpoint directory")->required();
  std::string ev_scm, ev_sem;
  ev->add_option("-d,--data", data, "Dataset directory (default: regenerate the training data)")
      ->check(CLI::ExistingDirectory);
  ev->add_option("--scm", ev_scm, "Builtin SCM of the data (default: recorded in the checkpoint)");
  ev->add_option("--sem", ev_sem, "LIN | NLIN | NADD");
  ev->add_option("-c,--config", config_path, "Config with [eval] settings")->check(CLI::ExistingFile);
  ev->add_option("--set", overrides, "Override a config key (section.key=value)");
  ev->add_option("-o,--out", out, "Output directory");

  auto* qu = app.add_subcommand("query", "Observational, interventional or counterfactual samples");
  qu->add_option("-m,--model", model, "Checkpoint directory")->required();
  qu->add_option("-k,--kind", kind, "obs | int | cf");
  qu->add_option("--node", node, "Intervened node");
  qu->add_option("--alpha", alpha, "Intervention value(s)")->delimiter(',');
  qu->add_flag("--raw", raw, "Alpha, factuals and output in raw units");
  qu->add_option("-n,--samples", samples, "Samples for obs/int queries");
  qu->add_option("--seed", seed, "Query seed");
  qu->add_option("--mode", mode, "Counterfactual mode: mean | sample");
  qu->add_flag("--clamp", clamp, "Overwrite the intervened columns with alpha");
  qu->add_option("--factuals", factuals, "Factual rows (CSV) for cf queries")->check(CLI::ExistingFile);
  qu->add_option("-o,--out", out, "Output CSV")->required();

  auto* au = app.add_subcommand("audit", "Counterfactual fairness audit");
  au->add_option("-m,--model", model, "Checkpoint directory")->required();
  au->add_option("-d,--data", data, "Dataset directory or CSV")->required()->check(CLI::ExistingPath);
  au->add_option("-g,--graph", graph, "Graph file (CSV input)")->check(CLI::ExistingFile);
  au->add_option("-s,--sensitive", sensitive, "Sensitive node")->required();
  au->add_option("-l,--label", label, "Label column (CSV input)");
  au->add_option("--draws", draws, "Counterfactual draws per branch");
  au->add_option("--seed", seed, "Audit seed");
  au->add_option("--label-seed", label_seed, "Noise seed of the demonstration label");
  au->add_flag("--no-clamp", no_clamp, "Keep decoded sensitive values in counterfactuals");
  au->add_option("-o,--out", out, "Output JSON")->required();

  auto* sw = app.add_subcommand("sweep", "Grid of configurations times seeds");
  sw->add_option("-c,--config", config_path, "Experiment config with a [sweep] section")->required()->check(
      CLI::ExistingFile);
  sw->add_option("--set", overrides, "Override a config key (section.key=value)");
  sw->add_option("-j,--jobs", jobs, "Concurrent jobs (default: run.jobs)");
  sw->add_option("-o,--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  have_seed = seed_opt->count() > 0;

  try {
    if (*gen) {
      auto cfg = read_config(config_path, overrides);
      if (!gen_scm.empty()) cfg.data.scm = gen_scm;
      if (!gen_sem.empty()) cfg.data.sem = gen_sem;
      if (gen_n > 0) cfg.data.samples = gen_n;
      if (gen_seed->count() > 0) cfg.data.seed = seed;
      const fs::path dir = or_default(out, output_root(cfg) / "data");
      const Dataset d = cmd_generate(cfg, dir);
      std::cout << "wrote " << d.rows() << " rows to " << dir.string() << '\n';
    } else if (*tr) {
      auto cfg = read_config(config_path, overrides);
      cfg.model.seed = have_seed ? seed : cfg.run.seeds.at(0);
      const fs::path dir = or_default(out, output_root(cfg) / "train" / ("seed_" + std::to_string(cfg.model.seed)));
      const auto res = cmd_train(cfg, dir, data);
      std::cout << "best epoch " << res.report.best_epoch << ", valid iwae " << res.report.best_valid_iwae
                << ", stop: " << res.report.stop_reason << "\ncheckpoint " << res.checkpoint.string() << '\n';
    } else if (*ev) {
      const auto cfg = read_config(config_path, overrides);
      const fs::path dir = or_default(out, fs::path(model).parent_path() / "eval");
      const std::string source = ev_scm.empty() ? "" : (ev_sem.empty() ? ev_scm : ev_scm + "/" + ev_sem);
      const auto r = cmd_evaluate(cfg, model, data, dir, source);
      std::cout << "mmd_obs " << r.mmd_obs << "\nmmd_int " << r.mmd_int << "\nmean_e " << r.mean_e << "\nstd_e "
                << r.std_e << "\nmse_cf " << r.mse_cf << "\nsdse_cf " << r.sdse_cf << "\nreport "
                << (dir / "report.json").string() << '\n';
    } else if (*qu) {
      QueryRequest req;
      req.kind = parse_kind(kind);
      req.node = node;
      req.alpha = alpha;
      req.raw_units = raw;
      req.samples = samples;
      req.seed = seed;
      if (mode != "mean" && mode != "sample") throw ConfigError("mode", "expected mean or sample");
      req.mode = mode == "mean" ? CfMode::Mean : CfMode::Sample;
      req.clamp = clamp;
      req.factuals = factuals;
      if (req.kind != QueryKind::Observational && (node.empty() || alpha.empty())) {
        throw ConfigError("node", "interventional and counterfactual queries need --node and --alpha");
      }
      if (req.kind == QueryKind::Counterfactual && factuals.empty()) {
        throw ConfigError("factuals", "counterfactual queries need --factuals");
      }
      const auto r = cmd_query(model, req, out);
      std::cout << "wrote " << r.samples.rows() << " rows to " << out << '\n';
    } else if (*au) {
      AuditRequest req;
      req.data = data;
      req.graph = graph;
      req.sensitive = sensitive;
      req.label = label;
      req.draws = draws;
      req.seed = seed;
      req.label_seed = label_seed;
      req.clamp = !no_clamp;
      const auto r = cmd_audit(model, req, out);
      for (const auto& c : r.classifiers) {
        std::cout << to_string(c.selector) << ": uf " << c.uf << ", f1 " << c.f1 << ", acc " << c.accuracy << '\n';
      }
    } else if (*sw) {
      const auto cfg = read_config(config_path, overrides);
      const fs::path dir = or_default(out, output_root(cfg) / "sweep");
      const auto s = cmd_sweep(cfg, dir, jobs == 0 ? cfg.run.jobs : jobs);
      std::cout << s.rows.size() << " configurations, aggregate " << s.csv.string() << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const GraphError& e) {
    std::cerr << "graph error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ad::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ad::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
