#include "vaca/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "vaca/scm.hpp"

namespace vaca {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_items(const std::string& value) {
  std::string v = trim(value);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto t = trim(v);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto t = trim(v);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& key, const std::string& v, F each) {
  std::vector<T> out;
  for (const auto& item : split_items(v)) out.push_back(each(key, item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <typename T>
std::string fmt_list(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(values[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      out += values[i];
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Entry {
  std::string key;  // section.key
  std::string value;
  int line = 0;
};

const std::vector<std::string> kSections{"data", "model", "eval", "audit", "run", "sweep", "graph"};

std::vector<Entry> read_entries(const std::string& text) {
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw ConfigError(section, "unknown section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty()) throw ConfigError(trim(line.substr(0, eq)), "key outside of any section");
    entries.push_back({section + "." + trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no});
  }
  return entries;
}

}  // namespace

VacaConfig preset_config(const std::string& scm, const std::string& sem) {
  VacaConfig c;
  auto set = [&](int hidden, double dropout, bool residual) {
    c.decoder_hidden_layers = hidden;
    c.dropout = dropout;
    c.residual = residual;
  };
  if (scm == "chain") {
    if (sem == "LIN") set(1, 0.1, true);
    if (sem == "NLIN") set(2, 0.1, false);
    if (sem == "NADD") {
      set(1, 0.1, true);
      c.decoder_width = 64;
    }
  } else if (scm == "collider") {
    if (sem == "LIN") set(2, 0.2, true);
    if (sem == "NLIN") set(1, 0.1, false);
    if (sem == "NADD") set(2, 0.1, true);
  } else if (scm == "triangle") {
    set(2, sem == "NLIN" ? 0.2 : 0.1, false);
  } else if (scm == "mgraph") {
    set(sem == "LIN" ? 1 : 2, 0.1, false);
  } else if (scm == "loan") {
    c.encoder_hidden = {16, 16};
    set(3, 0.1, false);
  } else if (scm == "adult") {
    c.encoder_hidden = {16, 16};
    c.decoder_width = 8;
    // a four-hidden-layer decoder cannot span the longest path of this graph
    set(5, 0.2, true);
  }
  return c;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& v) {
  auto& d = cfg.data;
  auto& m = cfg.model;
  auto& e = cfg.eval;
  auto& a = cfg.audit;
  auto& r = cfg.run;
  const auto i32 = [](const std::string& k, const std::string& s) { return to_int<int>(k, s); };
  const auto u64 = [](const std::string& k, const std::string& s) { return to_int<std::uint64_t>(k, s); };
  const auto sz = [](const std::string& k, const std::string& s) { return to_int<std::size_t>(k, s); };

  if (key == "data.scm") d.scm = v;
  else if (key == "data.sem") d.sem = v;
  else if (key == "data.samples") d.samples = sz(key, v);
  else if (key == "data.seed") d.seed = u64(key, v);
  else if (key == "data.csv") d.csv = v;
  else if (key == "data.graph") d.graph = v;
  else if (key == "data.label") d.label = v;
  else if (key == "model.preset") (void)to_bool(key, v);  // resolved by parse_config
  else if (key == "model.latent_dim") m.latent_dim = i32(key, v);
  else if (key == "model.adapter_width") m.adapter_width = i32(key, v);
  else if (key == "model.encoder_hidden") m.encoder_hidden = to_list<int>(key, v, i32);
  else if (key == "model.decoder_hidden_layers") m.decoder_hidden_layers = i32(key, v);
  else if (key == "model.decoder_width") m.decoder_width = i32(key, v);
  else if (key == "model.head_hidden") m.head_hidden = to_list<int>(key, v, i32);
  else if (key == "model.dropout") m.dropout = to_double(key, v);
  else if (key == "model.dropout_encoder") m.dropout_encoder = to_bool(key, v);
  else if (key == "model.dropout_decoder") m.dropout_decoder = to_bool(key, v);
  else if (key == "model.residual") m.residual = to_bool(key, v);
  else if (key == "model.mode") {
    if (v == "disjoint") m.mode = GnnMode::Disjoint;
    else if (v == "shared") m.mode = GnnMode::Shared;
    else throw ConfigError(key, "expected disjoint or shared, got '" + v + "'");
  } else if (key == "model.objective") {
    if (v == "elbo") m.objective = Objective::Elbo;
    else if (v == "beta") m.objective = Objective::Beta;
    else throw ConfigError(key, "expected elbo or beta, got '" + v + "'");
  }
  else if (key == "model.lambda_kld") m.lambda_kld = to_double(key, v);
  else if (key == "model.learning_rate") m.learning_rate = to_double(key, v);
  else if (key == "model.batch_size") m.batch_size = sz(key, v);
  else if (key == "model.max_epochs") m.max_epochs = sz(key, v);
  else if (key == "model.patience") m.patience = sz(key, v);
  else if (key == "model.iwae_k") m.iwae_k = sz(key, v);
  else if (key == "model.valid_rows") m.valid_rows = sz(key, v);
  else if (key == "model.allow_shallow_decoder") m.allow_shallow_decoder = to_bool(key, v);
  else if (key == "model.seed") m.seed = u64(key, v);
  else if (key == "eval.multipliers") e.multipliers = to_list<double>(key, v, to_double);
  else if (key == "eval.samples") e.samples = sz(key, v);
  else if (key == "eval.gammas") e.kernel.gammas = to_list<double>(key, v, to_double);
  else if (key == "eval.median_heuristic") e.kernel.median_heuristic = to_bool(key, v);
  else if (key == "eval.estimator") {
    if (v == "verbatim") e.estimator = MmdEstimator::Verbatim;
    else if (v == "textbook") e.estimator = MmdEstimator::Textbook;
    else throw ConfigError(key, "expected verbatim or textbook, got '" + v + "'");
  }
  else if (key == "eval.seed") e.seed = u64(key, v);
  else if (key == "eval.cf_rows") e.cf_rows = sz(key, v);
  else if (key == "audit.sensitive") a.sensitive = v;
  else if (key == "audit.draws") a.draws = sz(key, v);
  else if (key == "audit.label_seed") a.label_seed = u64(key, v);
  else if (key == "audit.clamp") a.clamp = to_bool(key, v);
  else if (key == "run.seeds") r.seeds = to_list<std::uint64_t>(key, v, u64);
  else if (key == "run.output") r.output = v;
  else if (key == "run.jobs") r.jobs = sz(key, v);
  else throw ConfigError(key, "unknown key");
}

ExperimentConfig parse_config(const std::string& text) {
  const auto entries = read_entries(text);
  ExperimentConfig cfg;
  std::map<std::string, int> seen;
  bool preset = true;
  for (const auto& e : entries) {
    if (e.key.rfind("graph.", 0) == 0) throw ConfigError(e.key, "graph sections belong in a graph file");
    if (e.key.rfind("sweep.", 0) != 0 && !seen.emplace(e.key, e.line).second) {
      throw ConfigError(e.key, "set twice (lines " + std::to_string(seen[e.key]) + " and " + std::to_string(e.line) + ")");
    }
    if (e.key == "model.preset") preset = to_bool(e.key, e.value);
    if (e.key == "data.scm") cfg.data.scm = e.value;
    if (e.key == "data.sem") cfg.data.sem = e.value;
  }
  if (preset && cfg.uses_builtin()) cfg.model = preset_config(cfg.data.scm, cfg.data.sem);
  for (const auto& e : entries) {
    if (e.key.rfind("sweep.", 0) == 0) {
      const std::string target = e.key.substr(6);
      ExperimentConfig probe = cfg;
      const auto values = split_items(e.value);
      if (values.empty()) throw ConfigError(e.key, "sweep axis needs at least one value");
      for (const auto& v : values) apply_setting(probe, target, v);  // rejects bad keys and values early
      if (target.rfind("run.", 0) == 0 || target.rfind("data.", 0) == 0) {
        throw ConfigError(e.key, "only model, eval and audit keys can be swept");
      }
      cfg.sweep.push_back({target, values});
      continue;
    }
    apply_setting(cfg, e.key, e.value);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void ExperimentConfig::validate() const {
  if (data.scm.empty() == data.csv.empty()) throw ConfigError("data.scm", "set exactly one of data.scm and data.csv");
  if (uses_builtin()) {
    const auto names = builtin_scm_names();
    if (std::find(names.begin(), names.end(), data.scm) == names.end()) {
      throw ConfigError("data.scm", "unknown SCM '" + data.scm + "'");
    }
    try {
      (void)builtin_scm(data.scm, data.sem);
    } catch (const std::exception& ex) {
      throw ConfigError("data.sem", ex.what());
    }
    if (data.samples < 8) throw ConfigError("data.samples", "need at least 8 rows");
    if (!data.graph.empty()) throw ConfigError("data.graph", "only used together with data.csv");
  } else if (data.graph.empty()) {
    throw ConfigError("data.graph", "a CSV needs a graph file");
  }
  if (eval.samples < 2) throw ConfigError("eval.samples", "need at least 2 samples");
  if (eval.multipliers.empty()) throw ConfigError("eval.multipliers", "need at least one multiplier");
  if (eval.kernel.gammas.empty()) throw ConfigError("eval.gammas", "need at least one bandwidth");
  for (double g : eval.kernel.gammas) {
    if (!(g > 0.0)) throw ConfigError("eval.gammas", "bandwidth coefficients must be positive");
  }
  if (audit.draws < 1) throw ConfigError("audit.draws", "need at least one draw");
  if (run.seeds.empty()) throw ConfigError("run.seeds", "need at least one seed");
  if (run.jobs < 1) throw ConfigError("run.jobs", "need at least one job");
  try {
    if (uses_builtin()) model.validate(builtin_scm(data.scm, data.sem).graph);
    else model.validate(load_graph_file(data.graph));
  } catch (const ModelError& ex) {
    const std::string msg = ex.what();
    const auto colon = msg.find(' ');
    throw ConfigError(msg.substr(0, colon), msg.substr(colon + 1));
  } catch (const GraphError& ex) {
    throw ConfigError("data.graph", ex.what());
  }
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  o << "[data]\n";
  if (!data.scm.empty()) o << "scm = " << data.scm << '\n';
  if (!data.sem.empty()) o << "sem = " << data.sem << '\n';
  o << "samples = " << data.samples << '\n' << "seed = " << data.seed << '\n';
  if (!data.csv.empty()) o << "csv = " << data.csv << '\n';
  if (!data.graph.empty()) o << "graph = " << data.graph << '\n';
  if (!data.label.empty()) o << "label = " << data.label << '\n';

  const auto& m = model;
  o << "\n[model]\n"
    << "preset = false\n"
    << "latent_dim = " << m.latent_dim << '\n'
    << "adapter_width = " << m.adapter_width << '\n'
    << "encoder_hidden = " << fmt_list(m.encoder_hidden) << '\n'
    << "decoder_hidden_layers = " << m.decoder_hidden_layers << '\n'
    << "decoder_width = " << m.decoder_width << '\n'
    << "head_hidden = " << fmt_list(m.head_hidden) << '\n'
    << "dropout = " << fmt(m.dropout) << '\n'
    << "dropout_encoder = " << fmt_bool(m.dropout_encoder) << '\n'
    << "dropout_decoder = " << fmt_bool(m.dropout_decoder) << '\n'
    << "residual = " << fmt_bool(m.residual) << '\n'
    << "mode = " << (m.mode == GnnMode::Disjoint ? "disjoint" : "shared") << '\n'
    << "objective = " << (m.objective == Objective::Elbo ? "elbo" : "beta") << '\n'
    << "lambda_kld = " << fmt(m.lambda_kld) << '\n'
    << "learning_rate = " << fmt(m.learning_rate) << '\n'
    << "batch_size = " << m.batch_size << '\n'
    << "max_epochs = " << m.max_epochs << '\n'
    << "patience = " << m.patience << '\n'
    << "iwae_k = " << m.iwae_k << '\n'
    << "valid_rows = " << m.valid_rows << '\n'
    << "allow_shallow_decoder = " << fmt_bool(m.allow_shallow_decoder) << '\n'
    << "seed = " << m.seed << '\n';

  o << "\n[eval]\n"
    << "multipliers = " << fmt_list(eval.multipliers) << '\n'
    << "samples = " << eval.samples << '\n'
    << "gammas = " << fmt_list(eval.kernel.gammas) << '\n'
    << "median_heuristic = " << fmt_bool(eval.kernel.median_heuristic) << '\n'
    << "estimator = " << (eval.estimator == MmdEstimator::Verbatim ? "verbatim" : "textbook") << '\n'
    << "seed = " << eval.seed << '\n'
    << "cf_rows = " << eval.cf_rows << '\n';

  o << "\n[audit]\n";
  if (!audit.sensitive.empty()) o << "sensitive = " << audit.sensitive << '\n';
  o << "draws = " << audit.draws << '\n'
    << "label_seed = " << audit.label_seed << '\n'
    << "clamp = " << fmt_bool(audit.clamp) << '\n';

  o << "\n[run]\n" << "seeds = " << fmt_list(run.seeds) << '\n';
  if (!run.output.empty()) o << "output = " << run.output << '\n';
  o << "jobs = " << run.jobs << '\n';

  if (!sweep.empty()) {
    o << "\n[sweep]\n";
    for (const auto& axis : sweep) o << axis.key << " = " << fmt_list(axis.values) << '\n';
  }
  return o.str();
}

CausalGraph load_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot read graph file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string nodes, edges;
  bool have_nodes = false;
  for (const auto& e : read_entries(ss.str())) {
    if (e.key == "graph.nodes") {
      nodes = e.value;
      have_nodes = true;
    } else if (e.key == "graph.edges") {
      edges = e.value;
    } else {
      throw ConfigError(e.key, "unknown key in graph file");
    }
  }
  if (!have_nodes) throw ConfigError("graph.nodes", "missing");
  return parse_graph(nodes, edges);
}

}  // namespace vaca
