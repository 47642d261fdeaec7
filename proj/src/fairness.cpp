#include "vaca/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <thread>

#include "vaca/queries.hpp"

namespace vaca {

using nlohmann::json;

namespace {

constexpr std::size_t kChunkRows = 128;

Vector sigmoid(const Vector& v) { return (1.0 + (-v.array()).exp()).inverse().matrix(); }

double weighted_loss(const Matrix& x, const Vector& y, const Vector& c, const Vector& w, double b) {
  const Vector logit = (x * w).array() + b;
  // log(1 + exp(-t)) for y = 1, log(1 + exp(t)) for y = 0, computed stably
  double total = 0.0;
  for (Eigen::Index i = 0; i < logit.size(); ++i) {
    const double t = y[i] > 0.5 ? -logit[i] : logit[i];
    total += c[i] * (std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))));
  }
  return total / static_cast<double>(logit.size());
}

NodeIndex check_sensitive(const VacaModel& model, NodeIndex sensitive) {
  const auto& g = model.graph();
  if (sensitive >= g.size()) throw FairnessError("sensitive node out of range");
  const auto& node = g.node(sensitive);
  if (node.dim() != 1 || node.columns[0].kind != VarKind::Binary) {
    throw FairnessError("sensitive node " + node.name + " must be a single binary column");
  }
  return sensitive;
}

std::vector<int> predictions(const Vector& p) {
  std::vector<int> out(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p[i] > 0.5 ? 1 : 0;
  return out;
}

}  // namespace

std::string to_string(InputSelector s) {
  switch (s) {
    case InputSelector::Full:
      return "full";
    case InputSelector::Unaware:
      return "unaware";
    case InputSelector::FairX:
      return "fair-x";
    case InputSelector::FairZ:
      return "fair-z";
  }
  return "unknown";
}

InputSelector parse_input_selector(const std::string& s) {
  for (auto sel : {InputSelector::Full, InputSelector::Unaware, InputSelector::FairX, InputSelector::FairZ}) {
    if (to_string(sel) == s) return sel;
  }
  throw FairnessError("unknown classifier input selector: " + s);
}

Vector ClassifierSpec::probability(const Matrix& features) const {
  if (features.cols() != weights.size()) throw FairnessError("classifier input width mismatch");
  return sigmoid((features * weights).array() + bias);
}

ClassifierSpec train_logreg(const Matrix& features, const std::vector<double>& labels, const LogregOptions& opts) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw FairnessError("label count does not match feature rows");
  if (n == 0) throw FairnessError("no training rows");
  std::size_t positives = 0;
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw FairnessError("labels must be 0 or 1");
    positives += y == 1.0 ? 1 : 0;
  }
  if (positives == 0 || positives == n) throw FairnessError("labels contain a single class");

  ClassifierSpec clf;
  clf.weight_positive = static_cast<double>(n) / (2.0 * static_cast<double>(positives));
  clf.weight_negative = static_cast<double>(n) / (2.0 * static_cast<double>(n - positives));
  const Vector y = Eigen::Map<const Vector>(labels.data(), static_cast<Eigen::Index>(n));
  Vector c(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) c[static_cast<Eigen::Index>(i)] = labels[i] == 1.0 ? clf.weight_positive : clf.weight_negative;

  Vector w = Vector::Zero(features.cols());
  double b = 0.0;
  double loss = weighted_loss(features, y, c, w, b);
  double step = 1.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (clf.steps = 0; clf.steps < opts.max_steps; ++clf.steps) {
    const Vector r = (c.array() * (sigmoid((features * w).array() + b) - y).array()).matrix();
    const Vector gw = features.transpose() * r * inv_n;
    const double gb = r.sum() * inv_n;
    const double g2 = gw.squaredNorm() + gb * gb;
    clf.grad_norm = std::sqrt(g2);
    if (clf.grad_norm < opts.tolerance) break;
    step *= 2.0;
    for (;;) {
      const Vector w_new = w - step * gw;
      const double b_new = b - step * gb;
      const double l_new = weighted_loss(features, y, c, w_new, b_new);
      if (l_new <= loss - 1e-4 * step * g2 || step < 1e-12) {
        w = w_new;
        b = b_new;
        loss = l_new;
        break;
      }
      step *= 0.5;
    }
  }
  clf.weights = std::move(w);
  clf.bias = b;
  return clf;
}

std::vector<NodeIndex> selector_nodes(const CausalGraph& graph, InputSelector selector, NodeIndex sensitive) {
  std::vector<NodeIndex> nodes;
  const auto desc = graph.descendants(sensitive);
  for (NodeIndex i = 0; i < graph.size(); ++i) {
    switch (selector) {
      case InputSelector::Full:
        nodes.push_back(i);
        break;
      case InputSelector::Unaware:
      case InputSelector::FairZ:
        if (i != sensitive) nodes.push_back(i);
        break;
      case InputSelector::FairX:
        if (i != sensitive && !desc.contains(i)) nodes.push_back(i);
        break;
    }
  }
  return nodes;
}

Matrix classifier_features(const VacaModel& model, const Matrix& x, InputSelector selector, NodeIndex sensitive) {
  const auto nodes = selector_nodes(model.graph(), selector, sensitive);
  if (selector == InputSelector::FairZ) {
    const Posterior q = model.encode(x, model.graph().adjacency());
    const auto L = model.config().latent_dim;
    Matrix out(x.rows(), static_cast<Eigen::Index>(nodes.size()) * L);
    for (std::size_t k = 0; k < nodes.size(); ++k) out.middleCols(static_cast<Eigen::Index>(k) * L, L) = q.mean[nodes[k]].value();
    return out;
  }
  Eigen::Index width = 0;
  for (NodeIndex i : nodes) {
    for (const auto& col : model.graph().node(i).columns) width += col.kind == VarKind::Categorical ? col.cardinality : 1;
  }
  Matrix out = Matrix::Zero(x.rows(), width);
  Eigen::Index at = 0;
  for (NodeIndex i : nodes) {
    const auto& s = model.node_slices()[i];
    const auto& cols = model.graph().node(i).columns;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto src = static_cast<Eigen::Index>(s.offset + k);
      if (cols[k].kind == VarKind::Categorical) {
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
          const auto code = static_cast<long>(std::lround(x(r, src)));
          if (code >= 0 && code < cols[k].cardinality) out(r, at + code) = 1.0;
        }
        at += cols[k].cardinality;
      } else {
        out.col(at++) = x.col(src);
      }
    }
  }
  return out;
}

double unfairness(const ClassifierSpec& clf, const VacaModel& model, const Matrix& factual,
                  const UnfairnessOptions& opts) {
  const NodeIndex s = check_sensitive(model, clf.sensitive);
  if (opts.draws == 0) throw FairnessError("unfairness needs at least one counterfactual draw");
  if (factual.rows() == 0) throw FairnessError("unfairness needs factual rows");
  const auto m = static_cast<Eigen::Index>(opts.draws);
  const std::size_t chunks = (static_cast<std::size_t>(factual.rows()) + kChunkRows - 1) / kChunkRows;

  // gap sum of one chunk; the chunk seed depends only on its index
  auto chunk_gap = [&](std::size_t c) {
    const auto first = static_cast<Eigen::Index>(c * kChunkRows);
    const auto rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(kChunkRows), factual.rows() - first);
    Matrix rep(rows * m, factual.cols());
    for (Eigen::Index r = 0; r < rows; ++r) rep.middleRows(r * m, m).rowwise() = factual.row(first + r);
    const std::uint64_t seed = opts.seed + 0x9e3779b97f4a7c15ULL * (c + 1);
    Vector p[2];
    for (int a = 0; a < 2; ++a) {
      const Matrix cf = counterfactual_vaca(model, rep, InterventionSpec{s, {static_cast<double>(a)}, false},
                                            CfMode::Sample, seed, QueryOptions{opts.clamp});
      p[a] = clf.probability(classifier_features(model, cf, clf.selector, s));
    }
    double gap = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) gap += std::abs(p[1].segment(r * m, m).mean() - p[0].segment(r * m, m).mean());
    return gap;
  };

  std::size_t workers = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.threads;
  workers = std::min(workers, chunks);
  std::vector<double> gaps(chunks, 0.0);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) gaps[c] = chunk_gap(c);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t c = w; c < chunks; c += workers) gaps[c] = chunk_gap(c);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  double total = 0.0;
  for (double g : gaps) total += g;
  return total / static_cast<double>(factual.rows());
}

BinaryScores binary_scores(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) throw FairnessError("score inputs differ in length");
  if (truth.empty()) throw FairnessError("no rows to score");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) ++correct;
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    if (predicted[i] == 1 && truth[i] == 0) ++fp;
    if (predicted[i] == 0 && truth[i] == 1) ++fn;
  }
  BinaryScores s;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  const std::size_t denom = 2 * tp + fp + fn;
  s.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  return s;
}

const ClassifierReport& AuditReport::at(InputSelector s) const {
  for (const auto& c : classifiers) {
    if (c.selector == s) return c;
  }
  throw FairnessError("audit report has no " + to_string(s) + " classifier");
}

json AuditReport::to_json() const {
  json cls = json::array();
  for (const auto& c : classifiers) {
    cls.push_back({{"classifier", to_string(c.selector)}, {"uf", c.uf}, {"f1", c.f1}, {"acc", c.accuracy}});
  }
  return {{"sensitive", sensitive},   {"draws", draws},           {"model_fingerprint", model_fingerprint},
          {"train_rows", train_rows}, {"test_rows", test_rows}, {"classifiers", cls}};
}

AuditReport AuditReport::from_json(const json& j) {
  AuditReport r;
  r.sensitive = j.at("sensitive").get<std::string>();
  r.draws = j.at("draws").get<std::size_t>();
  r.model_fingerprint = j.at("model_fingerprint").get<std::uint64_t>();
  r.train_rows = j.at("train_rows").get<std::size_t>();
  r.test_rows = j.at("test_rows").get<std::size_t>();
  for (const auto& c : j.at("classifiers")) {
    r.classifiers.push_back({parse_input_selector(c.at("classifier").get<std::string>()), c.at("uf").get<double>(),
                             c.at("f1").get<double>(), c.at("acc").get<double>()});
  }
  return r;
}

AuditReport audit(const VacaModel& model, const Dataset& data, const std::vector<double>& labels, NodeIndex sensitive,
                  const UnfairnessOptions& opts) {
  check_sensitive(model, sensitive);
  if (!data.normalized()) throw FairnessError("audit expects a normalized dataset");
  if (labels.size() != data.rows()) throw FairnessError("one label per dataset row is required");
  if (data.width() != model.data_width()) throw FairnessError("dataset and model column layouts differ");

  const Matrix train_x = data.train();
  const Matrix test_x = data.test();
  const std::vector<double> train_y(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(data.splits.train));
  std::vector<int> test_y;
  for (std::size_t r = data.test_offset(); r < data.rows(); ++r) test_y.push_back(labels[r] == 1.0 ? 1 : 0);

  AuditReport report;
  report.sensitive = model.graph().node(sensitive).name;
  report.draws = opts.draws;
  report.model_fingerprint = model.fingerprint();
  report.train_rows = data.splits.train;
  report.test_rows = data.splits.test;
  for (auto sel : {InputSelector::Full, InputSelector::Unaware, InputSelector::FairX, InputSelector::FairZ}) {
    ClassifierSpec clf = train_logreg(classifier_features(model, train_x, sel, sensitive), train_y);
    clf.selector = sel;
    clf.sensitive = sensitive;
    const auto scores =
        binary_scores(test_y, predictions(clf.probability(classifier_features(model, test_x, sel, sensitive))));
    report.classifiers.push_back({sel, unfairness(clf, model, test_x, opts), scores.f1, scores.accuracy});
  }
  return report;
}

std::vector<double> loan_labels(const Dataset& data, std::uint64_t seed) {
  const Matrix raw = data.raw_x();
  auto column = [&](const std::string& name) {
    const auto it = std::find(data.node_names.begin(), data.node_names.end(), name);
    if (it == data.node_names.end()) throw FairnessError("loan label needs column " + name);
    return static_cast<Eigen::Index>(data.node_slices[static_cast<std::size_t>(it - data.node_names.begin())].offset);
  };
  const auto ci = column("I"), cg = column("G"), cd = column("D"), cl = column("L");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> y(data.rows());
  for (std::size_t r = 0; r < y.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const double score = 0.3 * raw(i, ci) + 0.2 * raw(i, cg) - 0.1 * raw(i, cd) - 0.1 * raw(i, cl) + noise(rng);
    y[r] = score > 0.0 ? 1.0 : 0.0;
  }
  return y;
}

}  // namespace vaca
