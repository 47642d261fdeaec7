#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaca/dataset.hpp"
#include "vaca/vaca_model.hpp"

namespace vaca {

class FairnessError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class InputSelector {
  Full,     // every node
  Unaware,  // every node except the sensitive one
  FairX,    // nodes that do not have the sensitive node as an ancestor
  FairZ     // posterior-mean latents of every node except the sensitive one
};
std::string to_string(InputSelector s);
InputSelector parse_input_selector(const std::string& s);

/// Logistic regression on the columns picked by `selector`.
struct ClassifierSpec {
  InputSelector selector = InputSelector::Full;
  NodeIndex sensitive = 0;
  Vector weights;
  double bias = 0.0;
  double weight_negative = 1.0;  // balanced class weights n / (2 n_c)
  double weight_positive = 1.0;
  std::size_t steps = 0;
  double grad_norm = 0.0;

  /// Positive-class probability per row of a feature matrix.
  Vector probability(const Matrix& features) const;
};

struct LogregOptions {
  double tolerance = 1e-6;
  std::size_t max_steps = 10000;
};

/// Gradient descent with backtracking line search on the class-weighted
/// cross-entropy. Labels must be 0/1 with both classes present.
ClassifierSpec train_logreg(const Matrix& features, const std::vector<double>& labels,
                            const LogregOptions& opts = {});

/// Node indices whose columns feed a data-space selector.
std::vector<NodeIndex> selector_nodes(const CausalGraph& graph, InputSelector selector, NodeIndex sensitive);

/// Classifier inputs for rows of `x` (dataset layout, normalized units).
/// Categorical columns are one-hot encoded; FairZ needs the model.
Matrix classifier_features(const VacaModel& model, const Matrix& x, InputSelector selector, NodeIndex sensitive);

struct UnfairnessOptions {
  std::size_t draws = 10;    // counterfactual samples per branch and factual row
  std::uint64_t seed = 0;    // shared by both branches
  bool clamp = true;         // counterfactual sensitive column equals the do-value
  std::size_t threads = 0;   // 0 = hardware concurrency
};

/// Mean over factual rows of |P(h = 1 | do(S = a)) - P(h = 1 | do(S = 1 - a))|,
/// each probability averaged over sampled counterfactuals.
double unfairness(const ClassifierSpec& clf, const VacaModel& model, const Matrix& factual,
                  const UnfairnessOptions& opts = {});

struct BinaryScores {
  double f1 = 0.0;
  double accuracy = 0.0;
};
/// Positive class 1; predictions are thresholded at 0.5 by the caller.
BinaryScores binary_scores(const std::vector<int>& truth, const std::vector<int>& predicted);

struct ClassifierReport {
  InputSelector selector = InputSelector::Full;
  double uf = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

struct AuditReport {
  std::string sensitive;
  std::size_t draws = 0;
  std::uint64_t model_fingerprint = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::vector<ClassifierReport> classifiers;

  const ClassifierReport& at(InputSelector s) const;
  nlohmann::json to_json() const;
  static AuditReport from_json(const nlohmann::json& j);
};

/// Trains full, unaware, fair-x and fair-z classifiers on the train split and
/// reports counterfactual unfairness, f1 and accuracy on the test split.
/// `labels` has one 0/1 entry per dataset row.
AuditReport audit(const VacaModel& model, const Dataset& data, const std::vector<double>& labels, NodeIndex sensitive,
                  const UnfairnessOptions& opts = {});

/// Demonstration label for the loan SCM:
/// y = 1{0.3 I + 0.2 G - 0.1 D - 0.1 L + e > 0}, e ~ N(0, 1), on raw values.
std::vector<double> loan_labels(const Dataset& data, std::uint64_t seed);

}  // namespace vaca
