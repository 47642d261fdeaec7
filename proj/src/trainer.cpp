#include "vaca/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace vaca {

nlohmann::json TrainReport::to_json() const {
  return {{"train_elbo", train_elbo},
          {"valid_iwae", valid_iwae},
          {"initial_valid_iwae", initial_valid_iwae},
          {"best_epoch", best_epoch},
          {"best_valid_iwae", best_valid_iwae},
          {"stop_reason", stop_reason},
          {"wall_seconds", wall_seconds}};
}

TrainReport train(VacaModel& model, const Dataset& data, const EpochCallback& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  if (!data.normalized()) throw ModelError("training data must be normalized");
  if (data.splits.train == 0 || data.splits.valid == 0) throw ModelError("training needs train and validation rows");
  if (data.width() != model.data_width()) throw ModelError("dataset width does not match the model");

  const VacaConfig& cfg = model.config();
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  auto params = model.parameters();
  std::vector<ad::Parameter*> raw;
  for (auto& [name, p] : params) raw.push_back(p);
  ad::Adam adam(raw, cfg.learning_rate);

  const VacaAdjacency adj = model.graph().adjacency();
  const Matrix train_x = data.train();
  const std::size_t valid_rows =
      cfg.valid_rows == 0 ? data.splits.valid : std::min(cfg.valid_rows, data.splits.valid);
  const Matrix valid_x = data.valid().topRows(static_cast<Eigen::Index>(valid_rows));
  auto snapshot = [&] {
    std::vector<Matrix> s;
    for (auto* p : raw) s.push_back(p->value());
    return s;
  };

  TrainReport report;
  report.initial_valid_iwae = model.iwae(valid_x, adj, cfg.iwae_k, rng);
  report.best_valid_iwae = report.initial_valid_iwae;  // replaced by the first epoch
  std::vector<Matrix> best = snapshot();
  std::size_t since_best = 0;
  report.stop_reason = "max_epochs";

  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_x.rows()));
  std::iota(order.begin(), order.end(), 0);
  const auto n = static_cast<std::size_t>(train_x.rows());
  const std::size_t batch = std::min(cfg.batch_size, n);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double elbo_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start_row = 0; start_row < n; start_row += batch) {
      const std::size_t rows = std::min(batch, n - start_row);
      Matrix xb(static_cast<Eigen::Index>(rows), train_x.cols());
      for (std::size_t r = 0; r < rows; ++r) xb.row(static_cast<Eigen::Index>(r)) = train_x.row(order[start_row + r]);
      ad::Tape tape;
      ad::Tensor elbo;
      {
        ad::RecordScope scope(tape);
        elbo = model.elbo(xb, adj, rng, true);
        tape.backward(ad::scale(elbo, -1.0));
      }
      adam.step();
      adam.zero_grad();
      elbo_sum += elbo.item();
      ++batches;
    }
    const double train_elbo = elbo_sum / static_cast<double>(batches);
    const double iwae = model.iwae(valid_x, adj, cfg.iwae_k, rng);
    report.train_elbo.push_back(train_elbo);
    report.valid_iwae.push_back(iwae);
    if (on_epoch) on_epoch(epoch, train_elbo, iwae);
    if (report.best_epoch == 0 || iwae > report.best_valid_iwae) {
      report.best_valid_iwae = iwae;
      report.best_epoch = epoch;
      best = snapshot();
      since_best = 0;
      continue;
    }
    if (++since_best > cfg.patience) {
      report.stop_reason = "patience";
      break;
    }
  }
  for (std::size_t k = 0; k < raw.size(); ++k) raw[k]->value() = best[k];
  model.normalization = data.normalization;
  model.metadata["data_source"] = data.source;
  model.metadata["data_seed"] = data.seed;
  model.metadata["splits"] = {data.splits.train, data.splits.valid, data.splits.test};
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace vaca
