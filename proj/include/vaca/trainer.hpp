#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaca/dataset.hpp"
#include "vaca/vaca_model.hpp"

namespace vaca {

struct TrainReport {
  std::vector<double> train_elbo;   // per epoch, mean over batches
  std::vector<double> valid_iwae;   // per epoch
  double initial_valid_iwae = 0.0;  // before the first update
  std::size_t best_epoch = 0;       // 1-based; 0 when no epoch ran
  double best_valid_iwae = 0.0;
  std::string stop_reason;          // "patience" | "max_epochs"
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

using EpochCallback = std::function<void(std::size_t epoch, double train_elbo, double valid_iwae)>;

/// Mini-batch Adam on the negative ELBO with parents dropout. After every
/// epoch the validation IWAE decides early stopping; the best parameters are
/// restored at the end. `data` must be normalized. Runs are deterministic
/// given the model seed.
TrainReport train(VacaModel& model, const Dataset& data, const EpochCallback& on_epoch = {});

}  // namespace vaca
