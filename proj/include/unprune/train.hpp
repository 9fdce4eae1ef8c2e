#pragma once

#include <filesystem>
#include <vector>

#include "unprune/data.hpp"
#include "unprune/model.hpp"

namespace unpruning {

struct TrainConfig {
  int epochs = 1;
  double lr = 0.1;
  Index batch_size = 32;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;      // mean loss over `indices` at the end of the epoch
  double accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Plain minibatch SGD on the rows `indices` with masks held fixed: the mask
/// is re-applied after every step. Rows are shuffled per epoch from `rng`.
TrainLog train_sgd(MaskedModel& model, const Dataset& data, const IndexList& indices,
                   const TrainConfig& cfg, Rng& rng);

/// Mean loss and argmax accuracy (ties to the lowest class index).
EvalResult evaluate(const MaskedModel& model, const Dataset& data, const IndexList& indices);

/// Emits rows `epoch,split,loss,accuracy`.
void write_train_log_csv(const TrainLog& log, const std::string& split,
                         const std::filesystem::path& path);

/// One SGD step of size `lr` on the given batch; returns the batch loss.
double sgd_step(MaskedModel& model, const Matrix& inputs, std::span<const int> labels, double lr);

}  // namespace unpruning
