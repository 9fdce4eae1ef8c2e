#include "unprune/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace unpruning {

double sgd_step(MaskedModel& model, const Matrix& inputs, std::span<const int> labels, double lr) {
  const LossGrad lg = backward(model, inputs, labels);
  if (lr != 0.0) {
    add_scaled(model, lg.grad, -lr);
    apply_mask(model);
  }
  return lg.loss;
}

TrainLog train_sgd(MaskedModel& model, const Dataset& data, const IndexList& indices,
                   const TrainConfig& cfg, Rng& rng) {
  if (indices.empty()) throw InputError("train_sgd: no rows to train on");
  if (!(cfg.lr >= 0.0)) throw InputError("train_sgd: lr must be >= 0");
  if (cfg.batch_size < 1) throw InputError("train_sgd: batch_size must be >= 1");

  TrainLog log;
  IndexList order = indices;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<Index>(rng.below(i))]);
    }
    for (Index start = 0; start < order.size(); start += cfg.batch_size) {
      const Index end = std::min(order.size(), start + cfg.batch_size);
      const IndexList batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto labels = data.gather_labels(batch);
      const double loss = sgd_step(model, data.gather_inputs(batch), labels, cfg.lr);
      if (!std::isfinite(loss)) {
        throw NumericError("train_sgd: non-finite loss in epoch " + std::to_string(epoch));
      }
    }
    const EvalResult eval = evaluate(model, data, indices);
    if (!std::isfinite(eval.loss)) {
      throw NumericError("train_sgd: non-finite loss in epoch " + std::to_string(epoch));
    }
    log.epochs.push_back({epoch, eval.loss, eval.accuracy});
  }
  return log;
}

EvalResult evaluate(const MaskedModel& model, const Dataset& data, const IndexList& indices) {
  if (indices.empty()) throw InputError("evaluate: no rows");
  const Matrix logits = forward(model, data.gather_inputs(indices));
  const auto labels = data.gather_labels(indices);
  const auto ce = softmax_cross_entropy(logits, labels);
  Index correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (argmax_row(logits.row(i)) == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return {ce.loss, static_cast<double>(correct) / static_cast<double>(indices.size())};
}

void write_train_log_csv(const TrainLog& log, const std::string& split,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,split,loss,accuracy\n" << std::setprecision(10);
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << split << ',' << e.loss << ',' << e.accuracy << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace unpruning
