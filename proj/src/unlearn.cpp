#include "unprune/unlearn.hpp"

#include <algorithm>
#include <cmath>

#include "unprune/train.hpp"

namespace unpruning {

void UnlearnConfig::validate() const {
  if (method == UnlearnMethod::kNoop) return;
  if (!(rate > 0.0)) throw ConfigError("unlearn: rate must be > 0 for " + to_string(method));
  if (steps < 1) {
    throw ConfigError("unlearn: steps must be >= 1 for " + to_string(method));
  }
  if (!(fisher_noise_scale >= 0.0)) throw ConfigError("unlearn: fisher_noise_scale must be >= 0");
  if (batch_size < 1) throw ConfigError("unlearn: batch_size must be >= 1");
}

std::string to_string(UnlearnMethod m) {
  switch (m) {
    case UnlearnMethod::kGradientAscent: return "ga";
    case UnlearnMethod::kFisherForgetting: return "fisher";
    case UnlearnMethod::kFinetune: return "finetune";
    case UnlearnMethod::kNoop: return "noop";
  }
  return "?";
}

UnlearnMethod unlearn_method_from_string(const std::string& name) {
  if (name == "ga" || name == "gradient_ascent") return UnlearnMethod::kGradientAscent;
  if (name == "fisher" || name == "fisher_forgetting") return UnlearnMethod::kFisherForgetting;
  if (name == "finetune" || name == "ft") return UnlearnMethod::kFinetune;
  if (name == "noop") return UnlearnMethod::kNoop;
  throw ConfigError("unknown unlearning method '" + name + "'");
}

void unlearn(MaskedModel& model, const DeletionSplit& split, const Dataset& data,
             const UnlearnConfig& cfg, Rng& rng) {
  cfg.validate();
  switch (cfg.method) {
    case UnlearnMethod::kGradientAscent:
      unlearn_gradient_ascent(model, data, split.forget, cfg.steps, cfg.rate);
      return;
    case UnlearnMethod::kFisherForgetting:
      unlearn_fisher_forgetting(model, split, data, cfg, rng);
      return;
    case UnlearnMethod::kFinetune:
      unlearn_finetune(model, data, split.retain, cfg.steps, cfg.rate, cfg.batch_size, rng);
      return;
    case UnlearnMethod::kNoop:
      return;
  }
  throw ConfigError("unlearn: unknown method");
}

void unlearn_gradient_ascent(MaskedModel& model, const Dataset& data, const IndexList& forget,
                             int steps, double rate) {
  if (forget.empty()) throw InputError("unlearn_gradient_ascent: empty forget set");
  if (rate == 0.0) return;
  const Matrix inputs = data.gather_inputs(forget);
  const auto labels = data.gather_labels(forget);
  for (int s = 0; s < steps; ++s) {
    const LossGrad lg = backward(model, inputs, labels);
    if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) {
      throw NumericError("unlearn_gradient_ascent: non-finite loss at step " + std::to_string(s));
    }
    add_scaled(model, lg.grad, rate);
  }
  const LossGrad last = backward(model, inputs, labels);
  if (!std::isfinite(last.loss)) {
    throw NumericError("unlearn_gradient_ascent: non-finite loss at step " + std::to_string(steps));
  }
}

GradientSet fisher_diag(const MaskedModel& model, const IndexList& rows, const Dataset& data) {
  if (rows.empty()) throw InputError("fisher_diag: no rows");
  GradientSet fisher = GradientSet::zeros_like(model);
  for (Index r : rows) {
    const IndexList one{r};
    const auto labels = data.gather_labels(one);
    LossGrad lg = backward(model, data.gather_inputs(one), labels);
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      fisher.weights[l] += lg.grad.weights[l].cwiseAbs2();
      fisher.biases[l] += lg.grad.biases[l].cwiseAbs2();
    }
  }
  fisher *= 1.0 / static_cast<double>(rows.size());
  return fisher;
}

void unlearn_fisher_forgetting(MaskedModel& model, const DeletionSplit& split, const Dataset& data,
                               const UnlearnConfig& cfg, Rng& rng) {
  if (!(cfg.fisher_noise_scale >= 0.0)) throw InputError("fisher forgetting: sigma must be >= 0");
  if (cfg.fisher_noise_scale == 0.0) return;
  IndexList rows;
  switch (cfg.fisher_source) {
    case FisherSource::kRetain: rows = split.retain; break;
    case FisherSource::kForget: rows = split.forget; break;
    case FisherSource::kAll: rows = all_rows(data); break;
  }
  const GradientSet fisher = fisher_diag(model, rows, data);
  const double sigma = cfg.fisher_noise_scale;
  const auto noise_std = [&](double f) {
    return sigma * std::sqrt(std::min(1.0 / (f + cfg.fisher_epsilon), cfg.fisher_variance_cap));
  };
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix& w = model.weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (model.masks[l].data()[i] == 0.0) continue;
      w.data()[i] += noise_std(fisher.weights[l].data()[i]) * rng.normal();
    }
    Vector& b = model.biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) += noise_std(fisher.biases[l](i)) * rng.normal();
  }
}

void unlearn_finetune(MaskedModel& model, const Dataset& data, const IndexList& retain, int steps,
                      double rate, Index batch_size, Rng& rng) {
  if (steps <= 0 || rate == 0.0) return;
  if (retain.empty()) throw InputError("unlearn_finetune: empty retain set");
  if (batch_size < 1) throw InputError("unlearn_finetune: batch_size must be >= 1");
  IndexList order = retain;
  Index cursor = order.size();
  for (int s = 0; s < steps; ++s) {
    if (cursor >= order.size()) {
      for (Index i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<Index>(rng.below(i))]);
      cursor = 0;
    }
    const Index end = std::min(order.size(), cursor + batch_size);
    const IndexList batch(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                          order.begin() + static_cast<std::ptrdiff_t>(end));
    cursor = end;
    const auto labels = data.gather_labels(batch);
    const double loss = sgd_step(model, data.gather_inputs(batch), labels, rate);
    if (!std::isfinite(loss)) {
      throw NumericError("unlearn_finetune: non-finite loss at step " + std::to_string(s));
    }
  }
}

}  // namespace unpruning
