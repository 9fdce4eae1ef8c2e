#pragma once

#include <string>

#include "unprune/data.hpp"
#include "unprune/model.hpp"

namespace unpruning {

enum class UnlearnMethod { kGradientAscent, kFisherForgetting, kFinetune, kNoop };

/// Which rows the diagonal Fisher is estimated on for fisher forgetting.
enum class FisherSource { kRetain, kForget, kAll };

struct UnlearnConfig {
  UnlearnMethod method = UnlearnMethod::kGradientAscent;
  int steps = 1;
  double rate = 1e-2;
  double fisher_noise_scale = 1e-3;
  Index batch_size = 32;
  FisherSource fisher_source = FisherSource::kRetain;
  double fisher_epsilon = 1e-8;
  // Upper bound on the per-parameter noise variance multiplier 1/(F + eps);
  // parameters with no Fisher mass would otherwise receive unbounded noise.
  double fisher_variance_cap = 1e3;

  /// Throws ConfigError when rate/steps violate the method's requirements.
  void validate() const;
};

std::string to_string(UnlearnMethod m);
UnlearnMethod unlearn_method_from_string(const std::string& name);

/// Dispatches to the configured method. Gradients flow to every weight whose
/// mask entry is 1; entries with mask 0 are left untouched by the gradient
/// methods.
void unlearn(MaskedModel& model, const DeletionSplit& split, const Dataset& data,
             const UnlearnConfig& cfg, Rng& rng);

/// Full-batch gradient ascent on the forget rows:
/// theta <- theta + rate * grad l(theta; D_f), `steps` times.
void unlearn_gradient_ascent(MaskedModel& model, const Dataset& data, const IndexList& forget,
                             int steps, double rate);

/// Diagonal empirical Fisher: mean over rows of squared per-sample gradients.
GradientSet fisher_diag(const MaskedModel& model, const IndexList& rows, const Dataset& data);

/// theta_i <- theta_i + n_i, n_i ~ N(0, sigma^2 * min(1 / (F_ii + eps), cap)),
/// with F estimated on the rows selected by cfg.fisher_source. Only unmasked
/// weights (and all biases) receive noise.
void unlearn_fisher_forgetting(MaskedModel& model, const DeletionSplit& split, const Dataset& data,
                               const UnlearnConfig& cfg, Rng& rng);

/// Minibatch SGD descent on the retain rows for `steps` steps.
void unlearn_finetune(MaskedModel& model, const Dataset& data, const IndexList& retain, int steps,
                      double rate, Index batch_size, Rng& rng);

}  // namespace unpruning
