#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "unprune/data.hpp"
#include "unprune/rng.hpp"
#include "unprune/tensor.hpp"

namespace unpruning {

enum class Activation { kRelu, kNone };

struct LayerSpec {
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;
  Activation activation = Activation::kRelu;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Hidden sizes plus input/output dims to a relu MLP with linear logits.
std::vector<LayerSpec> mlp_specs(std::span<const Eigen::Index> dims);

/// A multilayer perceptron whose effective weights are weights ⊙ masks.
/// Weight matrices are [out x in]; row j of layer l holds the incoming
/// weights of unit j. Biases are never masked.
struct MaskedModel {
  std::vector<LayerSpec> layers;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::vector<Matrix> masks;
  std::vector<Matrix> init_snapshot;
  std::uint64_t seed = 0;

  std::size_t num_layers() const { return layers.size(); }
  /// Number of weight entries (biases excluded).
  Index num_weights() const;
  Eigen::Index input_dim() const { return layers.front().in_dim; }
  Eigen::Index output_dim() const { return layers.back().out_dim; }

  /// Throws ShapeError when weights, masks, snapshot or biases disagree with
  /// the layer specs, InputError when a mask entry is not 0 or 1.
  void validate() const;
};

/// Parameter-congruent container for gradients and Fisher diagonals.
struct GradientSet {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static GradientSet zeros_like(const MaskedModel& model);
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double s);
  double squared_norm() const;
  bool all_finite() const;
};

/// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases, all-ones
/// masks, init_snapshot = weights. Each layer draws from its own sub-stream.
MaskedModel init_model(std::span<const LayerSpec> specs, const Rng& rng);

/// Per-layer post-activation values, needed by backward.
struct ForwardCache {
  std::vector<Matrix> activations;  // activations[0] = inputs, back() = logits
};

Matrix forward(const MaskedModel& model, const Matrix& inputs);
Matrix forward(const MaskedModel& model, const Matrix& inputs, ForwardCache& cache);

struct LossGrad {
  double loss = 0.0;
  GradientSet grad;
};

/// Mean cross-entropy on (inputs, labels) and its gradient with respect to
/// the raw weights. Masked-out entries get exactly zero gradient.
LossGrad backward(const MaskedModel& model, const Matrix& inputs, std::span<const int> labels);

/// weights <- weights ⊙ masks.
void apply_mask(MaskedModel& model);

/// Adds `scale * grad` to the parameters (weights and biases).
void add_scaled(MaskedModel& model, const GradientSet& grad, double scale);

/// Masks in layer order, each flattened row-major, concatenated.
Vector flatten_masks(const MaskedModel& model);
Vector flatten_weights(const MaskedModel& model);

/// Location of a global flat weight index.
struct WeightPos {
  std::size_t layer;
  Eigen::Index row;
  Eigen::Index col;
};
WeightPos locate(const MaskedModel& model, Index flat);

}  // namespace unpruning
