#pragma once

#include <vector>

#include "unprune/model.hpp"

namespace unpruning {

struct LayerSparsity {
  Index total = 0;
  Index zeros = 0;
};

/// Mask-zero accounting over weight entries (biases excluded).
struct SparsityReport {
  Index total_weights = 0;
  Index zero_mask_entries = 0;
  double sparsity = 0.0;
  std::vector<LayerSparsity> per_layer;
};

enum class PruneScope { kGlobal, kPerLayer };
enum class Topology { kUnstructured, kStructured };

SparsityReport sparsity_of(const MaskedModel& model);

/// Masks the smallest-|w| unmasked weights until exactly round(target * N)
/// mask entries are zero (globally, or per layer with PruneScope::kPerLayer).
/// Equal magnitudes are removed in ascending flat-index order. Weights are
/// hard-zeroed afterwards.
void prune_magnitude(MaskedModel& model, double target_sparsity,
                     PruneScope scope = PruneScope::kGlobal);

/// A hidden unit: row `unit` of layer `layer` (never the output layer).
struct NeuronId {
  std::size_t layer = 0;
  Eigen::Index unit = 0;
  friend auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

/// Per hidden layer, brings the number of pruned units up to
/// floor(fraction * units) by masking the active units whose incoming-weight
/// row has the smallest l2 norm (ties to the lowest unit index). A pruned
/// unit has its whole incoming mask row zeroed and its bias set to zero.
void prune_structured_l2(MaskedModel& model, double prune_fraction);

/// Hidden units whose incoming mask row is entirely zero.
std::vector<NeuronId> pruned_neurons(const MaskedModel& model);
Index hidden_unit_count(const MaskedModel& model);

/// 1 for each active hidden unit, 0 for each pruned one, in layer order.
Vector neuron_mask(const MaskedModel& model);

/// Zeroes the weights and bias of every pruned hidden unit.
void zero_pruned_neurons(MaskedModel& model);

/// Dispatch used by the experiment pipeline: magnitude pruning to
/// `level` (a weight sparsity) or structured pruning with `level` as the
/// hidden-unit fraction.
void prune_to(MaskedModel& model, Topology topology, double level,
              PruneScope scope = PruneScope::kGlobal);

}  // namespace unpruning
