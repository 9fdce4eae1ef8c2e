#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "unprune/data.hpp"
#include "unprune/model.hpp"
#include "unprune/prune.hpp"
#include "unprune/unlearn.hpp"

namespace unpruning {

enum class InitStrategy {
  kOriginal,  // restore the saved initialization values
  kRandom,    // draw N(0, random_init_std^2)
};

std::string to_string(InitStrategy s);
InitStrategy init_strategy_from_string(const std::string& name);

/// Un-pruning parameters. For Topology::kUnstructured the sparsity and growth
/// fractions are over all N weights; for kStructured they are over hidden
/// units.
struct UnpruneConfig {
  double original_sparsity = 0.6;
  double grow_per_iter = 0.05;
  int iterations = 3;
  InitStrategy init_strategy = InitStrategy::kOriginal;
  double random_init_std = 0.01;
  UnlearnConfig unlearn;
  Topology topology = Topology::kUnstructured;
  PruneScope final_scope = PruneScope::kGlobal;

  void validate() const;
};

struct TraceRecord {
  int iteration = 0;  // 0 = input model, 1..T = after each growth, T+1 = after the final prune
  double sparsity = 0.0;
  Index grown_count = 0;
  std::optional<double> ua;
  std::optional<double> ta;
  IndexList grown;  // flat weight indices (unstructured) or flat hidden-unit indices (structured)
};

struct UnpruneTrace {
  std::vector<TraceRecord> records;
};

struct UnpruneResult {
  MaskedModel model;
  UnpruneTrace trace;
};

/// Gives every masked-out weight a nonzero value again: its saved
/// initialization value (kOriginal) or a N(0, random_std^2) draw (kRandom).
/// Unmasked weights are untouched. Masks are not changed.
void reinit_pruned(MaskedModel& model, InitStrategy strategy, double random_std, Rng& rng);

/// Flips to 1 the round(p * N) masked entries with the largest |weight|
/// (ties to the lowest flat index). Returns the grown flat indices, ascending.
IndexList grow_mask(MaskedModel& model, double p);

/// Restores round(p_units * hidden units) pruned hidden units, choosing those
/// whose incoming-weight row has the largest l2 norm (ties to the lowest
/// unit). A restored unit gets its whole incoming mask row set to 1.
std::vector<NeuronId> grow_mask_structured(MaskedModel& model, double p_units);

/// The un-pruning loop. Per iteration: re-initialize pruned weights, run the
/// unlearning method on the model with every weight trainable, grow the mask,
/// re-apply it. Afterwards the model is pruned back to the original sparsity
/// by one-shot magnitude (or l2 unit) pruning.
///
/// `test` is optional and only feeds the TA column of the trace.
UnpruneResult unprune(MaskedModel model, const Dataset& data, const DeletionSplit& split,
                      const UnpruneConfig& cfg, Rng& rng, const Dataset* test = nullptr);

/// Sparsity in the units of `topology`: weight fraction or hidden-unit fraction.
double topology_sparsity(const MaskedModel& model, Topology topology);

/// Rows `iteration,sparsity,ua,ta,grown_count`; absent values are empty.
void write_trace_csv(const UnpruneTrace& trace, const std::filesystem::path& path);

}  // namespace unpruning
