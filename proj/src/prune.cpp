#include "unprune/prune.hpp"

#include <algorithm>
#include <cmath>

namespace unpruning {

SparsityReport sparsity_of(const MaskedModel& model) {
  SparsityReport r;
  for (const auto& m : model.masks) {
    LayerSparsity ls;
    ls.total = static_cast<Index>(m.size());
    ls.zeros = static_cast<Index>((m.array() == 0.0).count());
    r.total_weights += ls.total;
    r.zero_mask_entries += ls.zeros;
    r.per_layer.push_back(ls);
  }
  r.sparsity = r.total_weights == 0
                   ? 0.0
                   : static_cast<double>(r.zero_mask_entries) / static_cast<double>(r.total_weights);
  return r;
}

namespace {

struct Candidate {
  double magnitude;
  Index flat;
};

Index target_count(double target, Index n) {
  return static_cast<Index>(std::llround(target * static_cast<double>(n)));
}

// Masks the `count` smallest-magnitude unmasked entries in layers [first, last).
void mask_smallest(MaskedModel& model, std::size_t first, std::size_t last, Index count) {
  if (count == 0) return;
  std::vector<Candidate> cands;
  Index offset = 0;
  for (std::size_t l = 0; l < first; ++l) offset += static_cast<Index>(model.weights[l].size());
  for (std::size_t l = first; l < last; ++l) {
    const Matrix& w = model.weights[l];
    const Matrix& m = model.masks[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (m.data()[i] != 0.0) cands.push_back({std::abs(w.data()[i]), offset + static_cast<Index>(i)});
    }
    offset += static_cast<Index>(w.size());
  }
  const auto by_magnitude = [](const Candidate& a, const Candidate& b) {
    return a.magnitude != b.magnitude ? a.magnitude < b.magnitude : a.flat < b.flat;
  };
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(count), cands.end(),
                    by_magnitude);
  for (Index c = 0; c < count; ++c) {
    const WeightPos p = locate(model, cands[c].flat);
    model.masks[p.layer](p.row, p.col) = 0.0;
  }
}

bool row_pruned(const MaskedModel& model, std::size_t layer, Eigen::Index unit) {
  return (model.masks[layer].row(unit).array() == 0.0).all();
}

}  // namespace

void prune_magnitude(MaskedModel& model, double target_sparsity, PruneScope scope) {
  if (!(target_sparsity >= 0.0 && target_sparsity < 1.0)) {
    throw InputError("prune_magnitude: target sparsity must be in [0, 1)");
  }
  const SparsityReport now = sparsity_of(model);
  if (scope == PruneScope::kGlobal) {
    const Index want = target_count(target_sparsity, now.total_weights);
    if (want < now.zero_mask_entries) {
      throw InputError("prune_magnitude: target " + std::to_string(target_sparsity) +
                       " is below current sparsity " + std::to_string(now.sparsity));
    }
    mask_smallest(model, 0, model.num_layers(), want - now.zero_mask_entries);
  } else {
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      const Index want = target_count(target_sparsity, now.per_layer[l].total);
      if (want < now.per_layer[l].zeros) {
        throw InputError("prune_magnitude: layer " + std::to_string(l) +
                         " is already sparser than the target");
      }
    }
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      mask_smallest(model, l, l + 1,
                    target_count(target_sparsity, now.per_layer[l].total) - now.per_layer[l].zeros);
    }
  }
  apply_mask(model);
}

Index hidden_unit_count(const MaskedModel& model) {
  Index n = 0;
  for (std::size_t l = 0; l + 1 < model.num_layers(); ++l) n += static_cast<Index>(model.layers[l].out_dim);
  return n;
}

std::vector<NeuronId> pruned_neurons(const MaskedModel& model) {
  std::vector<NeuronId> out;
  for (std::size_t l = 0; l + 1 < model.num_layers(); ++l) {
    for (Eigen::Index u = 0; u < model.layers[l].out_dim; ++u) {
      if (row_pruned(model, l, u)) out.push_back({l, u});
    }
  }
  return out;
}

Vector neuron_mask(const MaskedModel& model) {
  Vector out(static_cast<Eigen::Index>(hidden_unit_count(model)));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l + 1 < model.num_layers(); ++l) {
    for (Eigen::Index u = 0; u < model.layers[l].out_dim; ++u) {
      out(at++) = row_pruned(model, l, u) ? 0.0 : 1.0;
    }
  }
  return out;
}

void zero_pruned_neurons(MaskedModel& model) {
  for (const NeuronId& n : pruned_neurons(model)) {
    model.weights[n.layer].row(n.unit).setZero();
    model.biases[n.layer](n.unit) = 0.0;
  }
}

void prune_structured_l2(MaskedModel& model, double prune_fraction) {
  if (!(prune_fraction > 0.0 && prune_fraction < 1.0)) {
    throw InputError("prune_structured_l2: fraction must be in (0, 1)");
  }
  for (std::size_t l = 0; l + 1 < model.num_layers(); ++l) {
    const Eigen::Index units = model.layers[l].out_dim;
    const auto target = static_cast<Eigen::Index>(std::floor(prune_fraction * static_cast<double>(units) + 1e-9));
    if (target >= units) {
      throw InputError("prune_structured_l2: layer " + std::to_string(l) +
                       " would be left with no active units");
    }
    std::vector<std::pair<double, Eigen::Index>> active;
    Eigen::Index already = 0;
    for (Eigen::Index u = 0; u < units; ++u) {
      if (row_pruned(model, l, u)) {
        ++already;
      } else {
        active.push_back({model.weights[l].row(u).cwiseProduct(model.masks[l].row(u)).norm(), u});
      }
    }
    const Eigen::Index extra = target - already;
    if (extra <= 0) continue;
    std::sort(active.begin(), active.end());
    for (Eigen::Index k = 0; k < extra; ++k) model.masks[l].row(active[static_cast<std::size_t>(k)].second).setZero();
  }
  apply_mask(model);
  zero_pruned_neurons(model);
}

void prune_to(MaskedModel& model, Topology topology, double level, PruneScope scope) {
  if (topology == Topology::kUnstructured) {
    prune_magnitude(model, level, scope);
  } else {
    prune_structured_l2(model, level);
  }
}

}  // namespace unpruning
