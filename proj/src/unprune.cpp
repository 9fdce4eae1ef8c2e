#include "unprune/unprune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "unprune/train.hpp"

namespace unpruning {

std::string to_string(InitStrategy s) {
  return s == InitStrategy::kOriginal ? "original" : "random";
}

InitStrategy init_strategy_from_string(const std::string& name) {
  if (name == "original") return InitStrategy::kOriginal;
  if (name == "random") return InitStrategy::kRandom;
  throw ConfigError("unknown init strategy '" + name + "'");
}

void UnpruneConfig::validate() const {
  if (iterations < 1) throw ConfigError("unprune: iterations must be >= 1");
  if (!(grow_per_iter > 0.0)) throw ConfigError("unprune: grow_per_iter must be > 0");
  if (!(original_sparsity >= 0.0 && original_sparsity < 1.0)) {
    throw ConfigError("unprune: original_sparsity must be in [0, 1)");
  }
  if (original_sparsity - iterations * grow_per_iter < -1e-12) {
    throw ConfigError("unprune: sparsity underflow, s - T*p < 0");
  }
  if (!(random_init_std >= 0.0)) throw ConfigError("unprune: random_init_std must be >= 0");
  unlearn.validate();
}

double topology_sparsity(const MaskedModel& model, Topology topology) {
  if (topology == Topology::kUnstructured) return sparsity_of(model).sparsity;
  const Index hidden = hidden_unit_count(model);
  return hidden == 0 ? 0.0
                     : static_cast<double>(pruned_neurons(model).size()) / static_cast<double>(hidden);
}

void reinit_pruned(MaskedModel& model, InitStrategy strategy, double random_std, Rng& rng) {
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix& w = model.weights[l];
    const Matrix& m = model.masks[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (m.data()[i] != 0.0) continue;
      w.data()[i] = strategy == InitStrategy::kOriginal ? model.init_snapshot[l].data()[i]
                                                        : random_std * rng.normal();
    }
  }
}

IndexList grow_mask(MaskedModel& model, double p) {
  if (!(p >= 0.0)) throw InputError("grow_mask: p must be >= 0");
  const SparsityReport now = sparsity_of(model);
  const auto count = static_cast<Index>(std::llround(p * static_cast<double>(now.total_weights)));
  if (count > now.zero_mask_entries) {
    throw InputError("grow_mask: asked to grow " + std::to_string(count) + " entries but only " +
                     std::to_string(now.zero_mask_entries) + " are masked");
  }
  if (count == 0) return {};
  std::vector<std::pair<double, Index>> cands;
  Index offset = 0;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const Matrix& w = model.weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (model.masks[l].data()[i] == 0.0) cands.push_back({std::abs(w.data()[i]), offset + static_cast<Index>(i)});
    }
    offset += static_cast<Index>(w.size());
  }
  const auto larger = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(count), cands.end(), larger);
  IndexList grown;
  for (Index c = 0; c < count; ++c) {
    const WeightPos pos = locate(model, cands[c].second);
    model.masks[pos.layer](pos.row, pos.col) = 1.0;
    grown.push_back(cands[c].second);
  }
  std::sort(grown.begin(), grown.end());
  return grown;
}

std::vector<NeuronId> grow_mask_structured(MaskedModel& model, double p_units) {
  const std::vector<NeuronId> pruned = pruned_neurons(model);
  if (pruned.empty()) throw InputError("grow_mask_structured: no pruned units");
  const auto count = static_cast<std::size_t>(
      std::llround(p_units * static_cast<double>(hidden_unit_count(model))));
  if (count > pruned.size()) {
    throw InputError("grow_mask_structured: asked to restore " + std::to_string(count) +
                     " units but only " + std::to_string(pruned.size()) + " are pruned");
  }
  std::vector<std::pair<double, NeuronId>> cands;
  for (const NeuronId& n : pruned) cands.push_back({model.weights[n.layer].row(n.unit).norm(), n});
  std::stable_sort(cands.begin(), cands.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<NeuronId> grown;
  for (std::size_t k = 0; k < count; ++k) {
    const NeuronId n = cands[k].second;
    model.masks[n.layer].row(n.unit).setOnes();
    grown.push_back(n);
  }
  std::sort(grown.begin(), grown.end());
  return grown;
}

namespace {

Index flat_unit(const MaskedModel& model, const NeuronId& n) {
  Index at = 0;
  for (std::size_t l = 0; l < n.layer; ++l) at += static_cast<Index>(model.layers[l].out_dim);
  return at + static_cast<Index>(n.unit);
}

void check_starting_sparsity(const MaskedModel& model, const UnpruneConfig& cfg) {
  if (cfg.topology == Topology::kUnstructured) {
    const SparsityReport r = sparsity_of(model);
    const auto want = static_cast<Index>(std::llround(cfg.original_sparsity * static_cast<double>(r.total_weights)));
    if (r.zero_mask_entries != want) {
      throw InputError("unprune: model has " + std::to_string(r.zero_mask_entries) +
                       " masked weights, expected " + std::to_string(want));
    }
    const auto per_iter = static_cast<Index>(std::llround(cfg.grow_per_iter * static_cast<double>(r.total_weights)));
    if (per_iter * static_cast<Index>(cfg.iterations) > r.zero_mask_entries) {
      throw ConfigError("unprune: growth exceeds the number of masked weights");
    }
  } else {
    const Index pruned = pruned_neurons(model).size();
    if (pruned == 0) throw InputError("unprune: structured model has no pruned units");
    const auto per_iter = static_cast<Index>(std::llround(cfg.grow_per_iter * static_cast<double>(hidden_unit_count(model))));
    if (per_iter * static_cast<Index>(cfg.iterations) > pruned) {
      throw ConfigError("unprune: growth exceeds the number of pruned units");
    }
  }
}

}  // namespace

UnpruneResult unprune(MaskedModel model, const Dataset& data, const DeletionSplit& split,
                      const UnpruneConfig& cfg, Rng& rng, const Dataset* test) {
  cfg.validate();
  model.validate();
  check_starting_sparsity(model, cfg);

  Rng reinit_rng = substream(rng, Stream::kReinit);
  Rng unlearn_rng = substream(rng, Stream::kUnlearn);
  const IndexList test_rows = test ? all_rows(*test) : IndexList{};

  UnpruneResult out;
  const auto record = [&](int iteration, Index grown_count, IndexList grown) {
    TraceRecord r;
    r.iteration = iteration;
    r.sparsity = topology_sparsity(model, cfg.topology);
    r.grown_count = grown_count;
    r.grown = std::move(grown);
    r.ua = evaluate(model, data, split.forget).accuracy;
    if (test) r.ta = evaluate(model, *test, test_rows).accuracy;
    out.trace.records.push_back(std::move(r));
  };
  record(0, 0, {});

  for (int t = 0; t < cfg.iterations; ++t) {
    reinit_pruned(model, cfg.init_strategy, cfg.random_init_std, reinit_rng);

    MaskedModel dense = model;
    for (auto& m : dense.masks) m.setOnes();
    unlearn(dense, split, data, cfg.unlearn, unlearn_rng);
    model.weights = std::move(dense.weights);
    model.biases = std::move(dense.biases);

    IndexList grown;
    if (cfg.topology == Topology::kUnstructured) {
      grown = grow_mask(model, cfg.grow_per_iter);
      apply_mask(model);
    } else {
      for (const NeuronId& n : grow_mask_structured(model, cfg.grow_per_iter)) grown.push_back(flat_unit(model, n));
      apply_mask(model);
      zero_pruned_neurons(model);
    }
    const Index count = grown.size();
    record(t + 1, count, std::move(grown));
  }

  prune_to(model, cfg.topology, cfg.original_sparsity, cfg.final_scope);
  record(cfg.iterations + 1, 0, {});
  out.model = std::move(model);
  return out;
}

void write_trace_csv(const UnpruneTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,sparsity,ua,ta,grown_count\n" << std::setprecision(10);
  for (const auto& r : trace.records) {
    out << r.iteration << ',' << r.sparsity << ',';
    if (r.ua) out << *r.ua;
    out << ',';
    if (r.ta) out << *r.ta;
    out << ',' << r.grown_count << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace unpruning
