#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "unprune/data.hpp"
#include "unprune/model.hpp"
#include "unprune/prune.hpp"
#include "unprune/train.hpp"

namespace unpruning {

/// Streams used for a run seed. The original model and the oracle draw their
/// initialization and shuffling from the same streams.
inline Rng init_rng(std::uint64_t seed) { return substream(Rng(seed), Stream::kInit); }
inline Rng train_rng(std::uint64_t seed) { return substream(Rng(seed), Stream::kTrain); }

enum class OracleSeedMode {
  kSameSeed,     // fresh init from the run seed, identical to the original's init
  kIndependent,  // fresh init from an independent stream
};

struct OracleConfig {
  OracleSeedMode seed_mode = OracleSeedMode::kSameSeed;
  Topology topology = Topology::kUnstructured;
  PruneScope scope = PruneScope::kGlobal;
  // 0: train once, prune once. k > 0: k rounds of iterative magnitude pruning
  // with rewinding to the initialization, then a final masked retrain.
  int iterative_rounds = 0;
};

struct OracleResult {
  MaskedModel model;
  double wall_time_s = 0.0;
  bool cache_hit = false;
};

/// Fresh init, train on the retain rows only, prune to `level`.
OracleResult retrain_reprune(const Dataset& data, const DeletionSplit& split,
                             const std::vector<LayerSpec>& arch, const TrainConfig& train_cfg,
                             double level, const OracleConfig& cfg, std::uint64_t seed);

/// FNV-1a digest of the dataset, the split and a config description.
std::uint64_t oracle_key(const Dataset& data, const DeletionSplit& split, const std::string& config_text);

/// Oracle snapshots keyed by content hash under `dir`.
class OracleCache {
 public:
  explicit OracleCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path path_for(std::uint64_t key) const;
  std::optional<OracleResult> load(std::uint64_t key) const;
  void store(std::uint64_t key, const OracleResult& result) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace unpruning
