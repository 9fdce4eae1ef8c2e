#include "unprune/oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "unprune/snapshot.hpp"

namespace unpruning {

OracleResult retrain_reprune(const Dataset& data, const DeletionSplit& split,
                             const std::vector<LayerSpec>& arch, const TrainConfig& train_cfg,
                             double level, const OracleConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const Rng init = cfg.seed_mode == OracleSeedMode::kSameSeed ? init_rng(seed)
                                                               : substream(Rng(seed), Stream::kOracle);
  Rng shuffle = train_rng(seed);
  OracleResult out;
  out.model = init_model(arch, init);

  if (cfg.iterative_rounds <= 0) {
    train_sgd(out.model, data, split.retain, train_cfg, shuffle);
    prune_to(out.model, cfg.topology, level, cfg.scope);
  } else {
    const int rounds = cfg.iterative_rounds;
    for (int k = 1; k <= rounds; ++k) {
      train_sgd(out.model, data, split.retain, train_cfg, shuffle);
      const double stage = 1.0 - std::pow(1.0 - level, static_cast<double>(k) / rounds);
      prune_to(out.model, cfg.topology, k == rounds ? level : stage, cfg.scope);
      for (std::size_t l = 0; l < out.model.num_layers(); ++l) {
        out.model.weights[l] = out.model.init_snapshot[l].cwiseProduct(out.model.masks[l]);
        out.model.biases[l].setZero();
      }
    }
    train_sgd(out.model, data, split.retain, train_cfg, shuffle);
    if (cfg.topology == Topology::kStructured) zero_pruned_neurons(out.model);
  }
  out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) { bytes(&v, sizeof(T)); }
};

}  // namespace

std::uint64_t oracle_key(const Dataset& data, const DeletionSplit& split, const std::string& config_text) {
  Fnv1a f;
  f.value(data.inputs.rows());
  f.value(data.inputs.cols());
  f.bytes(data.inputs.data(), static_cast<std::size_t>(data.inputs.size()) * sizeof(double));
  f.bytes(data.labels.data(), data.labels.size() * sizeof(int));
  f.value(data.num_classes);
  f.value(split.forget.size());
  f.bytes(split.forget.data(), split.forget.size() * sizeof(Index));
  f.bytes(config_text.data(), config_text.size());
  return f.h;
}

std::filesystem::path OracleCache::path_for(std::uint64_t key) const {
  std::ostringstream name;
  name << "oracle_" << std::hex << std::setw(16) << std::setfill('0') << key << ".snap";
  return dir_ / name.str();
}

std::optional<OracleResult> OracleCache::load(std::uint64_t key) const {
  const auto path = path_for(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  Snapshot snap = load_snapshot(path);
  OracleResult out;
  out.model = std::move(snap.model);
  out.cache_hit = true;
  if (auto it = snap.meta.find("wall_time_s"); it != snap.meta.end()) out.wall_time_s = std::stod(it->second);
  return out;
}

void OracleCache::store(std::uint64_t key, const OracleResult& result) const {
  std::filesystem::create_directories(dir_);
  std::ostringstream wt;
  wt << std::setprecision(17) << result.wall_time_s;
  // Write then rename so concurrent readers never see a partial file.
  const auto final_path = path_for(key);
  const auto tmp = final_path.string() + ".tmp";
  save_snapshot(tmp, result.model, {{"wall_time_s", wt.str()}});
  std::filesystem::rename(tmp, final_path);
}

}  // namespace unpruning
