#include "unprune/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "unprune/metrics.hpp"

namespace unpruning {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Dataset take_first(Dataset d, Index limit) {
  if (limit == 0 || limit >= d.size()) return d;
  d.inputs.conservativeResize(static_cast<Eigen::Index>(limit), d.inputs.cols());
  d.labels.resize(limit);
  return d;
}

ReportRow compare(std::uint64_t seed, const std::string& method, double level, const MaskedModel& model,
                  const MaskedModel& reference, const RunData& data, const ExperimentConfig& cfg) {
  ReportRow row;
  row.seed = seed;
  row.method = method;
  row.sparsity = level;
  const MaskSimilarity sim = mask_similarity(MaskPair::of(model, reference));
  row.iom = sim.iom;
  row.uom = sim.uom;
  row.iou = sim.iou;
  row.kl = kl_masked_weights(model, reference, cfg.kl_estimator, cfg.kl_bins).value;
  row.ta = evaluate(model, data.test, all_rows(data.test)).accuracy;
  row.ua = evaluate(model, data.train, data.split.forget).accuracy;
  return row;
}

ReportRow error_row(std::uint64_t seed, const std::string& method, double level, const std::string& what) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  ReportRow row;
  row.seed = seed;
  row.method = method;
  row.sparsity = level;
  row.iom = row.uom = row.kl = row.ta = row.ua = row.wall_time_s = nan;
  row.error = what.empty() ? "unknown error" : what;
  return row;
}

std::string level_tag(double level) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << level;
  return out.str();
}

}  // namespace

std::size_t ExperimentReport::failures() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ReportRow& r) { return r.failed(); }));
}

void sort_rows(std::vector<ReportRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.seed != b.seed) return a.seed < b.seed;
    if (a.sparsity != b.sparsity) return a.sparsity < b.sparsity;
    return a.method < b.method;
  });
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex guard;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(guard);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

RunData build_run_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  const Rng root(seed);
  RunData out;
  if (cfg.data.source == "blobs") {
    Rng train = substream(root, Stream::kData);
    Rng test = substream(root, Stream::kTestData);
    out.train = gen_blobs(train, cfg.data.n_per_class, cfg.data.classes, cfg.data.dim, cfg.data.spread);
    out.test = gen_blobs(test, cfg.data.test_n_per_class, cfg.data.classes, cfg.data.dim, cfg.data.spread);
  } else {
    out.train = take_first(load_idx(cfg.data.idx_images, cfg.data.idx_labels), cfg.data.limit);
    out.test = load_idx(cfg.data.idx_test_images, cfg.data.idx_test_labels);
  }
  if (out.train.dim() != cfg.data.dim || out.train.num_classes > cfg.data.classes) {
    throw ConfigError("data: loaded set has dim " + std::to_string(out.train.dim()) + " and " +
                      std::to_string(out.train.num_classes) + " classes, config says " +
                      std::to_string(cfg.data.dim) + " and " + std::to_string(cfg.data.classes));
  }
  Rng split = substream(root, Stream::kSplit);
  out.split = split_delete(out.train, cfg.data.delete_ratio, split);
  return out;
}

MaskedModel train_original(const ExperimentConfig& cfg, const RunData& data, std::uint64_t seed, TrainLog* log) {
  MaskedModel model = init_model(cfg.architecture(), init_rng(seed));
  Rng shuffle = train_rng(seed);
  TrainLog l = train_sgd(model, data.train, all_rows(data.train), cfg.train, shuffle);
  if (log) *log = std::move(l);
  return model;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto say = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_levels = cfg.sparsities.size();
  const std::size_t n_methods = cfg.methods.size();

  // Stage 1: data and the dense original per seed.
  struct SeedState {
    RunData data;
    MaskedModel dense;
    double train_time = 0.0;
    std::string error;
  };
  std::vector<SeedState> seeds(n_seeds);
  parallel_for(n_seeds, cfg.jobs, [&](std::size_t i) {
    auto& st = seeds[i];
    try {
      const auto start = Clock::now();
      st.data = build_run_data(cfg, cfg.seeds[i]);
      st.dense = train_original(cfg, st.data, cfg.seeds[i]);
      st.train_time = seconds_since(start);
      say("seed " + std::to_string(cfg.seeds[i]) + ": original trained");
    } catch (const std::exception& e) {
      st.error = e.what();
    }
  });

  // Stage 2: pruned original and oracle per (seed, level).
  struct LevelState {
    MaskedModel pruned;
    OracleResult oracle;
    double prune_time = 0.0;
    std::string error;
  };
  std::vector<LevelState> levels(n_seeds * n_levels);
  const OracleCache cache(cfg.out_dir / "oracle_cache");
  parallel_for(levels.size(), cfg.jobs, [&](std::size_t k) {
    const std::size_t si = k / n_levels;
    const double level = cfg.sparsities[k % n_levels];
    const std::uint64_t seed = cfg.seeds[si];
    auto& st = levels[k];
    if (!seeds[si].error.empty()) {
      st.error = seeds[si].error;
      return;
    }
    try {
      const auto start = Clock::now();
      st.pruned = seeds[si].dense;
      prune_to(st.pruned, cfg.topology, level, cfg.scope);
      st.prune_time = seeds[si].train_time + seconds_since(start);

      const RunData& data = seeds[si].data;
      const bool use_cache = cfg.oracle_cache && options.write_files;
      const std::uint64_t key = oracle_key(data.train, data.split, cfg.oracle_text(level, seed));
      std::optional<OracleResult> hit = use_cache ? cache.load(key) : std::nullopt;
      if (hit) {
        st.oracle = std::move(*hit);
      } else {
        st.oracle = retrain_reprune(data.train, data.split, cfg.architecture(), cfg.train, level, cfg.oracle, seed);
        if (use_cache) cache.store(key, st.oracle);
      }
      say("seed " + std::to_string(seed) + " s=" + level_tag(level) + ": oracle " +
          (st.oracle.cache_hit ? "loaded from cache" : "trained"));
    } catch (const std::exception& e) {
      st.error = e.what();
    }
  });

  // Stage 3: one cell per (seed, level, method).
  ExperimentReport report;
  const std::size_t n_cells = levels.size() * n_methods;
  std::vector<std::vector<ReportRow>> cell_rows(n_cells), cell_vs_original(n_cells);
  parallel_for(n_cells, cfg.jobs, [&](std::size_t c) {
    const std::size_t k = c / n_methods;
    const std::size_t si = k / n_levels;
    const double level = cfg.sparsities[k % n_levels];
    const std::uint64_t seed = cfg.seeds[si];
    const UnlearnConfig& method = cfg.methods[c % n_methods];
    const std::string name = to_string(method.method);
    const auto& st = levels[k];
    if (!st.error.empty()) {
      cell_rows[c].push_back(error_row(seed, name, level, st.error));
      return;
    }
    try {
      const RunData& data = seeds[si].data;
      UnpruneConfig ucfg = cfg.unprune;
      ucfg.original_sparsity = level;
      ucfg.unlearn = method;
      ucfg.topology = cfg.topology;
      Rng rng = substream(Rng(seed), Stream::kUnlearn)
                    .split(std::bit_cast<std::uint64_t>(level) ^ (static_cast<std::uint64_t>(method.method) << 56));
      const auto start = Clock::now();
      UnpruneResult res = unprune(st.pruned, data.train, data.split, ucfg, rng, &data.test);
      const double elapsed = seconds_since(start);

      ReportRow row = compare(seed, name, level, res.model, st.oracle.model, data, cfg);
      row.wall_time_s = elapsed;
      ReportRow orig = compare(seed, name, level, res.model, st.pruned, data, cfg);
      orig.wall_time_s = elapsed;
      if (options.write_files) {
        const std::filesystem::path rel = std::filesystem::path("traces") /
            ("seed" + std::to_string(seed) + "_s" + level_tag(level) + "_" + name + ".csv");
        std::filesystem::create_directories(cfg.out_dir / "traces");
        write_trace_csv(res.trace, cfg.out_dir / rel);
        row.trace = orig.trace = rel.generic_string();
      }
      cell_rows[c].push_back(std::move(row));
      cell_vs_original[c].push_back(std::move(orig));
    } catch (const std::exception& e) {
      cell_rows[c].push_back(error_row(seed, name, level, e.what()));
    }
  });

  for (std::size_t k = 0; k < levels.size(); ++k) {
    const std::size_t si = k / n_levels;
    const double level = cfg.sparsities[k % n_levels];
    const std::uint64_t seed = cfg.seeds[si];
    const auto& st = levels[k];
    if (!st.error.empty()) {
      report.rows.push_back(error_row(seed, "original", level, st.error));
      report.rows.push_back(error_row(seed, "oracle", level, st.error));
      continue;
    }
    const RunData& data = seeds[si].data;
    ReportRow orig = compare(seed, "original", level, st.pruned, st.oracle.model, data, cfg);
    orig.wall_time_s = st.prune_time;
    ReportRow oracle = compare(seed, "oracle", level, st.oracle.model, st.oracle.model, data, cfg);
    oracle.wall_time_s = st.oracle.wall_time_s;
    report.rows.push_back(std::move(orig));
    report.rows.push_back(std::move(oracle));
  }
  for (std::size_t c = 0; c < n_cells; ++c) {
    for (auto& r : cell_rows[c]) report.rows.push_back(std::move(r));
    for (auto& r : cell_vs_original[c]) report.vs_original.push_back(std::move(r));
  }
  sort_rows(report.rows);
  sort_rows(report.vs_original);
  return report;
}

}  // namespace unpruning
