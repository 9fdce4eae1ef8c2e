#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "unprune/config.hpp"

namespace unpruning {

/// Training set, held-out test set and deletion split of one run seed.
struct RunData {
  Dataset train;
  Dataset test;
  DeletionSplit split;
};

RunData build_run_data(const ExperimentConfig& cfg, std::uint64_t seed);

/// The original model of a run: trained on all of D, not yet pruned.
MaskedModel train_original(const ExperimentConfig& cfg, const RunData& data, std::uint64_t seed,
                           TrainLog* log = nullptr);

/// One (seed, method, sparsity) cell compared against a reference model.
/// Metric fields are NaN (and `error` is set) when the cell failed.
struct ReportRow {
  std::uint64_t seed = 0;
  std::string method;
  double sparsity = 0.0;
  double iom = 0.0;
  double uom = 0.0;
  std::optional<double> iou;
  double kl = 0.0;
  double ta = 0.0;
  double ua = 0.0;
  double wall_time_s = 0.0;
  std::string trace;  // trace CSV path relative to the output directory, if written
  std::string error;

  bool failed() const { return !error.empty(); }
};

struct ExperimentReport {
  std::vector<ReportRow> rows;         // compared with the oracle
  std::vector<ReportRow> vs_original;  // un-pruned models compared with the pruned original

  std::size_t failures() const;
};

/// Rows ordered by seed, sparsity, then method name.
void sort_rows(std::vector<ReportRow>& rows);

struct RunOptions {
  bool write_files = true;  // traces and oracle cache under cfg.out_dir
  std::function<void(const std::string&)> log;
};

/// Per seed: train the original, prune it, build (or load) the oracle, then
/// un-prune with every configured method. Besides the methods, each
/// (seed, sparsity) yields an "original" row (pruned original vs oracle) and
/// an "oracle" row (oracle vs itself). Cells run on cfg.jobs threads; a
/// failing cell becomes an error row and the others proceed.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Runs fn(0..count-1) on up to `jobs` threads. The first exception is
/// rethrown after all workers finish.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace unpruning
