#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "unprune/metrics.hpp"
#include "unprune/oracle.hpp"
#include "unprune/train.hpp"
#include "unprune/unprune.hpp"

namespace unpruning {

/// Parsed `key = value` text with `[section]` headers. Keys are stored as
/// "section.key". Blank lines and lines starting with '#' or ';' are skipped.
struct KeyValueFile {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;  // source line of each key, for messages
};

KeyValueFile parse_key_value(const std::string& text, const std::string& source = "<config>");

struct DataConfig {
  std::string source = "blobs";  // blobs | idx
  Index n_per_class = 500;
  Index test_n_per_class = 500;
  int classes = 2;
  Eigen::Index dim = 2;
  double spread = 1.0;
  std::filesystem::path idx_images, idx_labels, idx_test_images, idx_test_labels;
  Index limit = 0;  // idx only: keep the first `limit` rows when > 0
  double delete_ratio = 0.1;
};

struct ExperimentConfig {
  DataConfig data;
  std::vector<Eigen::Index> hidden{64, 32};
  TrainConfig train{100, 0.1, 32};
  std::vector<double> sparsities{0.6};
  Topology topology = Topology::kUnstructured;
  PruneScope scope = PruneScope::kGlobal;
  UnpruneConfig unprune;
  // One unlearning config per method, run in this order.
  std::vector<UnlearnConfig> methods;
  OracleConfig oracle;
  bool oracle_cache = true;
  KlEstimator kl_estimator = KlEstimator::kGaussian;
  int kl_bins = 64;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path out_dir = "out";
  int jobs = 1;
  bool redact_timing = false;

  /// Layer specs for `dim -> hidden... -> classes`.
  std::vector<LayerSpec> architecture() const;
  /// Throws ConfigError on any inconsistent setting.
  void validate() const;
  /// Canonical text of everything that determines the oracle of a run.
  std::string oracle_text(double level, std::uint64_t seed) const;
};

/// Defaults for the blobs reference task: 2-64-32-2, 60% sparsity, 5% growth,
/// three iterations, gradient ascent and fine-tuning unlearners.
ExperimentConfig reference_config();

/// Strict: unknown sections or keys, malformed numbers and unknown mode names
/// are ConfigErrors that name the offending line.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Comma-separated lists; empty items are errors.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace unpruning
