#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "unprune/rng.hpp"
#include "unprune/tensor.hpp"

namespace unpruning {

using Index = std::size_t;
using IndexList = std::vector<Index>;

struct Dataset {
  Matrix inputs;            // n x d
  std::vector<int> labels;  // n
  int num_classes = 0;
  std::string name;

  Index size() const { return labels.size(); }
  Eigen::Index dim() const { return inputs.cols(); }

  /// Throws InputError when the invariants (n >= 1, labels in range,
  /// finite inputs) do not hold.
  void validate() const;

  /// Rows of `inputs` and `labels` selected by `rows`, in the given order.
  Matrix gather_inputs(const IndexList& rows) const;
  std::vector<int> gather_labels(const IndexList& rows) const;
};

/// The forgotten rows D_f and retained rows D_r of a dataset.
struct DeletionSplit {
  IndexList forget;
  IndexList retain;
  double delete_ratio = 0.0;
  std::uint64_t seed = 0;
};

/// Gaussian clusters, one per class, with means spaced on the unit circle of
/// the first two coordinates (on a line when dim == 1).
Dataset gen_blobs(Rng& rng, Index n_per_class, int classes, Eigen::Index dim, double spread);

/// IDX image/label pair (MNIST / FashionMNIST layout). Pixels are scaled to
/// [0, 1] by dividing by 255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Inverse of load_idx for datasets whose inputs are multiples of 1/255.
void write_idx(const Dataset& data, std::uint32_t rows, std::uint32_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels);

/// Uniform-without-replacement deletion of round(ratio * n) rows.
DeletionSplit split_delete(const Dataset& data, double ratio, Rng& rng);

/// Deletion restricted to rows of one class: round(ratio * n) rows are drawn
/// from `target_class` only. Used for UA contrast experiments.
DeletionSplit split_delete_class(const Dataset& data, double ratio, int target_class, Rng& rng);

IndexList all_rows(const Dataset& data);

}  // namespace unpruning
