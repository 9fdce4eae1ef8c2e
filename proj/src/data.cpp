#include "unprune/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

namespace unpruning {

void Dataset::validate() const {
  if (labels.empty()) throw InputError("dataset '" + name + "' is empty");
  if (static_cast<Index>(inputs.rows()) != labels.size()) {
    throw ShapeError("dataset '" + name + "': " + std::to_string(inputs.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 1) throw InputError("dataset '" + name + "': num_classes < 1");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw InputError("dataset '" + name + "': label " + std::to_string(y) + " out of range");
    }
  }
  if (!inputs.allFinite()) throw InputError("dataset '" + name + "': non-finite input");
}

Matrix Dataset::gather_inputs(const IndexList& rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<int> Dataset::gather_labels(const IndexList& rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(labels[r]);
  return out;
}

IndexList all_rows(const Dataset& data) {
  IndexList rows(data.size());
  for (Index i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

Dataset gen_blobs(Rng& rng, Index n_per_class, int classes, Eigen::Index dim, double spread) {
  if (n_per_class < 1 || classes < 1 || dim < 1) throw InputError("gen_blobs: counts must be >= 1");
  if (!(spread > 0.0)) throw InputError("gen_blobs: spread must be > 0");

  Dataset out;
  out.name = "blobs";
  out.num_classes = classes;
  out.inputs = Matrix::Zero(static_cast<Eigen::Index>(n_per_class) * classes, dim);
  out.labels.reserve(n_per_class * static_cast<Index>(classes));

  Eigen::Index row = 0;
  for (int c = 0; c < classes; ++c) {
    Vector mean = Vector::Zero(dim);
    if (dim == 1) {
      mean(0) = 2.0 * (c - 0.5 * (classes - 1));
    } else {
      const double angle = 2.0 * std::numbers::pi * c / classes;
      mean(0) = std::cos(angle);
      mean(1) = std::sin(angle);
    }
    for (Index i = 0; i < n_per_class; ++i, ++row) {
      for (Eigen::Index j = 0; j < dim; ++j) out.inputs(row, j) = mean(j) + spread * rng.normal();
      out.labels.push_back(c);
    }
  }
  return out;
}

namespace {

std::uint32_t read_be32(std::span<const unsigned char> bytes, std::size_t offset,
                        const std::string& what) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(what + ": truncated header at byte offset " + std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = slurp(images);
  const auto lab = slurp(labels);
  const std::string img_name = images.string();
  const std::string lab_name = labels.string();

  if (const auto magic = read_be32(img, 0, img_name); magic != kImagesMagic) {
    throw FormatError(img_name + ": bad images magic at byte offset 0");
  }
  const std::uint32_t n = read_be32(img, 4, img_name);
  const std::uint32_t rows = read_be32(img, 8, img_name);
  const std::uint32_t cols = read_be32(img, 12, img_name);
  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t need = 16 + std::size_t{n} * pixels;
  if (img.size() < need) {
    throw FormatError(img_name + ": truncated pixel data at byte offset " +
                      std::to_string(img.size()) + " (expected " + std::to_string(need) + ")");
  }

  if (const auto magic = read_be32(lab, 0, lab_name); magic != kLabelsMagic) {
    throw FormatError(lab_name + ": bad labels magic at byte offset 0");
  }
  const std::uint32_t n_labels = read_be32(lab, 4, lab_name);
  if (n_labels != n) {
    throw FormatError(lab_name + ": label count " + std::to_string(n_labels) +
                      " at byte offset 4 does not match image count " + std::to_string(n));
  }
  if (lab.size() < 8 + std::size_t{n}) {
    throw FormatError(lab_name + ": truncated label data at byte offset " +
                      std::to_string(lab.size()));
  }
  if (n == 0) throw FormatError(img_name + ": zero images at byte offset 4");

  Dataset out;
  out.name = images.stem().string();
  out.inputs = Matrix(n, static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      out.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
          static_cast<double>(img[16 + i * pixels + p]) / 255.0;
    }
  }
  out.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = lab[8 + i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.num_classes = max_label + 1;
  return out;
}

void write_idx(const Dataset& data, std::uint32_t rows, std::uint32_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (static_cast<std::uint64_t>(rows) * cols != static_cast<std::uint64_t>(data.dim())) {
    throw ShapeError("write_idx: rows*cols does not match input dimension");
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img) throw IoError("cannot write " + images.string());
  if (!lab) throw IoError("cannot write " + labels.string());
  const auto n = static_cast<std::uint32_t>(data.size());
  put_be32(img, kImagesMagic);
  put_be32(img, n);
  put_be32(img, rows);
  put_be32(img, cols);
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) {
      const double v = std::clamp(data.inputs(i, j), 0.0, 1.0);
      img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  put_be32(lab, kLabelsMagic);
  put_be32(lab, n);
  for (int y : data.labels) {
    if (y < 0 || y > 255) throw InputError("write_idx: label does not fit in a byte");
    lab.put(static_cast<char>(static_cast<unsigned char>(y)));
  }
  if (!img || !lab) throw IoError("write_idx: short write");
}

namespace {

// Partial Fisher-Yates over `pool`: the first k entries become the sample.
IndexList sample_without_replacement(IndexList pool, Index k, Rng& rng) {
  for (Index i = 0; i < k; ++i) {
    const Index j = i + static_cast<Index>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

DeletionSplit complete_split(IndexList forget, Index n, double ratio, std::uint64_t seed) {
  DeletionSplit split;
  split.delete_ratio = ratio;
  split.seed = seed;
  split.retain.reserve(n - forget.size());
  std::size_t f = 0;
  for (Index i = 0; i < n; ++i) {
    if (f < forget.size() && forget[f] == i) {
      ++f;
    } else {
      split.retain.push_back(i);
    }
  }
  split.forget = std::move(forget);
  return split;
}

}  // namespace

DeletionSplit split_delete(const Dataset& data, double ratio, Rng& rng) {
  const Index n = data.size();
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("split_delete: ratio must be in (0, 1)");
  const auto k = static_cast<Index>(std::llround(ratio * static_cast<double>(n)));
  if (k < 1 || k >= n) {
    throw InputError("split_delete: ratio " + std::to_string(ratio) + " on n=" +
                     std::to_string(n) + " leaves an empty forget or retain set");
  }
  return complete_split(sample_without_replacement(all_rows(data), k, rng), n, ratio, rng.seed());
}

DeletionSplit split_delete_class(const Dataset& data, double ratio, int target_class, Rng& rng) {
  const Index n = data.size();
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("split_delete_class: ratio must be in (0, 1)");
  IndexList pool;
  for (Index i = 0; i < n; ++i) {
    if (data.labels[i] == target_class) pool.push_back(i);
  }
  const auto k = static_cast<Index>(std::llround(ratio * static_cast<double>(n)));
  if (k < 1 || k >= n || k > pool.size()) {
    throw InputError("split_delete_class: class " + std::to_string(target_class) + " has " +
                     std::to_string(pool.size()) + " rows, cannot delete " + std::to_string(k));
  }
  return complete_split(sample_without_replacement(std::move(pool), k, rng), n, ratio, rng.seed());
}

}  // namespace unpruning
