#include "unprune/model.hpp"

#include <cmath>

namespace unpruning {

std::vector<LayerSpec> mlp_specs(std::span<const Eigen::Index> dims) {
  if (dims.size() < 2) throw InputError("mlp_specs: need at least input and output dims");
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    specs.push_back({dims[i], dims[i + 1], last ? Activation::kNone : Activation::kRelu});
  }
  return specs;
}

Index MaskedModel::num_weights() const {
  Index n = 0;
  for (const auto& w : weights) n += static_cast<Index>(w.size());
  return n;
}

void MaskedModel::validate() const {
  const std::size_t n = layers.size();
  if (n == 0) throw ShapeError("model has no layers");
  if (weights.size() != n || biases.size() != n || masks.size() != n || init_snapshot.size() != n) {
    throw ShapeError("model: per-layer tensor counts disagree with layer count");
  }
  for (std::size_t l = 0; l < n; ++l) {
    const auto& s = layers[l];
    auto same = [&](const Matrix& m) { return m.rows() == s.out_dim && m.cols() == s.in_dim; };
    if (!same(weights[l]) || !same(masks[l]) || !same(init_snapshot[l]) || biases[l].size() != s.out_dim) {
      throw ShapeError("model: layer " + std::to_string(l) + " tensors do not match spec " +
                       shape_str(s.out_dim, s.in_dim));
    }
    if (l > 0 && layers[l - 1].out_dim != s.in_dim) {
      throw ShapeError("model: layer " + std::to_string(l) + " input dim does not chain");
    }
    if (!(masks[l].array() == 0.0 || masks[l].array() == 1.0).all()) {
      throw InputError("model: layer " + std::to_string(l) + " mask has entries outside {0,1}");
    }
  }
}

GradientSet GradientSet::zeros_like(const MaskedModel& model) {
  GradientSet g;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    g.weights.push_back(Matrix::Zero(model.weights[l].rows(), model.weights[l].cols()));
    g.biases.push_back(Vector::Zero(model.biases[l].size()));
  }
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= s;
    biases[l] *= s;
  }
  return *this;
}

double GradientSet::squared_norm() const {
  double total = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    total += weights[l].squaredNorm() + biases[l].squaredNorm();
  }
  return total;
}

bool GradientSet::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

MaskedModel init_model(std::span<const LayerSpec> specs, const Rng& rng) {
  if (specs.empty()) throw InputError("init_model: need at least one layer");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    if (specs[l].in_dim < 1 || specs[l].out_dim < 1) {
      throw InputError("init_model: layer " + std::to_string(l) + " has a zero dimension");
    }
    if (l > 0 && specs[l - 1].out_dim != specs[l].in_dim) {
      throw InputError("init_model: layer " + std::to_string(l) + " in_dim " +
                       std::to_string(specs[l].in_dim) + " != previous out_dim " +
                       std::to_string(specs[l - 1].out_dim));
    }
  }
  if (specs.back().activation != Activation::kNone) {
    throw InputError("init_model: last layer must produce raw logits");
  }

  MaskedModel model;
  model.seed = rng.seed();
  model.layers.assign(specs.begin(), specs.end());
  for (std::size_t l = 0; l < specs.size(); ++l) {
    Rng layer_rng = rng.split(l);
    const auto& s = specs[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(s.in_dim));
    Matrix w(s.out_dim, s.in_dim);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = bound * (2.0 * layer_rng.uniform() - 1.0);
    }
    model.weights.push_back(w);
    model.init_snapshot.push_back(w);
    model.masks.push_back(Matrix::Ones(s.out_dim, s.in_dim));
    model.biases.push_back(Vector::Zero(s.out_dim));
  }
  return model;
}

namespace {

void check_input(const MaskedModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_dim()) {
    throw ShapeError("forward: input " + shape_str(inputs.rows(), inputs.cols()) +
                     " does not match model input dim " + std::to_string(model.input_dim()));
  }
}

}  // namespace

Matrix forward(const MaskedModel& model, const Matrix& inputs, ForwardCache& cache) {
  check_input(model, inputs);
  cache.activations.clear();
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const Matrix effective = model.weights[l].cwiseProduct(model.masks[l]);
    Matrix z = matmul(cache.activations.back(), effective.transpose());
    z.rowwise() += model.biases[l].transpose();
    if (model.layers[l].activation == Activation::kRelu) z = z.cwiseMax(0.0);
    cache.activations.push_back(std::move(z));
  }
  return cache.activations.back();
}

Matrix forward(const MaskedModel& model, const Matrix& inputs) {
  ForwardCache cache;
  return forward(model, inputs, cache);
}

LossGrad backward(const MaskedModel& model, const Matrix& inputs, std::span<const int> labels) {
  ForwardCache cache;
  const Matrix logits = forward(model, inputs, cache);
  auto [loss, delta] = softmax_cross_entropy(logits, labels);

  LossGrad out;
  out.loss = loss;
  out.grad = GradientSet::zeros_like(model);
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    const Matrix& below = cache.activations[l];
    // delta holds dL/dz for layer l.
    out.grad.weights[l] = matmul(delta.transpose(), below).cwiseProduct(model.masks[l]);
    out.grad.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    const Matrix effective = model.weights[l].cwiseProduct(model.masks[l]);
    Matrix upstream = matmul(delta, effective);
    if (model.layers[l - 1].activation == Activation::kRelu) {
      upstream = upstream.cwiseProduct((below.array() > 0.0).cast<double>().matrix());
    }
    delta = std::move(upstream);
  }
  return out;
}

void apply_mask(MaskedModel& model) {
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    model.weights[l] = model.weights[l].cwiseProduct(model.masks[l]);
  }
}

void add_scaled(MaskedModel& model, const GradientSet& grad, double scale) {
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    model.weights[l] += scale * grad.weights[l];
    model.biases[l] += scale * grad.biases[l];
  }
}

namespace {

template <typename Pick>
Vector flatten(const MaskedModel& model, Pick pick) {
  Vector out(static_cast<Eigen::Index>(model.num_weights()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const Matrix& m = pick(l);
    out.segment(at, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    at += m.size();
  }
  return out;
}

}  // namespace

Vector flatten_masks(const MaskedModel& model) {
  return flatten(model, [&](std::size_t l) -> const Matrix& { return model.masks[l]; });
}

Vector flatten_weights(const MaskedModel& model) {
  return flatten(model, [&](std::size_t l) -> const Matrix& { return model.weights[l]; });
}

WeightPos locate(const MaskedModel& model, Index flat) {
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const auto size = static_cast<Index>(model.weights[l].size());
    if (flat < size) {
      const auto cols = model.weights[l].cols();
      return {l, static_cast<Eigen::Index>(flat) / cols, static_cast<Eigen::Index>(flat) % cols};
    }
    flat -= size;
  }
  throw InputError("locate: flat index out of range");
}

}  // namespace unpruning
