#include "unprune/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace unpruning {

MaskPair::MaskPair(Vector u, Vector r) : mask_u(std::move(u)), mask_r(std::move(r)) {
  if (mask_u.size() != mask_r.size()) {
    throw InputError("MaskPair: lengths " + std::to_string(mask_u.size()) + " and " +
                     std::to_string(mask_r.size()) + " differ");
  }
  const auto binary = [](const Vector& m) { return (m.array() == 0.0 || m.array() == 1.0).all(); };
  if (!binary(mask_u) || !binary(mask_r)) throw InputError("MaskPair: entries must be 0 or 1");
}

MaskPair MaskPair::of(const MaskedModel& u, const MaskedModel& r) {
  return MaskPair(flatten_masks(u), flatten_masks(r));
}

namespace {

double intersection(const MaskPair& p) { return p.mask_u.cwiseProduct(p.mask_r).sum(); }
double union_count(const MaskPair& p) {
  return (p.mask_u + p.mask_r - p.mask_u.cwiseProduct(p.mask_r)).sum();
}

}  // namespace

double iom(const MaskPair& pair) {
  if (pair.size() == 0) throw InputError("iom: empty masks");
  return intersection(pair) / static_cast<double>(pair.size());
}

double uom(const MaskPair& pair) {
  if (pair.size() == 0) throw InputError("uom: empty masks");
  return union_count(pair) / static_cast<double>(pair.size());
}

std::optional<double> iou(const MaskPair& pair) {
  const double u = union_count(pair);
  if (u == 0.0) return std::nullopt;
  return intersection(pair) / u;
}

MaskSimilarity mask_similarity(const MaskPair& pair) {
  return {iom(pair), uom(pair), iou(pair)};
}

double gaussian_kl(double mu_p, double var_p, double mu_q, double var_q) {
  const double d = mu_p - mu_q;
  return 0.5 * (std::log(var_q / var_p) + (var_p + d * d) / var_q - 1.0);
}

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(const Matrix& x) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  return {mean, var};
}

double histogram_kl(const Matrix& p_values, const Matrix& q_values, int bins) {
  const double lo = std::min(p_values.minCoeff(), q_values.minCoeff());
  const double hi = std::max(p_values.maxCoeff(), q_values.maxCoeff());
  if (hi <= lo) return 0.0;
  const auto fill = [&](const Matrix& x) {
    Vector h = Vector::Ones(bins);  // add-one smoothing
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      auto b = static_cast<int>((x.data()[i] - lo) / (hi - lo) * bins);
      h(std::clamp(b, 0, bins - 1)) += 1.0;
    }
    return Vector(h / h.sum());
  };
  const Vector p = fill(p_values);
  const Vector q = fill(q_values);
  return (p.array() * (p.array() / q.array()).log()).sum();
}

}  // namespace

KlResult kl_masked_weights(const MaskedModel& model_u, const MaskedModel& model_r,
                           KlEstimator estimator, int histogram_bins) {
  if (model_u.layers != model_r.layers) throw ShapeError("kl_masked_weights: architectures differ");
  if (histogram_bins < 1) throw InputError("kl_masked_weights: histogram_bins must be >= 1");
  KlResult out;
  for (std::size_t l = 0; l < model_u.num_layers(); ++l) {
    const Matrix pu = model_u.weights[l].cwiseProduct(model_u.masks[l]);
    const Matrix pr = model_r.weights[l].cwiseProduct(model_r.masks[l]);
    double kl = 0.0;
    if (estimator == KlEstimator::kGaussian) {
      Moments mu = moments(pu);
      Moments mr = moments(pr);
      if (mu.var < kVarianceFloor) {
        mu.var = kVarianceFloor;
        out.floored = true;
      }
      if (mr.var < kVarianceFloor) {
        mr.var = kVarianceFloor;
        out.floored = true;
      }
      kl = gaussian_kl(mu.mean, mu.var, mr.mean, mr.var);
    } else {
      kl = histogram_kl(pu, pr, histogram_bins);
    }
    kl = std::max(kl, 0.0);
    out.per_layer.push_back(kl);
    out.value += kl;
  }
  return out;
}

BoundProxyReport bound_proxy(const MaskedModel& model, double eta, double t, const GradientSet& fisher) {
  if (!(t >= 0.0)) throw InputError("bound_proxy: t must be >= 0");
  BoundProxyReport r;
  r.eta = std::abs(eta);
  r.t = t;
  double sq = 0.0;
  double max_fisher = 0.0;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    sq += model.weights[l].cwiseProduct(model.masks[l]).squaredNorm();
    max_fisher = std::max(max_fisher, fisher.weights[l].maxCoeff());
  }
  r.masked_weight_norm = std::sqrt(sq);
  r.lambda_hat = std::max(max_fisher, 1.0);
  r.value = r.eta * r.eta * r.t * r.masked_weight_norm * r.lambda_hat;
  return r;
}

}  // namespace unpruning
