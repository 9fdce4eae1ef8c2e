#pragma once

#include <optional>
#include <vector>

#include "unprune/model.hpp"

namespace unpruning {

/// Two flattened {0,1} masks over the same N parameters.
struct MaskPair {
  Vector mask_u;
  Vector mask_r;

  MaskPair(Vector u, Vector r);
  static MaskPair of(const MaskedModel& u, const MaskedModel& r);
  Eigen::Index size() const { return mask_u.size(); }
};

/// ||M_u ⊙ M_r||_1 / N
double iom(const MaskPair& pair);
/// ||M_u + M_r - M_u ⊙ M_r||_1 / N
double uom(const MaskPair& pair);
/// Intersection over union of the kept entries; nullopt when both masks are
/// all-zero (empty union).
std::optional<double> iou(const MaskPair& pair);

struct MaskSimilarity {
  double iom = 0.0;
  double uom = 0.0;
  std::optional<double> iou;
};
MaskSimilarity mask_similarity(const MaskPair& pair);

enum class KlEstimator {
  kGaussian,   // per-layer Gaussian fit, closed form
  kHistogram,  // per-layer shared-bin histogram with add-one smoothing
};

struct KlResult {
  double value = 0.0;
  std::vector<double> per_layer;
  bool floored = false;  // a variance floor was applied somewhere
};

/// KL(P(M_u ⊙ Θ_u) || P(M_r ⊙ Θ_r)) summed over layers, where P is fitted
/// per layer to all entries of the masked weight matrix (zeros included).
KlResult kl_masked_weights(const MaskedModel& model_u, const MaskedModel& model_r,
                           KlEstimator estimator = KlEstimator::kGaussian, int histogram_bins = 64);

/// KL(N(mu_p, var_p) || N(mu_q, var_q)).
double gaussian_kl(double mu_p, double var_p, double mu_q, double var_q);

inline constexpr double kVarianceFloor = 1e-12;

struct BoundProxyReport {
  double eta = 0.0;
  double t = 0.0;
  double masked_weight_norm = 0.0;  // ||M ⊙ Θ||_2 over weights
  double lambda_hat = 1.0;          // max(max diagonal Fisher entry, 1)
  double value = 0.0;               // eta^2 * t * norm * lambda_hat
};

/// Error-bound proxy for un-pruning. The largest Hessian eigenvalue is
/// stood in for by the largest diagonal Fisher entry, floored at 1.
BoundProxyReport bound_proxy(const MaskedModel& model, double eta, double t, const GradientSet& fisher);

}  // namespace unpruning
