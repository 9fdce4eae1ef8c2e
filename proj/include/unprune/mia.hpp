#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "unprune/data.hpp"
#include "unprune/model.hpp"

namespace unpruning {

/// Per-sample attack features derived from the model's softmax output.
struct MiaFeatures {
  Vector softmax;
  double confidence = 0.0;   // max probability
  double entropy = 0.0;      // -sum p ln p
  double m_entropy = 0.0;    // label-aware modified entropy
  double probability = 0.0;  // probability of the true class
  bool correct = false;
};

std::vector<MiaFeatures> mia_features(const MaskedModel& model, const Dataset& data, const IndexList& rows);

enum class MiaChannel : std::size_t { kCorrectness, kConfidence, kEntropy, kMEntropy, kProbability };
inline constexpr std::size_t kMiaChannels = 5;
inline constexpr std::array<std::string_view, kMiaChannels> kMiaChannelNames{
    "correctness", "confidence", "entropy", "m_entropy", "probability"};

double channel_value(const MiaFeatures& f, MiaChannel channel);

enum class MiaAttacker { kThreshold, kLogistic };

struct MiaOptions {
  MiaAttacker attacker = MiaAttacker::kThreshold;
};

/// One point of the fragility curve. The five channel scores are the fraction
/// of held-out member samples the attacker labels as members; `balanced`
/// holds the balanced attack accuracy (mean of TPR and TNR) per channel.
struct MiaReport {
  double ratio = 1.0;
  std::array<double, kMiaChannels> score{};
  std::array<double, kMiaChannels> balanced{};
  Index n_member = 0;
  Index n_nonmember = 0;
  bool resampled = false;  // members were drawn with replacement

  double correctness() const { return score[0]; }
  double confidence() const { return score[1]; }
  double entropy() const { return score[2]; }
  double m_entropy() const { return score[3]; }
  double probability() const { return score[4]; }
};

struct MiaPool {
  const Dataset& data;
  const IndexList& rows;
};

/// Builds an attack pool with round(ratio * |non-members|) member samples,
/// splits it in stratified held-in/held-out halves, fits one attacker per
/// channel on the held-in half and scores the held-out half.
MiaReport mia_evaluate(const MaskedModel& model, MiaPool members, MiaPool nonmembers, double ratio,
                       const Rng& rng, const MiaOptions& options = {});

/// Same as mia_evaluate with caller-provided membership labels per pool
/// entry; used to check that label-shuffled pools score at chance.
MiaReport mia_evaluate_features(std::span<const MiaFeatures> features, std::span<const int> is_member,
                                double ratio, const Rng& rng, const MiaOptions& options = {});

/// One report per ratio. Each point draws from a stream keyed by its ratio,
/// so a point's result does not depend on the rest of the sweep.
std::vector<MiaReport> ratio_sweep(const MaskedModel& model, MiaPool members, MiaPool nonmembers,
                                   std::span<const double> ratios, const Rng& rng,
                                   const MiaOptions& options = {});

/// Rows `ratio,correctness,confidence,entropy,m_entropy,probability`.
void write_sweep_csv(std::span<const MiaReport> sweep, const std::filesystem::path& path);

}  // namespace unpruning
