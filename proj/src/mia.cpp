#include "unprune/mia.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "unprune/tensor.hpp"

namespace unpruning {

std::vector<MiaFeatures> mia_features(const MaskedModel& model, const Dataset& data, const IndexList& rows) {
  if (rows.empty()) throw InputError("mia_features: no rows");
  const Matrix probs = softmax_rows(forward(model, data.gather_inputs(rows)));
  constexpr double kTiny = 1e-30;
  std::vector<MiaFeatures> out;
  out.reserve(rows.size());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int y = data.labels[rows[static_cast<std::size_t>(i)]];
    MiaFeatures f;
    f.softmax = probs.row(i).transpose();
    f.confidence = f.softmax.maxCoeff();
    f.probability = f.softmax(y);
    f.correct = argmax_row(probs.row(i)) == y;
    for (Eigen::Index c = 0; c < f.softmax.size(); ++c) {
      const double p = f.softmax(c);
      if (p > 0.0) f.entropy -= p * std::log(p);
      if (c == y) {
        f.m_entropy -= (1.0 - p) * std::log(std::max(p, kTiny));
      } else {
        f.m_entropy -= p * std::log(std::max(1.0 - p, kTiny));
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

double channel_value(const MiaFeatures& f, MiaChannel channel) {
  switch (channel) {
    case MiaChannel::kCorrectness: return f.correct ? 1.0 : 0.0;
    case MiaChannel::kConfidence: return f.confidence;
    case MiaChannel::kEntropy: return f.entropy;
    case MiaChannel::kMEntropy: return f.m_entropy;
    case MiaChannel::kProbability: return f.probability;
  }
  return 0.0;
}

namespace {

struct Sample {
  double x;
  int member;
};

// Threshold attacker. Candidate rules are "member iff x >= t" and
// "member iff x <= t" over every cut between distinct held-in values, plus
// the two constant rules. Rules within 1.96 binomial standard errors of
// the best held-in accuracy are the near-best set. If a constant rule is in that
// set the feature is treated as uninformative and the attacker answers with
// that constant (a coin flip when both constants are). Otherwise the near-best
// thresholds vote; a tied vote is a coin flip.
class ThresholdAttacker {
 public:
  explicit ThresholdAttacker(std::vector<Sample> held_in) {
    std::sort(held_in.begin(), held_in.end(), [](const Sample& a, const Sample& b) { return a.x < b.x; });
    const auto n = static_cast<double>(held_in.size());
    double members_total = 0;
    for (const auto& s : held_in) members_total += s.member;
    const double non_total = n - members_total;

    // Cut k separates the k smallest samples from the rest.
    struct Rule {
      double threshold;
      bool ge;
      double accuracy;
    };
    std::vector<Rule> rules;
    double members_below = 0;
    double non_below = 0;
    const double inf = std::numeric_limits<double>::infinity();
    rules.push_back({-inf, true, members_total / n});  // all member
    for (std::size_t k = 0; k < held_in.size(); ++k) {
      members_below += held_in[k].member;
      non_below += 1 - held_in[k].member;
      const bool last = k + 1 == held_in.size();
      if (!last && held_in[k + 1].x == held_in[k].x) continue;
      if (last) {
        rules.push_back({inf, true, non_total / n});  // all non-member
        break;
      }
      const double t = 0.5 * (held_in[k].x + held_in[k + 1].x);
      const double ge_correct = (members_total - members_below) + non_below;
      rules.push_back({t, true, ge_correct / n});
      rules.push_back({t, false, (n - ge_correct) / n});
    }
    double best = 0.0;
    for (const auto& r : rules) best = std::max(best, r.accuracy);
    // The best of many cuts is optimistic, so use a two-sided 95% margin.
    const double tolerance = 1.96 * std::sqrt(best * (1.0 - best) / n) + 1e-12;
    bool all_member = false, all_nonmember = false;
    for (const auto& r : rules) {
      if (r.accuracy < best - tolerance) continue;
      if (r.threshold == -inf) all_member = true;
      if (r.threshold == inf) all_nonmember = true;
      (r.ge ? ge_ : le_).push_back(r.threshold);
    }
    if (all_member || all_nonmember) {
      constant_ = all_member && all_nonmember ? Constant::kCoin
                  : all_member                ? Constant::kMember
                                              : Constant::kNonmember;
    }
    std::sort(ge_.begin(), ge_.end());
    std::sort(le_.begin(), le_.end());
  }

  bool predict(double x, Rng& rng) const {
    switch (constant_) {
      case Constant::kMember: return true;
      case Constant::kNonmember: return false;
      case Constant::kCoin: return rng.uniform() < 0.5;
      case Constant::kNone: break;
    }
    // ge rules with t <= x vote member; le rules with t >= x vote member.
    const auto ge_votes = static_cast<std::size_t>(std::upper_bound(ge_.begin(), ge_.end(), x) - ge_.begin());
    const auto le_votes = static_cast<std::size_t>(le_.end() - std::lower_bound(le_.begin(), le_.end(), x));
    const std::size_t votes = ge_votes + le_votes;
    const std::size_t total = ge_.size() + le_.size();
    if (2 * votes > total) return true;
    if (2 * votes < total) return false;
    return rng.uniform() < 0.5;
  }

 private:
  enum class Constant { kNone, kMember, kNonmember, kCoin };
  Constant constant_ = Constant::kNone;
  std::vector<double> ge_;
  std::vector<double> le_;
};

// One-feature logistic regression fit by Newton's method on standardized x.
class LogisticAttacker {
 public:
  explicit LogisticAttacker(const std::vector<Sample>& held_in) {
    double mean = 0;
    for (const auto& s : held_in) mean += s.x;
    mean /= static_cast<double>(held_in.size());
    double var = 0;
    for (const auto& s : held_in) var += (s.x - mean) * (s.x - mean);
    var /= static_cast<double>(held_in.size());
    mean_ = mean;
    scale_ = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
    constexpr double kRidge = 1e-6;
    for (int it = 0; it < 50; ++it) {
      Eigen::Vector2d g = Eigen::Vector2d::Zero();
      Eigen::Matrix2d h = kRidge * Eigen::Matrix2d::Identity();
      for (const auto& s : held_in) {
        const double z = (s.x - mean_) * scale_;
        const double p = 1.0 / (1.0 + std::exp(-(w_[0] + w_[1] * z)));
        const Eigen::Vector2d phi(1.0, z);
        g += (p - s.member) * phi;
        h += p * (1.0 - p) * phi * phi.transpose();
      }
      g += kRidge * w_;
      const Eigen::Vector2d step = h.ldlt().solve(g);
      w_ -= step;
      if (step.norm() < 1e-10) break;
    }
  }

  bool predict(double x, Rng& rng) const {
    const double logit = w_[0] + w_[1] * (x - mean_) * scale_;
    if (logit > 0) return true;
    if (logit < 0) return false;
    return rng.uniform() < 0.5;
  }

 private:
  double mean_ = 0;
  double scale_ = 1;
  Eigen::Vector2d w_ = Eigen::Vector2d::Zero();
};

template <typename Attacker>
std::pair<double, double> score_channel(const std::vector<Sample>& held_in,
                                        const std::vector<Sample>& held_out, Rng& rng) {
  const Attacker attacker(held_in);
  double tp = 0, members = 0, tn = 0, nonmembers = 0;
  for (const auto& s : held_out) {
    const bool says_member = attacker.predict(s.x, rng);
    if (s.member) {
      members += 1;
      tp += says_member;
    } else {
      nonmembers += 1;
      tn += !says_member;
    }
  }
  const double tpr = tp / members;
  const double tnr = tn / nonmembers;
  return {tpr, 0.5 * (tpr + tnr)};
}

MiaReport evaluate_pool(std::span<const MiaFeatures> features, std::span<const int> is_member,
                        double ratio, Rng rng, const MiaOptions& options, bool resampled) {
  // Stratified halves: the first half of each (shuffled) class is held in.
  std::vector<std::size_t> mem, non;
  for (std::size_t i = 0; i < features.size(); ++i) (is_member[i] ? mem : non).push_back(i);
  if (mem.size() < 2 || non.size() < 2) {
    throw InputError("mia_evaluate: attack pool needs at least two members and two non-members");
  }
  Rng shuffle_rng = rng.split(1);
  const auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[shuffle_rng.below(i)]);
  };
  shuffle(mem);
  shuffle(non);

  MiaReport report;
  report.ratio = ratio;
  report.n_member = mem.size();
  report.n_nonmember = non.size();
  report.resampled = resampled;

  for (std::size_t c = 0; c < kMiaChannels; ++c) {
    const auto channel = static_cast<MiaChannel>(c);
    std::vector<Sample> held_in, held_out;
    const auto place = [&](const std::vector<std::size_t>& idx, int member) {
      const std::size_t half = idx.size() / 2;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        (k < half ? held_in : held_out).push_back({channel_value(features[idx[k]], channel), member});
      }
    };
    place(mem, 1);
    place(non, 0);
    Rng coin = rng.split(100 + c);
    const auto [rate, balanced] = options.attacker == MiaAttacker::kThreshold
                                      ? score_channel<ThresholdAttacker>(held_in, held_out, coin)
                                      : score_channel<LogisticAttacker>(held_in, held_out, coin);
    report.score[c] = rate;
    report.balanced[c] = balanced;
  }
  return report;
}

}  // namespace

MiaReport mia_evaluate_features(std::span<const MiaFeatures> features, std::span<const int> is_member,
                                double ratio, const Rng& rng, const MiaOptions& options) {
  if (features.size() != is_member.size()) throw ShapeError("mia_evaluate_features: label count mismatch");
  return evaluate_pool(features, is_member, ratio, rng, options, false);
}

MiaReport mia_evaluate(const MaskedModel& model, MiaPool members, MiaPool nonmembers, double ratio,
                       const Rng& rng, const MiaOptions& options) {
  if (members.rows.empty() || nonmembers.rows.empty()) throw InputError("mia_evaluate: empty row set");
  if (!(ratio > 0.0)) throw InputError("mia_evaluate: ratio must be > 0");
  const auto member_feats = mia_features(model, members.data, members.rows);
  const auto non_feats = mia_features(model, nonmembers.data, nonmembers.rows);

  const auto want = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(non_feats.size())));
  Rng draw = rng.split(0);
  std::vector<std::size_t> chosen;
  const bool resampled = want > member_feats.size();
  if (resampled) {
    for (std::size_t i = 0; i < want; ++i) chosen.push_back(draw.below(member_feats.size()));
  } else {
    std::vector<std::size_t> pool(member_feats.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    for (std::size_t i = 0; i < want; ++i) std::swap(pool[i], pool[i + draw.below(pool.size() - i)]);
    chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want));
  }

  std::vector<MiaFeatures> pool;
  std::vector<int> is_member;
  for (std::size_t i : chosen) {
    pool.push_back(member_feats[i]);
    is_member.push_back(1);
  }
  for (const auto& f : non_feats) {
    pool.push_back(f);
    is_member.push_back(0);
  }
  return evaluate_pool(pool, is_member, ratio, rng, options, resampled);
}

std::vector<MiaReport> ratio_sweep(const MaskedModel& model, MiaPool members, MiaPool nonmembers,
                                   std::span<const double> ratios, const Rng& rng,
                                   const MiaOptions& options) {
  if (ratios.empty()) throw InputError("ratio_sweep: no ratios");
  std::vector<MiaReport> out;
  for (double r : ratios) {
    out.push_back(mia_evaluate(model, members, nonmembers, r, rng.split(std::bit_cast<std::uint64_t>(r)), options));
  }
  return out;
}

void write_sweep_csv(std::span<const MiaReport> sweep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ratio";
  for (auto name : kMiaChannelNames) out << ',' << name;
  out << '\n' << std::setprecision(10);
  for (const auto& r : sweep) {
    out << r.ratio;
    for (double s : r.score) out << ',' << s;
    out << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace unpruning
