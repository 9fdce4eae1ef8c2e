// Acceptance suite: one PASS/FAIL line per criterion, per-seed values on the
// indented lines below it. Exits nonzero when any hard criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "unprune/config.hpp"
#include "unprune/experiment.hpp"
#include "unprune/metrics.hpp"
#include "unprune/mia.hpp"
#include "unprune/oracle.hpp"
#include "unprune/report.hpp"
#include "unprune/unprune.hpp"

using namespace unpruning;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  bool qualitative;  // a failure is reported but does not fail the suite
  std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

Vector random_mask(Rng& rng, Eigen::Index n, double keep) {
  Vector m(n);
  for (Eigen::Index i = 0; i < n; ++i) m(i) = rng.uniform() < keep ? 1.0 : 0.0;
  return m;
}

// 1. Mask metric identities on random pairs.
Outcome metric_identities() {
  Rng rng(Rng(2024).split(1));
  Index violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(200));
    const Vector u = random_mask(rng, n, rng.uniform());
    // A quarter of the pairs are equal so the iff direction is exercised both ways.
    const Vector r = trial % 4 == 0 ? u : random_mask(rng, n, rng.uniform());
    const MaskPair p(u, r);
    const double i = iom(p), un = uom(p);
    const auto io = iou(p);
    bool ok = i >= 0 && i <= 1 && un >= 0 && un <= 1 && i <= un;
    if (io) {
      ok = ok && *io >= 0 && *io <= 1 && std::abs(*io * un - i) <= 1e-12;
      ok = ok && ((*io == 1.0) == (u == r));
    } else {
      ok = ok && u.isZero() && r.isZero();
    }
    if (!ok) ++violations;
  }
  return {violations == 0, "violations=" + std::to_string(violations) + " of 10000", {}};
}

// 2. Analytic gradients against central differences.
Outcome gradient_fidelity() {
  Rng rng(Rng(2024).split(2));
  double worst = 0;
  for (int cfg = 0; cfg < 100; ++cfg) {
    std::vector<Eigen::Index> dims{static_cast<Eigen::Index>(1 + rng.below(4))};
    const auto depth = 1 + rng.below(3);
    for (std::uint64_t d = 0; d < depth; ++d) dims.push_back(static_cast<Eigen::Index>(1 + rng.below(6)));
    dims.push_back(static_cast<Eigen::Index>(2 + rng.below(3)));
    MaskedModel m = init_model(mlp_specs(dims), rng.split(static_cast<std::uint64_t>(cfg)));
    for (auto& mask : m.masks) {
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < 0.3 ? 0.0 : 1.0;
    }
    for (auto& b : m.biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.2 * rng.normal();
    }
    apply_mask(m);
    const auto batch = static_cast<Eigen::Index>(1 + rng.below(6));
    Matrix x(batch, dims.front());
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    std::vector<int> y;
    for (Eigen::Index i = 0; i < batch; ++i) y.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(dims.back()))));

    const LossGrad lg = backward(m, x, y);
    double diff = 0, scale = 0;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
      MaskedModel probe = m;
      // Finite differences of the loss in the effective weight W ⊙ M, masked afterwards.
      Matrix fd = oracle::central_difference(probe.weights[l], [&] { return oracle::model_loss(probe, x, y); });
      fd = fd.cwiseProduct(m.masks[l]);
      diff += (fd - lg.grad.weights[l]).squaredNorm();
      scale += std::max(fd.squaredNorm(), lg.grad.weights[l].squaredNorm());
      Vector& b = probe.biases[l];
      Matrix bias_view = b;
      const Matrix fdb = oracle::central_difference(bias_view, [&] {
        b = bias_view;
        return oracle::model_loss(probe, x, y);
      });
      b = m.biases[l];
      diff += (fdb - Matrix(lg.grad.biases[l])).squaredNorm();
      scale += std::max(fdb.squaredNorm(), lg.grad.biases[l].squaredNorm());
    }
    const double rel = scale > 0 ? std::sqrt(diff / scale) : std::sqrt(diff);
    worst = std::max(worst, rel);
  }
  return {worst < 1e-4, "worst relative error=" + fmt(worst * 1e6, 3) + "e-6 over 100 configs", {}};
}

// 3. Pruned masks of D-trained and D_r-trained models differ.
Outcome data_dependence() {
  const ExperimentConfig cfg = reference_config();
  Outcome out;
  int below = 0;
  for (std::uint64_t seed : cfg.seeds) {
    const RunData data = build_run_data(cfg, seed);
    MaskedModel original = train_original(cfg, data, seed);
    prune_magnitude(original, 0.6);
    const OracleResult oracle = retrain_reprune(data.train, data.split, cfg.architecture(), cfg.train, 0.6, {}, seed);
    const double v = iou(MaskPair::of(original, oracle.model)).value();
    below += v < 0.95;
    out.details.push_back("seed " + std::to_string(seed) + ": IoU=" + fmt(v));
  }
  out.pass = below >= 4;
  out.summary = std::to_string(below) + "/5 seeds with IoU < 0.95";
  return out;
}

struct GridRuns {
  ExperimentReport first;
  ExperimentReport second;
  std::string csv_first;
  std::string csv_second;
  double first_s = 0;
};

GridRuns& reference_grid() {
  static GridRuns runs = [] {
    GridRuns g;
    ExperimentConfig cfg = reference_config();
    cfg.redact_timing = true;
    const fs::path dir = fs::temp_directory_path() / ("unprune_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    cfg.out_dir = dir / "a";
    const auto start = Clock::now();
    g.first = run_experiment(cfg, {false, {}});
    g.first_s = std::chrono::duration<double>(Clock::now() - start).count();
    emit_csv(g.first.rows, dir / "a.csv", {true});
    cfg.out_dir = dir / "b";
    g.second = run_experiment(cfg, {false, {}});
    emit_csv(g.second.rows, dir / "b.csv", {true});
    const auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream s;
      s << in.rdbuf();
      return s.str();
    };
    g.csv_first = slurp(dir / "a.csv");
    g.csv_second = slurp(dir / "b.csv");
    fs::remove_all(dir);
    return g;
  }();
  return runs;
}

const ReportRow* find_row(const std::vector<ReportRow>& rows, std::uint64_t seed, const std::string& method) {
  for (const auto& r : rows) {
    if (r.seed == seed && r.method == method) return &r;
  }
  return nullptr;
}

// 4. Un-pruned masks sit closer to the oracle than the pruned original.
Outcome beats_doing_nothing() {
  const ExperimentReport& report = reference_grid().first;
  const ExperimentConfig cfg = reference_config();
  Outcome out;
  out.pass = report.failures() == 0;
  std::vector<double> iom_original;
  for (std::uint64_t seed : cfg.seeds) iom_original.push_back(find_row(report.rows, seed, "original")->iom);
  std::string summary;
  for (const auto& method : {std::string("ga"), std::string("finetune")}) {
    std::vector<double> iom_u;
    double ua_gap_u = 0, ua_gap_o = 0;
    for (std::uint64_t seed : cfg.seeds) {
      const ReportRow* u = find_row(report.rows, seed, method);
      const ReportRow* o = find_row(report.rows, seed, "original");
      const ReportRow* r = find_row(report.rows, seed, "oracle");
      if (!u || !o || !r || u->failed()) {
        out.pass = false;
        continue;
      }
      iom_u.push_back(u->iom);
      ua_gap_u += std::abs(u->ua - r->ua);
      ua_gap_o += std::abs(o->ua - r->ua);
      out.details.push_back(method + " seed " + std::to_string(seed) + ": IoM_u=" + fmt(u->iom) + " IoM_orig=" +
                            fmt(o->iom) + " UA_u=" + fmt(u->ua) + " UA_orig=" + fmt(o->ua) + " UA_oracle=" + fmt(r->ua));
    }
    const double mu = mean(iom_u), mo = mean(iom_original);
    ua_gap_u /= static_cast<double>(cfg.seeds.size());
    ua_gap_o /= static_cast<double>(cfg.seeds.size());
    // Per-seed UA gaps are averaged; the inequality is on the means.
    const bool ok = mu > mo && ua_gap_u <= ua_gap_o;
    out.pass = out.pass && ok;
    summary += method + ": mean IoM " + fmt(mu) + " vs " + fmt(mo) + ", mean |dUA| " + fmt(ua_gap_u) + " vs " +
               fmt(ua_gap_o) + (ok ? " ok; " : " no; ");
  }
  out.summary = summary;
  return out;
}

// 5. Final sparsity equals the starting sparsity for random valid configs.
Outcome sparsity_restoration() {
  Rng rng(Rng(2024).split(5));
  int exact = 0;
  Outcome out;
  for (int k = 0; k < 50; ++k) {
    Rng data_rng = rng.split(static_cast<std::uint64_t>(1000 + k));
    const Dataset data = gen_blobs(data_rng, 30 + rng.below(40), 2 + static_cast<int>(rng.below(2)), 2, 1.0);
    Rng split_rng = rng.split(static_cast<std::uint64_t>(2000 + k));
    const DeletionSplit split = split_delete(data, 0.1, split_rng);
    std::vector<Eigen::Index> dims{2};
    const auto depth = 1 + rng.below(2);
    for (std::uint64_t d = 0; d < depth; ++d) dims.push_back(static_cast<Eigen::Index>(4 + rng.below(20)));
    dims.push_back(data.num_classes);
    MaskedModel m = init_model(mlp_specs(dims), rng.split(static_cast<std::uint64_t>(k)));
    Rng shuffle = rng.split(static_cast<std::uint64_t>(3000 + k));
    train_sgd(m, data, all_rows(data), {3, 0.1, 16}, shuffle);

    UnpruneConfig cfg;
    cfg.original_sparsity = 0.3 + 0.6 * rng.uniform();
    cfg.iterations = 1 + static_cast<int>(rng.below(4));
    cfg.grow_per_iter = cfg.original_sparsity / cfg.iterations * (0.1 + 0.8 * rng.uniform());
    cfg.init_strategy = rng.below(2) ? InitStrategy::kOriginal : InitStrategy::kRandom;
    const UnlearnMethod methods[] = {UnlearnMethod::kGradientAscent, UnlearnMethod::kFinetune,
                                     UnlearnMethod::kFisherForgetting, UnlearnMethod::kNoop};
    cfg.unlearn.method = methods[rng.below(4)];
    cfg.unlearn.steps = 1 + static_cast<int>(rng.below(5));
    cfg.unlearn.rate = 0.01;
    prune_magnitude(m, cfg.original_sparsity);
    const Index n = m.num_weights();
    // The pruned count is round(s * N); describe the config by that realized level.
    const Index zeros = sparsity_of(m).zero_mask_entries;
    Rng run_rng = rng.split(static_cast<std::uint64_t>(4000 + k));
    try {
      const UnpruneResult r = unprune(m, data, split, cfg, run_rng);
      const SparsityReport s = sparsity_of(r.model);
      const bool ok = s.zero_mask_entries == zeros &&
                      std::abs(s.sparsity - cfg.original_sparsity) <= 1.0 / static_cast<double>(n);
      exact += ok;
      if (!ok) out.details.push_back("config " + std::to_string(k) + ": " + std::to_string(s.zero_mask_entries) + " vs " + std::to_string(zeros));
    } catch (const std::exception& e) {
      out.details.push_back("config " + std::to_string(k) + " threw: " + e.what());
    }
  }
  out.pass = exact == 50;
  out.summary = std::to_string(exact) + "/50 configs restored exactly";
  return out;
}

// 6. KL of the oracle with itself is zero and KL(original || oracle) grows with sparsity.
Outcome kl_ground_truth() {
  const ExperimentConfig cfg = reference_config();
  Outcome out;
  bool self_zero = true;
  int monotone = 0;
  for (std::uint64_t seed : cfg.seeds) {
    const RunData data = build_run_data(cfg, seed);
    const MaskedModel dense = train_original(cfg, data, seed);
    std::vector<double> kls;
    for (double s : {0.4, 0.6, 0.95}) {
      MaskedModel original = dense;
      prune_magnitude(original, s);
      const OracleResult oracle = retrain_reprune(data.train, data.split, cfg.architecture(), cfg.train, s, {}, seed);
      self_zero = self_zero && kl_masked_weights(oracle.model, oracle.model).value == 0.0;
      kls.push_back(kl_masked_weights(original, oracle.model).value);
    }
    const bool ok = kls[0] <= kls[1] && kls[1] <= kls[2];
    monotone += ok;
    out.details.push_back("seed " + std::to_string(seed) + ": KL@0.4=" + fmt(kls[0], 6) + " KL@0.6=" + fmt(kls[1], 6) +
                          " KL@0.95=" + fmt(kls[2], 6));
  }
  out.pass = self_zero && monotone >= 4;
  out.summary = std::string("self KL zero: ") + (self_zero ? "yes" : "no") + ", non-decreasing in " +
                std::to_string(monotone) + "/5 seeds";
  return out;
}

// 7. Original-value re-initialization against random re-initialization.
Outcome init_ordering() {
  ExperimentConfig cfg = reference_config();
  cfg.unprune.init_strategy = InitStrategy::kRandom;
  const ExperimentReport random = run_experiment(cfg, {false, {}});
  const ExperimentReport& original = reference_grid().first;
  Outcome out;
  std::vector<double> io, ir;
  for (const auto& method : {std::string("ga"), std::string("finetune")}) {
    for (std::uint64_t seed : cfg.seeds) {
      const ReportRow* a = find_row(original.rows, seed, method);
      const ReportRow* b = find_row(random.rows, seed, method);
      if (!a || !b || a->failed() || b->failed()) continue;
      io.push_back(a->iom);
      ir.push_back(b->iom);
      out.details.push_back(method + " seed " + std::to_string(seed) + ": IoM original-init=" + fmt(a->iom) +
                            " random-init=" + fmt(b->iom));
    }
  }
  out.pass = io.size() == 10 && ir.size() == 10 && mean(io) >= mean(ir);
  out.summary = "mean IoM original-init " + fmt(mean(io)) + " vs random-init " + fmt(mean(ir));
  return out;
}

// 8. Un-pruning is at least twice as fast as retraining.
Outcome running_time() {
  const ExperimentConfig cfg = reference_config();
  const std::uint64_t seed = cfg.seeds.front();
  const RunData data = build_run_data(cfg, seed);
  MaskedModel pruned = train_original(cfg, data, seed);
  prune_magnitude(pruned, 0.6);
  UnpruneConfig u = cfg.unprune;
  u.original_sparsity = 0.6;
  u.unlearn = cfg.methods.front();  // ga
  u.iterations = 3;
  Rng rng = substream(Rng(seed), Stream::kUnlearn);
  const auto start = Clock::now();
  const UnpruneResult r = unprune(pruned, data.train, data.split, u, rng);
  const double t_unprune = std::chrono::duration<double>(Clock::now() - start).count();
  const OracleResult oracle = retrain_reprune(data.train, data.split, cfg.architecture(), cfg.train, 0.6, {}, seed);
  (void)r;
  return {t_unprune <= 0.5 * oracle.wall_time_s,
          "unprune " + fmt(t_unprune, 3) + " s vs retrain " + fmt(oracle.wall_time_s, 3) + " s",
          {}};
}

// 9. Attack correctness swings with the member ratio and sits at chance at 1.0.
Outcome mia_fragility() {
  const ExperimentConfig cfg = reference_config();
  const std::uint64_t seed = cfg.seeds.front();
  const RunData data = build_run_data(cfg, seed);
  const MaskedModel model = train_original(cfg, data, seed);
  std::vector<double> ratios;
  for (int i = 0; i <= 8; ++i) ratios.push_back(0.8 + 0.05 * i);
  const IndexList members = all_rows(data.train);
  const IndexList nonmembers = all_rows(data.test);
  const auto sweep = ratio_sweep(model, {data.train, members}, {data.test, nonmembers}, ratios,
                                 substream(Rng(seed), Stream::kMia));
  double lo = 1, hi = 0, at_one = -1;
  Outcome out;
  for (const auto& r : sweep) {
    lo = std::min(lo, r.correctness());
    hi = std::max(hi, r.correctness());
    if (std::abs(r.ratio - 1.0) < 1e-9) at_one = r.correctness();
    out.details.push_back("ratio " + fmt(r.ratio, 2) + ": correctness=" + fmt(r.correctness()));
  }
  const double ta = evaluate(model, data.test, nonmembers).accuracy;
  const double tr = evaluate(model, data.train, members).accuracy;
  out.details.push_back("train acc=" + fmt(tr) + " test acc=" + fmt(ta));
  out.pass = hi - lo >= 0.2 && at_one >= 0.45 && at_one <= 0.55;
  out.summary = "max-min=" + fmt(hi - lo) + ", at 1.0=" + fmt(at_one);
  return out;
}

// 10. Two runs of the criterion-4 grid write byte-identical CSV.
Outcome determinism() {
  const GridRuns& g = reference_grid();
  const bool same = !g.csv_first.empty() && g.csv_first == g.csv_second;
  return {same, std::string(same ? "identical" : "different") + " (" + std::to_string(g.csv_first.size()) +
                    " bytes, first grid " + fmt(g.first_s, 1) + " s)",
          {}};
}

// 11. Neuron-level analogues of criteria 4 and 5 on 2-32-32-2.
Outcome structured_variant() {
  ExperimentConfig cfg = reference_config();
  cfg.hidden = {32, 32};
  cfg.topology = Topology::kStructured;
  cfg.unprune.topology = Topology::kStructured;
  cfg.oracle.topology = Topology::kStructured;
  const double level = 0.6;
  Outcome out;
  out.pass = true;
  std::string summary;
  std::vector<double> iom_orig;
  std::vector<std::vector<double>> iom_u(cfg.methods.size());
  std::vector<double> gap_u(cfg.methods.size(), 0.0);
  double gap_o = 0;
  int restored = 0, cells = 0;
  for (std::uint64_t seed : cfg.seeds) {
    const RunData data = build_run_data(cfg, seed);
    MaskedModel original = train_original(cfg, data, seed);
    prune_structured_l2(original, level);
    OracleConfig oc = cfg.oracle;
    const OracleResult oracle = retrain_reprune(data.train, data.split, cfg.architecture(), cfg.train, level, oc, seed);
    const double ua_r = evaluate(oracle.model, data.train, data.split.forget).accuracy;
    const double ua_o = evaluate(original, data.train, data.split.forget).accuracy;
    iom_orig.push_back(iom(MaskPair(neuron_mask(original), neuron_mask(oracle.model))));
    gap_o += std::abs(ua_o - ua_r);
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
      UnpruneConfig u = cfg.unprune;
      u.original_sparsity = level;
      u.unlearn = cfg.methods[k];
      Rng rng = substream(Rng(seed), Stream::kUnlearn).split(k);
      const UnpruneResult r = unprune(original, data.train, data.split, u, rng);
      const double v = iom(MaskPair(neuron_mask(r.model), neuron_mask(oracle.model)));
      const double ua_u = evaluate(r.model, data.train, data.split.forget).accuracy;
      iom_u[k].push_back(v);
      gap_u[k] += std::abs(ua_u - ua_r);
      ++cells;
      restored += pruned_neurons(r.model).size() == pruned_neurons(original).size();
      out.details.push_back(to_string(u.unlearn.method) + " seed " + std::to_string(seed) + ": unit IoM_u=" + fmt(v) +
                            " IoM_orig=" + fmt(iom_orig.back()) + " UA_u=" + fmt(ua_u) + " UA_orig=" + fmt(ua_o) +
                            " UA_oracle=" + fmt(ua_r));
    }
  }
  const double n = static_cast<double>(cfg.seeds.size());
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    const bool ok = mean(iom_u[k]) > mean(iom_orig) && gap_u[k] / n <= gap_o / n;
    out.pass = out.pass && ok;
    summary += to_string(cfg.methods[k].method) + ": mean unit IoM " + fmt(mean(iom_u[k])) + " vs " +
               fmt(mean(iom_orig)) + ", mean |dUA| " + fmt(gap_u[k] / n) + " vs " + fmt(gap_o / n) +
               (ok ? " ok; " : " no; ");
  }
  out.pass = out.pass && restored == cells;
  out.summary = summary + "unit sparsity restored " + std::to_string(restored) + "/" + std::to_string(cells);
  return out;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "metric identities", 5, false, metric_identities},
      {2, "gradient fidelity", 30, false, gradient_fidelity},
      {3, "data dependence of pruned masks", 120, false, data_dependence},
      {4, "un-pruning beats doing nothing", 600, false, beats_doing_nothing},
      {5, "sparsity restoration", 300, false, sparsity_restoration},
      {6, "KL ground truth", 300, false, kl_ground_truth},
      {7, "init-strategy ordering", 600, true, init_ordering},
      {8, "running-time ordering", 180, false, running_time},
      {9, "MIA fragility", 120, false, mia_fragility},
      {10, "determinism", 600, false, determinism},
      {11, "structured variant", 600, false, structured_variant},
  };
  int hard_failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    const char* label = pass ? "PASS" : (c.qualitative ? "QUALITATIVE" : "FAIL");
    std::cout << label << " [" << c.id << "] " << c.name << ": " << o.summary << " (" << fmt(secs, 2) << " s"
              << (in_time ? "" : ", over budget " + fmt(c.budget_s, 0) + " s") << ")\n";
    for (const auto& d : o.details) std::cout << "    " << d << '\n';
    std::cout.flush();
    if (!pass && !c.qualitative) ++hard_failures;
  }
  std::cout << (hard_failures == 0 ? "all hard criteria passed" : std::to_string(hard_failures) + " hard criteria failed")
            << '\n';
  return hard_failures == 0 ? 0 : 1;
}
