// Command line front end: single pipeline stages for debugging and the full
// experiment grid.

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "unprune/config.hpp"
#include "unprune/errors.hpp"
#include "unprune/experiment.hpp"
#include "unprune/metrics.hpp"
#include "unprune/mia.hpp"
#include "unprune/report.hpp"
#include "unprune/snapshot.hpp"
#include "unprune/svg.hpp"

using namespace unpruning;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

constexpr const char* kOutDirEnv = "UNPRUNE_OUT_DIR";

struct Common {
  std::string config;
  std::string out;
  std::string seeds;
  int jobs = 0;
  std::uint64_t seed = 1;
};

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? reference_config() : load_experiment_config(c.config);
  if (const char* env = std::getenv(kOutDirEnv); env && *env) cfg.out_dir = env;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.seeds.empty()) cfg.seeds = parse_seed_list(c.seeds);
  if (c.jobs > 0) cfg.jobs = c.jobs;
  cfg.validate();
  return cfg;
}

std::map<std::string, std::string> run_meta(std::uint64_t seed, const std::string& stage) {
  return {{"run_seed", std::to_string(seed)}, {"stage", stage}};
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

nlohmann::json similarity_json(const MaskedModel& a, const MaskedModel& b, const ExperimentConfig& cfg) {
  const MaskSimilarity s = mask_similarity(MaskPair::of(a, b));
  nlohmann::json j;
  j["iom"] = s.iom;
  j["uom"] = s.uom;
  j["iou"] = s.iou ? nlohmann::json(*s.iou) : nlohmann::json(nullptr);
  const KlResult kl = kl_masked_weights(a, b, cfg.kl_estimator, cfg.kl_bins);
  j["kl"] = kl.value;
  j["kl_floored"] = kl.floored;
  return j;
}

int cmd_train(const Common& c) {
  const ExperimentConfig cfg = load_config(c);
  const RunData data = build_run_data(cfg, c.seed);
  TrainLog log;
  const MaskedModel model = train_original(cfg, data, c.seed, &log);
  fs::create_directories(cfg.out_dir);
  const fs::path snap = cfg.out_dir / ("original_seed" + std::to_string(c.seed) + ".snap");
  save_snapshot(snap, model, run_meta(c.seed, "train"));
  write_train_log_csv(log, "train", cfg.out_dir / ("train_log_seed" + std::to_string(c.seed) + ".csv"));
  std::cout << snap.string() << '\n';
  return kExitOk;
}

int cmd_prune(const std::string& in, const std::string& out, double level, const std::string& mode,
              const std::string& scope) {
  Snapshot snap = load_snapshot(in);
  Topology topo;
  if (mode == "unstructured") topo = Topology::kUnstructured;
  else if (mode == "structured") topo = Topology::kStructured;
  else throw ConfigError("unknown prune mode '" + mode + "'");
  PruneScope sc;
  if (scope == "global") sc = PruneScope::kGlobal;
  else if (scope == "per_layer") sc = PruneScope::kPerLayer;
  else throw ConfigError("unknown prune scope '" + scope + "'");
  prune_to(snap.model, topo, level, sc);
  snap.meta["stage"] = "prune";
  save_snapshot(out, snap.model, snap.meta);
  std::cout << out << '\n';
  return kExitOk;
}

int cmd_oracle(const Common& c, double level, const std::string& out) {
  const ExperimentConfig cfg = load_config(c);
  const RunData data = build_run_data(cfg, c.seed);
  const OracleResult res = retrain_reprune(data.train, data.split, cfg.architecture(), cfg.train, level, cfg.oracle, c.seed);
  save_snapshot(out, res.model, run_meta(c.seed, "oracle"));
  std::cout << out << '\n';
  return kExitOk;
}

int cmd_unprune(const Common& c, const std::string& in, const std::string& method, const std::string& out,
                const std::string& trace) {
  const ExperimentConfig cfg = load_config(c);
  const RunData data = build_run_data(cfg, c.seed);
  Snapshot snap = load_snapshot(in);
  UnpruneConfig ucfg = cfg.unprune;
  ucfg.original_sparsity = topology_sparsity(snap.model, cfg.topology);
  const UnlearnMethod m = unlearn_method_from_string(method);
  ucfg.unlearn.method = m;
  for (const auto& u : cfg.methods) {
    if (u.method == m) ucfg.unlearn = u;
  }
  Rng rng = substream(Rng(c.seed), Stream::kUnlearn);
  const UnpruneResult res = unprune(std::move(snap.model), data.train, data.split, ucfg, rng, &data.test);
  save_snapshot(out, res.model, run_meta(c.seed, "unprune"));
  if (!trace.empty()) write_trace_csv(res.trace, trace);
  std::cout << out << '\n';
  return kExitOk;
}

int cmd_evaluate(const Common& c, const std::string& model_path, const std::string& reference) {
  const ExperimentConfig cfg = load_config(c);
  const RunData data = build_run_data(cfg, c.seed);
  const MaskedModel model = load_snapshot(model_path).model;
  nlohmann::json j;
  j["sparsity"] = sparsity_of(model).sparsity;
  j["ta"] = evaluate(model, data.test, all_rows(data.test)).accuracy;
  j["ua"] = evaluate(model, data.train, data.split.forget).accuracy;
  j["ra"] = evaluate(model, data.train, data.split.retain).accuracy;
  if (!reference.empty()) j["vs_reference"] = similarity_json(model, load_snapshot(reference).model, cfg);
  print_json(j);
  return kExitOk;
}

int cmd_mia_sweep(const Common& c, const std::string& model_path, const std::string& members, double from,
                  double to, double step, const std::string& out_csv, const std::string& out_svg) {
  if (!(step > 0.0) || to < from) throw ConfigError("mia-sweep: need step > 0 and to >= from");
  const ExperimentConfig cfg = load_config(c);
  const RunData data = build_run_data(cfg, c.seed);
  const MaskedModel model = load_snapshot(model_path).model;
  IndexList member_rows;
  if (members == "train") member_rows = all_rows(data.train);
  else if (members == "retain") member_rows = data.split.retain;
  else if (members == "forget") member_rows = data.split.forget;
  else throw ConfigError("unknown member set '" + members + "'");
  const IndexList test_rows = all_rows(data.test);
  std::vector<double> ratios;
  for (int i = 0;; ++i) {
    const double r = from + i * step;
    if (r > to + 1e-9) break;
    ratios.push_back(r);
  }
  const auto sweep = ratio_sweep(model, {data.train, member_rows}, {data.test, test_rows}, ratios,
                                 substream(Rng(c.seed), Stream::kMia));
  write_sweep_csv(sweep, out_csv);
  if (!out_svg.empty()) emit_sweep_svg(sweep, out_svg);
  std::cout << out_csv << '\n';
  return kExitOk;
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = load_config(c);
  RunOptions options;
  options.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  const ExperimentReport report = run_experiment(cfg, options);
  const CsvOptions csv{cfg.redact_timing};
  emit_csv(report.rows, cfg.out_dir / "results.csv", csv);
  emit_csv(report.vs_original, cfg.out_dir / "metrics_vs_original.csv", csv);
  emit_json(report, cfg.out_dir / "results.json");
  emit_scatter(report.rows, "iom", "ua", cfg.out_dir / "iom_vs_ua.svg");
  emit_scatter(report.rows, "iou", "ua", cfg.out_dir / "iou_vs_ua.svg");
  for (const auto& r : report.rows) {
    if (r.failed()) std::cerr << "cell seed=" << r.seed << " method=" << r.method << " sparsity=" << r.sparsity
                              << " failed: " << r.error << '\n';
  }
  std::cout << (cfg.out_dir / "results.csv").string() << '\n';
  return report.failures() > 0 ? kExitPartial : kExitOk;
}

int cmd_plot(const std::string& report_path, const std::string& x, const std::string& y, const std::string& out) {
  const ExperimentReport report = load_report_json(report_path);
  emit_scatter(report.rows, x, y, out);
  std::cout << out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mask un-pruning experiments on small MLPs"};
  app.require_subcommand(1);
  Common c;

  const auto add_common = [&](CLI::App* sub, bool grid) {
    sub->add_option("--config", c.config, "Experiment config file (defaults to the blobs reference task)");
    sub->add_option("--out", c.out, "Output directory (overrides run.out and $UNPRUNE_OUT_DIR)");
    if (grid) {
      sub->add_option("--seeds", c.seeds, "Comma-separated seed list override");
      sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
    } else {
      sub->add_option("--seed", c.seed, "Run seed");
    }
  };

  auto* train = app.add_subcommand("train", "Train the dense original model of one seed");
  add_common(train, false);

  std::string in, out, mode = "unstructured", scope = "global", method = "ga", trace, reference;
  double level = 0.6;
  auto* prune = app.add_subcommand("prune", "Prune a snapshot");
  prune->add_option("--model", in, "Input snapshot")->required();
  prune->add_option("--sparsity", level, "Target sparsity (weights, or hidden units when structured)");
  prune->add_option("--mode", mode, "unstructured | structured");
  prune->add_option("--scope", scope, "global | per_layer");
  prune->add_option("-o,--output", out, "Output snapshot")->required();

  auto* oracle = app.add_subcommand("oracle", "Retrain on the retain set and prune");
  add_common(oracle, false);
  oracle->add_option("--sparsity", level, "Target sparsity");
  oracle->add_option("-o,--output", out, "Output snapshot")->required();

  auto* unp = app.add_subcommand("unprune", "Un-prune a pruned snapshot");
  add_common(unp, false);
  unp->add_option("--model", in, "Pruned snapshot")->required();
  unp->add_option("--method", method, "ga | finetune | fisher | noop");
  unp->add_option("-o,--output", out, "Output snapshot")->required();
  unp->add_option("--trace", trace, "Trace CSV path");

  auto* eval = app.add_subcommand("evaluate", "Accuracy and mask metrics of a snapshot");
  add_common(eval, false);
  eval->add_option("--model", in, "Snapshot")->required();
  eval->add_option("--reference", reference, "Snapshot to compare masks and weights with");

  std::string members = "train", svg;
  double from = 0.8, to = 1.2, step = 0.05;
  auto* mia = app.add_subcommand("mia-sweep", "Membership inference over member/non-member ratios");
  add_common(mia, false);
  mia->add_option("--model", in, "Snapshot")->required();
  mia->add_option("--members", members, "train | retain | forget");
  mia->add_option("--from", from, "First ratio");
  mia->add_option("--to", to, "Last ratio");
  mia->add_option("--step", step, "Ratio step");
  mia->add_option("-o,--output", out, "Sweep CSV")->required();
  mia->add_option("--svg", svg, "Sweep plot");

  auto* run = app.add_subcommand("run", "Full grid: seeds x sparsities x methods");
  add_common(run, true);

  std::string report_path, x_metric = "iom", y_metric = "ua";
  auto* plot = app.add_subcommand("plot", "Scatter plot from a results.json");
  plot->add_option("--report", report_path, "results.json")->required();
  plot->add_option("--x", x_metric, "x metric");
  plot->add_option("--y", y_metric, "y metric");
  plot->add_option("-o,--output", out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (*train) return cmd_train(c);
    if (*prune) return cmd_prune(in, out, level, mode, scope);
    if (*oracle) return cmd_oracle(c, level, out);
    if (*unp) return cmd_unprune(c, in, method, out, trace);
    if (*eval) return cmd_evaluate(c, in, reference);
    if (*mia) return cmd_mia_sweep(c, in, members, from, to, step, out, svg);
    if (*run) return cmd_run(c);
    if (*plot) return cmd_plot(report_path, x_metric, y_metric, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
