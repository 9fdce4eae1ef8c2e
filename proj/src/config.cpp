#include "unprune/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "unprune/errors.hpp"

namespace unpruning {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text, const std::string& what) {
  std::vector<std::string> items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError(what + ": empty list item in '" + text + "'");
    items.push_back(item);
  }
  if (items.empty()) throw ConfigError(what + ": empty list");
  return items;
}

double to_double(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a number: '" + text + "'");
  }
  if (used != text.size()) throw ConfigError(what + ": not a number: '" + text + "'");
  return v;
}

template <typename T>
T to_integer(const std::string& text, const std::string& what) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(what + ": not an integer: '" + text + "'");
  return v;
}

bool to_bool(const std::string& text, const std::string& what) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(what + ": not a boolean: '" + text + "'");
}

std::string method_section(UnlearnMethod m) { return to_string(m); }

}  // namespace

KeyValueFile parse_key_value(const std::string& text, const std::string& source) {
  KeyValueFile out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = source + ":" + std::to_string(number);
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.values.count(full)) throw ConfigError(where + ": duplicate key '" + full + "'");
    std::string value = line.substr(eq + 1);
    // Trailing comments need whitespace before the marker, so "a#b" stays a value.
    for (std::size_t i = 1; i < value.size(); ++i) {
      if ((value[i] == '#' || value[i] == ';') && (value[i - 1] == ' ' || value[i - 1] == '\t')) {
        value.resize(i);
        break;
      }
    }
    out.values[full] = trim(value);
    out.lines[full] = number;
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text, "seeds")) seeds.push_back(to_integer<std::uint64_t>(item, "seeds"));
  return seeds;
}

std::vector<LayerSpec> ExperimentConfig::architecture() const {
  std::vector<Eigen::Index> dims{data.dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(data.classes);
  return mlp_specs(dims);
}

void ExperimentConfig::validate() const {
  if (data.source != "blobs" && data.source != "idx") throw ConfigError("data.source must be blobs or idx");
  if (data.source == "blobs") {
    if (data.n_per_class < 1 || data.test_n_per_class < 1) throw ConfigError("data: class sizes must be >= 1");
    if (data.classes < 2) throw ConfigError("data.classes must be >= 2");
    if (data.dim < 1) throw ConfigError("data.dim must be >= 1");
    if (!(data.spread >= 0.0)) throw ConfigError("data.spread must be >= 0");
  } else if (data.idx_images.empty() || data.idx_labels.empty() || data.idx_test_images.empty() ||
             data.idx_test_labels.empty()) {
    throw ConfigError("data: idx source needs train and test image and label paths");
  }
  if (!(data.delete_ratio > 0.0 && data.delete_ratio < 1.0)) {
    throw ConfigError("data.delete_ratio must be in (0, 1)");
  }
  for (auto h : hidden) {
    if (h < 1) throw ConfigError("model.hidden sizes must be >= 1");
  }
  if (train.epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (!(train.lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (sparsities.empty()) throw ConfigError("prune.sparsities is empty");
  for (double s : sparsities) {
    if (!(s > 0.0 && s < 1.0)) throw ConfigError("prune.sparsities entries must be in (0, 1)");
    UnpruneConfig u = unprune;
    u.original_sparsity = s;
    u.validate();
  }
  if (methods.empty()) throw ConfigError("unlearn.methods is empty");
  std::set<UnlearnMethod> seen;
  for (const auto& m : methods) {
    if (!seen.insert(m.method).second) throw ConfigError("unlearn.methods lists " + to_string(m.method) + " twice");
    m.validate();
  }
  if (oracle.iterative_rounds < 0) throw ConfigError("oracle.iterative_rounds must be >= 0");
  if (kl_bins < 2) throw ConfigError("metrics.kl_bins must be >= 2");
  if (seeds.empty()) throw ConfigError("run.seeds is empty");
  if (jobs < 1) throw ConfigError("run.jobs must be >= 1");
}

std::string ExperimentConfig::oracle_text(double level, std::uint64_t seed) const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "arch=";
  for (const auto& l : architecture()) out << l.in_dim << ':' << l.out_dim << ',';
  out << " epochs=" << train.epochs << " lr=" << train.lr << " batch=" << train.batch_size
      << " level=" << level << " topology=" << static_cast<int>(topology)
      << " scope=" << static_cast<int>(scope) << " seed_mode=" << static_cast<int>(oracle.seed_mode)
      << " rounds=" << oracle.iterative_rounds << " seed=" << seed;
  return out.str();
}

ExperimentConfig reference_config() {
  ExperimentConfig cfg;
  UnlearnConfig ga;
  ga.method = UnlearnMethod::kGradientAscent;
  ga.steps = 5;
  ga.rate = 1e-2;
  UnlearnConfig ft;
  ft.method = UnlearnMethod::kFinetune;
  ft.steps = 50;
  ft.rate = 2e-2;
  cfg.methods = {ga, ft};
  return cfg;
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
  const KeyValueFile kv = parse_key_value(text, source);
  ExperimentConfig cfg = reference_config();
  std::map<UnlearnMethod, UnlearnConfig> per_method;
  for (auto m : {UnlearnMethod::kGradientAscent, UnlearnMethod::kFinetune, UnlearnMethod::kFisherForgetting,
                 UnlearnMethod::kNoop}) {
    UnlearnConfig u;
    u.method = m;
    for (const auto& d : cfg.methods) {
      if (d.method == m) u = d;
    }
    per_method[m] = u;
  }
  std::vector<UnlearnMethod> order;
  for (const auto& m : cfg.methods) order.push_back(m.method);

  using Setter = std::function<void(const std::string&, const std::string&)>;
  std::map<std::string, Setter> setters;
  auto& d = cfg.data;
  setters["data.source"] = [&](const std::string& v, const std::string&) { d.source = v; };
  setters["data.n_per_class"] = [&](const std::string& v, const std::string& w) { d.n_per_class = to_integer<Index>(v, w); };
  setters["data.test_n_per_class"] = [&](const std::string& v, const std::string& w) { d.test_n_per_class = to_integer<Index>(v, w); };
  setters["data.classes"] = [&](const std::string& v, const std::string& w) { d.classes = to_integer<int>(v, w); };
  setters["data.dim"] = [&](const std::string& v, const std::string& w) { d.dim = to_integer<Eigen::Index>(v, w); };
  setters["data.spread"] = [&](const std::string& v, const std::string& w) { d.spread = to_double(v, w); };
  setters["data.idx_images"] = [&](const std::string& v, const std::string&) { d.idx_images = v; };
  setters["data.idx_labels"] = [&](const std::string& v, const std::string&) { d.idx_labels = v; };
  setters["data.idx_test_images"] = [&](const std::string& v, const std::string&) { d.idx_test_images = v; };
  setters["data.idx_test_labels"] = [&](const std::string& v, const std::string&) { d.idx_test_labels = v; };
  setters["data.limit"] = [&](const std::string& v, const std::string& w) { d.limit = to_integer<Index>(v, w); };
  setters["data.delete_ratio"] = [&](const std::string& v, const std::string& w) { d.delete_ratio = to_double(v, w); };
  setters["model.hidden"] = [&](const std::string& v, const std::string& w) {
    cfg.hidden.clear();
    for (const auto& item : split_list(v, w)) cfg.hidden.push_back(to_integer<Eigen::Index>(item, w));
  };
  setters["train.epochs"] = [&](const std::string& v, const std::string& w) { cfg.train.epochs = to_integer<int>(v, w); };
  setters["train.lr"] = [&](const std::string& v, const std::string& w) { cfg.train.lr = to_double(v, w); };
  setters["train.batch_size"] = [&](const std::string& v, const std::string& w) { cfg.train.batch_size = to_integer<Index>(v, w); };
  setters["prune.sparsities"] = [&](const std::string& v, const std::string& w) {
    cfg.sparsities.clear();
    for (const auto& item : split_list(v, w)) cfg.sparsities.push_back(to_double(item, w));
  };
  setters["prune.mode"] = [&](const std::string& v, const std::string& w) {
    if (v == "unstructured") cfg.topology = Topology::kUnstructured;
    else if (v == "structured") cfg.topology = Topology::kStructured;
    else throw ConfigError(w + ": unknown prune mode '" + v + "'");
  };
  setters["prune.scope"] = [&](const std::string& v, const std::string& w) {
    if (v == "global") cfg.scope = PruneScope::kGlobal;
    else if (v == "per_layer") cfg.scope = PruneScope::kPerLayer;
    else throw ConfigError(w + ": unknown prune scope '" + v + "'");
  };
  setters["unprune.grow_per_iter"] = [&](const std::string& v, const std::string& w) { cfg.unprune.grow_per_iter = to_double(v, w); };
  setters["unprune.iterations"] = [&](const std::string& v, const std::string& w) { cfg.unprune.iterations = to_integer<int>(v, w); };
  setters["unprune.init_strategy"] = [&](const std::string& v, const std::string&) { cfg.unprune.init_strategy = init_strategy_from_string(v); };
  setters["unprune.random_init_std"] = [&](const std::string& v, const std::string& w) { cfg.unprune.random_init_std = to_double(v, w); };
  setters["unlearn.methods"] = [&](const std::string& v, const std::string& w) {
    order.clear();
    for (const auto& item : split_list(v, w)) order.push_back(unlearn_method_from_string(item));
  };
  for (auto& [m, u] : per_method) {
    auto* target = &u;
    const std::string sec = method_section(m) + ".";
    setters[sec + "steps"] = [target](const std::string& v, const std::string& w) { target->steps = to_integer<int>(v, w); };
    setters[sec + "rate"] = [target](const std::string& v, const std::string& w) { target->rate = to_double(v, w); };
    setters[sec + "batch_size"] = [target](const std::string& v, const std::string& w) { target->batch_size = to_integer<Index>(v, w); };
    if (m == UnlearnMethod::kFisherForgetting) {
      setters[sec + "noise_scale"] = [target](const std::string& v, const std::string& w) { target->fisher_noise_scale = to_double(v, w); };
      setters[sec + "variance_cap"] = [target](const std::string& v, const std::string& w) { target->fisher_variance_cap = to_double(v, w); };
      setters[sec + "source"] = [target](const std::string& v, const std::string& w) {
        if (v == "retain") target->fisher_source = FisherSource::kRetain;
        else if (v == "forget") target->fisher_source = FisherSource::kForget;
        else if (v == "all") target->fisher_source = FisherSource::kAll;
        else throw ConfigError(w + ": unknown fisher source '" + v + "'");
      };
    }
  }
  setters["oracle.seed_mode"] = [&](const std::string& v, const std::string& w) {
    if (v == "same") cfg.oracle.seed_mode = OracleSeedMode::kSameSeed;
    else if (v == "independent") cfg.oracle.seed_mode = OracleSeedMode::kIndependent;
    else throw ConfigError(w + ": unknown oracle seed mode '" + v + "'");
  };
  setters["oracle.iterative_rounds"] = [&](const std::string& v, const std::string& w) { cfg.oracle.iterative_rounds = to_integer<int>(v, w); };
  setters["oracle.cache"] = [&](const std::string& v, const std::string& w) { cfg.oracle_cache = to_bool(v, w); };
  setters["metrics.kl_estimator"] = [&](const std::string& v, const std::string& w) {
    if (v == "gaussian") cfg.kl_estimator = KlEstimator::kGaussian;
    else if (v == "histogram") cfg.kl_estimator = KlEstimator::kHistogram;
    else throw ConfigError(w + ": unknown kl estimator '" + v + "'");
  };
  setters["metrics.kl_bins"] = [&](const std::string& v, const std::string& w) { cfg.kl_bins = to_integer<int>(v, w); };
  setters["run.seeds"] = [&](const std::string& v, const std::string&) { cfg.seeds = parse_seed_list(v); };
  setters["run.out"] = [&](const std::string& v, const std::string&) { cfg.out_dir = v; };
  setters["run.jobs"] = [&](const std::string& v, const std::string& w) { cfg.jobs = to_integer<int>(v, w); };
  setters["run.redact_timing"] = [&](const std::string& v, const std::string& w) { cfg.redact_timing = to_bool(v, w); };

  for (const auto& [key, value] : kv.values) {
    const std::string where = source + ":" + std::to_string(kv.lines.at(key));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    try {
      it->second(value, where + ": " + key);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

  cfg.methods.clear();
  for (auto m : order) cfg.methods.push_back(per_method.at(m));
  cfg.unprune.topology = cfg.topology;
  cfg.oracle.topology = cfg.topology;
  cfg.oracle.scope = cfg.scope;
  cfg.unprune.final_scope = cfg.scope;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), path.string());
}

}  // namespace unpruning
