#include "unprune/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "unprune/prune.hpp"

namespace unpruning {

static_assert(std::endian::native == std::endian::little,
              "snapshot payload is written in host order and must be little-endian");

namespace {

constexpr const char* kMagic = "UNPRUNE-SNAPSHOT 1";

void write_block(std::ofstream& out, const double* data, Eigen::Index n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_block(std::ifstream& in, double* data, Eigen::Index n, const std::filesystem::path& path) {
  const auto offset = in.tellg();
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) {
    throw FormatError(path.string() + ": truncated payload at byte offset " +
                      std::to_string(static_cast<long long>(offset)));
  }
}

}  // namespace

std::string layers_to_string(const std::vector<LayerSpec>& layers) {
  std::ostringstream os;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l) os << ',';
    os << layers[l].in_dim << ':' << layers[l].out_dim << ':'
       << (layers[l].activation == Activation::kRelu ? "relu" : "none");
  }
  return os.str();
}

std::vector<LayerSpec> layers_from_string(const std::string& text) {
  std::vector<LayerSpec> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    LayerSpec s;
    char c1 = 0, c2 = 0;
    std::string act;
    std::istringstream ls(item);
    if (!(ls >> s.in_dim >> c1 >> s.out_dim >> c2) || c1 != ':' || c2 != ':' || !(ls >> act)) {
      throw FormatError("bad layer spec '" + item + "'");
    }
    if (act == "relu") {
      s.activation = Activation::kRelu;
    } else if (act == "none") {
      s.activation = Activation::kNone;
    } else {
      throw FormatError("bad activation '" + act + "'");
    }
    out.push_back(s);
  }
  return out;
}

void save_snapshot(const std::filesystem::path& path, const MaskedModel& model,
                   const std::map<std::string, std::string>& meta) {
  model.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kMagic << '\n';
  out << "seed=" << model.seed << '\n';
  out << "layers=" << layers_to_string(model.layers) << '\n';
  out << "sparsity=" << std::setprecision(17) << sparsity_of(model).sparsity << '\n';
  for (const auto& [k, v] : meta) {
    if (k == "seed" || k == "layers" || k == "sparsity" || k.find('=') != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw InputError("save_snapshot: bad metadata key '" + k + "'");
    }
    out << k << '=' << v << '\n';
  }
  out << "end_header\n";
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    write_block(out, model.weights[l].data(), model.weights[l].size());
    write_block(out, model.biases[l].data(), model.biases[l].size());
    write_block(out, model.masks[l].data(), model.masks[l].size());
    write_block(out, model.init_snapshot[l].data(), model.init_snapshot[l].size());
  }
  if (!out) throw IoError("short write to " + path.string());
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw FormatError(path.string() + ": bad snapshot magic at byte offset 0");
  }
  Snapshot snap;
  bool have_layers = false;
  while (true) {
    const auto offset = static_cast<long long>(in.tellg());
    if (!std::getline(in, line)) {
      throw FormatError(path.string() + ": header ends before end_header at byte offset " +
                        std::to_string(offset));
    }
    if (line == "end_header") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ": malformed header line at byte offset " +
                        std::to_string(offset));
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "seed") {
      snap.model.seed = std::stoull(value);
    } else if (key == "layers") {
      snap.model.layers = layers_from_string(value);
      have_layers = true;
    } else if (key != "sparsity") {
      snap.meta[key] = value;
    }
  }
  if (!have_layers || snap.model.layers.empty()) {
    throw FormatError(path.string() + ": header has no layers");
  }
  for (const auto& s : snap.model.layers) {
    Matrix w(s.out_dim, s.in_dim), m(s.out_dim, s.in_dim), init(s.out_dim, s.in_dim);
    Vector b(s.out_dim);
    read_block(in, w.data(), w.size(), path);
    read_block(in, b.data(), b.size(), path);
    read_block(in, m.data(), m.size(), path);
    read_block(in, init.data(), init.size(), path);
    snap.model.weights.push_back(std::move(w));
    snap.model.biases.push_back(std::move(b));
    snap.model.masks.push_back(std::move(m));
    snap.model.init_snapshot.push_back(std::move(init));
  }
  snap.model.validate();
  return snap;
}

}  // namespace unpruning
