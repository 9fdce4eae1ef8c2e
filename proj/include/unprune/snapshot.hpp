#pragma once

// Model snapshot file:
//
//   UNPRUNE-SNAPSHOT 1
//   seed=<u64>
//   layers=<in>:<out>:<relu|none>,...
//   sparsity=<fraction, informational>
//   <extra key=value lines>
//   end_header
//   <binary payload>
//
// The payload holds, per layer in order, four little-endian float64 blocks:
// weights (out*in, row-major), biases (out), masks (out*in) and the
// initialization snapshot (out*in).

#include <filesystem>
#include <map>
#include <string>

#include "unprune/model.hpp"

namespace unpruning {

struct Snapshot {
  MaskedModel model;
  std::map<std::string, std::string> meta;
};

void save_snapshot(const std::filesystem::path& path, const MaskedModel& model,
                   const std::map<std::string, std::string>& meta = {});
Snapshot load_snapshot(const std::filesystem::path& path);

std::string layers_to_string(const std::vector<LayerSpec>& layers);
std::vector<LayerSpec> layers_from_string(const std::string& text);

}  // namespace unpruning
