#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "svc/config.hpp"

namespace svc {

// Single-file container:
//   "SVCK" | u32 version | u64 json_bytes | json | u32 blob_count |
//   blob_count x (u32 name_bytes | name | u32 ndim | ndim x i64 dim | f32 data)
// All integers little-endian. Blobs are stored in name order so a
// load -> save cycle reproduces the file byte for byte.
struct Checkpoint {
  Json meta = Json::object();
  std::map<std::string, torch::Tensor> blobs;

  std::vector<char> encode() const;
  static Checkpoint decode(std::span<const char> bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  const torch::Tensor& blob(const std::string& name) const;
  bool has(const std::string& name) const { return blobs.count(name) > 0; }
};

// Copies every parameter of `module` into blobs named prefix + "." + name.
void store_module(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module);
// Overwrites every parameter of `module` from blobs; missing or mis-shaped
// blobs raise ValidationError.
void restore_module(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module);

}  // namespace svc
