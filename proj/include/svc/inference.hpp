#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "svc/audio.hpp"
#include "svc/checkpoint.hpp"
#include "svc/config.hpp"
#include "svc/features.hpp"
#include "svc/model.hpp"

namespace svc {

struct ConversionOptions {
  double f0_ratio = 1.0;  // multiplies the source F0
  // Precomputed inputs; when absent they are extracted from the source clip.
  std::optional<ContentFeature> content;
  std::optional<ContentFeature> reference;
  // Used to locate external reference features next to the source audio.
  std::filesystem::path source_path;
};

// The inference path: feature extraction, both encoders, the singer table
// and the decoder. Only "model." blobs of a checkpoint are read.
class ConversionModel {
 public:
  static ConversionModel from_checkpoint(const Checkpoint& ckpt);
  static ConversionModel load(const std::filesystem::path& path);

  // Throws ValidationError listing the known singers.
  int64_t singer_index(const std::string& singer) const;

  // Output has 240 * T samples, T = frame_count(source.size()).
  AudioClip convert(const AudioClip& source, const std::string& singer,
                    const ConversionOptions& options = {}) const;

  const std::vector<std::string>& singers() const { return singers_; }
  const RunConfig& config() const { return config_; }
  const Codebook& codebook() const { return codebook_; }

 private:
  RunConfig config_;
  std::vector<std::string> singers_;
  Codebook codebook_;
  mutable SvcModel model_{nullptr};
};

}  // namespace svc
