#pragma once

#include <torch/torch.h>

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "svc/config.hpp"
#include "svc/features.hpp"
#include "svc/inference.hpp"
#include "svc/trainer.hpp"

namespace svc {

struct NccResult {
  double value = 0.0;
  int64_t frames = 0;  // mutually voiced frames used
  bool degenerate = false;
};

// Zero-lag normalized cross-correlation over frames voiced in both tracks.
// A shorter track is nearest-resampled to the longer one's length.
NccResult ncc(const PitchTrack& a, const PitchTrack& b, bool log_f0 = false);
// The bare formula on already-selected values; degenerate when either side
// has zero energy.
NccResult ncc(std::span<const double> a, std::span<const double> b);

// Cosine similarity; zero vectors and dimension mismatches are rejected.
double cos_sim(std::span<const double> x, std::span<const double> y);
double cos_sim(const torch::Tensor& x, const torch::Tensor& y);

struct EmbedderConfig {
  int64_t channels = 64;
  int64_t dim = 32;
  int64_t steps = 300;
  int64_t batch_size = 8;
  int64_t segment_frames = 50;
  double learning_rate = 1e-3;
  uint64_t seed = 99;
};

// Mel-input singer classifier; the embedding is the L2-normalized time
// average of its penultimate layer.
class SpeakerEmbedder {
 public:
  SpeakerEmbedder(const std::vector<LabeledClip>& clips, const EmbedderConfig& config = {});

  torch::Tensor embed(const AudioClip& clip) const;  // [dim], unit norm
  torch::Tensor embed(const MelSpectrogram& mel) const;
  int64_t dim() const { return config_.dim; }
  const std::vector<std::string>& singers() const { return singers_; }

 private:
  struct Net;
  EmbedderConfig config_;
  std::vector<std::string> singers_;
  std::shared_ptr<Net> net_;
  double mean_ = 0.0, scale_ = 1.0;
};

// Mean embedding of each singer's real clips, renormalized.
std::map<std::string, torch::Tensor> singer_centroids(const SpeakerEmbedder& embedder,
                                                      const std::vector<LabeledClip>& clips);

struct PairResult {
  std::string source;
  std::string source_singer;
  std::string target_singer;
  NccResult ncc;
  double cos_sim = 0.0;
  // Target centroid similarity is strictly the highest among all centroids.
  bool target_ranked_first = false;
  std::string error;  // non-empty: pair skipped
};

struct MetricReport {
  double ncc = 0.0;      // mean over non-degenerate pairs
  double cos_sim = 0.0;  // mean over evaluated pairs
  int64_t evaluated = 0;
  int64_t degenerate = 0;
  int64_t failed = 0;
  int64_t ranked_first = 0;
  std::vector<PairResult> pairs;
  Json provenance;

  Json to_json() const;
  std::string table() const;
};

struct EvalOptions {
  bool self_only = false;  // convert each clip only to its own singer
  bool log_f0 = false;
};

MetricReport evaluate_conversion(const std::vector<LabeledClip>& test,
                                 const ConversionModel& model,
                                 const SpeakerEmbedder& embedder,
                                 const std::map<std::string, torch::Tensor>& centroids,
                                 const EvalOptions& options = {});

}  // namespace svc
