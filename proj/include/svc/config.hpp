#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace svc {

using Json = nlohmann::json;

struct FeatureConfig {
  int64_t codebook_size = 32;
  double codebook_temperature = 0.0;  // <= 0: fitted from data
  // Reference-encoder input: "mel", "pseudo_ppg", or an external kind
  // ("external_hubert", ...) read from SVCF files next to the audio.
  std::string reference = "mel";
  double voicing_threshold = 0.3;
  double rms_gate = 1e-4;

  template <typename V> void visit(V& v) {
    v("codebook_size", codebook_size);
    v("codebook_temperature", codebook_temperature);
    v("reference", reference);
    v("voicing_threshold", voicing_threshold);
    v("rms_gate", rms_gate);
  }
};

struct ModelConfig {
  // Data-dependent; filled in when the dataset is prepared.
  int64_t content_dim = 32;
  int64_t reference_dim = 80;
  int64_t num_singers = 2;

  // CBHG (shared shape for both encoders).
  int64_t bank_size = 8;
  int64_t bank_channels = 32;
  int64_t projection_channels = 64;
  int64_t highway_layers = 4;
  int64_t recurrent_width = 32;  // per direction

  int64_t singer_dim = 16;

  // Decoder.
  int64_t decoder_channels = 64;
  std::vector<int64_t> upsample_factors{8, 6, 5};
  int64_t resblock_kernel = 3;
  std::vector<int64_t> resblock_dilations{1, 3, 5};
  int64_t harmonics = 8;

  // Confusion heads.
  int64_t head_channels = 32;
  int64_t head_kernel = 5;

  // CPC context network.
  int64_t context_width = 32;
  int64_t context_kernel = 3;

  // Discriminators.
  std::vector<int64_t> mpd_periods{2, 3, 5};
  std::vector<int64_t> mpd_channels{8, 16, 32, 32};
  int64_t msd_scales = 2;
  std::vector<int64_t> msd_channels{16, 32, 64, 64};

  int64_t encoder_dim() const { return 4 * recurrent_width; }
  int64_t content_encoder_dim() const { return 2 * recurrent_width; }
  int64_t reference_encoder_dim() const { return 2 * recurrent_width; }
  int64_t hop() const;

  template <typename V> void visit(V& v) {
    v("content_dim", content_dim);
    v("reference_dim", reference_dim);
    v("num_singers", num_singers);
    v("bank_size", bank_size);
    v("bank_channels", bank_channels);
    v("projection_channels", projection_channels);
    v("highway_layers", highway_layers);
    v("recurrent_width", recurrent_width);
    v("singer_dim", singer_dim);
    v("decoder_channels", decoder_channels);
    v("upsample_factors", upsample_factors);
    v("resblock_kernel", resblock_kernel);
    v("resblock_dilations", resblock_dilations);
    v("harmonics", harmonics);
    v("head_channels", head_channels);
    v("head_kernel", head_kernel);
    v("context_width", context_width);
    v("context_kernel", context_kernel);
    v("mpd_periods", mpd_periods);
    v("mpd_channels", mpd_channels);
    v("msd_scales", msd_scales);
    v("msd_channels", msd_channels);
  }
};

struct ConfusionConfig {
  double lambda = 0.1;  // singer confusion weight
  double omega = 0.1;   // pitch confusion weight

  template <typename V> void visit(V& v) {
    v("lambda", lambda);
    v("omega", omega);
  }
};

struct CpcConfig {
  int64_t K = 12;
  int64_t n_neg = 10;
  double beta = 0.1;

  template <typename V> void visit(V& v) {
    v("K", K);
    v("n_neg", n_neg);
    v("beta", beta);
  }
};

struct TrainConfig {
  double learning_rate = 4e-4;
  double adam_beta1 = 0.8;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  double lr_decay = 0.999;
  int64_t lr_decay_every = 1000;
  int64_t batch_size = 4;
  int64_t max_steps = 5000;
  int64_t segment_frames = 100;
  int64_t checkpoint_interval = 1000;
  double mel_weight = 45.0;
  double fm_weight = 2.0;
  bool split = true;  // hold out 5% validation + 5% test by path hash

  template <typename V> void visit(V& v) {
    v("learning_rate", learning_rate);
    v("adam_beta1", adam_beta1);
    v("adam_beta2", adam_beta2);
    v("adam_eps", adam_eps);
    v("lr_decay", lr_decay);
    v("lr_decay_every", lr_decay_every);
    v("batch_size", batch_size);
    v("max_steps", max_steps);
    v("segment_frames", segment_frames);
    v("checkpoint_interval", checkpoint_interval);
    v("mel_weight", mel_weight);
    v("fm_weight", fm_weight);
    v("split", split);
  }
};

// Everything that determines a run. Serialized into every checkpoint and
// report.
struct RunConfig {
  std::string profile = "desk";
  uint64_t seed = 1234;
  FeatureConfig features;
  ModelConfig model;
  ConfusionConfig confusion;
  CpcConfig cpc;
  TrainConfig train;

  void validate() const;
};

// "desk" (CPU-sized) or "paper" (hyperparameters as published, where known).
RunConfig make_profile(const std::string& name);

Json to_json(const RunConfig& config);
// Layers `j` over `base`. Unknown keys and type mismatches raise
// ValidationError naming the dotted key.
RunConfig merge_json(RunConfig base, const Json& j);
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::string& path, const std::string& profile);

// Applies "section.key=value" overrides (value parsed as JSON, falling back to
// a string).
RunConfig apply_override(RunConfig config, const std::string& assignment);

std::string version_string();

}  // namespace svc
