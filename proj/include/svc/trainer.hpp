#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "svc/checkpoint.hpp"
#include "svc/confusion.hpp"
#include "svc/config.hpp"
#include "svc/cpc.hpp"
#include "svc/features.hpp"
#include "svc/gan_losses.hpp"
#include "svc/manifest.hpp"
#include "svc/model.hpp"
#include "svc/optim.hpp"

namespace svc {

// One aligned training utterance.
struct Example {
  std::string id;
  int64_t singer = 0;
  torch::Tensor wave;       // [N]
  torch::Tensor content;    // [T, D_c]
  torch::Tensor reference;  // [T, D_r]
  torch::Tensor f0;         // [T] Hz, 0 when unvoiced
  torch::Tensor voiced;     // [T] 0/1

  int64_t num_frames() const { return content.size(0); }
};

struct Dataset {
  std::vector<Example> examples;
  std::vector<std::string> singers;
  Codebook codebook;
  PitchStats pitch_stats;
  FeatureKind content_kind = FeatureKind::kPseudoPpg;
  FeatureKind reference_kind = FeatureKind::kMel;
};

struct LabeledClip {
  std::string id;
  std::string singer;
  AudioClip clip;
};

// Extracts mel, F0 and content features in memory. When `codebook` is given
// it is reused instead of fitted.
Dataset build_dataset(const std::vector<LabeledClip>& clips, const RunConfig& config,
                      const std::optional<Codebook>& codebook = std::nullopt,
                      const std::vector<std::string>& singers = {});

// Reads the manifest's audio. With `features_dir`, mel/F0/content come from
// files written by `svc extract-features`; missing files are an error that
// names that command.
Dataset load_dataset(const DatasetManifest& manifest, const RunConfig& config,
                     const std::optional<std::filesystem::path>& features_dir = std::nullopt,
                     const std::optional<Codebook>& codebook = std::nullopt);

// Reference-encoder input for one clip according to `config.features.reference`.
ContentFeature reference_feature(const std::string& reference, const MelSpectrogram& mel,
                                 const ContentFeature& content,
                                 const std::filesystem::path& audio_path);

PitchStats compute_pitch_stats(const std::vector<Example>& examples);

struct Batch {
  torch::Tensor content;       // [B, F, D_c]
  torch::Tensor reference;     // [B, F, D_r]
  torch::Tensor f0;            // [B, F]
  torch::Tensor voiced;        // [B, F]
  torch::Tensor pitch_target;  // [B, F] normalized log F0
  torch::Tensor singer;        // [B] int64
  torch::Tensor wave;          // [B, F * 240]

  int64_t frames() const { return content.size(1); }
};

// Random aligned crops; a pure function of (config.seed, step).
Batch make_batch(const Dataset& data, const RunConfig& config, int64_t step);

struct LossReport {
  int64_t step = 0;
  double L_mel = 0, L_fm = 0, L_adv_g = 0, L_adv_d = 0, L_hifi = 0;
  double L_s = 0, L_f = 0, L_confusion = 0;
  double L_CPC = 0;      // beta * per-term mean (the trained form)
  double L_CPC_sum = 0;  // beta * literal sum over all terms
  double L_G = 0;        // L_hifi + L_confusion + L_CPC
  double learning_rate = 0;
  bool no_voiced_frames = false;
  bool cpc_degenerate = false;

  Json to_json() const;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeneratorForward {
  EncoderOutput encoded;
  torch::Tensor wave;  // [B, F * 240]
};

class Trainer {
 public:
  Trainer(RunConfig config, Dataset data);
  // Restores weights, optimizer moments and the step counter.
  Trainer(const Checkpoint& ckpt, Dataset data);

  LossReport step();  // make_batch(step) + train_step
  LossReport train_step(const Batch& batch);

  // The two halves of train_step, exposed for inspection.
  GeneratorForward forward_generator(const Batch& batch);
  double discriminator_update(const Batch& batch, const torch::Tensor& fake);
  LossReport generator_update(const Batch& batch, const GeneratorForward& fwd);

  // Runs until config.train.max_steps (or `until`), saving checkpoints into
  // `out_dir` every checkpoint_interval steps and at the end.
  void fit(const std::filesystem::path& out_dir, std::optional<int64_t> until = std::nullopt,
           const std::function<void(const LossReport&)>& on_step = {});

  Checkpoint checkpoint() const;
  double learning_rate() const;
  int64_t current_step() const { return step_; }

  const RunConfig& config() const { return config_; }
  const Dataset& data() const { return data_; }

  SvcModel model{nullptr};
  ConfusionHeads heads{nullptr};
  CpcModule cpc{nullptr};
  DiscriminatorBank discriminators{nullptr};

 private:
  void build();

  RunConfig config_;
  Dataset data_;
  std::unique_ptr<Adam> generator_opt_;
  std::unique_ptr<Adam> discriminator_opt_;
  int64_t step_ = 0;
};

// Assembles the dataset for `manifest` and trains, resuming from
// `resume` when given. Returns the path of the final checkpoint.
std::filesystem::path fit(const DatasetManifest& manifest, const RunConfig& config,
                          const std::filesystem::path& out_dir,
                          const std::optional<std::filesystem::path>& features_dir = std::nullopt,
                          const std::optional<std::filesystem::path>& resume = std::nullopt);

// Common metadata written into checkpoints: config, singers, codebook
// temperature, pitch statistics, version.
void store_dataset_meta(Checkpoint& ckpt, const Dataset& data);

}  // namespace svc
