#pragma once

#include <torch/torch.h>

#include "svc/config.hpp"

namespace svc {

// Identity on the forward pass; multiplies the incoming gradient by -scale on
// the backward pass. With it, one backward pass trains the heads on +L and
// pushes the upstream encoder along -scale * L.
torch::Tensor reversal_boundary(const torch::Tensor& x, double scale);

// Four 1-D conv + ReLU layers and a final linear projection, applied per
// frame: [B, T, D_in] -> [B, T, D_out].
struct ConvHeadImpl : torch::nn::Module {
  ConvHeadImpl(int64_t input_dim, int64_t output_dim, int64_t channels, int64_t kernel);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::ModuleList convs;
  torch::nn::Linear output{nullptr};
};
TORCH_MODULE(ConvHead);

// Singer classifier and pitch predictor. Both read only the
// reference-encoder slice of the encoder output.
struct ConfusionHeadsImpl : torch::nn::Module {
  explicit ConfusionHeadsImpl(const ModelConfig& config);

  ConvHead singer_classifier{nullptr};  // -> S logits per frame
  ConvHead pitch_predictor{nullptr};    // -> 1 value per frame
};
TORCH_MODULE(ConfusionHeads);

// Frame-averaged cross entropy. logits: [B, T, S] (or [T, S]); labels: [B]
// int64 (or a scalar), one label per utterance.
torch::Tensor singer_ce(const torch::Tensor& logits, const torch::Tensor& labels);

struct PitchLoss {
  torch::Tensor value;  // scalar
  bool no_voiced_frames = false;
};

// MSE between predictions and normalized log-F0 targets over voiced frames.
// All tensors [B, T] (or [T]); zero (flagged) when nothing is voiced.
PitchLoss pitch_mse(const torch::Tensor& prediction, const torch::Tensor& target,
                    const torch::Tensor& voiced);

// L_confusion = -lambda * L_s - omega * L_f.
double confusion_loss(double singer_loss, double pitch_loss, const ConfusionConfig& w);
torch::Tensor confusion_loss(const torch::Tensor& singer_loss,
                             const torch::Tensor& pitch_loss, const ConfusionConfig& w);

// z-normalization of log F0 over voiced frames of the training set.
struct PitchStats {
  double mean = 0.0;
  double stddev = 1.0;

  torch::Tensor normalize(const torch::Tensor& f0_hz, const torch::Tensor& voiced) const;
};

}  // namespace svc
