#pragma once

#include <torch/torch.h>

#include <vector>

#include "svc/config.hpp"

namespace svc {

struct DiscriminatorOutput {
  torch::Tensor score;                  // [B, *]
  std::vector<torch::Tensor> features;  // per layer, final score map included
};

// Folds the waveform into [B, 1, N / p, p] and applies (k x 1) convs.
struct PeriodDiscriminatorImpl : torch::nn::Module {
  PeriodDiscriminatorImpl(int64_t period, const std::vector<int64_t>& channels);
  DiscriminatorOutput forward(const torch::Tensor& wave);

  int64_t period;
  torch::nn::ModuleList convs;
  torch::nn::Conv2d post{nullptr};
};
TORCH_MODULE(PeriodDiscriminator);

struct ScaleDiscriminatorImpl : torch::nn::Module {
  explicit ScaleDiscriminatorImpl(const std::vector<int64_t>& channels);
  DiscriminatorOutput forward(const torch::Tensor& wave);

  torch::nn::ModuleList convs;
  torch::nn::Conv1d post{nullptr};
};
TORCH_MODULE(ScaleDiscriminator);

// Multi-period discriminators followed by multi-scale ones (scale i sees the
// waveform average-pooled i times).
struct DiscriminatorBankImpl : torch::nn::Module {
  explicit DiscriminatorBankImpl(const ModelConfig& config);
  std::vector<DiscriminatorOutput> forward(const torch::Tensor& wave);

  torch::nn::ModuleList periods;
  torch::nn::ModuleList scales;
};
TORCH_MODULE(DiscriminatorBank);

// L1 distance between the log-mel spectrograms of two equal-length
// waveforms ([N] or [B, N]).
torch::Tensor mel_loss(const torch::Tensor& real, const torch::Tensor& fake);

// Mean over all layers of all discriminators of the per-layer mean L1.
torch::Tensor feature_matching_loss(const std::vector<DiscriminatorOutput>& real,
                                    const std::vector<DiscriminatorOutput>& fake);

struct AdversarialLosses {
  torch::Tensor generator;      // mean((fake - 1)^2)
  torch::Tensor discriminator;  // mean((real - 1)^2) + mean(fake^2)
};

// Least-squares GAN losses, averaged over discriminators.
AdversarialLosses adversarial_losses(const std::vector<torch::Tensor>& real_scores,
                                     const std::vector<torch::Tensor>& fake_scores);
torch::Tensor generator_adversarial_loss(const std::vector<torch::Tensor>& fake_scores);
torch::Tensor discriminator_adversarial_loss(const std::vector<torch::Tensor>& real_scores,
                                             const std::vector<torch::Tensor>& fake_scores);

std::vector<torch::Tensor> scores_of(const std::vector<DiscriminatorOutput>& outputs);

}  // namespace svc
