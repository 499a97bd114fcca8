#pragma once

#include <torch/torch.h>

#include <vector>

#include "svc/config.hpp"

namespace svc {

// Causal context network: forward LSTM followed by a left-padded 1-D conv.
// [B, T, D_e] -> [B, T, D_ctx]; c_t depends on e_1..e_t only.
struct ContextNetworkImpl : torch::nn::Module {
  ContextNetworkImpl(int64_t input_dim, int64_t width, int64_t kernel);
  torch::Tensor forward(const torch::Tensor& encoded);

  torch::nn::LSTM lstm{nullptr};
  torch::nn::Conv1d conv{nullptr};
  int64_t kernel;
};
TORCH_MODULE(ContextNetwork);

// Context network plus the K step projections W_k, stored as one
// [K, D_e, D_ctx] parameter.
struct CpcModuleImpl : torch::nn::Module {
  CpcModuleImpl(const ModelConfig& model, const CpcConfig& cpc);

  ContextNetwork context{nullptr};
  torch::Tensor projections;
};
TORCH_MODULE(CpcModule);

// For each step k (1-based) and each anchor t with t + k < T, the candidate
// set Omega: column 0 is the positive index t + k, the remaining columns are
// negatives drawn uniformly without replacement from [0, T) \ {t + k}.
struct NegativeSet {
  int64_t frames = 0;
  int64_t steps = 0;
  // members[k - 1]: [T - k, 1 + n] int64 (empty when k >= T).
  std::vector<torch::Tensor> members;

  int64_t set_size() const;  // |Omega|, identical for every (t, k)
};

// Deterministic given seed; each (t, k) draws from its own derived stream.
NegativeSet sample_negatives(int64_t frames, int64_t steps, int64_t n_neg, uint64_t seed);

struct CpcLoss {
  torch::Tensor raw;   // beta * sum over terms (the literal contrastive sum)
  torch::Tensor mean;  // beta * mean over terms
  int64_t terms = 0;
  bool degenerate = false;  // T <= 1 or no valid (t, k)
};

// encoded: [T, D_e], context: [T, D_ctx], projections: [K, D_e, D_ctx].
// Each term is -log softmax of the positive score among Omega with scores
// e^T W_k c_t.
CpcLoss cpc_loss(const torch::Tensor& encoded, const torch::Tensor& context,
                 const torch::Tensor& projections, const NegativeSet& negatives,
                 double beta);

}  // namespace svc
