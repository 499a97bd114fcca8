#include "svc/cpc.hpp"

#include <cmath>
#include <numeric>

#include "svc/audio.hpp"
#include "svc/rng.hpp"

namespace svc {

ContextNetworkImpl::ContextNetworkImpl(int64_t input_dim, int64_t width, int64_t kernel_size)
    : kernel(kernel_size) {
  lstm = register_module(
      "lstm", torch::nn::LSTM(torch::nn::LSTMOptions(input_dim, width).batch_first(true)));
  conv = register_module("conv",
                         torch::nn::Conv1d(torch::nn::Conv1dOptions(width, width, kernel)));
}

torch::Tensor ContextNetworkImpl::forward(const torch::Tensor& encoded) {
  auto h = std::get<0>(lstm->forward(encoded)).transpose(1, 2);  // [B, W, T]
  h = torch::nn::functional::pad(h, torch::nn::functional::PadFuncOptions({kernel - 1, 0}));
  return conv->forward(h).transpose(1, 2);
}

CpcModuleImpl::CpcModuleImpl(const ModelConfig& model, const CpcConfig& cpc) {
  context = register_module(
      "context", ContextNetwork(model.encoder_dim(), model.context_width, model.context_kernel));
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.encoder_dim() *
                                                           model.context_width));
  projections = register_parameter(
      "projections",
      torch::randn({cpc.K, model.encoder_dim(), model.context_width}) * scale);
}

int64_t NegativeSet::set_size() const {
  for (const auto& m : members) {
    if (m.defined() && m.numel() > 0) return m.size(1);
  }
  return 0;
}

NegativeSet sample_negatives(int64_t frames, int64_t steps, int64_t n_neg, uint64_t seed) {
  if (steps < 1) throw ValidationError("CPC needs at least one prediction step");
  if (n_neg < 0) throw ValidationError("negative count must be >= 0");
  NegativeSet out;
  out.frames = frames;
  out.steps = steps;
  out.members.resize(steps);
  if (frames < 2) return out;

  const int64_t n = std::min(n_neg, frames - 1);
  std::vector<int64_t> pool(frames - 1);
  for (int64_t k = 1; k <= steps; ++k) {
    const int64_t anchors = frames - k;
    if (anchors <= 0) continue;
    auto idx = torch::empty({anchors, 1 + n}, torch::kLong);
    auto* p = idx.data_ptr<int64_t>();
    for (int64_t t = 0; t < anchors; ++t) {
      const int64_t positive = t + k;
      Rng rng(derive_seed({seed, static_cast<uint64_t>(t), static_cast<uint64_t>(k)}));
      // Candidates are [0, T) without the positive; partial Fisher-Yates.
      std::iota(pool.begin(), pool.end(), 0);
      for (auto& c : pool) {
        if (c >= positive) ++c;
      }
      int64_t* row = p + t * (1 + n);
      row[0] = positive;
      for (int64_t j = 0; j < n; ++j) {
        const auto r = j + static_cast<int64_t>(rng.below(pool.size() - j));
        std::swap(pool[j], pool[r]);
        row[1 + j] = pool[j];
      }
    }
    out.members[k - 1] = idx;
  }
  return out;
}

CpcLoss cpc_loss(const torch::Tensor& encoded, const torch::Tensor& context,
                 const torch::Tensor& projections, const NegativeSet& negatives,
                 double beta) {
  if (encoded.dim() != 2 || context.dim() != 2 || projections.dim() != 3) {
    throw ValidationError("cpc_loss expects [T, D_e], [T, D_ctx], [K, D_e, D_ctx]");
  }
  const int64_t T = encoded.size(0);
  if (context.size(0) != T || projections.size(1) != encoded.size(1) ||
      projections.size(2) != context.size(1)) {
    throw ValidationError("cpc_loss: inconsistent shapes");
  }
  const int64_t K = std::min<int64_t>(projections.size(0), negatives.steps);

  CpcLoss out;
  auto total = (encoded.sum() + context.sum() + projections.sum()) * 0.0;
  if (T <= 1) {
    out.raw = total;
    out.mean = total;
    out.degenerate = true;
    return out;
  }
  if (negatives.frames != T) {
    throw ValidationError("negative set was drawn for " + std::to_string(negatives.frames) +
                          " frames, encoder output has " + std::to_string(T));
  }
  for (int64_t k = 1; k <= K; ++k) {
    const auto& idx = negatives.members[k - 1];
    if (!idx.defined() || idx.numel() == 0) continue;
    const int64_t anchors = idx.size(0);
    const int64_t width = idx.size(1);
    const auto pred = context.narrow(0, 0, anchors).matmul(projections[k - 1].t());
    const auto cand = encoded.index_select(0, idx.reshape({-1})).view({anchors, width, -1});
    const auto scores = (cand * pred.unsqueeze(1)).sum(-1);  // [anchors, |Omega|]
    total = total + (torch::logsumexp(scores, 1) - scores.select(1, 0)).sum();
    out.terms += anchors;
  }
  if (out.terms == 0) {
    out.raw = total;
    out.mean = total;
    out.degenerate = true;
    return out;
  }
  out.raw = total * beta;
  out.mean = total * (beta / static_cast<double>(out.terms));
  return out;
}

}  // namespace svc
