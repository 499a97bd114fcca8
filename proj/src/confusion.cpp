#include "svc/confusion.hpp"

#include "svc/audio.hpp"

namespace svc {
namespace {

struct GradientReversal : torch::autograd::Function<GradientReversal> {
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, torch::Tensor x,
                               double scale) {
    ctx->saved_data["scale"] = scale;
    return x.view_as(x);
  }

  static torch::autograd::variable_list backward(torch::autograd::AutogradContext* ctx,
                                                 torch::autograd::variable_list grad) {
    const double scale = ctx->saved_data["scale"].toDouble();
    return {grad[0] * -scale, torch::Tensor()};
  }
};

}  // namespace

torch::Tensor reversal_boundary(const torch::Tensor& x, double scale) {
  if (scale < 0.0) throw ValidationError("reversal scale must be >= 0");
  return GradientReversal::apply(x, scale);
}

ConvHeadImpl::ConvHeadImpl(int64_t input_dim, int64_t output_dim, int64_t channels,
                           int64_t kernel) {
  int64_t in = input_dim;
  for (int i = 0; i < 4; ++i) {
    convs->push_back(torch::nn::Conv1d(
        torch::nn::Conv1dOptions(in, channels, kernel).padding(kernel / 2)));
    in = channels;
  }
  register_module("convs", convs);
  output = register_module("output", torch::nn::Linear(channels, output_dim));
}

torch::Tensor ConvHeadImpl::forward(const torch::Tensor& x) {
  auto h = x.transpose(1, 2);
  for (const auto& m : *convs) h = torch::relu(m->as<torch::nn::Conv1d>()->forward(h));
  return output->forward(h.transpose(1, 2));
}

ConfusionHeadsImpl::ConfusionHeadsImpl(const ModelConfig& c) {
  singer_classifier = register_module(
      "singer_classifier",
      ConvHead(c.reference_encoder_dim(), c.num_singers, c.head_channels, c.head_kernel));
  pitch_predictor = register_module(
      "pitch_predictor",
      ConvHead(c.reference_encoder_dim(), 1, c.head_channels, c.head_kernel));
}

torch::Tensor singer_ce(const torch::Tensor& logits, const torch::Tensor& labels) {
  const auto l = logits.dim() == 2 ? logits.unsqueeze(0) : logits;
  const auto y = labels.dim() == 0 ? labels.unsqueeze(0) : labels;
  if (l.dim() != 3 || y.dim() != 1 || y.size(0) != l.size(0)) {
    throw ValidationError("singer_ce expects [B, T, S] logits and [B] labels");
  }
  const int64_t S = l.size(2);
  if (S < 2) throw ValidationError("singer classification needs at least 2 singers");
  if ((y < 0).any().item<bool>() || (y >= S).any().item<bool>()) {
    throw ValidationError("singer label out of range [0, " + std::to_string(S) + ")");
  }
  const int64_t T = l.size(1);
  const auto targets = y.to(torch::kLong).unsqueeze(1).expand({-1, T}).reshape({-1});
  return torch::nn::functional::cross_entropy(l.reshape({-1, S}), targets);
}

PitchLoss pitch_mse(const torch::Tensor& prediction, const torch::Tensor& target,
                    const torch::Tensor& voiced) {
  if (!prediction.sizes().equals(target.sizes()) || !prediction.sizes().equals(voiced.sizes())) {
    throw ValidationError("pitch_mse: prediction, target and voicing lengths differ");
  }
  const auto mask = (voiced.to(torch::kFloat32) > 0.5).to(prediction.scalar_type());
  const auto count = mask.sum();
  if (count.item<double>() == 0.0) {
    return {(prediction * 0.0).sum(), true};
  }
  return {((prediction - target).square() * mask).sum() / count, false};
}

double confusion_loss(double singer_loss, double pitch_loss, const ConfusionConfig& w) {
  return -w.lambda * singer_loss - w.omega * pitch_loss;
}

torch::Tensor confusion_loss(const torch::Tensor& singer_loss, const torch::Tensor& pitch_loss,
                             const ConfusionConfig& w) {
  return -w.lambda * singer_loss - w.omega * pitch_loss;
}

torch::Tensor PitchStats::normalize(const torch::Tensor& f0_hz,
                                    const torch::Tensor& voiced) const {
  const auto v = voiced.to(torch::kFloat32) > 0.5;
  const auto z = (torch::log(torch::clamp_min(f0_hz, 1.0)) - mean) / stddev;
  return torch::where(v, z, torch::zeros_like(z));
}

}  // namespace svc
