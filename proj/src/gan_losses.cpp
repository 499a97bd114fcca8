#include "svc/gan_losses.hpp"

#include <numeric>

#include "svc/audio.hpp"
#include "svc/features.hpp"

namespace svc {

namespace F = torch::nn::functional;

namespace {
const auto kLeaky = F::LeakyReLUFuncOptions().negative_slope(0.1);
}

PeriodDiscriminatorImpl::PeriodDiscriminatorImpl(int64_t p, const std::vector<int64_t>& channels)
    : period(p) {
  int64_t in = 1;
  for (size_t i = 0; i < channels.size(); ++i) {
    const int64_t stride = i + 1 < channels.size() ? 3 : 1;
    convs->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, channels[i], {5, 1})
                                           .stride({stride, 1})
                                           .padding({2, 0})));
    in = channels[i];
  }
  register_module("convs", convs);
  post = register_module(
      "post", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, {3, 1}).padding({1, 0})));
}

DiscriminatorOutput PeriodDiscriminatorImpl::forward(const torch::Tensor& wave) {
  auto x = wave;
  const int64_t n = x.size(1);
  if (n % period != 0) {
    const int64_t pad = period - n % period;
    // Reflection needs pad < n; fall back to zeros on tiny inputs.
    auto options = F::PadFuncOptions({0, pad});
    if (pad < n) {
      options.mode(torch::kReflect);
    } else {
      options.mode(torch::kConstant);
    }
    x = F::pad(x.unsqueeze(1), options).squeeze(1);
  }
  x = x.view({x.size(0), 1, -1, period});
  DiscriminatorOutput out;
  for (const auto& m : *convs) {
    x = F::leaky_relu(m->as<torch::nn::Conv2d>()->forward(x), kLeaky);
    out.features.push_back(x);
  }
  x = post->forward(x);
  out.features.push_back(x);
  out.score = x.flatten(1);
  return out;
}

ScaleDiscriminatorImpl::ScaleDiscriminatorImpl(const std::vector<int64_t>& channels) {
  int64_t in = 1;
  for (size_t i = 0; i < channels.size(); ++i) {
    auto opts = i == 0 ? torch::nn::Conv1dOptions(in, channels[i], 15).padding(7)
                       : torch::nn::Conv1dOptions(in, channels[i], 41)
                             .stride(i + 1 < channels.size() ? 4 : 1)
                             .padding(20)
                             .groups(std::gcd(std::gcd(in, channels[i]), int64_t{4}));
    convs->push_back(torch::nn::Conv1d(opts));
    in = channels[i];
  }
  register_module("convs", convs);
  post = register_module("post",
                         torch::nn::Conv1d(torch::nn::Conv1dOptions(in, 1, 3).padding(1)));
}

DiscriminatorOutput ScaleDiscriminatorImpl::forward(const torch::Tensor& wave) {
  auto x = wave.unsqueeze(1);
  DiscriminatorOutput out;
  for (const auto& m : *convs) {
    x = F::leaky_relu(m->as<torch::nn::Conv1d>()->forward(x), kLeaky);
    out.features.push_back(x);
  }
  x = post->forward(x);
  out.features.push_back(x);
  out.score = x.flatten(1);
  return out;
}

DiscriminatorBankImpl::DiscriminatorBankImpl(const ModelConfig& c) {
  for (auto p : c.mpd_periods) periods->push_back(PeriodDiscriminator(p, c.mpd_channels));
  for (int64_t s = 0; s < c.msd_scales; ++s) scales->push_back(ScaleDiscriminator(c.msd_channels));
  register_module("periods", periods);
  register_module("scales", scales);
}

std::vector<DiscriminatorOutput> DiscriminatorBankImpl::forward(const torch::Tensor& wave) {
  std::vector<DiscriminatorOutput> outs;
  for (const auto& m : *periods) outs.push_back(m->as<PeriodDiscriminator>()->forward(wave));
  auto x = wave;
  for (size_t i = 0; i < scales->size(); ++i) {
    if (i > 0) {
      x = F::avg_pool1d(x.unsqueeze(1), F::AvgPool1dFuncOptions(4).stride(2).padding(2))
              .squeeze(1);
    }
    outs.push_back(scales[i]->as<ScaleDiscriminator>()->forward(x));
  }
  return outs;
}

torch::Tensor mel_loss(const torch::Tensor& real, const torch::Tensor& fake) {
  if (!real.sizes().equals(fake.sizes())) {
    throw ValidationError("mel_loss: waveform lengths differ");
  }
  const auto& frontend = MelFrontend::instance();
  torch::Tensor target;
  {
    torch::NoGradGuard no_grad;
    target = frontend.forward(real);
  }
  return (frontend.forward(fake) - target).abs().mean();
}

torch::Tensor feature_matching_loss(const std::vector<DiscriminatorOutput>& real,
                                    const std::vector<DiscriminatorOutput>& fake) {
  if (real.size() != fake.size()) {
    throw ValidationError("feature matching: discriminator counts differ");
  }
  torch::Tensor total;
  int64_t layers = 0;
  for (size_t d = 0; d < real.size(); ++d) {
    if (real[d].features.size() != fake[d].features.size()) {
      throw ValidationError("feature matching: layer counts differ");
    }
    for (size_t l = 0; l < real[d].features.size(); ++l) {
      if (!real[d].features[l].sizes().equals(fake[d].features[l].sizes())) {
        throw ValidationError("feature matching: feature map shapes differ");
      }
      auto term = (real[d].features[l].detach() - fake[d].features[l]).abs().mean();
      total = total.defined() ? total + term : term;
      ++layers;
    }
  }
  if (layers == 0) throw ValidationError("feature matching: no layers");
  return total / static_cast<double>(layers);
}

torch::Tensor generator_adversarial_loss(const std::vector<torch::Tensor>& fake_scores) {
  if (fake_scores.empty()) throw ValidationError("no discriminator scores");
  torch::Tensor total;
  for (const auto& f : fake_scores) {
    auto term = (f - 1.0).square().mean();
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(fake_scores.size());
}

torch::Tensor discriminator_adversarial_loss(const std::vector<torch::Tensor>& real_scores,
                                             const std::vector<torch::Tensor>& fake_scores) {
  if (real_scores.size() != fake_scores.size() || real_scores.empty()) {
    throw ValidationError("discriminator score lists differ in size");
  }
  torch::Tensor total;
  for (size_t i = 0; i < real_scores.size(); ++i) {
    auto term = (real_scores[i] - 1.0).square().mean() + fake_scores[i].square().mean();
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(real_scores.size());
}

AdversarialLosses adversarial_losses(const std::vector<torch::Tensor>& real_scores,
                                     const std::vector<torch::Tensor>& fake_scores) {
  return {generator_adversarial_loss(fake_scores),
          discriminator_adversarial_loss(real_scores, fake_scores)};
}

std::vector<torch::Tensor> scores_of(const std::vector<DiscriminatorOutput>& outputs) {
  std::vector<torch::Tensor> s;
  s.reserve(outputs.size());
  for (const auto& o : outputs) s.push_back(o.score);
  return s;
}

}  // namespace svc
