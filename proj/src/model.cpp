#include "svc/model.hpp"

#include <cmath>

namespace svc {

namespace F = torch::nn::functional;

void require_finite(const torch::Tensor& t, const std::string& what) {
  if (!torch::isfinite(t).all().item<bool>()) {
    throw ValidationError(what + " contains non-finite values");
  }
}

// ---------------------------------------------------------------------------
// CBHG

CbhgImpl::CbhgImpl(int64_t input_dim, const ModelConfig& c) {
  const int64_t proj = c.projection_channels;
  prenet = register_module("prenet", torch::nn::Linear(input_dim, proj));
  for (int64_t k = 1; k <= c.bank_size; ++k) {
    bank->push_back(torch::nn::Conv1d(torch::nn::Conv1dOptions(proj, c.bank_channels, k)));
  }
  register_module("bank", bank);
  projection1 = register_module(
      "projection1",
      torch::nn::Conv1d(torch::nn::Conv1dOptions(c.bank_size * c.bank_channels, proj, 3)
                            .padding(1)));
  projection2 = register_module(
      "projection2", torch::nn::Conv1d(torch::nn::Conv1dOptions(proj, proj, 3).padding(1)));
  for (int64_t i = 0; i < c.highway_layers; ++i) {
    highway_h->push_back(torch::nn::Linear(proj, proj));
    torch::nn::Linear gate(proj, proj);
    torch::NoGradGuard no_grad;
    gate->bias.fill_(-1.0);  // start close to the carry path
    highway_t->push_back(gate);
  }
  register_module("highway_h", highway_h);
  register_module("highway_t", highway_t);
  rnn = register_module(
      "rnn", torch::nn::GRU(torch::nn::GRUOptions(proj, c.recurrent_width)
                                .batch_first(true)
                                .bidirectional(true)));
}

torch::Tensor CbhgImpl::forward(const torch::Tensor& x) {
  auto residual = torch::relu(prenet->forward(x));  // [B, T, P]
  auto h = residual.transpose(1, 2);                // [B, P, T]

  std::vector<torch::Tensor> outs;
  outs.reserve(bank->size());
  for (size_t i = 0; i < bank->size(); ++i) {
    const int64_t k = static_cast<int64_t>(i) + 1;
    auto padded = F::pad(h, F::PadFuncOptions({(k - 1) / 2, k / 2}));
    outs.push_back(torch::relu(bank[i]->as<torch::nn::Conv1d>()->forward(padded)));
  }
  auto stacked = torch::cat(outs, 1);
  stacked = F::pad(stacked, F::PadFuncOptions({0, 1}).mode(torch::kReplicate));
  stacked = F::max_pool1d(stacked, F::MaxPool1dFuncOptions(2).stride(1));

  auto p = torch::relu(projection1->forward(stacked));
  p = projection2->forward(p);
  auto y = p.transpose(1, 2) + residual;

  for (size_t i = 0; i < highway_h->size(); ++i) {
    auto hval = torch::relu(highway_h[i]->as<torch::nn::Linear>()->forward(y));
    auto gate = torch::sigmoid(highway_t[i]->as<torch::nn::Linear>()->forward(y));
    y = hval * gate + y * (1.0 - gate);
  }
  return std::get<0>(rnn->forward(y));
}

// ---------------------------------------------------------------------------
// Decoder

ResBlockImpl::ResBlockImpl(int64_t channels, int64_t kernel,
                           const std::vector<int64_t>& dilations) {
  for (auto d : dilations) {
    convs->push_back(torch::nn::Conv1d(torch::nn::Conv1dOptions(channels, channels, kernel)
                                           .dilation(d)
                                           .padding(d * (kernel - 1) / 2)));
  }
  register_module("convs", convs);
}

torch::Tensor ResBlockImpl::forward(torch::Tensor x) {
  for (const auto& m : *convs) {
    x = x + m->as<torch::nn::Conv1d>()->forward(F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.1)));
  }
  return x;
}

DecoderImpl::DecoderImpl(const ModelConfig& c) {
  const int64_t in_dim = c.encoder_dim() + c.singer_dim;
  const int64_t ch = c.decoder_channels;
  conv_pre = register_module(
      "conv_pre", torch::nn::Conv1d(torch::nn::Conv1dOptions(in_dim, ch, 7).padding(3)));
  pitch_projection = register_module("pitch_projection", torch::nn::Linear(2, ch));

  int64_t rest = c.hop();
  int64_t channels = ch;
  for (auto u : c.upsample_factors) {
    const int64_t out = channels / 2;
    upsamples->push_back(torch::nn::ConvTranspose1d(
        torch::nn::ConvTranspose1dOptions(channels, out, 2 * u)
            .stride(u)
            .padding(u / 2 + u % 2)
            .output_padding(u % 2)));
    resblocks->push_back(ResBlock(out, c.resblock_kernel, c.resblock_dilations));
    rest /= u;
    source_convs->push_back(torch::nn::Conv1d(
        torch::nn::Conv1dOptions(c.harmonics, out, rest).stride(rest)));
    channels = out;
  }
  register_module("upsamples", upsamples);
  register_module("resblocks", resblocks);
  register_module("source_convs", source_convs);
  conv_post = register_module(
      "conv_post", torch::nn::Conv1d(torch::nn::Conv1dOptions(channels, 1, 7).padding(3)));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& frames, const torch::Tensor& singer,
                                   const torch::Tensor& pitch_feats,
                                   const torch::Tensor& excitation) {
  const int64_t T = frames.size(1);
  auto cond = torch::cat({frames, singer.unsqueeze(1).expand({-1, T, -1})}, 2);
  auto x = conv_pre->forward(cond.transpose(1, 2)) +
           pitch_projection->forward(pitch_feats).transpose(1, 2);
  const auto leaky = F::LeakyReLUFuncOptions().negative_slope(0.1);
  for (size_t i = 0; i < upsamples->size(); ++i) {
    x = upsamples[i]->as<torch::nn::ConvTranspose1d>()->forward(F::leaky_relu(x, leaky));
    x = x + source_convs[i]->as<torch::nn::Conv1d>()->forward(excitation);
    x = resblocks[i]->as<ResBlock>()->forward(x);
  }
  x = conv_post->forward(F::leaky_relu(x, leaky));
  return torch::tanh(x).squeeze(1);
}

torch::Tensor pitch_features(const torch::Tensor& f0_hz, const torch::Tensor& voiced) {
  const auto v = voiced.to(torch::kFloat32);
  const auto logf0 = torch::where(v > 0.5, torch::log(torch::clamp_min(f0_hz, 1.0)),
                                  torch::zeros_like(f0_hz));
  return torch::stack({logf0, v}, 2);
}

torch::Tensor harmonic_excitation(const torch::Tensor& f0_hz, const torch::Tensor& voiced,
                                  int64_t hop, int64_t harmonics) {
  torch::NoGradGuard no_grad;
  const auto v = (voiced.to(torch::kFloat64) > 0.5).to(torch::kFloat64);
  const auto f = (f0_hz.to(torch::kFloat64) * v).repeat_interleave(hop, 1);  // [B, N]
  const auto gate = v.repeat_interleave(hop, 1);
  const auto phase = torch::cumsum(f / kSampleRate, 1) * (2.0 * M_PI);
  std::vector<torch::Tensor> bands;
  bands.reserve(harmonics);
  for (int64_t h = 1; h <= harmonics; ++h) {
    const auto below_nyquist = (f * static_cast<double>(h) < kSampleRate / 2.0).to(torch::kFloat64);
    bands.push_back(0.1 * torch::sin(phase * static_cast<double>(h)) * gate * below_nyquist);
  }
  return torch::stack(bands, 1).to(torch::kFloat32);
}

// ---------------------------------------------------------------------------
// SvcModel

SvcModelImpl::SvcModelImpl(const ModelConfig& c) : config(c) {
  content_encoder = register_module("content_encoder", Cbhg(c.content_dim, c));
  reference_encoder = register_module("reference_encoder", Cbhg(c.reference_dim, c));
  singer_table = register_module("singer_table",
                                 torch::nn::Embedding(c.num_singers, c.singer_dim));
  decoder = register_module("decoder", Decoder(c));
}

EncoderOutput SvcModelImpl::encode(const torch::Tensor& content,
                                   const torch::Tensor& reference) {
  auto a = content_encoder->forward(content);
  auto b = reference_encoder->forward(reference);
  return {torch::cat({a, b}, 2), a.size(2)};
}

torch::Tensor SvcModelImpl::decode(const EncoderOutput& enc, const torch::Tensor& singer_index,
                                   const torch::Tensor& f0_hz, const torch::Tensor& voiced) {
  const auto singer = singer_table->forward(singer_index);
  const auto excitation = harmonic_excitation(f0_hz, voiced, config.hop(), config.harmonics);
  return decoder->forward(enc.frames, singer, pitch_features(f0_hz, voiced), excitation);
}

namespace {

torch::Tensor encode_one(Cbhg& encoder, int64_t expected_dim, const ContentFeature& feature,
                         const char* what) {
  if (!feature.frames.defined() || feature.frames.dim() != 2 || feature.num_frames() < 1) {
    throw ValidationError(std::string(what) + " input must be a non-empty T x D matrix");
  }
  if (feature.dim() != expected_dim) {
    throw ValidationError(std::string(what) + " expects dimension " +
                          std::to_string(expected_dim) + ", got " +
                          std::to_string(feature.dim()));
  }
  require_finite(feature.frames, what);
  return encoder->forward(feature.frames.unsqueeze(0)).squeeze(0);
}

}  // namespace

torch::Tensor encode_content(SvcModel& model, const ContentFeature& feature) {
  return encode_one(model->content_encoder, model->config.content_dim, feature,
                    "content encoder");
}

torch::Tensor encode_reference(SvcModel& model, const ContentFeature& feature) {
  return encode_one(model->reference_encoder, model->config.reference_dim, feature,
                    "reference encoder");
}

std::vector<float> decode(SvcModel& model, const EncoderOutput& enc, int64_t singer_index,
                          const PitchTrack& pitch) {
  const auto frames = enc.frames.dim() == 2 ? enc.frames.unsqueeze(0) : enc.frames;
  if (static_cast<int64_t>(pitch.size()) != frames.size(1)) {
    throw ValidationError("pitch track has " + std::to_string(pitch.size()) +
                          " frames but encoder output has " +
                          std::to_string(frames.size(1)));
  }
  if (singer_index < 0 || singer_index >= model->config.num_singers) {
    throw ValidationError("singer index " + std::to_string(singer_index) + " out of range");
  }
  const auto p = pitch_to_tensor(pitch);
  const auto f0 = p.select(1, 0).unsqueeze(0);
  const auto voiced = p.select(1, 1).unsqueeze(0);
  const auto wave = model->decode({frames, enc.content_dim},
                                  torch::tensor({singer_index}), f0, voiced)
                        .squeeze(0)
                        .detach()
                        .contiguous();
  return {wave.data_ptr<float>(), wave.data_ptr<float>() + wave.numel()};
}

}  // namespace svc
