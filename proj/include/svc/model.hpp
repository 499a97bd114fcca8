#pragma once

#include <torch/torch.h>

#include "svc/config.hpp"
#include "svc/features.hpp"

namespace svc {

// Tacotron-style CBHG: conv bank (kernels 1..K), stride-1 max-pool, two
// projection convs with a residual, highway stack, bidirectional GRU.
// [B, T, D_in] -> [B, T, 2 * recurrent_width]; T is preserved for all T >= 1.
struct CbhgImpl : torch::nn::Module {
  CbhgImpl(int64_t input_dim, const ModelConfig& config);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear prenet{nullptr};
  torch::nn::ModuleList bank;
  torch::nn::Conv1d projection1{nullptr}, projection2{nullptr};
  torch::nn::ModuleList highway_h, highway_t;
  torch::nn::GRU rnn{nullptr};
};
TORCH_MODULE(Cbhg);

struct ResBlockImpl : torch::nn::Module {
  ResBlockImpl(int64_t channels, int64_t kernel, const std::vector<int64_t>& dilations);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::ModuleList convs;
};
TORCH_MODULE(ResBlock);

// HiFi-GAN-style generator. Frame-level input is the encoder output with the
// singer vector broadcast over time, plus a linear projection of
// [log F0, voicing]. A harmonic excitation rendered from F0 is injected after
// every upsampling stage.
struct DecoderImpl : torch::nn::Module {
  explicit DecoderImpl(const ModelConfig& config);

  // frames: [B, T, D_e], singer: [B, D_s], pitch_features: [B, T, 2],
  // excitation: [B, H, T * hop]. Returns [B, T * hop] in [-1, 1].
  torch::Tensor forward(const torch::Tensor& frames, const torch::Tensor& singer,
                        const torch::Tensor& pitch_features,
                        const torch::Tensor& excitation);

  torch::nn::Conv1d conv_pre{nullptr};
  torch::nn::Linear pitch_projection{nullptr};
  torch::nn::ModuleList upsamples, resblocks, source_convs;
  torch::nn::Conv1d conv_post{nullptr};
};
TORCH_MODULE(Decoder);

// [B, T] Hz and voicing flags -> [B, T, 2] of (log F0 or 0, flag).
torch::Tensor pitch_features(const torch::Tensor& f0_hz, const torch::Tensor& voiced);

// Sum-of-sines source at the audio rate: [B, harmonics, T * hop], float32.
// Harmonic h has amplitude 0.1 on voiced frames and is silenced above
// Nyquist. Phase starts at zero at the first sample.
torch::Tensor harmonic_excitation(const torch::Tensor& f0_hz, const torch::Tensor& voiced,
                                  int64_t hop, int64_t harmonics);

// Concatenation of the content- and reference-encoder outputs, [B, T, D_e].
struct EncoderOutput {
  torch::Tensor frames;
  int64_t content_dim = 0;

  torch::Tensor content_part() const { return frames.narrow(-1, 0, content_dim); }
  torch::Tensor reference_part() const {
    return frames.narrow(-1, content_dim, frames.size(-1) - content_dim);
  }
};

// The inference network: both encoders, the singer table and the decoder.
// Confusion heads, the CPC module and the discriminators live outside it.
struct SvcModelImpl : torch::nn::Module {
  explicit SvcModelImpl(const ModelConfig& config);

  // content: [B, T, D_c], reference: [B, T, D_r].
  EncoderOutput encode(const torch::Tensor& content, const torch::Tensor& reference);
  // singer_index: [B] int64; f0_hz, voiced: [B, T]. Returns [B, T * 240].
  torch::Tensor decode(const EncoderOutput& enc, const torch::Tensor& singer_index,
                       const torch::Tensor& f0_hz, const torch::Tensor& voiced);

  ModelConfig config;
  Cbhg content_encoder{nullptr};
  Cbhg reference_encoder{nullptr};
  torch::nn::Embedding singer_table{nullptr};
  Decoder decoder{nullptr};
};
TORCH_MODULE(SvcModel);

// Single-utterance conveniences over SvcModel. Inputs are validated (finite
// values, matching lengths, valid singer index).
torch::Tensor encode_content(SvcModel& model, const ContentFeature& feature);
torch::Tensor encode_reference(SvcModel& model, const ContentFeature& feature);
std::vector<float> decode(SvcModel& model, const EncoderOutput& enc, int64_t singer_index,
                          const PitchTrack& pitch);

void require_finite(const torch::Tensor& t, const std::string& what);

}  // namespace svc
