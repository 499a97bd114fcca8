#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "svc/audio.hpp"

namespace svc {

inline constexpr float kMelFloor = 1e-5f;
inline constexpr double kMelMaxHz = 12000.0;

// T x 80 natural-log mel energies, float32.
struct MelSpectrogram {
  torch::Tensor frames;

  int64_t num_frames() const { return frames.size(0); }
};

struct PitchTrack {
  std::vector<float> f0_hz;
  std::vector<uint8_t> voiced;

  size_t size() const { return f0_hz.size(); }
  size_t voiced_count() const;
};

// Codes are part of the SVCF file format; do not renumber.
enum class FeatureKind : uint8_t {
  kPseudoPpg = 0,
  kExternalPpg = 1,
  kExternalPpgMid = 2,
  kExternalHubert = 3,
  kExternalMel = 4,
  kMel = 5,
  kPitch = 6,  // two columns: f0 Hz, voiced flag
};

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);
FeatureKind feature_kind_from_code(uint8_t code);

struct ContentFeature {
  torch::Tensor frames;  // T x D, float32
  FeatureKind kind = FeatureKind::kPseudoPpg;

  int64_t num_frames() const { return frames.size(0); }
  int64_t dim() const { return frames.size(1); }
};

struct Codebook {
  torch::Tensor centers;  // K x 80, float32
  double temperature = 1.0;

  int64_t size() const { return centers.size(0); }
};

// STFT + mel filterbank shared by feature extraction and the reconstruction
// loss, so both use one definition of "mel spectrogram".
class MelFrontend {
 public:
  MelFrontend();

  // waves: [B, N] or [N] float32. Returns [B, T, 80] (or [T, 80]) with
  // T = 1 + N / 240. Differentiable with respect to waves.
  torch::Tensor forward(const torch::Tensor& waves) const;

  const torch::Tensor& filterbank() const { return filterbank_; }  // 80 x 513
  // Center frequency of each mel band in Hz.
  std::vector<double> band_centers_hz() const;

  static const MelFrontend& instance();

 private:
  torch::Tensor window_;
  torch::Tensor filterbank_;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

MelSpectrogram extract_mel(const AudioClip& clip);

struct F0Config {
  double min_hz = 50.0;
  double max_hz = 1000.0;
  double voicing_threshold = 0.3;
  double rms_gate = 1e-4;
};

PitchTrack extract_f0(const AudioClip& clip, const F0Config& config = {});

// k-means with k-means++ seeding. temperature <= 0 selects the median squared
// distance of frames to their nearest center.
Codebook fit_codebook(std::span<const MelSpectrogram> mels, int64_t num_centers,
                      uint64_t seed, double temperature = 0.0);

ContentFeature pseudo_content(const MelSpectrogram& mel, const Codebook& cb);

// SVCF container: "SVCF", u32 T, u32 D, u8 kind, T*D f32, little-endian.
struct FeatureFile {
  torch::Tensor frames;
  FeatureKind kind;
};

std::vector<char> encode_feature_file(const torch::Tensor& frames,
                                      FeatureKind kind);
FeatureFile decode_feature_file(std::span<const char> bytes);
void write_feature_file(const std::filesystem::path& path,
                        const torch::Tensor& frames, FeatureKind kind);
FeatureFile read_feature_file(const std::filesystem::path& path);

// Nearest-frame repetition/decimation onto a grid of target_frames rows.
torch::Tensor resample_frames(const torch::Tensor& frames,
                              int64_t target_frames);

ContentFeature load_external_feature(const std::filesystem::path& path,
                                     FeatureKind kind, int64_t target_frames);

torch::Tensor pitch_to_tensor(const PitchTrack& pitch);  // T x 2
PitchTrack pitch_from_tensor(const torch::Tensor& frames);

}  // namespace svc
