#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace svc {

inline constexpr int kSampleRate = 24000;
inline constexpr int kHopSize = 240;      // 10 ms
inline constexpr int kWindowSize = 960;   // 40 ms
inline constexpr int kFftSize = 1024;
inline constexpr int kNumMels = 80;

// Raised for malformed inputs and contract violations; the CLI maps it to
// exit code 1. Anything else escaping a command is a runtime failure.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Throws ValidationError unless the clip is 24 kHz, non-empty and within
// [-1, 1].
void validate_clip(const AudioClip& clip);

// Number of 10 ms frames produced by the center-padded analysis.
inline int64_t frame_count(size_t num_samples) {
  return 1 + static_cast<int64_t>(num_samples) / kHopSize;
}

enum class WavEncoding { kPcm16, kFloat32 };

// Mono 16-bit PCM or 32-bit float WAV. Multi-channel files are rejected.
AudioClip read_wav(const std::filesystem::path& path);
AudioClip decode_wav(std::span<const char> bytes);
std::vector<char> encode_wav(const AudioClip& clip,
                             WavEncoding encoding = WavEncoding::kPcm16);
void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::kPcm16);

}  // namespace svc
