#include "svc/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace svc {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV and feature IO assume a little-endian host");

uint32_t read_u32(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

uint16_t read_u16(const char* p) {
  uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

template <typename T>
void put(std::vector<char>& out, T v) {
  const char* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate) {
    throw ValidationError("unsupported sample rate " +
                          std::to_string(clip.sample_rate) + " Hz; expected " +
                          std::to_string(kSampleRate) + " Hz");
  }
  if (clip.samples.empty()) throw ValidationError("audio clip is empty");
  for (float s : clip.samples) {
    if (!std::isfinite(s) || std::fabs(s) > 1.0f) {
      throw ValidationError("audio sample outside [-1, 1]");
    }
  }
}

AudioClip decode_wav(std::span<const char> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ValidationError("not a RIFF/WAVE file");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* chunk = bytes.data() + pos;
    const uint32_t size = read_u32(chunk + 4);
    const size_t body = pos + 8;
    if (body + size > bytes.size() && std::memcmp(chunk, "data", 4) != 0) {
      throw ValidationError("truncated WAV chunk");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw ValidationError("WAV fmt chunk too short");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && size >= 26) {
        format = read_u16(bytes.data() + body + 24);  // extensible subformat
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw ValidationError("WAV data chunk before fmt chunk");
      if (channels != 1) {
        throw ValidationError("expected mono WAV, got " +
                              std::to_string(channels) + " channels");
      }
      if (body + size > bytes.size()) {
        throw ValidationError("truncated WAV data: header declares " +
                              std::to_string(size) + " bytes, file has " +
                              std::to_string(bytes.size() - body));
      }
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      const char* data = bytes.data() + body;
      if (format == 1 && bits == 16) {
        clip.samples.resize(size / 2);
        for (size_t i = 0; i < clip.samples.size(); ++i) {
          int16_t v;
          std::memcpy(&v, data + 2 * i, 2);
          clip.samples[i] = static_cast<float>(v) / 32768.0f;
        }
      } else if (format == 3 && bits == 32) {
        clip.samples.resize(size / 4);
        std::memcpy(clip.samples.data(), data, clip.samples.size() * 4);
      } else {
        throw ValidationError("unsupported WAV encoding (format " +
                              std::to_string(format) + ", " +
                              std::to_string(bits) + " bits)");
      }
      return clip;
    }
    pos = body + size + (size & 1u);
  }
  throw ValidationError("WAV file has no data chunk");
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open audio file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<char> encode_wav(const AudioClip& clip, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::kPcm16;
  const uint16_t bits = pcm ? 16 : 32;
  const uint32_t data_bytes =
      static_cast<uint32_t>(clip.samples.size() * (bits / 8));
  std::vector<char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put<uint32_t>(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put<uint32_t>(out, 16);
  put<uint16_t>(out, pcm ? 1 : 3);
  put<uint16_t>(out, 1);
  put<uint32_t>(out, static_cast<uint32_t>(clip.sample_rate));
  put<uint32_t>(out, static_cast<uint32_t>(clip.sample_rate) * (bits / 8));
  put<uint16_t>(out, bits / 8);
  put<uint16_t>(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put<uint32_t>(out, data_bytes);
  for (float s : clip.samples) {
    if (pcm) {
      const float c = std::clamp(s, -1.0f, 1.0f);
      put<int16_t>(out, static_cast<int16_t>(
                            std::lrint(std::min(c * 32768.0f, 32767.0f))));
    } else {
      put<float>(out, s);
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding) {
  const auto bytes = encode_wav(clip, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace svc
