#include "svc/toy_corpus.hpp"

#include <cmath>
#include <fstream>

#include "svc/rng.hpp"

namespace svc {
namespace {

struct Vowel {
  double f1, f2, f3;
};

constexpr Vowel kVowels[] = {
    {730, 1090, 2440}, {530, 1840, 2480}, {270, 2290, 3010}, {570, 840, 2410}, {300, 870, 2240}};

struct Voice {
  double tract_scale;
  double tilt;  // dB per octave
  double low_hz, high_hz;
};

Voice voice_of(int singer, int singers) {
  const double u = singers > 1 ? static_cast<double>(singer) / (singers - 1) : 0.0;
  return {1.0 + 0.25 * u, -9.0 + 4.0 * u, 170.0 + 60.0 * u, 300.0 + 80.0 * u};
}

double envelope(double hz, const Vowel& v, const Voice& voice) {
  const double f[] = {v.f1 * voice.tract_scale, v.f2 * voice.tract_scale,
                      v.f3 * voice.tract_scale};
  const double bw[] = {80.0, 110.0, 160.0};
  const double gain[] = {1.0, 0.6, 0.35};
  double e = 0.02;
  for (int i = 0; i < 3; ++i) {
    const double d = (hz - f[i]) / bw[i];
    e += gain[i] / (1.0 + d * d);
  }
  return e * std::pow(10.0, voice.tilt * std::log2(hz / 100.0) / 20.0);
}

AudioClip sing(const Voice& voice, Rng& rng, double seconds) {
  const int64_t n = static_cast<int64_t>(std::llround(seconds * kSampleRate));
  const int notes = 4;
  const int64_t note_len = n / notes;
  const int64_t gap = kSampleRate * 3 / 100;
  AudioClip clip;
  clip.samples.assign(n, 0.0f);
  std::vector<double> buf(n, 0.0);
  double phase = 0.0;
  const double vib_rate = 5.0 + rng.uniform();
  for (int k = 0; k < notes; ++k) {
    const double f_note = voice.low_hz * std::pow(voice.high_hz / voice.low_hz, rng.uniform());
    const Vowel& vowel = kVowels[rng.below(std::size(kVowels))];
    const int64_t begin = k * note_len;
    const int64_t end = k == notes - 1 ? n : begin + note_len;
    const int64_t voiced_end = end - gap;
    const int harmonics = static_cast<int>(11000.0 / (f_note * 1.03));
    std::vector<double> amp(harmonics + 1);
    for (int h = 1; h <= harmonics; ++h) amp[h] = envelope(h * f_note, vowel, voice) / std::sqrt(h);
    for (int64_t i = begin; i < voiced_end; ++i) {
      const double t = static_cast<double>(i) / kSampleRate;
      const double f0 = f_note * (1.0 + 0.012 * std::sin(2.0 * M_PI * vib_rate * t));
      phase += 2.0 * M_PI * f0 / kSampleRate;
      const double pos = static_cast<double>(i - begin);
      const double attack = std::min(1.0, pos / 480.0);
      const double release = std::min(1.0, static_cast<double>(voiced_end - i) / 480.0);
      double s = 0.0;
      for (int h = 1; h <= harmonics; ++h) s += amp[h] * std::sin(h * phase);
      buf[i] = s * attack * release;
    }
  }
  double peak = 0.0;
  for (double v : buf) peak = std::max(peak, std::abs(v));
  const double g = peak > 0 ? 0.5 / peak : 0.0;
  for (int64_t i = 0; i < n; ++i) {
    clip.samples[i] = static_cast<float>(buf[i] * g + 1e-3 * (rng.uniform() - 0.5));
  }
  return clip;
}

}  // namespace

std::vector<LabeledClip> make_toy_corpus(const ToyCorpusConfig& config) {
  if (config.singers < 1 || config.clips_per_singer < 1 || !(config.seconds > 0.05)) {
    throw ValidationError("toy corpus needs >= 1 singer, >= 1 clip and > 50 ms per clip");
  }
  std::vector<LabeledClip> out;
  for (int s = 0; s < config.singers; ++s) {
    const auto voice = voice_of(s, config.singers);
    for (int c = 0; c < config.clips_per_singer; ++c) {
      Rng rng(derive_seed({config.seed, static_cast<uint64_t>(s), static_cast<uint64_t>(c)}));
      char name[64];
      std::snprintf(name, sizeof name, "singer%d_%02d", s, c);
      out.push_back({name, "singer" + std::to_string(s), sing(voice, rng, config.seconds)});
    }
  }
  return out;
}

DatasetManifest write_toy_corpus(const ToyCorpusConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto clips = make_toy_corpus(config);
  DatasetManifest m;
  m.base_dir = dir;
  for (const auto& c : clips) {
    const auto file = c.id + ".wav";
    write_wav(dir / file, c.clip);
    m.entries.push_back({file, c.singer, Domain::kSinging});
  }
  std::ofstream out(dir / "manifest.jsonl", std::ios::trunc);
  out << format_manifest(m);
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.jsonl").string());
  return m;
}

}  // namespace svc
