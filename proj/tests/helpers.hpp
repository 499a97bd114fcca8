#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "svc/audio.hpp"
#include "svc/config.hpp"
#include "svc/rng.hpp"

namespace svc::test {

inline AudioClip sine(double hz, double seconds, double amplitude = 0.5) {
  AudioClip c;
  const auto n = static_cast<size_t>(std::llround(seconds * kSampleRate));
  c.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    c.samples[i] = static_cast<float>(amplitude * std::sin(2.0 * M_PI * hz * i / kSampleRate));
  }
  return c;
}

inline AudioClip noise(double seconds, uint64_t seed, double amplitude = 0.3) {
  Rng rng(seed);
  AudioClip c;
  c.samples.resize(static_cast<size_t>(seconds * kSampleRate));
  for (auto& s : c.samples) s = static_cast<float>(amplitude * (2.0 * rng.uniform() - 1.0));
  return c;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("svc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// A very small network so that tests train in well under a second per step.
inline RunConfig tiny_config() {
  RunConfig c = make_profile("desk");
  c.seed = 5;
  c.features.codebook_size = 8;
  auto& m = c.model;
  m.bank_size = 4;
  m.bank_channels = 8;
  m.projection_channels = 16;
  m.highway_layers = 1;
  m.recurrent_width = 8;
  m.singer_dim = 4;
  m.decoder_channels = 16;
  m.harmonics = 2;
  m.head_channels = 8;
  m.context_width = 8;
  m.mpd_periods = {2, 3};
  m.mpd_channels = {4, 4};
  m.msd_scales = 1;
  m.msd_channels = {4, 8};
  c.cpc.K = 3;
  c.cpc.n_neg = 4;
  c.train.batch_size = 2;
  c.train.segment_frames = 20;
  c.train.checkpoint_interval = 1000;
  c.train.split = false;
  return c;
}

}  // namespace svc::test
