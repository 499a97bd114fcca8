#pragma once

#include <filesystem>
#include <vector>

#include "svc/manifest.hpp"
#include "svc/trainer.hpp"

namespace svc {

// Synthetic singers: additive harmonic voices whose spectral envelope is a
// sum of formant resonances. Singers differ in vocal-tract scale, spectral
// tilt and pitch range; clips are short melodies of sung vowels with vibrato.
struct ToyCorpusConfig {
  int singers = 2;
  int clips_per_singer = 5;
  double seconds = 1.0;
  uint64_t seed = 7;
};

std::vector<LabeledClip> make_toy_corpus(const ToyCorpusConfig& config);

// Writes <dir>/<singer>_<n>.wav and <dir>/manifest.jsonl (paths relative to
// the manifest). Returns the parsed manifest.
DatasetManifest write_toy_corpus(const ToyCorpusConfig& config, const std::filesystem::path& dir);

}  // namespace svc
