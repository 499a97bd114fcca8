#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "svc/config.hpp"
#include "svc/features.hpp"
#include "svc/manifest.hpp"

namespace svc {

// File-name stem for an entry's feature files, derived from its audio path.
std::string feature_key(const std::string& audio_path);

struct ExtractionReport {
  int files_written = 0;
  int files_skipped = 0;
  std::vector<std::string> errors;  // one per failed entry
};

// Writes <key>.mel.svcf, <key>.f0.svcf and <key>.content.svcf per entry, the
// shared codebook.svcf, and index.json. Entries whose audio and settings are
// unchanged since the last run are skipped. A failing entry does not stop
// the others.
ExtractionReport extract_features(const DatasetManifest& manifest,
                                  const std::filesystem::path& out_dir,
                                  const RunConfig& config);

struct ExtractedEntry {
  std::filesystem::path mel, f0, content;
};

// Looks up an entry in <features_dir>/index.json.
ExtractedEntry find_extracted(const std::filesystem::path& features_dir,
                              const std::string& audio_path);
Codebook load_extracted_codebook(const std::filesystem::path& features_dir);

}  // namespace svc
