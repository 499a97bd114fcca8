#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace svc {

enum class Domain { kSpeech, kSinging };

struct ManifestEntry {
  std::string audio;  // path as written in the manifest
  std::string singer;
  Domain domain = Domain::kSinging;
};

enum class Split { kTrain, kValidation, kTest };

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // relative audio paths resolve against this

  std::filesystem::path resolve(const ManifestEntry& e) const;
  // Sorted, de-duplicated singer ids; the position is the singer index.
  std::vector<std::string> singers() const;
  // Deterministic 90/5/5 assignment from a hash of (path, seed).
  static Split split_of(const std::string& audio_path, uint64_t seed);
  DatasetManifest subset(Split split, uint64_t seed) const;
};

// JSON Lines; keys "audio", "singer", "domain" ("speech" | "singing").
DatasetManifest parse_manifest(const std::string& text,
                               const std::filesystem::path& base_dir = {});
DatasetManifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);

std::string to_string(Domain d);

}  // namespace svc
