#include "svc/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "svc/audio.hpp"
#include "svc/rng.hpp"

namespace svc {

std::string to_string(Domain d) {
  return d == Domain::kSpeech ? "speech" : "singing";
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& e) const {
  std::filesystem::path p(e.audio);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

std::vector<std::string> DatasetManifest::singers() const {
  std::set<std::string> ids;
  for (const auto& e : entries) ids.insert(e.singer);
  return {ids.begin(), ids.end()};
}

Split DatasetManifest::split_of(const std::string& audio_path, uint64_t seed) {
  const uint64_t h = mix64(fnv1a64(audio_path) ^ mix64(seed));
  const auto bucket = h % 100;
  if (bucket < 90) return Split::kTrain;
  return bucket < 95 ? Split::kValidation : Split::kTest;
}

DatasetManifest DatasetManifest::subset(Split split, uint64_t seed) const {
  DatasetManifest out;
  out.base_dir = base_dir;
  for (const auto& e : entries) {
    if (split_of(e.audio, seed) == split) out.entries.push_back(e);
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& text,
                               const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::set<std::string> paths;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw ValidationError(where + ": not valid JSON");
    }
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    for (const char* key : {"audio", "singer", "domain"}) {
      if (!j.contains(key) || !j[key].is_string()) {
        throw ValidationError(where + ": missing string key '" + key + "'");
      }
    }
    ManifestEntry e;
    e.audio = j["audio"].get<std::string>();
    e.singer = j["singer"].get<std::string>();
    const auto domain = j["domain"].get<std::string>();
    if (domain == "speech") {
      e.domain = Domain::kSpeech;
    } else if (domain == "singing") {
      e.domain = Domain::kSinging;
    } else {
      throw ValidationError(where + ": domain must be 'speech' or 'singing'");
    }
    if (e.singer.empty()) throw ValidationError(where + ": empty singer id");
    if (!paths.insert(e.audio).second) {
      throw ValidationError(where + ": duplicate audio path " + e.audio);
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    nlohmann::json j;
    j["audio"] = e.audio;
    j["singer"] = e.singer;
    j["domain"] = to_string(e.domain);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace svc
