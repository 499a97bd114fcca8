#include "svc/extract.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>

#include "svc/rng.hpp"

namespace svc {
namespace {

constexpr uint64_t kCodebookTag = 0xc0de;  // same stream as in-memory dataset building
constexpr const char* kIndexName = "index.json";
constexpr const char* kCodebookName = "codebook.svcf";

std::string hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json read_index(const std::filesystem::path& dir) {
  const auto path = dir / kIndexName;
  if (!std::filesystem::exists(path)) return Json::object();
  std::ifstream in(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error&) {
    return Json::object();
  }
}

std::string missing_hint(const std::filesystem::path& dir) {
  return "; run `svc extract-features --manifest <manifest> --out " + dir.string() + "` first";
}

struct Pending {
  const ManifestEntry* entry;
  std::string path;
  std::string audio_hash;
  AudioClip clip;
  std::optional<MelSpectrogram> mel;
};

}  // namespace

std::string feature_key(const std::string& audio_path) {
  const auto stem = std::filesystem::path(audio_path).stem().string();
  return stem + "_" + hex(fnv1a64(audio_path)).substr(0, 8);
}

ExtractionReport extract_features(const DatasetManifest& manifest,
                                  const std::filesystem::path& out_dir,
                                  const RunConfig& config) {
  if (manifest.entries.empty()) throw ValidationError("manifest is empty");
  std::filesystem::create_directories(out_dir);
  const Json previous = read_index(out_dir);
  ExtractionReport report;

  std::vector<Pending> ok;
  for (const auto& e : manifest.entries) {
    const auto path = manifest.resolve(e).string();
    try {
      const auto bytes = read_bytes(path);
      Pending p{&e, path, hex(fnv1a64(std::string_view(bytes.data(), bytes.size()))),
                decode_wav(bytes), std::nullopt};
      validate_clip(p.clip);
      ok.push_back(std::move(p));
    } catch (const std::exception& ex) {
      report.errors.push_back(path + ": " + ex.what());
    }
  }

  Json fjson;
  {
    Json all = to_json(config);
    fjson = all.at("features");
  }
  const std::string settings = fjson.dump() + "|" + std::to_string(config.seed);
  std::string cb_source = settings;
  for (const auto& p : ok) cb_source += "|" + p.path + ":" + p.audio_hash;
  const auto cb_hash = hex(fnv1a64(cb_source));

  F0Config f0c;
  f0c.voicing_threshold = config.features.voicing_threshold;
  f0c.rms_gate = config.features.rms_gate;

  Codebook codebook;
  const auto cb_path = out_dir / kCodebookName;
  const bool cb_fresh = previous.contains("codebook") &&
                        previous["codebook"].value("hash", "") == cb_hash &&
                        std::filesystem::exists(cb_path);
  if (!ok.empty()) {
    if (cb_fresh) {
      codebook = {read_feature_file(cb_path).frames,
                  previous["codebook"].at("temperature").get<double>()};
      ++report.files_skipped;
    } else {
      std::vector<MelSpectrogram> mels;
      for (auto& p : ok) {
        p.mel = extract_mel(p.clip);
        mels.push_back(*p.mel);
      }
      try {
        codebook = fit_codebook(mels, config.features.codebook_size,
                                derive_seed({config.seed, kCodebookTag}),
                                config.features.codebook_temperature);
      } catch (const ValidationError& ex) {
        report.errors.push_back(std::string("codebook: ") + ex.what());
        ok.clear();
      }
      if (!ok.empty()) {
        write_feature_file(cb_path, codebook.centers, FeatureKind::kMel);
        ++report.files_written;
      }
    }
  }

  Json index = Json::object();
  index["format"] = "svc-features";
  index["version"] = version_string();
  index["config"] = to_json(config);
  if (!ok.empty()) {
    index["codebook"] = {{"file", kCodebookName},
                         {"temperature", codebook.temperature},
                         {"hash", cb_hash}};
  }
  Json entries = Json::object();
  const Json prev_entries = previous.value("entries", Json::object());
  for (auto& p : ok) {
    const auto key = feature_key(p.path);
    const auto entry_hash = hex(fnv1a64(p.audio_hash + "|" + cb_hash));
    const Json rec = {{"singer", p.entry->singer},
                      {"domain", to_string(p.entry->domain)},
                      {"hash", entry_hash},
                      {"mel", key + ".mel.svcf"},
                      {"f0", key + ".f0.svcf"},
                      {"content", key + ".content.svcf"}};
    const bool fresh = prev_entries.contains(p.path) && prev_entries[p.path] == rec &&
                       std::filesystem::exists(out_dir / (key + ".mel.svcf")) &&
                       std::filesystem::exists(out_dir / (key + ".f0.svcf")) &&
                       std::filesystem::exists(out_dir / (key + ".content.svcf"));
    if (fresh) {
      report.files_skipped += 3;
    } else {
      try {
        if (!p.mel) p.mel = extract_mel(p.clip);
        write_feature_file(out_dir / (key + ".mel.svcf"), p.mel->frames, FeatureKind::kMel);
        write_feature_file(out_dir / (key + ".f0.svcf"), pitch_to_tensor(extract_f0(p.clip, f0c)),
                           FeatureKind::kPitch);
        const auto content = pseudo_content(*p.mel, codebook);
        write_feature_file(out_dir / (key + ".content.svcf"), content.frames, content.kind);
        report.files_written += 3;
      } catch (const std::exception& ex) {
        report.errors.push_back(p.path + ": " + ex.what());
        continue;
      }
    }
    entries[p.path] = rec;
  }
  index["entries"] = entries;
  index["errors"] = report.errors;

  const std::string text = index.dump(2) + "\n";
  bool same = false;
  if (std::filesystem::exists(out_dir / kIndexName)) {
    const auto old = read_bytes(out_dir / kIndexName);
    same = std::string(old.begin(), old.end()) == text;
  }
  if (!same) {
    std::ofstream out(out_dir / kIndexName, std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + (out_dir / kIndexName).string());
  }
  return report;
}

ExtractedEntry find_extracted(const std::filesystem::path& features_dir,
                              const std::string& audio_path) {
  const auto index = read_index(features_dir);
  if (!index.contains("entries")) {
    throw ValidationError("no feature index in " + features_dir.string() +
                          missing_hint(features_dir));
  }
  const auto& entries = index["entries"];
  if (!entries.contains(audio_path)) {
    throw ValidationError("no extracted features for " + audio_path + missing_hint(features_dir));
  }
  const auto& rec = entries[audio_path];
  ExtractedEntry out{features_dir / rec.at("mel").get<std::string>(),
                     features_dir / rec.at("f0").get<std::string>(),
                     features_dir / rec.at("content").get<std::string>()};
  for (const auto& p : {out.mel, out.f0, out.content}) {
    if (!std::filesystem::exists(p)) {
      throw ValidationError("missing feature file " + p.string() + missing_hint(features_dir));
    }
  }
  return out;
}

Codebook load_extracted_codebook(const std::filesystem::path& features_dir) {
  const auto index = read_index(features_dir);
  if (!index.contains("codebook")) {
    throw ValidationError("no codebook in " + features_dir.string() + missing_hint(features_dir));
  }
  const auto& cb = index["codebook"];
  return {read_feature_file(features_dir / cb.at("file").get<std::string>()).frames,
          cb.at("temperature").get<double>()};
}

}  // namespace svc
