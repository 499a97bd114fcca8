#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svc/audio.hpp"
#include "svc/config.hpp"
#include "svc/eval.hpp"
#include "svc/extract.hpp"
#include "svc/inference.hpp"
#include "svc/manifest.hpp"
#include "svc/toy_corpus.hpp"
#include "svc/trainer.hpp"

namespace fs = std::filesystem;
using namespace svc;

namespace {

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2 };

struct ConfigFlags {
  std::string config_path;
  std::string profile = "desk";
  std::optional<uint64_t> seed;
  std::vector<std::string> overrides;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration layered over the profile");
    app->add_option("--profile", profile, "Base profile")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--seed", seed, "Global seed");
    app->add_option("--set", overrides, "Override, e.g. train.max_steps=200")->take_all();
  }

  RunConfig resolve() const {
    RunConfig c = load_run_config(config_path, profile);
    if (seed) c.seed = *seed;
    for (const auto& o : overrides) c = apply_override(std::move(c), o);
    c.validate();
    return c;
  }
};

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<LabeledClip> load_clips(const DatasetManifest& m) {
  std::vector<LabeledClip> clips;
  for (const auto& e : m.entries) {
    const auto path = m.resolve(e);
    clips.push_back({path.string(), e.singer, read_wav(path)});
  }
  return clips;
}

int cmd_make_toy_corpus(const fs::path& out, const ToyCorpusConfig& config) {
  const auto m = write_toy_corpus(config, out);
  std::cout << "wrote " << m.entries.size() << " clips and " << (out / "manifest.jsonl").string()
            << '\n';
  return kOk;
}

int cmd_extract(const fs::path& manifest_path, const fs::path& out, const ConfigFlags& flags) {
  const auto config = flags.resolve();
  const auto manifest = read_manifest(manifest_path);
  const auto report = extract_features(manifest, out, config);
  std::cout << "written " << report.files_written << ", up to date " << report.files_skipped
            << ", failed " << report.errors.size() << '\n';
  for (const auto& e : report.errors) std::cerr << "error: " << e << '\n';
  return report.errors.empty() ? kOk : kRuntime;
}

int cmd_train(const fs::path& manifest_path, const fs::path& out, const std::string& features,
              const std::string& resume, const ConfigFlags& flags) {
  const auto config = flags.resolve();
  const auto manifest = read_manifest(manifest_path);
  fs::create_directories(out);
  write_json(out / "run.json", {{"config", to_json(config)},
                                {"version", version_string()},
                                {"manifest", fs::absolute(manifest_path).string()}});
  std::optional<fs::path> fdir, rpath;
  if (!features.empty()) fdir = features;
  if (!resume.empty()) rpath = resume;
  const auto ckpt = fit(manifest, config, out, fdir, rpath);
  std::cout << ckpt.string() << '\n';
  return kOk;
}

int cmd_convert(const fs::path& checkpoint, const fs::path& input, const std::string& singer,
                const fs::path& out, double f0_ratio, bool float_output) {
  const auto model = ConversionModel::load(checkpoint);
  const auto source = read_wav(input);
  ConversionOptions options;
  options.f0_ratio = f0_ratio;
  options.source_path = input;
  const auto result = model.convert(source, singer, options);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_wav(out, result, float_output ? WavEncoding::kFloat32 : WavEncoding::kPcm16);
  write_json(out.string() + ".json", {{"config", to_json(model.config())},
                                      {"version", version_string()},
                                      {"checkpoint", checkpoint.string()},
                                      {"source", input.string()},
                                      {"singer", singer},
                                      {"f0_ratio", f0_ratio},
                                      {"samples", result.samples.size()}});
  return kOk;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& manifest_path, const fs::path& out,
                 bool self_only, bool log_f0, int64_t embedder_steps) {
  const auto model = ConversionModel::load(checkpoint);
  const auto manifest = read_manifest(manifest_path);
  const bool split = model.config().train.split;
  const uint64_t seed = model.config().seed;
  const auto reference = load_clips(split ? manifest.subset(Split::kTrain, seed) : manifest);
  const auto test = load_clips(split ? manifest.subset(Split::kTest, seed) : manifest);

  EmbedderConfig ec;
  ec.steps = embedder_steps;
  ec.seed = seed;
  const SpeakerEmbedder embedder(reference, ec);
  const auto centroids = singer_centroids(embedder, reference);
  EvalOptions options;
  options.self_only = self_only;
  options.log_f0 = log_f0;
  auto report = evaluate_conversion(test, model, embedder, centroids, options);
  report.provenance["checkpoint"] = checkpoint.string();
  report.provenance["manifest"] = manifest_path.string();

  fs::create_directories(out);
  write_json(out / "report.json", report.to_json());
  std::ofstream table(out / "report.txt", std::ios::trunc);
  table << report.table();
  std::cout << report.table();
  return report.failed == 0 ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singing voice conversion toolkit"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  fs::path out, manifest, checkpoint, input;
  std::string features, resume, singer;
  double f0_ratio = 1.0;
  bool float_output = false, self_only = false, log_f0 = false;
  int64_t embedder_steps = 300;
  ToyCorpusConfig toy;
  ConfigFlags flags;

  auto* toy_cmd = app.add_subcommand("make-toy-corpus", "Write a synthetic multi-singer corpus");
  toy_cmd->add_option("--out", out, "Output directory")->required();
  toy_cmd->add_option("--singers", toy.singers, "Number of singers");
  toy_cmd->add_option("--clips", toy.clips_per_singer, "Clips per singer");
  toy_cmd->add_option("--seconds", toy.seconds, "Clip duration");
  toy_cmd->add_option("--seed", toy.seed, "Generator seed");

  auto* extract_cmd = app.add_subcommand("extract-features", "Write mel, F0 and content features");
  extract_cmd->add_option("--manifest", manifest, "JSONL manifest")->required();
  extract_cmd->add_option("--out", out, "Feature directory")->required();
  flags.add_to(extract_cmd);

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--manifest", manifest, "JSONL manifest")->required();
  train_cmd->add_option("--out", out, "Run directory")->required();
  train_cmd->add_option("--features", features, "Directory written by extract-features");
  train_cmd->add_option("--checkpoint", resume, "Resume from this checkpoint");
  flags.add_to(train_cmd);

  auto* convert_cmd = app.add_subcommand("convert", "Convert a recording to a target singer");
  convert_cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  convert_cmd->add_option("--input", input, "Source WAV (24 kHz mono)")->required();
  convert_cmd->add_option("--singer", singer, "Target singer id")->required();
  convert_cmd->add_option("--out", out, "Output WAV")->required();
  convert_cmd->add_option("--f0-ratio", f0_ratio, "Pitch multiplier");
  convert_cmd->add_flag("--float", float_output, "Write 32-bit float samples");

  auto* eval_cmd = app.add_subcommand("evaluate", "NCC and COS-SIM report");
  eval_cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  eval_cmd->add_option("--manifest", manifest, "JSONL manifest")->required();
  eval_cmd->add_option("--out", out, "Report directory")->required();
  eval_cmd->add_flag("--self-only", self_only, "Only convert clips to their own singer");
  eval_cmd->add_flag("--log-f0", log_f0, "Correlate log F0 instead of Hz");
  eval_cmd->add_option("--embedder-steps", embedder_steps, "Speaker embedder training steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*toy_cmd) return cmd_make_toy_corpus(out, toy);
    if (*extract_cmd) return cmd_extract(manifest, out, flags);
    if (*train_cmd) return cmd_train(manifest, out, features, resume, flags);
    if (*convert_cmd) return cmd_convert(checkpoint, input, singer, out, f0_ratio, float_output);
    if (*eval_cmd) return cmd_evaluate(checkpoint, manifest, out, self_only, log_f0, embedder_steps);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
