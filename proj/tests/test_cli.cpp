#include <sys/wait.h>

#include <fstream>
#include <iterator>

#include "doctest.h"
#include "helpers.hpp"
#include "svc/extract.hpp"

using namespace svc;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string output;
};

Result run(const std::string& args, const fs::path& dir) {
  const auto log = dir / "cli_output.txt";
  const std::string cmd = std::string(SVC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, text};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int count_with_suffix(const fs::path& dir, const std::string& suffix) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) ++n;
  }
  return n;
}

void write_tiny_config(const fs::path& path) {
  std::ofstream out(path);
  out << to_json(test::tiny_config()).dump(2);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("feature extraction: counts, idempotence, isolation") {
  const auto dir = test::scratch_dir("cli_extract");
  REQUIRE(run("make-toy-corpus --out " + (dir / "corpus").string() + " --singers 2 --clips 1",
              dir).code == 0);
  const auto manifest = dir / "corpus" / "manifest.jsonl";
  const auto feats = dir / "features";
  const std::string base = "extract-features --manifest " + manifest.string() + " --out " +
                           feats.string() + " --set features.codebook_size=8";
  auto r = run(base, dir);
  CHECK(r.code == 0);
  CHECK(count_with_suffix(feats, ".mel.svcf") + count_with_suffix(feats, ".f0.svcf") +
            count_with_suffix(feats, ".content.svcf") == 6);
  const auto index = Json::parse(slurp(feats / "index.json"));
  CHECK(index["entries"].size() == 2);

  const auto stamp = fs::last_write_time(feats / "index.json");
  r = run(base, dir);
  CHECK(r.code == 0);
  CHECK(r.output.find("written 0") != std::string::npos);
  CHECK(fs::last_write_time(feats / "index.json") == stamp);

  {
    std::ofstream bad(dir / "corpus" / "broken.wav", std::ios::binary);
    bad << "RIFF\x10\x00\x00\x00WAVEjunk";
  }
  {
    std::ofstream m(manifest, std::ios::app);
    m << R"({"audio": "broken.wav", "singer": "singer0", "domain": "singing"})" << '\n';
  }
  const auto feats2 = dir / "features2";
  r = run("extract-features --manifest " + manifest.string() + " --out " + feats2.string() +
              " --set features.codebook_size=8", dir);
  CHECK(r.code != 0);
  CHECK(r.output.find("broken.wav") != std::string::npos);
  CHECK(count_with_suffix(feats2, ".mel.svcf") == 2);
}

TEST_CASE("train, convert and evaluate end to end") {
  const auto dir = test::scratch_dir("cli_e2e");
  REQUIRE(run("make-toy-corpus --out " + (dir / "corpus").string() + " --clips 2 --seconds 0.5",
              dir).code == 0);
  const auto manifest = (dir / "corpus" / "manifest.jsonl").string();
  write_tiny_config(dir / "tiny.json");
  const std::string cfg = " --config " + (dir / "tiny.json").string();

  auto r = run("train --manifest " + manifest + " --out " + (dir / "run").string() + cfg +
                   " --set train.bogus=1", dir);
  CHECK(r.code == 1);
  CHECK(r.output.find("train.bogus") != std::string::npos);

  r = run("train --manifest " + manifest + " --out " + (dir / "run").string() + cfg +
              " --features " + (dir / "nowhere").string(), dir);
  CHECK(r.code == 1);
  CHECK(r.output.find("extract-features") != std::string::npos);

  r = run("train --manifest " + manifest + " --out " + (dir / "run").string() + cfg +
              " --seed 3 --set train.max_steps=2", dir);
  REQUIRE(r.code == 0);
  const auto ckpt = dir / "run" / "ckpt_2.svck";
  REQUIRE(fs::exists(ckpt));
  CHECK(Json::parse(slurp(dir / "run" / "run.json"))["config"]["seed"] == 3);

  const auto src = dir / "corpus" / "singer0_00.wav";
  const std::string conv = "convert --checkpoint " + ckpt.string() + " --input " + src.string() +
                           " --singer singer1 --out ";
  REQUIRE(run(conv + (dir / "a.wav").string(), dir).code == 0);
  REQUIRE(run(conv + (dir / "b.wav").string(), dir).code == 0);
  CHECK(slurp(dir / "a.wav") == slurp(dir / "b.wav"));
  const auto in = read_wav(src);
  const auto out = read_wav(dir / "a.wav");
  CHECK(out.size() == static_cast<size_t>(240 * frame_count(in.size())));
  CHECK(Json::parse(slurp(dir / "a.wav.json")).contains("config"));

  r = run("convert --checkpoint " + ckpt.string() + " --input " + src.string() +
              " --singer ghost --out " + (dir / "c.wav").string(), dir);
  CHECK(r.code == 1);
  CHECK(r.output.find("singer0, singer1") != std::string::npos);

  r = run("convert --checkpoint " + (dir / "missing.svck").string() + " --input " + src.string() +
              " --singer singer1 --out " + (dir / "d.wav").string(), dir);
  CHECK(r.code != 0);
  CHECK(r.output.find("missing.svck") != std::string::npos);

  r = run("evaluate --checkpoint " + ckpt.string() + " --manifest " + manifest + " --out " +
              (dir / "report").string() + " --self-only --embedder-steps 5", dir);
  CHECK(r.code == 0);
  const auto report = Json::parse(slurp(dir / "report" / "report.json"));
  CHECK(report["pairs"].size() == 4);
  CHECK(report["provenance"].contains("version"));
  CHECK(fs::exists(dir / "report" / "report.txt"));
}

TEST_CASE("usage errors are validation failures") {
  const auto dir = test::scratch_dir("cli_usage");
  CHECK(run("", dir).code == 1);
  CHECK(run("convert --singer x", dir).code == 1);
  CHECK(run("train --manifest m --out o --profile huge", dir).code == 1);
  CHECK(run("--version", dir).code == 0);
}

}
