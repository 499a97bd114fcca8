#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "svc/extract.hpp"
#include "svc/inference.hpp"
#include "svc/toy_corpus.hpp"
#include "svc/trainer.hpp"

using namespace svc;

namespace {

const std::vector<LabeledClip>& small_corpus() {
  static const auto clips = make_toy_corpus({2, 2, 0.5, 3});
  return clips;
}

Dataset small_dataset(const RunConfig& c) { return build_dataset(small_corpus(), c); }

std::vector<torch::Tensor> snapshot(const torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.detach().clone());
  return out;
}

bool same(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!torch::equal(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("dataset assembly") {
  const auto c = test::tiny_config();
  const auto d = small_dataset(c);
  CHECK(d.examples.size() == 4);
  CHECK(d.singers == std::vector<std::string>{"singer0", "singer1"});
  CHECK(d.codebook.size() == 8);
  CHECK(d.examples[0].content.size(1) == 8);
  CHECK(d.examples[0].reference.size(1) == 80);
  CHECK(d.examples[0].num_frames() == 51);
  CHECK(d.pitch_stats.stddev > 0);
  CHECK_THROWS_AS(build_dataset({}, c), ValidationError);
  CHECK_THROWS_WITH_AS(load_dataset(DatasetManifest{}, c), doctest::Contains("empty"),
                       ValidationError);
}

TEST_CASE("batches are aligned crops determined by the step") {
  const auto c = test::tiny_config();
  const auto d = small_dataset(c);
  const auto a = make_batch(d, c, 3);
  const auto b = make_batch(d, c, 3);
  CHECK(a.content.sizes() == std::vector<int64_t>{2, 20, 8});
  CHECK(a.wave.sizes() == std::vector<int64_t>{2, 20 * 240});
  CHECK(torch::equal(a.wave, b.wave));
  CHECK(torch::equal(a.content, b.content));
  const auto other = make_batch(d, c, 4);
  CHECK_FALSE(torch::equal(a.wave, other.wave));
  // Pitch targets vanish on unvoiced frames.
  CHECK((a.pitch_target * (1 - a.voiced)).abs().max().item<double>() == 0.0);
}

TEST_CASE("reported total is the sum of its parts") {
  const auto c = test::tiny_config();
  Trainer t(c, small_dataset(c));
  for (int i = 0; i < 3; ++i) {
    const auto r = t.step();
    CHECK(r.L_G == (r.L_hifi + r.L_confusion) + r.L_CPC);
    CHECK(r.L_hifi == c.train.mel_weight * r.L_mel + c.train.fm_weight * r.L_fm + r.L_adv_g);
    CHECK(r.L_confusion == -c.confusion.lambda * r.L_s - c.confusion.omega * r.L_f);
    CHECK(r.L_CPC >= 0.0);
    CHECK(r.L_CPC_sum >= r.L_CPC);
    CHECK(r.step == i);
  }
  CHECK(t.current_step() == 3);
}

TEST_CASE("with all regularizer weights zero the total is the vocoder loss") {
  auto c = test::tiny_config();
  c.confusion.lambda = c.confusion.omega = c.cpc.beta = 0.0;
  Trainer t(c, small_dataset(c));
  for (int i = 0; i < 2; ++i) {
    const auto r = t.step();
    CHECK(r.L_G == r.L_hifi);
  }
}

TEST_CASE("same seed, same trace") {
  const auto c = test::tiny_config();
  Trainer a(c, small_dataset(c));
  Trainer b(c, small_dataset(c));
  for (int i = 0; i < 3; ++i) CHECK(a.step().to_json() == b.step().to_json());
}

TEST_CASE("discriminator and generator updates touch disjoint parameters") {
  const auto c = test::tiny_config();
  Trainer t(c, small_dataset(c));
  const auto batch = make_batch(t.data(), c, 0);
  const auto fwd = t.forward_generator(batch);
  const auto gen0 = snapshot(*t.model), heads0 = snapshot(*t.heads), cpc0 = snapshot(*t.cpc);
  const auto disc0 = snapshot(*t.discriminators);
  t.discriminator_update(batch, fwd.wave);
  CHECK(same(gen0, snapshot(*t.model)));
  CHECK(same(heads0, snapshot(*t.heads)));
  CHECK(same(cpc0, snapshot(*t.cpc)));
  const auto disc1 = snapshot(*t.discriminators);
  CHECK_FALSE(same(disc0, disc1));
  t.generator_update(batch, fwd);
  CHECK(same(disc1, snapshot(*t.discriminators)));
  CHECK_FALSE(same(gen0, snapshot(*t.model)));
  CHECK_FALSE(same(heads0, snapshot(*t.heads)));
  CHECK_FALSE(same(cpc0, snapshot(*t.cpc)));
}

TEST_CASE("non-finite inputs abort with the offending term") {
  const auto c = test::tiny_config();
  Trainer t(c, small_dataset(c));
  auto batch = make_batch(t.data(), c, 0);
  batch.wave[0][10] = NAN;
  CHECK_THROWS_WITH_AS(t.train_step(batch), doctest::Contains("L_adv_d"), NonFiniteLoss);
  auto b2 = make_batch(t.data(), c, 0);
  const auto fwd = t.forward_generator(b2);
  b2.pitch_target[0][0] = NAN;
  b2.voiced[0][0] = 1.0f;
  CHECK_THROWS_WITH_AS(t.generator_update(b2, fwd), doctest::Contains("L_f"), NonFiniteLoss);
}

TEST_CASE("checkpoints round-trip and resume exactly") {
  const auto c = test::tiny_config();
  Trainer full(c, small_dataset(c));
  for (int i = 0; i < 4; ++i) full.step();

  Trainer first(c, small_dataset(c));
  for (int i = 0; i < 2; ++i) first.step();
  const auto bytes = first.checkpoint().encode();
  const auto ckpt = Checkpoint::decode(bytes);
  CHECK(ckpt.encode() == bytes);
  Trainer second(ckpt, small_dataset(c));
  CHECK(second.current_step() == 2);
  CHECK(second.checkpoint().encode() == bytes);
  for (int i = 0; i < 2; ++i) second.step();
  CHECK(full.checkpoint().encode() == second.checkpoint().encode());
}

TEST_CASE("learning rate decays stepwise") {
  auto c = test::tiny_config();
  c.train.lr_decay_every = 2;
  c.train.lr_decay = 0.5;
  Trainer t(c, small_dataset(c));
  CHECK(t.learning_rate() == c.train.learning_rate);
  t.step();
  t.step();
  CHECK(t.learning_rate() == c.train.learning_rate * 0.5);
}

TEST_CASE("fit writes checkpoints, a loss log and supports features on disk") {
  auto c = test::tiny_config();
  c.train.max_steps = 3;
  c.train.checkpoint_interval = 2;
  const auto corpus = test::scratch_dir("fit_corpus");
  const auto manifest = write_toy_corpus({2, 2, 0.5, 3}, corpus);
  const auto out = test::scratch_dir("fit_out");
  const auto missing = corpus / "no_features";
  CHECK_THROWS_WITH_AS(fit(manifest, c, out, missing), doctest::Contains("extract-features"),
                       ValidationError);

  const auto features = corpus / "features";
  const auto rep = extract_features(manifest, features, c);
  CHECK(rep.errors.empty());
  const auto last = fit(manifest, c, out, features);
  CHECK(last.filename() == "ckpt_3.svck");
  CHECK(std::filesystem::exists(out / "ckpt_2.svck"));
  CHECK(std::filesystem::exists(out / "latest.svck"));
  std::ifstream log(out / "loss_log.jsonl");
  int lines = 0;
  for (std::string line; std::getline(log, line);) {
    CHECK(Json::parse(line).contains("L_G"));
    ++lines;
  }
  CHECK(lines == 3);

  // Resuming from step 2 reproduces the uninterrupted step-3 weights.
  const auto resumed_dir = test::scratch_dir("fit_resume");
  const auto resumed = fit(manifest, c, resumed_dir, features, out / "ckpt_2.svck");
  CHECK(Checkpoint::load(resumed).encode() == Checkpoint::load(last).encode());

  const auto model = ConversionModel::load(last);
  const auto src = make_toy_corpus({2, 1, 0.3, 9})[0].clip;
  const auto y = model.convert(src, "singer1");
  CHECK(y.size() == static_cast<size_t>(240 * frame_count(src.size())));
  CHECK_THROWS_WITH_AS(model.convert(src, "nobody"), doctest::Contains("singer0, singer1"),
                       ValidationError);
}

TEST_CASE("feature-file and in-memory pipelines agree") {
  auto c = test::tiny_config();
  const auto corpus = test::scratch_dir("agree_corpus");
  const auto manifest = write_toy_corpus({2, 2, 0.5, 3}, corpus);
  extract_features(manifest, corpus / "f", c);
  const auto disk = load_dataset(manifest, c, corpus / "f");
  const auto mem = load_dataset(manifest, c);
  REQUIRE(disk.examples.size() == mem.examples.size());
  CHECK(torch::equal(disk.codebook.centers, mem.codebook.centers));
  for (size_t i = 0; i < disk.examples.size(); ++i) {
    CHECK(torch::equal(disk.examples[i].content, mem.examples[i].content));
    CHECK(torch::equal(disk.examples[i].f0, mem.examples[i].f0));
    CHECK(torch::equal(disk.examples[i].wave, mem.examples[i].wave));
  }
}

}
