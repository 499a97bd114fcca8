#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "svc/eval.hpp"
#include "svc/toy_corpus.hpp"

using namespace svc;

namespace {

PitchTrack voiced_track(std::vector<float> f) {
  return {f, std::vector<uint8_t>(f.size(), 1)};
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("ncc hand cases") {
  CHECK(ncc(voiced_track({100, 200, 300}), voiced_track({100, 200, 300})).value ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ncc(voiced_track({1, 0}), voiced_track({0, 1})).value == 0.0);
  CHECK(std::abs(ncc(voiced_track({1, 2}), voiced_track({2, 1})).value - 0.8) < 1e-12);
}

TEST_CASE("ncc uses mutually voiced frames") {
  PitchTrack a{{100, 500, 200}, {1, 1, 1}};
  PitchTrack b{{100, 0, 200}, {1, 0, 1}};
  const auto r = ncc(a, b);
  CHECK(r.frames == 2);
  CHECK(r.value == doctest::Approx(1.0));
  const auto none = ncc(PitchTrack{{100, 0}, {1, 0}}, PitchTrack{{0, 100}, {0, 1}});
  CHECK(none.degenerate);
}

TEST_CASE("ncc invariances") {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    std::vector<float> a(20), b(20);
    for (int t = 0; t < 20; ++t) {
      a[t] = static_cast<float>(rng.uniform(80, 800));
      b[t] = static_cast<float>(rng.uniform(80, 800));
    }
    const double base = ncc(voiced_track(a), voiced_track(b)).value;
    auto scaled = b;
    for (auto& v : scaled) v *= 2.0f;  // exact in binary floating point
    CHECK(ncc(voiced_track(a), voiced_track(scaled)).value == doctest::Approx(base).epsilon(1e-12));
    CHECK(ncc(voiced_track(b), voiced_track(a)).value == doctest::Approx(base).epsilon(1e-15));
    CHECK(base <= 1.0);
    CHECK(base >= -1.0);
  }
}

TEST_CASE("ncc resamples the shorter track") {
  const auto r = ncc(voiced_track({100, 200}), voiced_track({100, 100, 200, 200}));
  CHECK(r.frames == 4);
  CHECK(r.value == doctest::Approx(1.0));
}

TEST_CASE("log-F0 variant") {
  const auto r = ncc(voiced_track({100, 200}), voiced_track({200, 100}), true);
  const double a = std::log(100.0), b = std::log(200.0);
  CHECK(r.value == doctest::Approx(2 * a * b / (a * a + b * b)).epsilon(1e-12));
}

TEST_CASE("cosine similarity") {
  const std::vector<double> x{1, 1}, y{1, 0}, z{0, 3};
  CHECK(std::abs(cos_sim(x, y) - 1.0 / std::sqrt(2.0)) < 1e-12);
  CHECK(cos_sim(y, z) == 0.0);
  CHECK(cos_sim(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> big{5, 5};
  CHECK(cos_sim(big, y) == doctest::Approx(cos_sim(x, y)).epsilon(1e-15));
  const std::vector<double> zero{0, 0};
  CHECK_THROWS_AS(cos_sim(zero, y), ValidationError);
  const std::vector<double> three{1, 2, 3};
  CHECK_THROWS_AS(cos_sim(three, y), ValidationError);
  CHECK(cos_sim(torch::tensor({1.0, 1.0}), torch::tensor({1.0, 0.0})) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("speaker embedder separates toy singers") {
  const auto clips = make_toy_corpus({2, 3, 1.0, 21});
  EmbedderConfig ec;
  ec.steps = 150;
  const SpeakerEmbedder emb(clips, ec);
  const auto e = emb.embed(clips[0].clip);
  CHECK(e.numel() == emb.dim());
  CHECK(e.norm().item<double>() == doctest::Approx(1.0).epsilon(1e-6));
  const auto centroids = singer_centroids(emb, clips);
  CHECK(centroids.size() == 2);
  const auto held_out = make_toy_corpus({2, 2, 1.0, 77});
  int right = 0;
  for (const auto& c : held_out) {
    const auto x = emb.embed(c.clip);
    const auto& other = c.singer == "singer0" ? centroids.at("singer1") : centroids.at("singer0");
    if (cos_sim(x, centroids.at(c.singer)) > cos_sim(x, other)) ++right;
  }
  CHECK(right == 4);
}

TEST_CASE("empty evaluation is an empty report") {
  auto c = test::tiny_config();
  const auto clips = make_toy_corpus({2, 2, 0.5, 3});
  Trainer t(c, build_dataset(clips, c));
  const auto model = ConversionModel::from_checkpoint(t.checkpoint());
  EmbedderConfig ec;
  ec.steps = 5;
  const SpeakerEmbedder emb(clips, ec);
  const auto report = evaluate_conversion({}, model, emb, singer_centroids(emb, clips));
  CHECK(report.pairs.empty());
  CHECK(report.evaluated == 0);

  EvalOptions self;
  self.self_only = true;
  const auto r = evaluate_conversion({clips[0]}, model, emb, singer_centroids(emb, clips), self);
  REQUIRE(r.pairs.size() == 1);
  CHECK(r.pairs[0].target_singer == clips[0].singer);
  const auto j = r.to_json();
  CHECK(j.contains("ncc"));
  CHECK(j["pairs"].size() == 1);
  CHECK(j["provenance"].contains("config"));
  CHECK(r.table().find("NCC") != std::string::npos);
  const auto all = evaluate_conversion({clips[0]}, model, emb, singer_centroids(emb, clips));
  CHECK(all.pairs.size() == 2);
  for (const auto& p : all.pairs) {
    if (!p.ncc.degenerate) {
      CHECK(p.ncc.value <= 1.0);
      CHECK(p.ncc.value >= -1.0);
    }
  }
}

}
