#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "svc/checkpoint.hpp"
#include "svc/model.hpp"

using namespace svc;

TEST_SUITE("model_core") {

TEST_CASE("CBHG keeps the frame count") {
  const auto c = test::tiny_config();
  torch::manual_seed(0);
  Cbhg enc(12, c.model);
  for (int64_t T : {1, 2, 7, 33}) {
    const auto y = enc->forward(torch::randn({3, T, 12}));
    CHECK(y.sizes() == std::vector<int64_t>{3, T, 2 * c.model.recurrent_width});
    CHECK(torch::isfinite(y).all().item<bool>());
  }
}

TEST_CASE("decoder renders one hop per frame in [-1, 1]") {
  auto c = test::tiny_config();
  c.model.content_dim = 6;
  c.model.reference_dim = 80;
  torch::manual_seed(0);
  SvcModel m(c.model);
  for (int64_t T : {1, 5}) {
    const auto enc = m->encode(torch::rand({2, T, 6}), torch::randn({2, T, 80}));
    CHECK(enc.frames.size(2) == c.model.encoder_dim());
    CHECK(enc.content_part().size(2) == c.model.content_encoder_dim());
    const auto f0 = torch::full({2, T}, 200.0f);
    const auto wave = m->decode(enc, torch::tensor({0, 1}), f0, torch::ones({2, T}));
    CHECK(wave.sizes() == std::vector<int64_t>{2, T * 240});
    CHECK(wave.abs().max().item<double>() <= 1.0);
  }
}

TEST_CASE("harmonic excitation matches a direct sine") {
  const double f = 150.0;
  const auto e = harmonic_excitation(torch::full({1, 3}, f), torch::ones({1, 3}), 240, 3);
  CHECK(e.sizes() == std::vector<int64_t>{1, 3, 720});
  for (int h = 1; h <= 3; ++h) {
    for (int n : {0, 1, 100, 719}) {
      const double expect = 0.1 * std::sin(2.0 * M_PI * h * f * (n + 1) / 24000.0);
      CHECK(e[0][h - 1][n].item<double>() == doctest::Approx(expect).epsilon(1e-4).scale(1.0));
    }
  }
  const auto silent = harmonic_excitation(torch::full({1, 2}, 3000.0f), torch::zeros({1, 2}), 240, 2);
  CHECK(silent.abs().max().item<double>() == 0.0);
  const auto capped = harmonic_excitation(torch::full({1, 2}, 3000.0f), torch::ones({1, 2}), 240, 4);
  CHECK(capped[0][3].abs().max().item<double>() == 0.0);  // 12 kHz is not below Nyquist
  CHECK(capped[0][2].abs().max().item<double>() > 0.0);
}

TEST_CASE("pitch features use log F0 on voiced frames only") {
  const auto p = pitch_features(torch::tensor({{100.0f, 0.0f}}), torch::tensor({{1.0f, 0.0f}}));
  CHECK(p[0][0][0].item<double>() == doctest::Approx(std::log(100.0)));
  CHECK(p[0][0][1].item<double>() == 1.0);
  CHECK(p[0][1][0].item<double>() == 0.0);
  CHECK(p[0][1][1].item<double>() == 0.0);
}

TEST_CASE("single-utterance helpers validate their inputs") {
  auto c = test::tiny_config();
  c.model.content_dim = 4;
  torch::manual_seed(1);
  SvcModel m(c.model);
  CHECK_THROWS_WITH_AS(encode_content(m, {torch::rand({5, 3})}), doctest::Contains("dimension 4"),
                       ValidationError);
  auto bad = torch::rand({5, 4});
  bad[2][1] = NAN;
  CHECK_THROWS_AS(encode_content(m, {bad}), ValidationError);
  CHECK_THROWS_AS(encode_reference(m, {torch::rand({0, 80}), FeatureKind::kMel}), ValidationError);

  torch::NoGradGuard no_grad;
  const auto a = encode_content(m, {torch::rand({5, 4})});
  const auto b = encode_reference(m, {torch::randn({5, 80}), FeatureKind::kMel});
  const EncoderOutput enc{torch::cat({a, b}, 1), a.size(1)};
  PitchTrack pitch{std::vector<float>(5, 210.0f), std::vector<uint8_t>(5, 1)};
  const auto w1 = decode(m, enc, 1, pitch);
  const auto w2 = decode(m, enc, 1, pitch);
  CHECK(w1.size() == 5 * 240);
  CHECK(w1 == w2);
  CHECK_THROWS_AS(decode(m, enc, 7, pitch), ValidationError);
  pitch.f0_hz.pop_back();
  pitch.voiced.pop_back();
  CHECK_THROWS_AS(decode(m, enc, 0, pitch), ValidationError);
}

TEST_CASE("config validation names the offending key") {
  auto c = make_profile("desk");
  c.model.upsample_factors = {8, 6, 4};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("model.upsample_factors"), ValidationError);
  CHECK_THROWS_WITH_AS(merge_json(make_profile("desk"), Json::parse(R"({"train": {"bogus": 1}})")),
                       doctest::Contains("train.bogus"), ValidationError);
  CHECK_THROWS_WITH_AS(merge_json(make_profile("desk"), Json::parse(R"({"cpc": {"K": "x"}})")),
                       doctest::Contains("cpc.K"), ValidationError);
  const auto o = apply_override(make_profile("desk"), "cpc.n_neg=3");
  CHECK(o.cpc.n_neg == 3);
  CHECK(apply_override(o, "features.reference=pseudo_ppg").features.reference == "pseudo_ppg");
  CHECK_THROWS_AS(make_profile("huge"), ValidationError);
  const auto paper = make_profile("paper");
  CHECK(paper.train.batch_size == 16);
  CHECK(paper.train.max_steps == 400000);
  CHECK(run_config_from_json(to_json(paper)).model.recurrent_width == paper.model.recurrent_width);
}

TEST_CASE("checkpoint containers round-trip byte for byte") {
  Checkpoint a;
  a.meta["x"] = 1;
  a.blobs["b.w"] = torch::randn({3, 4});
  a.blobs["a.bias"] = torch::randn({2});
  const auto bytes = a.encode();
  const auto b = Checkpoint::decode(bytes);
  CHECK(b.encode() == bytes);
  CHECK(torch::equal(b.blob("b.w"), a.blobs["b.w"]));
  CHECK_THROWS_AS(b.blob("missing"), ValidationError);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK_THROWS_WITH_AS(Checkpoint::decode(cut), doctest::Contains("truncated"), ValidationError);

  auto c = test::tiny_config();
  torch::manual_seed(3);
  SvcModel m1(c.model);
  torch::manual_seed(4);
  SvcModel m2(c.model);
  Checkpoint k;
  store_module(k, "model", *m1);
  restore_module(k, "model", *m2);
  for (const auto& p : m1->named_parameters()) CHECK(torch::equal(p.value(), m2->named_parameters()[p.key()]));
  c.model.recurrent_width = 4;
  SvcModel m3(c.model);
  CHECK_THROWS_AS(restore_module(k, "model", *m3), ValidationError);
}

}
