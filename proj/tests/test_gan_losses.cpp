#include "doctest.h"
#include "helpers.hpp"
#include "svc/features.hpp"
#include "svc/gan_losses.hpp"

using namespace svc;

namespace {

torch::Tensor wave_of(const AudioClip& c) {
  return torch::tensor(c.samples).unsqueeze(0);
}

}  // namespace

TEST_SUITE("gan_losses") {

TEST_CASE("mel loss basics") {
  const auto tone = wave_of(test::sine(300, 0.2));
  const auto other = wave_of(test::sine(500, 0.2));
  const auto silence = torch::zeros_like(tone);
  CHECK(mel_loss(tone, tone).item<double>() == 0.0);
  CHECK(mel_loss(tone, silence).item<double>() > 0.0);
  CHECK(mel_loss(tone, other).item<double>() == mel_loss(other, tone).item<double>());
  CHECK_THROWS_AS(mel_loss(tone, tone.narrow(1, 0, 100)), ValidationError);
  // Same frontend as feature extraction.
  const auto a = extract_mel(test::sine(300, 0.2)).frames;
  const auto b = extract_mel(test::sine(500, 0.2)).frames;
  CHECK(mel_loss(tone, other).item<double>() ==
        doctest::Approx((a - b).abs().mean().item<double>()).epsilon(1e-6));
}

TEST_CASE("feature matching arithmetic") {
  DiscriminatorOutput real{torch::ones({1, 2}), {torch::ones({1, 4}), torch::ones({1, 2})}};
  DiscriminatorOutput fake = real;
  CHECK(feature_matching_loss({real}, {fake}).item<double>() == 0.0);
  fake.features[0] = torch::full({1, 4}, 2.0);
  // One of two layers contributes |2 - 1| = 1; mean over layers.
  CHECK(feature_matching_loss({real}, {fake}).item<double>() == doctest::Approx(0.5));
  DiscriminatorOutput short_fake{torch::ones({1, 2}), {torch::ones({1, 4})}};
  CHECK_THROWS_AS(feature_matching_loss({real}, {short_fake}), ValidationError);
  CHECK_THROWS_AS(feature_matching_loss({real, real}, {real}), ValidationError);
  const auto r = feature_matching_loss({DiscriminatorOutput{torch::randn({1}), {torch::randn({3, 5})}}},
                                       {DiscriminatorOutput{torch::randn({1}), {torch::randn({3, 5})}}});
  CHECK(r.item<double>() >= 0.0);
}

TEST_CASE("least-squares adversarial values") {
  const std::vector<torch::Tensor> ones{torch::ones({2, 3}), torch::ones({2, 5})};
  const std::vector<torch::Tensor> zeros{torch::zeros({2, 3}), torch::zeros({2, 5})};
  const std::vector<torch::Tensor> half{torch::full({2, 3}, 0.5), torch::full({2, 5}, 0.5)};
  CHECK(discriminator_adversarial_loss(ones, zeros).item<double>() == 0.0);
  CHECK(generator_adversarial_loss(ones).item<double>() == 0.0);
  CHECK(discriminator_adversarial_loss(half, half).item<double>() == doctest::Approx(0.5));
  const auto both = adversarial_losses(half, zeros);
  CHECK(both.generator.item<double>() == doctest::Approx(1.0));
  CHECK(both.discriminator.item<double>() == doctest::Approx(0.25));
}

TEST_CASE("discriminator bank layout") {
  const auto c = test::tiny_config();
  torch::manual_seed(0);
  DiscriminatorBank bank(c.model);
  const auto outs = bank->forward(torch::randn({2, 4800}) * 0.1);
  REQUIRE(outs.size() == c.model.mpd_periods.size() + static_cast<size_t>(c.model.msd_scales));
  for (size_t i = 0; i < c.model.mpd_periods.size(); ++i) {
    CHECK(outs[i].features.size() == c.model.mpd_channels.size() + 1);
  }
  CHECK(outs.back().features.size() == c.model.msd_channels.size() + 1);
  for (const auto& o : outs) {
    CHECK(o.score.size(0) == 2);
    for (const auto& f : o.features) CHECK(torch::isfinite(f).all().item<bool>());
  }
  // Lengths that are not multiples of the period are padded.
  const auto odd = bank->forward(torch::randn({1, 1001}) * 0.1);
  CHECK(odd.size() == outs.size());
  const auto tiny = bank->forward(torch::randn({1, 3}) * 0.1);
  CHECK(tiny.size() == outs.size());
}

TEST_CASE("generator losses are differentiable through the bank") {
  const auto c = test::tiny_config();
  torch::manual_seed(1);
  DiscriminatorBank bank(c.model);
  auto fake = (torch::randn({1, 2400}) * 0.1).requires_grad_();
  const auto real = torch::randn({1, 2400}) * 0.1;
  const auto r = bank->forward(real);
  const auto f = bank->forward(fake);
  const auto l = feature_matching_loss(r, f) + generator_adversarial_loss(scores_of(f)) +
                 mel_loss(real, fake);
  l.backward();
  CHECK(fake.grad().abs().sum().item<double>() > 0.0);
}

}
