#include "svc/optim.hpp"

#include <cmath>

#include "svc/audio.hpp"

namespace svc {

Adam::Adam(std::vector<std::pair<std::string, torch::Tensor>> params, Options options)
    : params_(std::move(params)), options_(options) {
  for (const auto& [name, p] : params_) {
    m_.push_back(torch::zeros_like(p));
    v_.push_back(torch::zeros_like(p));
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) {
    if (p.grad().defined()) {
      p.grad().detach_();
      p.grad().zero_();
    }
  }
}

void Adam::step(double lr) {
  torch::NoGradGuard no_grad;
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    if (!p.grad().defined()) continue;
    const auto& g = p.grad();
    m_[i].mul_(b1).add_(g, 1.0 - b1);
    v_[i].mul_(b2).addcmul_(g, g, 1.0 - b2);
    const auto denom = (v_[i] / bc2).sqrt_().add_(options_.eps);
    p.addcdiv_(m_[i], denom, -lr / bc1);
  }
}

void Adam::store(Checkpoint& ckpt, const std::string& prefix) const {
  for (size_t i = 0; i < params_.size(); ++i) {
    ckpt.blobs[prefix + ".m." + params_[i].first] = m_[i].clone();
    ckpt.blobs[prefix + ".v." + params_[i].first] = v_[i].clone();
  }
  ckpt.meta["optimizers"][prefix] = steps_;
}

void Adam::restore(const Checkpoint& ckpt, const std::string& prefix) {
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < params_.size(); ++i) {
    const auto& m = ckpt.blob(prefix + ".m." + params_[i].first);
    const auto& v = ckpt.blob(prefix + ".v." + params_[i].first);
    if (!m.sizes().equals(m_[i].sizes()) || !v.sizes().equals(v_[i].sizes())) {
      throw ValidationError("optimizer state shape mismatch for " + params_[i].first);
    }
    m_[i].copy_(m);
    v_[i].copy_(v);
  }
  steps_ = ckpt.meta.at("optimizers").at(prefix).get<int64_t>();
}

std::vector<std::pair<std::string, torch::Tensor>> named_params(const std::string& prefix,
                                                                 const torch::nn::Module& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : m.named_parameters(true)) out.emplace_back(prefix + "." + p.key(), p.value());
  return out;
}

}  // namespace svc
