#pragma once

#include <torch/torch.h>

#include <string>
#include <utility>
#include <vector>

#include "svc/checkpoint.hpp"

namespace svc {

// Adam with bias correction. Parameters are tracked by name so that the
// moment estimates can be written to and restored from a checkpoint.
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::vector<std::pair<std::string, torch::Tensor>> params, Options options);

  void zero_grad();
  void step(double learning_rate);
  int64_t steps() const { return steps_; }

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  void restore(const Checkpoint& ckpt, const std::string& prefix);

 private:
  std::vector<std::pair<std::string, torch::Tensor>> params_;
  std::vector<torch::Tensor> m_, v_;
  Options options_;
  int64_t steps_ = 0;
};

// Prefixed, flattened parameter list of a module ("model.decoder.conv_pre.weight").
std::vector<std::pair<std::string, torch::Tensor>> named_params(const std::string& prefix,
                                                                 const torch::nn::Module& m);

}  // namespace svc
