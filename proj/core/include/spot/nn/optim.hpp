#pragma once

#include <vector>

#include "spot/nn/tensor.hpp"

namespace spot::nn {

struct AdamOptions {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
};

// Adam over a fixed parameter list. Parameters with no gradient this step
// are left untouched.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  void step();
  void zero_grad();
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_, v_;
  long step_count_ = 0;
};

}  // namespace spot::nn
