#pragma once

#include <cstddef>
#include <vector>

#include "psn/model.hpp"
#include "psn/tensor.hpp"

namespace psn {

// Spike-count loss targets over the full window: the labeled class
// should emit true_count spikes, every other class false_count.
struct LossSpec {
  double true_count{0.0};
  double false_count{0.0};
  std::size_t classes{10};

  static LossSpec from_fractions(double true_frac, double false_frac, std::size_t T,
                                 std::size_t classes = 10);
};

struct LossResult {
  double loss{0.0};                    // mean over the batch of 1/2 sum_c (count - target)^2
  AnalogTensor grad_seed;              // d loss / d out_spikes, uniform over the window
  std::vector<std::size_t> predicted;  // argmax spike count per sample
};

LossResult spike_count_loss(const AnalogTensor& out_spikes, const std::vector<std::size_t>& labels,
                            const LossSpec& spec);

struct OptimizerConfig {
  double lr{1e-2};
  double weight_decay{1e-4};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
};

// AdaBelief: second moment tracks the belief (g - m)^2 rather than g^2.
// Weight decay is decoupled from the adaptive update.
class AdaBelief {
 public:
  AdaBelief() = default;
  AdaBelief(const OptimizerConfig& cfg, const std::vector<ParamRef>& params);

  void step(const std::vector<ParamRef>& params);

  const OptimizerConfig& config() const { return cfg_; }
  std::size_t steps() const { return step_; }
  std::vector<std::vector<double>>& first_moment() { return m_; }
  std::vector<std::vector<double>>& second_moment() { return s_; }
  void set_steps(std::size_t k) { step_ = k; }

 private:
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> m_, s_;
  std::size_t step_{0};
};

}  // namespace psn
