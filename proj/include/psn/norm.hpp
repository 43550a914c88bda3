#pragma once

#include <cstddef>
#include <optional>

#include "psn/tensor.hpp"

namespace psn {

// Normalization applied to the PSP before the weighted layer.
//   Standard:  ((a - mean) / sqrt(var + lambda)) * gamma + xi
//   MeanFree:  (a / sqrt(var + lambda)) * gamma
//   RawMoment: a / sqrt(E[a^2] + lambda)          (no learnable parameters)
// RawMoment is the method proper; Standard and MeanFree are its ablation
// ancestors. Standard's subtraction pushes the excitatory PSP negative,
// which is what the later forms remove.
enum class NormForm { Identity, Standard, MeanFree, RawMoment };

enum class AxesMode { BN, LN };  // per-channel over W*H*N*T vs per-sample over W*H*C*T

enum class Phase { Train, Eval };

struct NormalizerConfig {
  NormForm form{NormForm::RawMoment};
  AxesMode axes_mode{AxesMode::LN};
  double lambda{0.1};
  double momentum{0.9};  // EMA factor for BN-mode inference statistics
};

// Effective firing threshold once the normalization denominator is
// folded into the threshold comparison:
//   theta_hat = sqrt(moment + lambda) * (theta - refractory)
double effective_threshold(double moment, double lambda, double theta, double refractory);

class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(const NormalizerConfig& cfg, std::size_t channels);

  const NormalizerConfig& config() const { return cfg_; }
  bool has_gamma() const {
    return cfg_.form == NormForm::Standard || cfg_.form == NormForm::MeanFree;
  }
  bool has_xi() const { return cfg_.form == NormForm::Standard; }

  // Train phase uses batch statistics and (BN mode) updates the running
  // EMA; eval phase uses the EMA in BN mode and recomputes per sample in
  // LN mode. Forward retains what backward needs.
  AnalogTensor forward(const AnalogTensor& a, Phase phase);
  // Exact gradient including the dependence of the statistics on every
  // element of a. Accumulates gamma/xi gradients.
  AnalogTensor backward(const AnalogTensor& grad_out);

  AnalogTensor& gamma() { return gamma_; }
  AnalogTensor& xi() { return xi_; }
  AnalogTensor& gamma_grad() { return gamma_grad_; }
  AnalogTensor& xi_grad() { return xi_grad_; }
  const AnalogTensor& running_moment() const { return running_moment_; }
  const AnalogTensor& running_mean() const { return running_mean_; }
  const AnalogTensor& running_var() const { return running_var_; }
  AnalogTensor& mutable_running_moment() { return running_moment_; }
  AnalogTensor& mutable_running_mean() { return running_mean_; }
  AnalogTensor& mutable_running_var() { return running_var_; }

  void release_saved();

 private:
  AxisSet axes() const {
    return cfg_.axes_mode == AxesMode::BN ? AxisSet::bn_axes() : AxisSet::ln_axes();
  }

  NormalizerConfig cfg_;
  std::size_t channels_{0};

  AnalogTensor gamma_, xi_;            // shape (1,C,1,1,1)
  AnalogTensor gamma_grad_, xi_grad_;

  // BN-mode inference statistics, shape (1,C,1,1,1).
  AnalogTensor running_moment_, running_mean_, running_var_;

  // Saved forward intermediates (train phase).
  bool have_saved_{false};
  AnalogTensor saved_a_;
  AnalogTensor saved_denom_;  // sqrt(stat + lambda), stat shape
  AnalogTensor saved_mean_;   // Standard form only
};

}  // namespace psn
