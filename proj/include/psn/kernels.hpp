#pragma once

#include <cstddef>
#include <vector>

#include "psn/tensor.hpp"

namespace psn {

enum class KernelKind { SpikeResponse, Refractory };

// Causal kernel discretized at 1 ms steps.
struct KernelTable {
  std::vector<double> samples;  // samples[k] = kernel(k)
  double tau{0.0};
  KernelKind kind{KernelKind::SpikeResponse};

  std::size_t length() const { return samples.size(); }
};

// Spike-response kernel: eps(t) = (t/tau_s) * exp(1 - t/tau_s).
// Nonnegative, eps(0) = 0, peak 1 at t = tau_s.
KernelTable build_epsilon(double tau_s, std::size_t steps);

// Refractory kernel: nu(t) = -2*theta * exp(-t/tau_r). Nonpositive,
// monotonically recovering toward zero.
KernelTable build_nu(double theta, double tau_r, std::size_t steps);

// out[..., t] = sum_k kernel[k] * s[..., t-k-lag] for t-k-lag >= 0.
// lag 0 for the PSP, lag 1 for the refractory signal (only strictly
// past spikes contribute). Accepts analog-valued input as well; zero
// entries are skipped.
AnalogTensor causal_conv(const AnalogTensor& s, const KernelTable& kernel, int lag);
inline AnalogTensor causal_conv(const SpikeTensor& s, const KernelTable& kernel, int lag) {
  return causal_conv(s.analog(), kernel, lag);
}

// Adjoint of causal_conv: g_in[..., t] = sum_k kernel[k] * g_out[..., t+k+lag].
AnalogTensor causal_conv_adjoint(const AnalogTensor& g_out, const KernelTable& kernel, int lag);

// O(T) scan equivalent to causal_conv with the full-length (K = T)
// epsilon kernel, exploiting eps(k) = (e/tau) * k * r^k with
// r = exp(-1/tau). Used on the hot path; causal_conv stays the
// reference form.
void epsilon_scan(const double* in, double* out, std::size_t T, double tau_s);
void epsilon_scan_adjoint(const double* g_out, double* g_in, std::size_t T, double tau_s);

AnalogTensor epsilon_psp(const AnalogTensor& spikes, double tau_s);
AnalogTensor epsilon_psp_adjoint(const AnalogTensor& g_out, double tau_s);

}  // namespace psn
