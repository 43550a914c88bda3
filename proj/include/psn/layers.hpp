#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "psn/kernels.hpp"
#include "psn/norm.hpp"
#include "psn/tensor.hpp"

namespace psn {

enum class LayerKind { Dense, Conv };

// Weights of one weighted layer. Conv kernels are ksize x ksize
// (3x3 in the architectures, 1x1 for skip projections), stride 1,
// zero padding ksize/2. Dense maps flattened (C,H,W) to out_features.
struct LayerParams {
  LayerKind kind{LayerKind::Dense};
  std::size_t in_features{0};   // dense: C*H*W; conv: input channels
  std::size_t out_features{0};  // dense: M; conv: output channels
  std::size_t ksize{3};         // conv only
  double theta{10.0};
  std::vector<double> weights;  // dense: [out][in]; conv: [co][ci][ky][kx]

  std::size_t weight_count() const {
    return kind == LayerKind::Dense ? in_features * out_features
                                    : in_features * out_features * ksize * ksize;
  }
  // Uniform in +-1/sqrt(fan_in), then multiplied by the weight scale.
  void init_weights(std::mt19937_64& rng, double weight_scale);
};

// Per-time-step linear map applied identically at every t.
AnalogTensor dense_forward(const AnalogTensor& in, const LayerParams& p);
AnalogTensor dense_backward_input(const AnalogTensor& g_out, const LayerParams& p,
                                  const Shape5& in_shape);
void dense_backward_weights(const AnalogTensor& g_out, const AnalogTensor& in,
                            const LayerParams& p, std::vector<double>& wgrad);

AnalogTensor conv_forward(const AnalogTensor& in, const LayerParams& p);
AnalogTensor conv_backward_input(const AnalogTensor& g_out, const LayerParams& p,
                                 const Shape5& in_shape);
void conv_backward_weights(const AnalogTensor& g_out, const AnalogTensor& in,
                           const LayerParams& p, std::vector<double>& wgrad);

AnalogTensor weighted_psp(const AnalogTensor& a_hat, const LayerParams& p);

struct SpikeResult {
  SpikeTensor spikes;
  AnalogTensor membrane;
};

// Sequential threshold dynamics: u(t) = feedforward(t) + (nu * s)(t)
// using lag-1 past output spikes; s(t) = 1 iff u(t) >= theta
// (inclusive). Reference form against an explicit kernel table.
SpikeResult generate_spikes(const AnalogTensor& feedforward, const KernelTable& nu, double theta);

// O(T) equivalent for the full-length refractory kernel, via the
// geometric recurrence r(t) = exp(-1/tau_r) r(t-1) - 2 theta s(t-1).
SpikeResult generate_spikes_fast(const AnalogTensor& feedforward, double theta, double tau_r);

struct LayerState {
  AnalogTensor psp;        // a
  AnalogTensor normalized; // a_hat
  AnalogTensor membrane;   // u
  SpikeTensor out_spikes;  // s
};

// Full layer pipeline: PSP of input spikes, normalization, weighted
// map, threshold spike generation with refractory feedback.
LayerState forward_layer(const SpikeTensor& in_spikes, const LayerParams& params,
                         Normalizer& norm, double tau_s, double tau_r, Phase phase);

}  // namespace psn
