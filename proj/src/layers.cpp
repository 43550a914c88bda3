#include "psn/layers.hpp"

#include <cmath>

#include "psn/errors.hpp"

namespace psn {
namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void check_dense_shapes(const Shape5& s, const LayerParams& p) {
  if (s.h != 1 || s.w != 1)
    throw ShapeError("dense layer expects flattened input, got " + s.str());
  if (s.c != p.in_features)
    throw ShapeError("dense layer fan-in mismatch: " + std::to_string(s.c) + " vs " +
                     std::to_string(p.in_features));
}

void check_conv_shapes(const Shape5& s, const LayerParams& p) {
  if (s.c != p.in_features)
    throw ShapeError("conv layer channel mismatch: " + std::to_string(s.c) + " vs " +
                     std::to_string(p.in_features));
  if (p.ksize != 1 && p.ksize != 3)
    throw ShapeError("conv kernels are 3x3 (1x1 for projections), got " +
                     std::to_string(p.ksize));
}

}  // namespace

void LayerParams::init_weights(std::mt19937_64& rng, double weight_scale) {
  const std::size_t fan_in =
      kind == LayerKind::Dense ? in_features : in_features * ksize * ksize;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  weights.resize(weight_count());
  for (double& w : weights) w = dist(rng) * weight_scale;
}

AnalogTensor dense_forward(const AnalogTensor& in, const LayerParams& p) {
  check_dense_shapes(in.shape(), p);
  const Shape5& s = in.shape();
  const std::size_t T = s.t, F = p.in_features, M = p.out_features;
  AnalogTensor out(Shape5{s.n, M, 1, 1, T}, 0.0);
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* iv = in.data() + n * F * T;
    double* ov = out.data() + n * M * T;
    for (std::size_t m = 0; m < M; ++m) {
      const double* wrow = p.weights.data() + m * F;
      double* orow = ov + m * T;
      for (std::size_t f = 0; f < F; ++f) {
        const double wv = wrow[f];
        if (wv != 0.0) axpy(wv, iv + f * T, orow, T);
      }
    }
  }
  return out;
}

AnalogTensor dense_backward_input(const AnalogTensor& g_out, const LayerParams& p,
                                  const Shape5& in_shape) {
  const std::size_t T = in_shape.t, F = p.in_features, M = p.out_features;
  AnalogTensor g_in(in_shape, 0.0);
  for (std::size_t n = 0; n < in_shape.n; ++n) {
    const double* gv = g_out.data() + n * M * T;
    double* giv = g_in.data() + n * F * T;
    for (std::size_t m = 0; m < M; ++m) {
      const double* grow = gv + m * T;
      const double* wrow = p.weights.data() + m * F;
      for (std::size_t f = 0; f < F; ++f) {
        if (wrow[f] != 0.0) axpy(wrow[f], grow, giv + f * T, T);
      }
    }
  }
  return g_in;
}

void dense_backward_weights(const AnalogTensor& g_out, const AnalogTensor& in,
                            const LayerParams& p, std::vector<double>& wgrad) {
  const Shape5& s = in.shape();
  const std::size_t T = s.t, F = p.in_features, M = p.out_features;
  wgrad.resize(p.weight_count(), 0.0);
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* iv = in.data() + n * F * T;
    const double* gv = g_out.data() + n * M * T;
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t f = 0; f < F; ++f)
        wgrad[m * F + f] += dot(gv + m * T, iv + f * T, T);
  }
}

AnalogTensor conv_forward(const AnalogTensor& in, const LayerParams& p) {
  check_conv_shapes(in.shape(), p);
  const Shape5& s = in.shape();
  const std::size_t H = s.h, W = s.w, T = s.t, Ci = p.in_features, Co = p.out_features;
  const std::size_t ks = p.ksize;
  const long pad = static_cast<long>(ks / 2);
  AnalogTensor out(Shape5{s.n, Co, H, W, T}, 0.0);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t co = 0; co < Co; ++co)
      for (std::size_t h = 0; h < H; ++h) {
        double* orow = out.data() + ((n * Co + co) * H + h) * W * T;
        for (std::size_t ci = 0; ci < Ci; ++ci)
          for (std::size_t ky = 0; ky < ks; ++ky) {
            const long hi = static_cast<long>(h) + static_cast<long>(ky) - pad;
            if (hi < 0 || hi >= static_cast<long>(H)) continue;
            const double* irow = in.data() + ((n * Ci + ci) * H + hi) * W * T;
            const double* wk = p.weights.data() + ((co * Ci + ci) * ks + ky) * ks;
            if (ks == 3 && W >= 3) {
              // one fused pass over the row instead of one per tap
              const double c0 = wk[0], c1 = wk[1], c2 = wk[2];
              for (std::size_t i = T; i < (W - 1) * T; ++i)
                orow[i] += c0 * irow[i - T] + c1 * irow[i] + c2 * irow[i + T];
              for (std::size_t t = 0; t < T; ++t)
                orow[t] += c1 * irow[t] + c2 * irow[T + t];
              const std::size_t base = (W - 1) * T;
              for (std::size_t t = 0; t < T; ++t)
                orow[base + t] += c0 * irow[base - T + t] + c1 * irow[base + t];
              continue;
            }
            for (std::size_t kx = 0; kx < ks; ++kx) {
              const long dx = static_cast<long>(kx) - pad;
              const double wv = wk[kx];
              const std::size_t w0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
              const std::size_t w1 = dx > 0 ? W - static_cast<std::size_t>(dx) : W;
              if (w0 >= w1) continue;
              axpy(wv, irow + (w0 + dx) * T, orow + w0 * T, (w1 - w0) * T);
            }
          }
      }
  return out;
}

AnalogTensor conv_backward_input(const AnalogTensor& g_out, const LayerParams& p,
                                 const Shape5& in_shape) {
  const Shape5& s = in_shape;
  const std::size_t H = s.h, W = s.w, T = s.t, Ci = p.in_features, Co = p.out_features;
  const std::size_t ks = p.ksize;
  const long pad = static_cast<long>(ks / 2);
  AnalogTensor g_in(in_shape, 0.0);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t co = 0; co < Co; ++co)
      for (std::size_t h = 0; h < H; ++h) {
        const double* grow = g_out.data() + ((n * Co + co) * H + h) * W * T;
        for (std::size_t ci = 0; ci < Ci; ++ci)
          for (std::size_t ky = 0; ky < ks; ++ky) {
            const long hi = static_cast<long>(h) + static_cast<long>(ky) - pad;
            if (hi < 0 || hi >= static_cast<long>(H)) continue;
            double* girow = g_in.data() + ((n * Ci + ci) * H + hi) * W * T;
            const double* wk = p.weights.data() + ((co * Ci + ci) * ks + ky) * ks;
            if (ks == 3 && W >= 3) {
              // adjoint of the fused forward pass: g_in[v] += sum_dx c_dx g_out[v - dx]
              const double c0 = wk[0], c1 = wk[1], c2 = wk[2];
              for (std::size_t i = T; i < (W - 1) * T; ++i)
                girow[i] += c0 * grow[i + T] + c1 * grow[i] + c2 * grow[i - T];
              for (std::size_t t = 0; t < T; ++t)
                girow[t] += c0 * grow[T + t] + c1 * grow[t];
              const std::size_t base = (W - 1) * T;
              for (std::size_t t = 0; t < T; ++t)
                girow[base + t] += c1 * grow[base + t] + c2 * grow[base - T + t];
              continue;
            }
            for (std::size_t kx = 0; kx < ks; ++kx) {
              const long dx = static_cast<long>(kx) - pad;
              const double wv = wk[kx];
              const std::size_t w0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
              const std::size_t w1 = dx > 0 ? W - static_cast<std::size_t>(dx) : W;
              if (w0 >= w1) continue;
              axpy(wv, grow + w0 * T, girow + (w0 + dx) * T, (w1 - w0) * T);
            }
          }
      }
  return g_in;
}

void conv_backward_weights(const AnalogTensor& g_out, const AnalogTensor& in,
                           const LayerParams& p, std::vector<double>& wgrad) {
  const Shape5& s = in.shape();
  const std::size_t H = s.h, W = s.w, T = s.t, Ci = p.in_features, Co = p.out_features;
  const std::size_t ks = p.ksize;
  const long pad = static_cast<long>(ks / 2);
  wgrad.resize(p.weight_count(), 0.0);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t co = 0; co < Co; ++co)
      for (std::size_t h = 0; h < H; ++h) {
        const double* grow = g_out.data() + ((n * Co + co) * H + h) * W * T;
        for (std::size_t ci = 0; ci < Ci; ++ci)
          for (std::size_t ky = 0; ky < ks; ++ky) {
            const long hi = static_cast<long>(h) + static_cast<long>(ky) - pad;
            if (hi < 0 || hi >= static_cast<long>(H)) continue;
            const double* irow = in.data() + ((n * Ci + ci) * H + hi) * W * T;
            double* wg = wgrad.data() + ((co * Ci + ci) * ks + ky) * ks;
            if (ks == 3 && W >= 3) {
              // three tap accumulators in one pass over the row
              double a0 = 0.0, a1 = 0.0, a2 = 0.0;
              for (std::size_t i = T; i < (W - 1) * T; ++i) {
                const double gv = grow[i];
                a0 += gv * irow[i - T];
                a1 += gv * irow[i];
                a2 += gv * irow[i + T];
              }
              for (std::size_t t = 0; t < T; ++t) {
                a1 += grow[t] * irow[t];
                a2 += grow[t] * irow[T + t];
              }
              const std::size_t base = (W - 1) * T;
              for (std::size_t t = 0; t < T; ++t) {
                a0 += grow[base + t] * irow[base - T + t];
                a1 += grow[base + t] * irow[base + t];
              }
              wg[0] += a0;
              wg[1] += a1;
              wg[2] += a2;
              continue;
            }
            for (std::size_t kx = 0; kx < ks; ++kx) {
              const long dx = static_cast<long>(kx) - pad;
              const std::size_t w0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
              const std::size_t w1 = dx > 0 ? W - static_cast<std::size_t>(dx) : W;
              if (w0 >= w1) continue;
              wg[kx] += dot(grow + w0 * T, irow + (w0 + dx) * T, (w1 - w0) * T);
            }
          }
      }
}

AnalogTensor weighted_psp(const AnalogTensor& a_hat, const LayerParams& p) {
  return p.kind == LayerKind::Dense ? dense_forward(a_hat, p) : conv_forward(a_hat, p);
}

SpikeResult generate_spikes(const AnalogTensor& feedforward, const KernelTable& nu,
                            double theta) {
  if (nu.kind != KernelKind::Refractory)
    throw ContractError("generate_spikes: kernel must be refractory");
  const Shape5& s = feedforward.shape();
  const std::size_t T = s.t;
  const std::size_t K = nu.length();
  const std::size_t traces = feedforward.size() / T;
  SpikeResult res{SpikeTensor(s), AnalogTensor(s)};
  std::vector<double> refr(T);
  for (std::size_t tr = 0; tr < traces; ++tr) {
    const double* f = feedforward.data() + tr * T;
    double* u = res.membrane.data() + tr * T;
    double* sp = res.spikes.analog().data() + tr * T;
    std::fill(refr.begin(), refr.end(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      u[t] = f[t] + refr[t];
      if (u[t] >= theta) {
        sp[t] = 1.0;
        const std::size_t kmax = std::min(K, T - t - 1);
        for (std::size_t k = 0; k < kmax; ++k) refr[t + 1 + k] += nu.samples[k];
      }
    }
  }
  return res;
}

SpikeResult generate_spikes_fast(const AnalogTensor& feedforward, double theta, double tau_r) {
  if (theta <= 0.0 || tau_r <= 0.0)
    throw ContractError("generate_spikes_fast: theta and tau_r must be > 0");
  const Shape5& s = feedforward.shape();
  const std::size_t T = s.t;
  const std::size_t traces = feedforward.size() / T;
  const double rho = std::exp(-1.0 / tau_r);
  const double nu0 = -2.0 * theta;
  SpikeResult res{SpikeTensor(s), AnalogTensor(s)};
  for (std::size_t tr = 0; tr < traces; ++tr) {
    const double* f = feedforward.data() + tr * T;
    double* u = res.membrane.data() + tr * T;
    double* sp = res.spikes.analog().data() + tr * T;
    double r = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      u[t] = f[t] + r;
      const bool fire = u[t] >= theta;
      sp[t] = fire ? 1.0 : 0.0;
      r = rho * r + (fire ? nu0 : 0.0);
    }
  }
  return res;
}

LayerState forward_layer(const SpikeTensor& in_spikes, const LayerParams& params,
                         Normalizer& norm, double tau_s, double tau_r, Phase phase) {
  LayerState st;
  st.psp = epsilon_psp(in_spikes.analog(), tau_s);
  st.normalized = norm.forward(st.psp, phase);
  AnalogTensor f = weighted_psp(st.normalized, params);
  SpikeResult sr = generate_spikes_fast(f, params.theta, tau_r);
  st.membrane = std::move(sr.membrane);
  st.out_spikes = std::move(sr.spikes);
  return st;
}

}  // namespace psn
