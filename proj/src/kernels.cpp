#include "psn/kernels.hpp"

#include <cmath>

#include "psn/errors.hpp"

namespace psn {

KernelTable build_epsilon(double tau_s, std::size_t steps) {
  if (tau_s <= 0.0) throw ContractError("build_epsilon: tau_s must be > 0");
  if (steps < 1) throw ContractError("build_epsilon: need at least one sample");
  KernelTable k;
  k.tau = tau_s;
  k.kind = KernelKind::SpikeResponse;
  k.samples.resize(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i);
    k.samples[i] = (t / tau_s) * std::exp(1.0 - t / tau_s);
  }
  return k;
}

KernelTable build_nu(double theta, double tau_r, std::size_t steps) {
  if (theta <= 0.0) throw ContractError("build_nu: theta must be > 0");
  if (tau_r <= 0.0) throw ContractError("build_nu: tau_r must be > 0");
  if (steps < 1) throw ContractError("build_nu: need at least one sample");
  KernelTable k;
  k.tau = tau_r;
  k.kind = KernelKind::Refractory;
  k.samples.resize(steps);
  for (std::size_t i = 0; i < steps; ++i)
    k.samples[i] = -2.0 * theta * std::exp(-static_cast<double>(i) / tau_r);
  return k;
}

AnalogTensor causal_conv(const AnalogTensor& s, const KernelTable& kernel, int lag) {
  if (lag != 0 && lag != 1) throw ContractError("causal_conv: lag must be 0 or 1");
  const Shape5& sh = s.shape();
  AnalogTensor out(sh, 0.0);
  const std::size_t T = sh.t;
  const std::size_t K = kernel.length();
  const std::size_t traces = s.size() / T;
  const double* in = s.data();
  double* ov = out.data();
  for (std::size_t tr = 0; tr < traces; ++tr) {
    const double* x = in + tr * T;
    double* y = ov + tr * T;
    for (std::size_t ts = 0; ts < T; ++ts) {
      const double v = x[ts];
      if (v == 0.0) continue;
      const std::size_t t0 = ts + static_cast<std::size_t>(lag);
      const std::size_t kmax = (t0 < T) ? std::min(K, T - t0) : 0;
      for (std::size_t k = 0; k < kmax; ++k) y[t0 + k] += v * kernel.samples[k];
    }
  }
  return out;
}

AnalogTensor causal_conv_adjoint(const AnalogTensor& g_out, const KernelTable& kernel, int lag) {
  if (lag != 0 && lag != 1) throw ContractError("causal_conv_adjoint: lag must be 0 or 1");
  const Shape5& sh = g_out.shape();
  AnalogTensor g_in(sh, 0.0);
  const std::size_t T = sh.t;
  const std::size_t K = kernel.length();
  const std::size_t traces = g_out.size() / T;
  const double* go = g_out.data();
  double* gi = g_in.data();
  for (std::size_t tr = 0; tr < traces; ++tr) {
    const double* g = go + tr * T;
    double* y = gi + tr * T;
    for (std::size_t ts = 0; ts < T; ++ts) {
      const std::size_t t0 = ts + static_cast<std::size_t>(lag);
      const std::size_t kmax = (t0 < T) ? std::min(K, T - t0) : 0;
      double acc = 0.0;
      for (std::size_t k = 0; k < kmax; ++k) acc += kernel.samples[k] * g[t0 + k];
      y[ts] = acc;
    }
  }
  return g_in;
}

// eps(k) = (e/tau) * k * r^k. With p(t) = sum_{s<=t} r^(t-s) x(s) and
// q(t) = sum_{s<=t} (t-s) r^(t-s) x(s):
//   p(t) = r p(t-1) + x(t),  q(t) = r (q(t-1) + p(t-1)),  out(t) = (e/tau) q(t).
void epsilon_scan(const double* in, double* out, std::size_t T, double tau_s) {
  const double r = std::exp(-1.0 / tau_s);
  const double scale = std::exp(1.0) / tau_s;
  double p = 0.0, q = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    q = r * (q + p);
    p = r * p + in[t];
    out[t] = scale * q;
  }
}

// Adjoint: g_in(s) = sum_{t>=s} eps(t-s) g_out(t) = same scan backward in time.
void epsilon_scan_adjoint(const double* g_out, double* g_in, std::size_t T, double tau_s) {
  const double r = std::exp(-1.0 / tau_s);
  const double scale = std::exp(1.0) / tau_s;
  double p = 0.0, q = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    q = r * (q + p);
    p = r * p + g_out[t];
    g_in[t] = scale * q;
  }
}

AnalogTensor epsilon_psp(const AnalogTensor& spikes, double tau_s) {
  if (tau_s <= 0.0) throw ContractError("epsilon_psp: tau_s must be > 0");
  const Shape5& sh = spikes.shape();
  AnalogTensor out(sh);
  const std::size_t T = sh.t;
  const std::size_t traces = spikes.size() / T;
  for (std::size_t tr = 0; tr < traces; ++tr)
    epsilon_scan(spikes.data() + tr * T, out.data() + tr * T, T, tau_s);
  return out;
}

AnalogTensor epsilon_psp_adjoint(const AnalogTensor& g_out, double tau_s) {
  const Shape5& sh = g_out.shape();
  AnalogTensor out(sh);
  const std::size_t T = sh.t;
  const std::size_t traces = g_out.size() / T;
  for (std::size_t tr = 0; tr < traces; ++tr)
    epsilon_scan_adjoint(g_out.data() + tr * T, out.data() + tr * T, T, tau_s);
  return out;
}

}  // namespace psn
