#include "psn/train.hpp"

#include <cmath>

#include "psn/errors.hpp"

namespace psn {

LossSpec LossSpec::from_fractions(double true_frac, double false_frac, std::size_t T,
                                  std::size_t classes) {
  LossSpec s;
  s.true_count = true_frac * static_cast<double>(T);
  s.false_count = false_frac * static_cast<double>(T);
  s.classes = classes;
  if (s.true_count < 0 || s.true_count > static_cast<double>(T) || s.false_count < 0 ||
      s.false_count > static_cast<double>(T))
    throw ConfigError("LossSpec: targets must lie in [0, T]");
  return s;
}

LossResult spike_count_loss(const AnalogTensor& out_spikes, const std::vector<std::size_t>& labels,
                            const LossSpec& spec) {
  const Shape5& s = out_spikes.shape();
  if (s.c != spec.classes || s.h != 1 || s.w != 1)
    throw ShapeError("spike_count_loss: expected (N," + std::to_string(spec.classes) +
                     ",1,1,T) output, got " + s.str());
  if (labels.size() != s.n)
    throw ContractError("spike_count_loss: label count mismatch");

  LossResult res;
  res.grad_seed = AnalogTensor(s, 0.0);
  res.predicted.resize(s.n);
  const double inv_batch = 1.0 / static_cast<double>(s.n);
  for (std::size_t n = 0; n < s.n; ++n) {
    if (labels[n] >= spec.classes)
      throw ContractError("spike_count_loss: label " + std::to_string(labels[n]) +
                          " out of range");
    double best = -1.0;
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < spec.classes; ++c) {
      double count = 0.0;
      const double* row = out_spikes.data() + (n * spec.classes + c) * s.t;
      for (std::size_t t = 0; t < s.t; ++t) count += row[t];
      const double target = (c == labels[n]) ? spec.true_count : spec.false_count;
      const double err = count - target;
      res.loss += 0.5 * err * err * inv_batch;
      double* grow = res.grad_seed.data() + (n * spec.classes + c) * s.t;
      const double seed = err * inv_batch;
      for (std::size_t t = 0; t < s.t; ++t) grow[t] = seed;
      if (count > best) {
        best = count;
        best_c = c;
      }
    }
    res.predicted[n] = best_c;
  }
  return res;
}

AdaBelief::AdaBelief(const OptimizerConfig& cfg, const std::vector<ParamRef>& params)
    : cfg_(cfg) {
  m_.reserve(params.size());
  s_.reserve(params.size());
  for (const ParamRef& p : params) {
    m_.emplace_back(p.value->size(), 0.0);
    s_.emplace_back(p.value->size(), 0.0);
  }
}

void AdaBelief::step(const std::vector<ParamRef>& params) {
  if (params.size() != m_.size())
    throw ContractError("AdaBelief::step: parameter set changed since construction");
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    std::vector<double>& p = *params[pi].value;
    const std::vector<double>& g = *params[pi].grad;
    std::vector<double>& m = m_[pi];
    std::vector<double>& s = s_[pi];
    if (p.size() != m.size() || g.size() != m.size())
      throw ContractError("AdaBelief::step: parameter size changed");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw NumericError("AdaBelief: non-finite gradient in " + params[pi].name);
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      const double diff = g[i] - m[i];
      s[i] = cfg_.beta2 * s[i] + (1.0 - cfg_.beta2) * diff * diff;
      const double mhat = m[i] / bc1;
      const double shat = s[i] / bc2;
      p[i] -= cfg_.lr * (mhat / (std::sqrt(shat) + cfg_.eps)) + cfg_.lr * cfg_.weight_decay * p[i];
    }
  }
}

}  // namespace psn
