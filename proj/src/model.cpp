#include "psn/model.hpp"

#include <cmath>

namespace psn {

AnalogTensor surrogate_derivative(const AnalogTensor& u, double theta,
                                  const SurrogateConfig& cfg) {
  if (cfg.alpha <= 0.0 || cfg.beta <= 0.0)
    throw ContractError("surrogate_derivative: alpha and beta must be > 0");
  AnalogTensor rho(u.shape());
  const double inv_alpha = 1.0 / cfg.alpha;
  for (std::size_t i = 0; i < u.size(); ++i)
    rho.values()[i] = inv_alpha * std::exp(-cfg.beta * std::abs(u.values()[i] - theta));
  return rho;
}

AnalogTensor SpikeNode::forward(const AnalogTensor& in, Phase) {
  SpikeResult res = generate_spikes_fast(in, theta_, tau_r_);
  membrane_ = std::move(res.membrane);
  std::size_t spikes = 0;
  for (double v : res.spikes.analog().values()) spikes += (v != 0.0);
  stat_.spikes += spikes;
  stat_.unit_steps += res.spikes.size();
  return std::move(res.spikes.analog());
}

AnalogTensor SpikeNode::backward(const AnalogTensor& g) {
  if (membrane_.size() == 0) throw ContractError("SpikeNode::backward: no saved membrane");
  AnalogTensor out(g.shape());
  const double inv_alpha = 1.0 / surr_.alpha;
  const double* uv = membrane_.data();
  const double* gv = g.data();
  double* ov = out.data();
  for (std::size_t i = 0; i < g.size(); ++i)
    ov[i] = gv[i] * inv_alpha * std::exp(-surr_.beta * std::abs(uv[i] - theta_));
  return out;
}

void FlattenNode::reshape(AnalogTensor& t, const Shape5& s) {
  if (t.size() != s.size())
    throw ShapeError("flatten: size mismatch " + t.shape().str() + " vs " + s.str());
  AnalogTensor out(s);
  out.values() = std::move(t.values());
  t = std::move(out);
}

AnalogTensor ResidualNode::forward(const AnalogTensor& in, Phase phase) {
  AnalogTensor skip = projection_ ? projection_->forward(in, phase) : in;
  AnalogTensor res = branch_.forward(in, phase);
  if (!(skip.shape() == res.shape()))
    throw ShapeError("residual block " + name_ + ": skip " + skip.shape().str() +
                     " vs branch " + res.shape().str());
  for (std::size_t i = 0; i < res.size(); ++i) res.values()[i] += skip.values()[i];
  if (style_ == ResidualStyle::Post) return tail_.forward(res, phase);
  return res;
}

AnalogTensor ResidualNode::backward(const AnalogTensor& g) {
  AnalogTensor gsum = style_ == ResidualStyle::Post ? tail_.backward(g) : g;
  AnalogTensor gin = branch_.backward(gsum);
  if (projection_) {
    AnalogTensor gskip = projection_->backward(gsum);
    for (std::size_t i = 0; i < gin.size(); ++i) gin.values()[i] += gskip.values()[i];
  } else {
    for (std::size_t i = 0; i < gin.size(); ++i) gin.values()[i] += gsum.values()[i];
  }
  return gin;
}

}  // namespace psn
