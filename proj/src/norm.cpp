#include "psn/norm.hpp"

#include <cmath>

#include "psn/errors.hpp"

namespace psn {
namespace {

AnalogTensor sqrt_plus(const AnalogTensor& stat, double lambda) {
  AnalogTensor d(stat.shape());
  for (std::size_t i = 0; i < stat.size(); ++i) d.values()[i] = std::sqrt(stat.values()[i] + lambda);
  return d;
}

void ema_update(AnalogTensor& running, const AnalogTensor& batch, double momentum) {
  for (std::size_t i = 0; i < running.size(); ++i)
    running.values()[i] = momentum * running.values()[i] + (1.0 - momentum) * batch.values()[i];
}

}  // namespace

double effective_threshold(double moment, double lambda, double theta, double refractory) {
  return std::sqrt(moment + lambda) * (theta - refractory);
}

Normalizer::Normalizer(const NormalizerConfig& cfg, std::size_t channels)
    : cfg_(cfg), channels_(channels) {
  if (cfg.form != NormForm::Identity && cfg.lambda <= 0.0)
    throw ContractError("Normalizer: lambda must be > 0");
  const Shape5 cshape{1, channels, 1, 1, 1};
  if (has_gamma()) {
    gamma_ = AnalogTensor(cshape, 1.0);
    gamma_grad_ = AnalogTensor(cshape, 0.0);
  }
  if (has_xi()) {
    xi_ = AnalogTensor(cshape, 0.0);
    xi_grad_ = AnalogTensor(cshape, 0.0);
  }
  if (cfg.form != NormForm::Identity && cfg.axes_mode == AxesMode::BN) {
    running_moment_ = AnalogTensor(cshape, 1.0);
    running_mean_ = AnalogTensor(cshape, 0.0);
    running_var_ = AnalogTensor(cshape, 1.0);
  }
}

AnalogTensor Normalizer::forward(const AnalogTensor& a, Phase phase) {
  if (cfg_.form == NormForm::Identity) {
    have_saved_ = true;  // identity backward is a pass-through
    return a;
  }
  const bool use_running = (phase == Phase::Eval && cfg_.axes_mode == AxesMode::BN);

  if (cfg_.form == NormForm::RawMoment) {
    AnalogTensor moment =
        use_running ? running_moment_ : reduce_second_raw_moment(a, axes());
    AnalogTensor d = sqrt_plus(moment, cfg_.lambda);
    AnalogTensor out = broadcast_binary(a, d, BinaryOp::Div);
    if (phase == Phase::Train) {
      if (cfg_.axes_mode == AxesMode::BN) ema_update(running_moment_, moment, cfg_.momentum);
      saved_a_ = a;
      saved_denom_ = std::move(d);
      have_saved_ = true;
    }
    return out;
  }

  AnalogTensor mean, var;
  if (use_running) {
    mean = running_mean_;
    var = running_var_;
  } else {
    MeanVar mv = reduce_mean_and_variance(a, axes());
    mean = std::move(mv.mean);
    var = std::move(mv.variance);
  }
  AnalogTensor d = sqrt_plus(var, cfg_.lambda);

  AnalogTensor out;
  if (cfg_.form == NormForm::MeanFree) {
    out = broadcast_binary(a, d, BinaryOp::Div);
    out = broadcast_binary(out, gamma_, BinaryOp::Mul);
  } else {  // Standard
    out = broadcast_binary(a, mean, BinaryOp::Sub);
    out = broadcast_binary(out, d, BinaryOp::Div);
    out = broadcast_binary(out, gamma_, BinaryOp::Mul);
    out = broadcast_binary(out, xi_, BinaryOp::Add);
  }
  if (phase == Phase::Train) {
    if (cfg_.axes_mode == AxesMode::BN) {
      ema_update(running_mean_, mean, cfg_.momentum);
      ema_update(running_var_, var, cfg_.momentum);
    }
    saved_a_ = a;
    saved_denom_ = std::move(d);
    saved_mean_ = std::move(mean);
    have_saved_ = true;
  }
  return out;
}

AnalogTensor Normalizer::backward(const AnalogTensor& g) {
  if (!have_saved_) throw ContractError("Normalizer::backward: no saved forward intermediates");
  if (cfg_.form == NormForm::Identity) return g;

  const Shape5 stat_shape = saved_denom_.shape();
  const double X =
      static_cast<double>(saved_a_.size()) / static_cast<double>(saved_denom_.size());

  if (cfg_.form == NormForm::RawMoment) {
    // out = a / d, d = sqrt(E[a^2] + lambda)
    // grad = g/d - a * (sum_grp g.a) / (X d^3)
    // The stat is a scalar per contiguous (n,c)-run, so do the whole
    // thing in two fused passes (the training hot path).
    const Shape5& full = saved_a_.shape();
    const std::size_t run = full.h * full.w * full.t;
    const std::size_t groups = full.n * full.c;
    const std::size_t stat_n = stat_shape.n, stat_c = stat_shape.c;
    AnalogTensor grad(full);
    const double* av = saved_a_.data();
    const double* gv = g.data();
    double* ov = grad.data();
    std::vector<double> s(saved_denom_.size(), 0.0);
    for (std::size_t grp = 0; grp < groups; ++grp) {
      const std::size_t n = grp / full.c, c = grp % full.c;
      const std::size_t si = (stat_n == 1 ? 0 : n) * stat_c + (stat_c == 1 ? 0 : c);
      const std::size_t off = grp * run;
      double acc = 0.0;
      for (std::size_t k = 0; k < run; ++k) acc += gv[off + k] * av[off + k];
      s[si] += acc;
    }
    for (std::size_t si = 0; si < s.size(); ++si) {
      const double d = saved_denom_.values()[si];
      s[si] /= X * d * d * d;
    }
    for (std::size_t grp = 0; grp < groups; ++grp) {
      const std::size_t n = grp / full.c, c = grp % full.c;
      const std::size_t si = (stat_n == 1 ? 0 : n) * stat_c + (stat_c == 1 ? 0 : c);
      const double invd = 1.0 / saved_denom_.values()[si];
      const double sc = s[si];
      const std::size_t off = grp * run;
      for (std::size_t k = 0; k < run; ++k) ov[off + k] = gv[off + k] * invd - av[off + k] * sc;
    }
    return grad;
  }

  // g scaled by gamma feeds both remaining forms.
  AnalogTensor gt = broadcast_binary(g, gamma_, BinaryOp::Mul);

  if (cfg_.form == NormForm::MeanFree) {
    // out = gamma * a / d, d = sqrt(var + lambda)
    // grad = gamma*g/d - (a - mean) * (sum_grp gamma*g.a) / (X d^3)
    AnalogTensor norm_a = broadcast_binary(saved_a_, saved_denom_, BinaryOp::Div);
    {
      AnalogTensor gnorm(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        gnorm.values()[i] = g.values()[i] * norm_a.values()[i];
      AnalogTensor dgamma = reduce_to_shape(gnorm, gamma_.shape());
      for (std::size_t i = 0; i < gamma_grad_.size(); ++i)
        gamma_grad_.values()[i] += dgamma.values()[i];
    }
    AnalogTensor gta(saved_a_.shape());
    for (std::size_t i = 0; i < gta.size(); ++i)
      gta.values()[i] = gt.values()[i] * saved_a_.values()[i];
    AnalogTensor s = reduce_to_shape(gta, stat_shape);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double d = saved_denom_.values()[i];
      s.values()[i] /= X * d * d * d;
    }
    AnalogTensor centered = broadcast_binary(saved_a_, saved_mean_, BinaryOp::Sub);
    AnalogTensor corr = broadcast_binary(centered, s, BinaryOp::Mul);
    AnalogTensor grad = broadcast_binary(gt, saved_denom_, BinaryOp::Div);
    for (std::size_t i = 0; i < grad.size(); ++i) grad.values()[i] -= corr.values()[i];
    return grad;
  }

  // Standard form: out = gamma * (a - mean)/d + xi
  AnalogTensor xhat = broadcast_binary(saved_a_, saved_mean_, BinaryOp::Sub);
  xhat = broadcast_binary(xhat, saved_denom_, BinaryOp::Div);
  {
    AnalogTensor gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i)
      gx.values()[i] = g.values()[i] * xhat.values()[i];
    AnalogTensor dgamma = reduce_to_shape(gx, gamma_.shape());
    AnalogTensor dxi = reduce_to_shape(g, xi_.shape());
    for (std::size_t i = 0; i < gamma_grad_.size(); ++i) {
      gamma_grad_.values()[i] += dgamma.values()[i];
      xi_grad_.values()[i] += dxi.values()[i];
    }
  }
  AnalogTensor mean_gt = reduce_to_shape(gt, stat_shape);
  AnalogTensor gtx(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i)
    gtx.values()[i] = gt.values()[i] * xhat.values()[i];
  AnalogTensor mean_gtx = reduce_to_shape(gtx, stat_shape);
  for (std::size_t i = 0; i < mean_gt.size(); ++i) {
    mean_gt.values()[i] /= X;
    mean_gtx.values()[i] /= X;
  }
  AnalogTensor grad(g.shape());
  AnalogTensor term_mean = broadcast_binary(AnalogTensor(g.shape(), 1.0), mean_gt, BinaryOp::Mul);
  AnalogTensor term_xhat = broadcast_binary(xhat, mean_gtx, BinaryOp::Mul);
  AnalogTensor inv_d = broadcast_binary(AnalogTensor(g.shape(), 1.0), saved_denom_, BinaryOp::Div);
  for (std::size_t i = 0; i < grad.size(); ++i)
    grad.values()[i] =
        inv_d.values()[i] * (gt.values()[i] - term_mean.values()[i] - term_xhat.values()[i]);
  return grad;
}

void Normalizer::release_saved() {
  saved_a_ = AnalogTensor();
  saved_denom_ = AnalogTensor();
  saved_mean_ = AnalogTensor();
  have_saved_ = false;
}

}  // namespace psn
