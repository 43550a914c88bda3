#pragma once

#include <memory>
#include <string>
#include <vector>

#include "psn/layers.hpp"
#include "psn/norm.hpp"
#include "psn/tensor.hpp"

namespace psn {

struct ParamRef {
  std::string name;
  std::vector<double>* value;
  std::vector<double>* grad;
};

// Firing counters accumulated across forward passes until reset.
struct FiringStat {
  std::string layer;
  std::size_t spikes{0};
  std::size_t unit_steps{0};  // neurons * T, summed over samples
  double rate() const {
    return unit_steps == 0 ? 0.0 : static_cast<double>(spikes) / static_cast<double>(unit_steps);
  }
};

// SLAYER surrogate for the spike step derivative:
//   rho = (1/alpha) * exp(-beta * |u - theta|)
struct SurrogateConfig {
  double alpha{10.0};
  double beta{10.0};
};

class Node {
 public:
  virtual ~Node() = default;
  virtual AnalogTensor forward(const AnalogTensor& in, Phase phase) = 0;
  virtual AnalogTensor backward(const AnalogTensor& grad_out) = 0;
  virtual void collect_params(std::vector<ParamRef>&) {}
  virtual void collect_firing(std::vector<FiringStat*>&) {}
  virtual void reset_firing() {}
  virtual void release_saved() {}
  virtual std::string describe() const = 0;
};

class PspNode final : public Node {
 public:
  explicit PspNode(double tau_s) : tau_s_(tau_s) {}
  AnalogTensor forward(const AnalogTensor& in, Phase) override {
    return epsilon_psp(in, tau_s_);
  }
  AnalogTensor backward(const AnalogTensor& g) override {
    return epsilon_psp_adjoint(g, tau_s_);
  }
  std::string describe() const override { return "psp"; }

 private:
  double tau_s_;
};

class NormNode final : public Node {
 public:
  NormNode(const NormalizerConfig& cfg, std::size_t channels, std::string name)
      : norm_(cfg, channels), name_(std::move(name)) {}
  AnalogTensor forward(const AnalogTensor& in, Phase phase) override {
    return norm_.forward(in, phase);
  }
  AnalogTensor backward(const AnalogTensor& g) override { return norm_.backward(g); }
  void collect_params(std::vector<ParamRef>& out) override {
    if (norm_.has_gamma())
      out.push_back({name_ + ".gamma", &norm_.gamma().values(), &norm_.gamma_grad().values()});
    if (norm_.has_xi())
      out.push_back({name_ + ".xi", &norm_.xi().values(), &norm_.xi_grad().values()});
  }
  void release_saved() override { norm_.release_saved(); }
  std::string describe() const override { return "norm"; }
  Normalizer& normalizer() { return norm_; }

 private:
  Normalizer norm_;
  std::string name_;
};

class WeightedNode final : public Node {
 public:
  WeightedNode(LayerParams params, std::string name)
      : params_(std::move(params)), name_(std::move(name)),
        wgrad_(params_.weight_count(), 0.0) {}

  AnalogTensor forward(const AnalogTensor& in, Phase) override {
    saved_in_ = in;
    return weighted_psp(in, params_);
  }
  AnalogTensor backward(const AnalogTensor& g) override {
    if (saved_in_.size() == 0)
      throw ContractError("WeightedNode::backward: no saved input");
    std::vector<double> step_grad;
    if (params_.kind == LayerKind::Dense) {
      dense_backward_weights(g, saved_in_, params_, step_grad);
      for (std::size_t i = 0; i < wgrad_.size(); ++i) wgrad_[i] += step_grad[i];
      return dense_backward_input(g, params_, saved_in_.shape());
    }
    conv_backward_weights(g, saved_in_, params_, step_grad);
    for (std::size_t i = 0; i < wgrad_.size(); ++i) wgrad_[i] += step_grad[i];
    return conv_backward_input(g, params_, saved_in_.shape());
  }
  void collect_params(std::vector<ParamRef>& out) override {
    out.push_back({name_ + ".w", &params_.weights, &wgrad_});
  }
  void release_saved() override { saved_in_ = AnalogTensor(); }
  std::string describe() const override {
    return params_.kind == LayerKind::Dense ? "dense" : "conv";
  }
  LayerParams& params() { return params_; }
  const std::vector<double>& weight_grad() const { return wgrad_; }
  const std::string& name() const { return name_; }

 private:
  LayerParams params_;
  std::string name_;
  std::vector<double> wgrad_;
  AnalogTensor saved_in_;
};

class SpikeNode final : public Node {
 public:
  SpikeNode(double theta, double tau_r, SurrogateConfig surr, std::string name)
      : theta_(theta), tau_r_(tau_r), surr_(surr), name_(std::move(name)) {
    stat_.layer = name_;
  }
  AnalogTensor forward(const AnalogTensor& in, Phase) override;
  // Spike nondifferentiability replaced by the surrogate; the
  // refractory feedback path carries no gradient.
  AnalogTensor backward(const AnalogTensor& g) override;
  void collect_firing(std::vector<FiringStat*>& out) override { out.push_back(&stat_); }
  void reset_firing() override {
    stat_.spikes = 0;
    stat_.unit_steps = 0;
  }
  void release_saved() override { membrane_ = AnalogTensor(); }
  std::string describe() const override { return "spike"; }
  const AnalogTensor& membrane() const { return membrane_; }

 private:
  double theta_, tau_r_;
  SurrogateConfig surr_;
  std::string name_;
  AnalogTensor membrane_;
  FiringStat stat_;
};

// Zero-copy reshape of (C,H,W) into a flat feature axis.
class FlattenNode final : public Node {
 public:
  AnalogTensor forward(const AnalogTensor& in, Phase) override {
    in_shape_ = in.shape();
    AnalogTensor out = in;
    reshape(out, Shape5{in_shape_.n, in_shape_.c * in_shape_.h * in_shape_.w, 1, 1, in_shape_.t});
    return out;
  }
  AnalogTensor backward(const AnalogTensor& g) override {
    AnalogTensor out = g;
    reshape(out, in_shape_);
    return out;
  }
  std::string describe() const override { return "flatten"; }

 private:
  static void reshape(AnalogTensor& t, const Shape5& s);
  Shape5 in_shape_;
};

class Model {
 public:
  Model() = default;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  void add(std::unique_ptr<Node> node) { nodes_.push_back(std::move(node)); }
  std::vector<std::unique_ptr<Node>>& nodes() { return nodes_; }
  const std::vector<std::unique_ptr<Node>>& nodes() const { return nodes_; }

  AnalogTensor forward(const AnalogTensor& in, Phase phase) {
    AnalogTensor x = in;
    for (auto& n : nodes_) x = n->forward(x, phase);
    return x;
  }
  AnalogTensor backward(const AnalogTensor& grad_out) {
    AnalogTensor g = grad_out;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (auto& n : nodes_) n->collect_params(out);
    return out;
  }
  std::vector<FiringStat*> firing_stats() {
    std::vector<FiringStat*> out;
    for (auto& n : nodes_) n->collect_firing(out);
    return out;
  }
  void reset_firing() {
    for (auto& n : nodes_) n->reset_firing();
  }
  void zero_grads() {
    for (ParamRef& p : params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
  }
  void release_saved() {
    for (auto& n : nodes_) n->release_saved();
  }
  std::size_t parameter_count() {
    std::size_t k = 0;
    for (ParamRef& p : params()) k += p.value->size();
    return k;
  }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

enum class ResidualStyle { Pre, Post };

// Residual block over the analog Func-layer signal. Pre style:
// out = skip(in) + G(in); post style: out = F(skip(in) + G(in)) where
// F is the trailing Spike-PSP-Norm chain. skip is identity, or a 1x1
// projection when channel counts differ.
class ResidualNode final : public Node {
 public:
  ResidualNode(ResidualStyle style, Model branch, Model tail,
               std::unique_ptr<WeightedNode> projection, std::string name)
      : style_(style), branch_(std::move(branch)), tail_(std::move(tail)),
        projection_(std::move(projection)), name_(std::move(name)) {}

  AnalogTensor forward(const AnalogTensor& in, Phase phase) override;
  AnalogTensor backward(const AnalogTensor& g) override;

  void collect_params(std::vector<ParamRef>& out) override {
    if (projection_) projection_->collect_params(out);
    for (auto& n : branch_.nodes()) n->collect_params(out);
    for (auto& n : tail_.nodes()) n->collect_params(out);
  }
  void collect_firing(std::vector<FiringStat*>& out) override {
    for (auto& n : branch_.nodes()) n->collect_firing(out);
    for (auto& n : tail_.nodes()) n->collect_firing(out);
  }
  void reset_firing() override {
    branch_.reset_firing();
    tail_.reset_firing();
  }
  void release_saved() override {
    branch_.release_saved();
    tail_.release_saved();
    if (projection_) projection_->release_saved();
  }
  std::string describe() const override {
    return style_ == ResidualStyle::Pre ? "residual-pre" : "residual-post";
  }

 private:
  ResidualStyle style_;
  Model branch_;
  Model tail_;  // post style: the Func layer applied after the addition
  std::unique_ptr<WeightedNode> projection_;
  std::string name_;
};

AnalogTensor surrogate_derivative(const AnalogTensor& u, double theta, const SurrogateConfig& cfg);

}  // namespace psn
