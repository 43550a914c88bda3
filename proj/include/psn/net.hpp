#pragma once

#include <random>
#include <string>
#include <vector>

#include "psn/model.hpp"

namespace psn {

// One element of the architecture string DSL. Strings look like
// "34x34x2-n8c3-{n16c3}*5-n16c3-{n32c3}*5-10": layers separated by '-',
// spatial dimensions by 'x', 'c' marks a convolution, a bare integer a
// dense layer, '{...}*k' repetition, and 'n' normalization. The 'n'
// prefix places normalization before the layer (the placement built
// here); the suffix form is parsed but rejected at build time.
struct LayerSpec {
  enum class Kind { Input, Conv, Dense };
  Kind kind{Kind::Conv};
  std::size_t channels{0};  // conv channels or dense units
  std::size_t kernel{3};
  bool norm_before{false};
  bool norm_after{false};
  std::size_t repeat{1};
  std::size_t in_h{0}, in_w{0}, in_c{1};  // input spec only
};

struct NetworkSpec {
  enum class Style { Plain, ResnetPre, ResnetPost };
  std::vector<LayerSpec> layers;  // input first; plain style lists all layers
  Style style{Style::Plain};
  std::size_t block_count{0};     // residual styles only
  std::size_t block_channels{0};
};

NetworkSpec parse_architecture(const std::string& s);
std::string render_architecture(const NetworkSpec& spec);

// Residual network description: stem conv + block_count two-conv blocks
// at constant width + dense head. Weighted layer count = 2*blocks + 2.
NetworkSpec make_resnet_spec(std::size_t in_h, std::size_t in_w, std::size_t in_c,
                             NetworkSpec::Style style, std::size_t blocks,
                             std::size_t channels, std::size_t classes = 10);

struct ModelHyper {
  double tau_s{10.0};
  double tau_r{10.0};
  double theta{10.0};
  double weight_scale{10.0};
  SurrogateConfig surrogate{};
  NormalizerConfig norm{};
};

// The Func layer: Spike -> PSP -> Norm over an analog signal.
void append_func_layer(Model& model, const ModelHyper& hyper, std::size_t channels,
                       const std::string& name);

std::unique_ptr<ResidualNode> build_residual_block(ResidualStyle style, std::size_t in_channels,
                                                   std::size_t channels, const ModelHyper& hyper,
                                                   std::mt19937_64& rng, const std::string& name);

// Executable layer graph from a parsed spec. Throws ConfigError on
// suffix normalization, non-3x3 kernels, or a spec without trainable
// layers.
Model assemble(const NetworkSpec& spec, const ModelHyper& hyper, std::mt19937_64& rng);

// Number of weighted (trainable) layers the spec builds.
std::size_t weighted_layer_count(const NetworkSpec& spec);

}  // namespace psn
