#include "psn/net.hpp"

#include <cctype>

#include "psn/errors.hpp"

namespace psn {
namespace {

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s)
    if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
  return true;
}

std::size_t parse_uint(const std::string& s, std::size_t pos) {
  if (!all_digits(s)) throw ParseError("expected integer, got '" + s + "'", pos);
  return static_cast<std::size_t>(std::stoull(s));
}

LayerSpec parse_input_token(const std::string& tok, std::size_t pos) {
  std::vector<std::string> dims;
  std::string cur;
  for (char ch : tok) {
    if (ch == 'x') {
      dims.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  dims.push_back(cur);
  if (dims.size() != 2 && dims.size() != 3)
    throw ParseError("input spec needs HxW or HxWxC, got '" + tok + "'", pos);
  LayerSpec l;
  l.kind = LayerSpec::Kind::Input;
  l.in_h = parse_uint(dims[0], pos);
  l.in_w = parse_uint(dims[1], pos);
  l.in_c = dims.size() == 3 ? parse_uint(dims[2], pos) : 1;
  if (l.in_h == 0 || l.in_w == 0 || l.in_c == 0)
    throw ParseError("input extents must be positive in '" + tok + "'", pos);
  return l;
}

LayerSpec parse_layer_token(std::string tok, std::size_t pos) {
  LayerSpec l;
  if (!tok.empty() && tok.front() == 'n') {
    l.norm_before = true;
    tok.erase(tok.begin());
  }
  if (!tok.empty() && tok.back() == 'n') {
    l.norm_after = true;
    tok.pop_back();
  }
  const std::size_t cpos = tok.find('c');
  if (cpos != std::string::npos) {
    l.kind = LayerSpec::Kind::Conv;
    l.channels = parse_uint(tok.substr(0, cpos), pos);
    l.kernel = parse_uint(tok.substr(cpos + 1), pos);
    if (l.channels == 0) throw ParseError("conv layer needs positive channel count", pos);
    return l;
  }
  if (l.norm_before || l.norm_after)
    throw ParseError("normalization marker is only valid on conv layers, got 'n" + tok + "'", pos);
  l.kind = LayerSpec::Kind::Dense;
  l.channels = parse_uint(tok, pos);
  if (l.channels == 0) throw ParseError("dense layer needs positive unit count", pos);
  return l;
}

std::string render_layer(const LayerSpec& l) {
  std::string s;
  if (l.kind == LayerSpec::Kind::Input) {
    s = std::to_string(l.in_h) + "x" + std::to_string(l.in_w);
    if (l.in_c != 1) s += "x" + std::to_string(l.in_c);
    return s;
  }
  std::string body;
  if (l.norm_before) body += "n";
  body += std::to_string(l.channels);
  if (l.kind == LayerSpec::Kind::Conv) {
    body += "c" + std::to_string(l.kernel);
    if (l.norm_after) body += "n";
  }
  if (l.repeat > 1) return "{" + body + "}*" + std::to_string(l.repeat);
  return body;
}

}  // namespace

NetworkSpec parse_architecture(const std::string& s) {
  if (s.empty()) throw ParseError("empty architecture string", 0);
  NetworkSpec spec;
  std::size_t pos = 0;
  bool first = true;
  while (pos <= s.size()) {
    std::size_t end = s.find('-', pos);
    if (end == std::string::npos) end = s.size();
    std::string tok = s.substr(pos, end - pos);
    if (tok.empty()) throw ParseError("empty layer token", pos);

    std::size_t repeat = 1;
    if (tok.front() == '{') {
      const std::size_t close = tok.find('}');
      if (close == std::string::npos) throw ParseError("unterminated '{' group", pos);
      if (close + 1 >= tok.size() || tok[close + 1] != '*')
        throw ParseError("group must be followed by '*<count>'", pos + close);
      repeat = parse_uint(tok.substr(close + 2), pos + close + 2);
      if (repeat == 0) throw ParseError("zero repeat count", pos + close + 2);
      tok = tok.substr(1, close - 1);
      if (tok.empty()) throw ParseError("empty group", pos);
    }

    LayerSpec layer;
    if (first) {
      if (tok.find('x') == std::string::npos)
        throw ParseError("architecture must start with an input spec (HxW or HxWxC)", pos);
      layer = parse_input_token(tok, pos);
      if (repeat != 1) throw ParseError("input spec cannot be repeated", pos);
      first = false;
    } else {
      if (tok.find('x') != std::string::npos)
        throw ParseError("unexpected second input spec '" + tok + "'", pos);
      layer = parse_layer_token(tok, pos);
      layer.repeat = repeat;
    }
    spec.layers.push_back(layer);
    if (end == s.size()) break;
    pos = end + 1;
  }
  return spec;
}

std::string render_architecture(const NetworkSpec& spec) {
  std::string out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (i) out += "-";
    out += render_layer(spec.layers[i]);
  }
  return out;
}

NetworkSpec make_resnet_spec(std::size_t in_h, std::size_t in_w, std::size_t in_c,
                             NetworkSpec::Style style, std::size_t blocks,
                             std::size_t channels, std::size_t classes) {
  if (style == NetworkSpec::Style::Plain)
    throw ConfigError("make_resnet_spec: style must be a residual style");
  if (blocks == 0 || channels == 0)
    throw ConfigError("make_resnet_spec: blocks and channels must be positive");
  NetworkSpec spec;
  spec.style = style;
  spec.block_count = blocks;
  spec.block_channels = channels;
  LayerSpec input;
  input.kind = LayerSpec::Kind::Input;
  input.in_h = in_h;
  input.in_w = in_w;
  input.in_c = in_c;
  spec.layers.push_back(input);
  LayerSpec dense;
  dense.kind = LayerSpec::Kind::Dense;
  dense.channels = classes;
  spec.layers.push_back(dense);
  return spec;
}

namespace {

LayerParams make_conv(std::size_t cin, std::size_t cout, std::size_t ksize, double theta,
                      double weight_scale, std::mt19937_64& rng) {
  LayerParams p;
  p.kind = LayerKind::Conv;
  p.in_features = cin;
  p.out_features = cout;
  p.ksize = ksize;
  p.theta = theta;
  p.init_weights(rng, weight_scale);
  return p;
}

LayerParams make_dense(std::size_t fin, std::size_t fout, double theta, double weight_scale,
                       std::mt19937_64& rng) {
  LayerParams p;
  p.kind = LayerKind::Dense;
  p.in_features = fin;
  p.out_features = fout;
  p.theta = theta;
  p.init_weights(rng, weight_scale);
  return p;
}

}  // namespace

void append_func_layer(Model& model, const ModelHyper& hyper, std::size_t channels,
                       const std::string& name) {
  model.add(std::make_unique<SpikeNode>(hyper.theta, hyper.tau_r, hyper.surrogate,
                                        name + ".spike"));
  model.add(std::make_unique<PspNode>(hyper.tau_s));
  model.add(std::make_unique<NormNode>(hyper.norm, channels, name + ".norm"));
}

std::unique_ptr<ResidualNode> build_residual_block(ResidualStyle style, std::size_t in_channels,
                                                   std::size_t channels, const ModelHyper& hyper,
                                                   std::mt19937_64& rng,
                                                   const std::string& name) {
  if (channels < 1) throw ConfigError("residual block needs at least one channel");
  Model branch;
  Model tail;
  if (style == ResidualStyle::Pre) {
    // G = Func-Conv-Func-Conv; identity (or projected) skip.
    append_func_layer(branch, hyper, in_channels, name + ".f1");
    branch.add(std::make_unique<WeightedNode>(
        make_conv(in_channels, channels, 3, hyper.theta, hyper.weight_scale, rng),
        name + ".conv1"));
    append_func_layer(branch, hyper, channels, name + ".f2");
    branch.add(std::make_unique<WeightedNode>(
        make_conv(channels, channels, 3, hyper.theta, hyper.weight_scale, rng), name + ".conv2"));
  } else {
    // G = Conv-Func-Conv; F = Func applied after the addition.
    branch.add(std::make_unique<WeightedNode>(
        make_conv(in_channels, channels, 3, hyper.theta, hyper.weight_scale, rng),
        name + ".conv1"));
    append_func_layer(branch, hyper, channels, name + ".f1");
    branch.add(std::make_unique<WeightedNode>(
        make_conv(channels, channels, 3, hyper.theta, hyper.weight_scale, rng), name + ".conv2"));
    append_func_layer(tail, hyper, channels, name + ".f2");
  }
  std::unique_ptr<WeightedNode> projection;
  if (in_channels != channels) {
    projection = std::make_unique<WeightedNode>(
        make_conv(in_channels, channels, 1, hyper.theta, hyper.weight_scale, rng),
        name + ".proj");
  }
  return std::make_unique<ResidualNode>(style, std::move(branch), std::move(tail),
                                        std::move(projection), name);
}

Model assemble(const NetworkSpec& spec, const ModelHyper& hyper, std::mt19937_64& rng) {
  if (spec.layers.empty() || spec.layers.front().kind != LayerSpec::Kind::Input)
    throw ConfigError("assemble: spec must start with an input layer");
  for (std::size_t i = 1; i < spec.layers.size(); ++i)
    if (spec.layers[i].kind == LayerSpec::Kind::Input)
      throw ConfigError("assemble: multiple input specs");
  if (weighted_layer_count(spec) == 0) throw ConfigError("assemble: no trainable layers");

  const LayerSpec& input = spec.layers.front();
  std::size_t C = input.in_c, H = input.in_h, W = input.in_w;
  Model model;

  if (spec.style != NetworkSpec::Style::Plain) {
    if (spec.layers.size() != 2 || spec.layers.back().kind != LayerSpec::Kind::Dense)
      throw ConfigError("assemble: residual spec must be input + dense head");
    const ResidualStyle style = spec.style == NetworkSpec::Style::ResnetPre
                                    ? ResidualStyle::Pre
                                    : ResidualStyle::Post;
    const std::size_t ch = spec.block_channels;
    const bool normalized = hyper.norm.form != NormForm::Identity;
    model.add(std::make_unique<PspNode>(hyper.tau_s));
    if (normalized) model.add(std::make_unique<NormNode>(hyper.norm, C, "stem.norm"));
    model.add(std::make_unique<WeightedNode>(
        make_conv(C, ch, 3, hyper.theta, hyper.weight_scale, rng), "stem.conv"));
    C = ch;
    for (std::size_t b = 0; b < spec.block_count; ++b)
      model.add(build_residual_block(style, C, ch, hyper, rng,
                                     "block" + std::to_string(b)));
    append_func_layer(model, hyper, C, "head");
    model.add(std::make_unique<FlattenNode>());
    model.add(std::make_unique<WeightedNode>(
        make_dense(C * H * W, spec.layers.back().channels, hyper.theta, hyper.weight_scale, rng),
        "head.dense"));
    model.add(std::make_unique<SpikeNode>(hyper.theta, hyper.tau_r, hyper.surrogate,
                                          "out.spike"));
    return model;
  }

  if (spec.layers.back().kind != LayerSpec::Kind::Dense)
    throw ConfigError("assemble: last layer must be dense");

  std::size_t idx = 0;
  bool flattened = false;
  for (std::size_t i = 1; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.norm_after)
      throw ConfigError(
          "assemble: suffix normalization (after the weighted layer) is the prior-work "
          "placement and is not buildable here; use the 'n' prefix");
    for (std::size_t r = 0; r < l.repeat; ++r, ++idx) {
      const std::string name = "layer" + std::to_string(idx);
      if (l.kind == LayerSpec::Kind::Conv) {
        if (flattened) throw ConfigError("assemble: conv after dense is not supported");
        if (l.kernel != 3)
          throw ConfigError("assemble: conv kernels must be 3x3, got " +
                            std::to_string(l.kernel) + "x" + std::to_string(l.kernel));
        model.add(std::make_unique<PspNode>(hyper.tau_s));
        if (l.norm_before)
          model.add(std::make_unique<NormNode>(hyper.norm, C, name + ".norm"));
        model.add(std::make_unique<WeightedNode>(
            make_conv(C, l.channels, 3, hyper.theta, hyper.weight_scale, rng), name + ".conv"));
        model.add(std::make_unique<SpikeNode>(hyper.theta, hyper.tau_r, hyper.surrogate,
                                              name + ".spike"));
        C = l.channels;
      } else {
        model.add(std::make_unique<PspNode>(hyper.tau_s));
        model.add(std::make_unique<FlattenNode>());
        model.add(std::make_unique<WeightedNode>(
            make_dense(C * H * W, l.channels, hyper.theta, hyper.weight_scale, rng),
            name + ".dense"));
        model.add(std::make_unique<SpikeNode>(hyper.theta, hyper.tau_r, hyper.surrogate,
                                              name + ".spike"));
        C = l.channels;
        H = W = 1;
        flattened = true;
      }
    }
  }
  return model;
}

std::size_t weighted_layer_count(const NetworkSpec& spec) {
  if (spec.style != NetworkSpec::Style::Plain) return 2 * spec.block_count + 2;
  std::size_t k = 0;
  for (const LayerSpec& l : spec.layers)
    if (l.kind != LayerSpec::Kind::Input) k += l.repeat;
  return k;
}

}  // namespace psn
