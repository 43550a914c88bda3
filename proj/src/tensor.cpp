#include "psn/tensor.hpp"

#include <cmath>

namespace psn {
namespace {

constexpr std::array<Axis, 5> kAxes = {Axis::N, Axis::C, Axis::H, Axis::W, Axis::T};

Shape5 reduced_shape(const Shape5& in, AxisSet axes) {
  Shape5 out = in;
  for (Axis a : kAxes) {
    if (axes.contains(a)) out.extent(a) = 1;
  }
  return out;
}

// Strides of a tensor as seen from a possibly larger reference shape;
// extent-1 axes get stride 0 (broadcast).
struct BStrides {
  std::array<std::size_t, 5> s;
};

BStrides broadcast_strides(const Shape5& shape, const Shape5& ref) {
  std::array<std::size_t, 5> ext = {shape.n, shape.c, shape.h, shape.w, shape.t};
  std::array<std::size_t, 5> refext = {ref.n, ref.c, ref.h, ref.w, ref.t};
  BStrides bs{};
  std::size_t stride = 1;
  for (int i = 4; i >= 0; --i) {
    if (ext[i] != 1 && ext[i] != refext[i])
      throw ShapeError("broadcast_binary: extent mismatch on axis " + std::to_string(i) +
                       " (" + std::to_string(ext[i]) + " vs " + std::to_string(refext[i]) + ")");
    bs.s[i] = (ext[i] == 1) ? 0 : stride;
    stride *= ext[i];
  }
  return bs;
}

// Both statistics modes (and the per-channel parameters) have extent 1
// on H, W and T, so the stat element is constant over each contiguous
// h*w*t run; loops below use that to stay vectorizable.
bool contiguous_runs(const BStrides& bs) { return bs.s[2] == 0 && bs.s[3] == 0 && bs.s[4] == 0; }

}  // namespace

std::string Shape5::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + "," + std::to_string(t) + ")";
}

void Shape5::validate() const {
  if (n < 1 || c < 1 || h < 1 || w < 1 || t < 1)
    throw ShapeError("Shape5: all extents must be >= 1, got " + str());
}

bool AnalogTensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::size_t SpikeTensor::count() const {
  std::size_t k = 0;
  for (double v : data_.values()) k += (v != 0.0);
  return k;
}

bool SpikeTensor::is_binary() const {
  for (double v : data_.values())
    if (v != 0.0 && v != 1.0) return false;
  return true;
}

AnalogTensor reduce_second_raw_moment(const AnalogTensor& x, AxisSet axes) {
  if (axes.empty()) throw ContractError("reduce_second_raw_moment: empty axis set");
  const Shape5 os = reduced_shape(x.shape(), axes);
  AnalogTensor out(os, 0.0);
  const BStrides bo = broadcast_strides(os, x.shape());
  const Shape5& s = x.shape();
  const double* xv = x.data();
  double* ov = out.data();
  if (contiguous_runs(bo)) {
    const std::size_t run = s.h * s.w * s.t;
    std::size_t i = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < run; ++k, ++i) acc += xv[i] * xv[i];
        ov[n * bo.s[0] + c * bo.s[1]] += acc;
      }
  } else {
    std::size_t i = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t h = 0; h < s.h; ++h)
          for (std::size_t w = 0; w < s.w; ++w) {
            const std::size_t base = n * bo.s[0] + c * bo.s[1] + h * bo.s[2] + w * bo.s[3];
            for (std::size_t t = 0; t < s.t; ++t, ++i) {
              const double v = xv[i];
              ov[base + t * bo.s[4]] += v * v;
            }
          }
  }
  const double count = static_cast<double>(x.size()) / static_cast<double>(os.size());
  for (double& v : out.values()) v /= count;
  return out;
}

MeanVar reduce_mean_and_variance(const AnalogTensor& x, AxisSet axes) {
  if (axes.empty()) throw ContractError("reduce_mean_and_variance: empty axis set");
  const Shape5 os = reduced_shape(x.shape(), axes);
  const BStrides bo = broadcast_strides(os, x.shape());
  const Shape5& s = x.shape();
  const double count = static_cast<double>(x.size()) / static_cast<double>(os.size());

  AnalogTensor mean(os, 0.0);
  AnalogTensor var(os, 0.0);
  const double* xv = x.data();
  double* mv = mean.data();
  double* vv = var.data();
  if (contiguous_runs(bo)) {
    const std::size_t run = s.h * s.w * s.t;
    std::size_t i = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < run; ++k) acc += xv[i + k];
        mv[n * bo.s[0] + c * bo.s[1]] += acc;
        i += run;
      }
    for (double& v : mean.values()) v /= count;
    i = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c) {
        const double mu = mv[n * bo.s[0] + c * bo.s[1]];
        double acc = 0.0;
        for (std::size_t k = 0; k < run; ++k) {
          const double d = xv[i + k] - mu;
          acc += d * d;
        }
        vv[n * bo.s[0] + c * bo.s[1]] += acc;
        i += run;
      }
    for (double& v : var.values()) v /= count;
    return {std::move(mean), std::move(var)};
  }
  {
    std::size_t i = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t h = 0; h < s.h; ++h)
          for (std::size_t w = 0; w < s.w; ++w) {
            const std::size_t base = n * bo.s[0] + c * bo.s[1] + h * bo.s[2] + w * bo.s[3];
            for (std::size_t t = 0; t < s.t; ++t, ++i) mv[base + t * bo.s[4]] += xv[i];
          }
    for (double& v : mean.values()) v /= count;
  }
  {
    std::size_t i = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t h = 0; h < s.h; ++h)
          for (std::size_t w = 0; w < s.w; ++w) {
            const std::size_t base = n * bo.s[0] + c * bo.s[1] + h * bo.s[2] + w * bo.s[3];
            for (std::size_t t = 0; t < s.t; ++t, ++i) {
              const double d = xv[i] - mv[base + t * bo.s[4]];
              vv[base + t * bo.s[4]] += d * d;
            }
          }
    for (double& v : var.values()) v /= count;
  }
  return {std::move(mean), std::move(var)};
}

AnalogTensor broadcast_binary(const AnalogTensor& x, const AnalogTensor& stat, BinaryOp op) {
  const BStrides bs = broadcast_strides(stat.shape(), x.shape());
  const Shape5& s = x.shape();
  AnalogTensor out(s);
  const double* xv = x.data();
  const double* sv = stat.data();
  double* ov = out.data();
  if (op == BinaryOp::Div) {
    for (std::size_t i = 0; i < stat.size(); ++i)
      if (sv[i] == 0.0) throw ContractError("broadcast_binary: division by zero statistic");
  }
  if (contiguous_runs(bs)) {
    const std::size_t run = s.h * s.w * s.t;
    std::size_t i = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c) {
        const double b = sv[n * bs.s[0] + c * bs.s[1]];
        switch (op) {
          case BinaryOp::Add:
            for (std::size_t k = 0; k < run; ++k) ov[i + k] = xv[i + k] + b;
            break;
          case BinaryOp::Sub:
            for (std::size_t k = 0; k < run; ++k) ov[i + k] = xv[i + k] - b;
            break;
          case BinaryOp::Mul:
            for (std::size_t k = 0; k < run; ++k) ov[i + k] = xv[i + k] * b;
            break;
          case BinaryOp::Div: {
            const double inv = 1.0 / b;
            for (std::size_t k = 0; k < run; ++k) ov[i + k] = xv[i + k] * inv;
            break;
          }
        }
        i += run;
      }
    return out;
  }
  std::size_t i = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w) {
          const std::size_t base = n * bs.s[0] + c * bs.s[1] + h * bs.s[2] + w * bs.s[3];
          for (std::size_t t = 0; t < s.t; ++t, ++i) {
            const double b = sv[base + t * bs.s[4]];
            switch (op) {
              case BinaryOp::Add: ov[i] = xv[i] + b; break;
              case BinaryOp::Sub: ov[i] = xv[i] - b; break;
              case BinaryOp::Mul: ov[i] = xv[i] * b; break;
              case BinaryOp::Div: ov[i] = xv[i] / b; break;
            }
          }
        }
  return out;
}

AnalogTensor reduce_to_shape(const AnalogTensor& g, const Shape5& stat_shape) {
  const BStrides bo = broadcast_strides(stat_shape, g.shape());
  AnalogTensor out(stat_shape, 0.0);
  const Shape5& s = g.shape();
  const double* gv = g.data();
  double* ov = out.data();
  if (contiguous_runs(bo)) {
    const std::size_t run = s.h * s.w * s.t;
    std::size_t i = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < run; ++k, ++i) acc += gv[i];
        ov[n * bo.s[0] + c * bo.s[1]] += acc;
      }
    return out;
  }
  std::size_t i = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w) {
          const std::size_t base = n * bo.s[0] + c * bo.s[1] + h * bo.s[2] + w * bo.s[3];
          for (std::size_t t = 0; t < s.t; ++t, ++i) ov[base + t * bo.s[4]] += gv[i];
        }
  return out;
}

}  // namespace psn
