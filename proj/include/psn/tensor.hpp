#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "psn/errors.hpp"

namespace psn {

enum class Axis : unsigned { N = 0, C = 1, H = 2, W = 3, T = 4 };

// Dense 5-axis grid: batch, channel, height, width, time.
// Row-major with T innermost; temporal scans are unit stride.
struct Shape5 {
  std::size_t n{1}, c{1}, h{1}, w{1}, t{1};

  std::size_t size() const { return n * c * h * w * t; }
  std::size_t extent(Axis a) const {
    switch (a) {
      case Axis::N: return n;
      case Axis::C: return c;
      case Axis::H: return h;
      case Axis::W: return w;
      case Axis::T: return t;
    }
    return 0;
  }
  std::size_t& extent(Axis a) {
    switch (a) {
      case Axis::N: return n;
      case Axis::C: return c;
      case Axis::H: return h;
      case Axis::W: return w;
      default: return t;
    }
  }
  bool operator==(const Shape5&) const = default;
  std::string str() const;
  void validate() const;  // all extents >= 1
};

class AxisSet {
 public:
  AxisSet() = default;
  AxisSet(std::initializer_list<Axis> axes) {
    for (Axis a : axes) bits_ |= 1u << static_cast<unsigned>(a);
  }
  // Statistics axes of the two normalization modes: per-channel over
  // W*H*N*T, and per-sample over W*H*C*T.
  static AxisSet bn_axes() { return {Axis::N, Axis::H, Axis::W, Axis::T}; }
  static AxisSet ln_axes() { return {Axis::C, Axis::H, Axis::W, Axis::T}; }

  bool contains(Axis a) const { return bits_ & (1u << static_cast<unsigned>(a)); }
  bool empty() const { return bits_ == 0; }
  bool operator==(const AxisSet&) const = default;

 private:
  unsigned bits_{0};
};

class AnalogTensor {
 public:
  AnalogTensor() = default;
  explicit AnalogTensor(Shape5 shape, double fill = 0.0)
      : shape_(shape), values_(shape.size(), fill) {
    shape_.validate();
  }

  const Shape5& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                    std::size_t t) const {
    return (((n * shape_.c + c) * shape_.h + h) * shape_.w + w) * shape_.t + t;
  }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t t) {
    return values_[index(n, c, h, w, t)];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t t) const {
    return values_[index(n, c, h, w, t)];
  }

  void fill(double v) { values_.assign(values_.size(), v); }
  bool all_finite() const;

 private:
  Shape5 shape_;
  std::vector<double> values_;
};

// Binary spike trains on the same grid. Entries are stored as 0.0/1.0
// doubles so downstream linear maps can consume them directly.
class SpikeTensor {
 public:
  SpikeTensor() = default;
  explicit SpikeTensor(Shape5 shape) : data_(shape) {}

  const Shape5& shape() const { return data_.shape(); }
  std::size_t size() const { return data_.size(); }

  void set_spike(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t t) {
    data_.at(n, c, h, w, t) = 1.0;
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t t) const {
    return data_.at(n, c, h, w, t);
  }

  AnalogTensor& analog() { return data_; }
  const AnalogTensor& analog() const { return data_; }

  std::size_t count() const;
  bool is_binary() const;

 private:
  AnalogTensor data_;
};

enum class BinaryOp { Add, Sub, Mul, Div };

// Mean of x^2 over the reduction axes; output extent 1 along each
// member axis, broadcast-compatible with x. Accumulates in double.
AnalogTensor reduce_second_raw_moment(const AnalogTensor& x, AxisSet axes);

struct MeanVar {
  AnalogTensor mean;
  AnalogTensor variance;  // biased: divide by X
};
MeanVar reduce_mean_and_variance(const AnalogTensor& x, AxisSet axes);

// Elementwise op with implicit expansion of stat's size-1 axes a la BN.
AnalogTensor broadcast_binary(const AnalogTensor& x, const AnalogTensor& stat, BinaryOp op);

// Sum of g over the axes where stat has extent 1 relative to ref; the
// adjoint of broadcasting. Output matches stat's shape.
AnalogTensor reduce_to_shape(const AnalogTensor& g, const Shape5& stat_shape);

}  // namespace psn
