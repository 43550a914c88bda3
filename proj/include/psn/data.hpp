#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "psn/tensor.hpp"

namespace psn {

// Address-event record from a neuromorphic event file.
struct Event {
  std::uint8_t x{0};        // 0..33
  std::uint8_t y{0};        // 0..33
  std::uint8_t polarity{0}; // 0 or 1
  std::uint32_t timestamp_us{0};
};

inline constexpr std::size_t kEventGridSide = 34;

// 5-byte records: byte0 = x, byte1 = y, byte2 bit 7 = polarity, the
// remaining 23 bits big-endian = timestamp in microseconds. Events are
// sorted into nondecreasing timestamp order.
std::vector<Event> decode_aer(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_aer(const std::vector<Event>& events);

// Bin events at 1 ms into a (1,2,34,34,T) spike tensor; channel =
// polarity; events beyond the window are dropped; multiple events in a
// bin saturate to a single spike.
SpikeTensor events_to_spikes(const std::vector<Event>& events, std::size_t T);

struct IdxImages {
  std::size_t count{0}, rows{0}, cols{0};
  std::vector<std::uint8_t> pixels;  // count*rows*cols, row-major
};

IdxImages decode_idx_images(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> decode_idx_labels(const std::vector<std::uint8_t>& bytes);

// Bilinear resize of a u8 grayscale image.
std::vector<double> resize_bilinear(const std::uint8_t* pixels, std::size_t rows,
                                    std::size_t cols, std::size_t out_rows,
                                    std::size_t out_cols);

// Rate coding of a static image: resize to 34x34, scale to [0,1], then
// an independent Bernoulli draw per time step. (1,1,34,34,T).
SpikeTensor encode_static(const std::uint8_t* pixels, std::size_t rows, std::size_t cols,
                          std::size_t T, std::uint64_t sample_seed);

// Reads a whole file; transparently inflates when the path ends in .gz.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Deterministic seeded permutation split of [0, total).
DatasetSplit split_dataset(std::size_t total, std::size_t validation_count, std::uint64_t seed);

// Per-sample seed derivation; stable across epochs.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

// Uniform sample access for the training loop: each sample densifies
// to a (1,C,H,W,T) spike tensor on demand.
class SpikeDataset {
 public:
  virtual ~SpikeDataset() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t label(std::size_t i) const = 0;
  virtual SpikeTensor spikes(std::size_t i) const = 0;
  virtual Shape5 sample_shape() const = 0;  // n = 1
};

// Directory layout: root/<split>/<class 0..9>/*.bin of AER events.
class NMnistDataset final : public SpikeDataset {
 public:
  NMnistDataset(const std::filesystem::path& root, const std::string& split, std::size_t T,
                std::size_t max_per_class = 0);
  std::size_t size() const override { return samples_.size(); }
  std::size_t label(std::size_t i) const override { return samples_[i].label; }
  SpikeTensor spikes(std::size_t i) const override;
  Shape5 sample_shape() const override { return Shape5{1, 2, 34, 34, T_}; }
  const std::vector<Event>& events(std::size_t i) const { return samples_[i].events; }

 private:
  struct Sample {
    std::vector<Event> events;
    std::size_t label;
  };
  std::vector<Sample> samples_;
  std::size_t T_;
};

// IDX image/label pair, optionally .gz; Bernoulli rate coding.
class FMnistDataset final : public SpikeDataset {
 public:
  FMnistDataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                std::size_t T, std::uint64_t encode_seed, std::size_t max_samples = 0);
  std::size_t size() const override { return labels_.size(); }
  std::size_t label(std::size_t i) const override { return labels_[i]; }
  SpikeTensor spikes(std::size_t i) const override;
  Shape5 sample_shape() const override { return Shape5{1, 1, 34, 34, T_}; }

 private:
  IdxImages images_;
  std::vector<std::uint8_t> labels_;
  std::size_t T_;
  std::uint64_t encode_seed_;
};

struct Batch {
  SpikeTensor spikes;
  std::vector<std::size_t> labels;
};

Batch make_batch(const SpikeDataset& data, const std::vector<std::size_t>& indices);

}  // namespace psn
