#include "psn/data.hpp"

#include <algorithm>
#include <fstream>

#include <zlib.h>

#include "psn/errors.hpp"

namespace psn {

std::vector<Event> decode_aer(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 5 != 0)
    throw FormatError("AER stream truncated: " + std::to_string(bytes.size()) +
                      " bytes is not a multiple of 5 (offset " +
                      std::to_string(bytes.size() - bytes.size() % 5) + ")");
  std::vector<Event> events;
  events.reserve(bytes.size() / 5);
  for (std::size_t off = 0; off < bytes.size(); off += 5) {
    Event e;
    e.x = bytes[off];
    e.y = bytes[off + 1];
    e.polarity = (bytes[off + 2] >> 7) & 1;
    e.timestamp_us = (static_cast<std::uint32_t>(bytes[off + 2] & 0x7F) << 16) |
                     (static_cast<std::uint32_t>(bytes[off + 3]) << 8) |
                     static_cast<std::uint32_t>(bytes[off + 4]);
    if (e.x >= kEventGridSide || e.y >= kEventGridSide)
      throw FormatError("AER coordinate out of 34x34 range at offset " + std::to_string(off));
    events.push_back(e);
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.timestamp_us < b.timestamp_us; });
  return events;
}

std::vector<std::uint8_t> encode_aer(const std::vector<Event>& events) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(events.size() * 5);
  for (const Event& e : events) {
    if (e.x >= kEventGridSide || e.y >= kEventGridSide)
      throw FormatError("encode_aer: coordinate out of range");
    if (e.timestamp_us >= (1u << 23)) throw FormatError("encode_aer: timestamp exceeds 23 bits");
    bytes.push_back(e.x);
    bytes.push_back(e.y);
    bytes.push_back(static_cast<std::uint8_t>((e.polarity ? 0x80 : 0x00) |
                                              ((e.timestamp_us >> 16) & 0x7F)));
    bytes.push_back(static_cast<std::uint8_t>((e.timestamp_us >> 8) & 0xFF));
    bytes.push_back(static_cast<std::uint8_t>(e.timestamp_us & 0xFF));
  }
  return bytes;
}

SpikeTensor events_to_spikes(const std::vector<Event>& events, std::size_t T) {
  SpikeTensor out(Shape5{1, 2, kEventGridSide, kEventGridSide, T});
  for (const Event& e : events) {
    const std::size_t bin = e.timestamp_us / 1000;  // 1 ms steps
    if (bin >= T) continue;
    out.set_spike(0, e.polarity, e.y, e.x, bin);
  }
  return out;
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  if (off + 4 > b.size()) throw FormatError("IDX header truncated");
  return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

}  // namespace

IdxImages decode_idx_images(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != 0x00000803)
    throw FormatError("IDX image magic mismatch: got 0x" + std::to_string(magic));
  IdxImages img;
  img.count = read_be32(bytes, 4);
  img.rows = read_be32(bytes, 8);
  img.cols = read_be32(bytes, 12);
  const std::size_t expected = 16 + img.count * img.rows * img.cols;
  if (bytes.size() != expected)
    throw FormatError("IDX image payload size mismatch: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  img.pixels.assign(bytes.begin() + 16, bytes.end());
  return img;
}

std::vector<std::uint8_t> decode_idx_labels(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != 0x00000801)
    throw FormatError("IDX label magic mismatch: got 0x" + std::to_string(magic));
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() != 8 + count)
    throw FormatError("IDX label payload size mismatch");
  return {bytes.begin() + 8, bytes.end()};
}

std::vector<double> resize_bilinear(const std::uint8_t* pixels, std::size_t rows,
                                    std::size_t cols, std::size_t out_rows,
                                    std::size_t out_cols) {
  std::vector<double> out(out_rows * out_cols);
  const double sy = static_cast<double>(rows) / static_cast<double>(out_rows);
  const double sx = static_cast<double>(cols) / static_cast<double>(out_cols);
  for (std::size_t oy = 0; oy < out_rows; ++oy) {
    // Align pixel centers.
    const double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    const double cy = std::clamp(fy, 0.0, static_cast<double>(rows - 1));
    const std::size_t y0 = static_cast<std::size_t>(cy);
    const std::size_t y1 = std::min(y0 + 1, rows - 1);
    const double wy = cy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < out_cols; ++ox) {
      const double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      const double cx = std::clamp(fx, 0.0, static_cast<double>(cols - 1));
      const std::size_t x0 = static_cast<std::size_t>(cx);
      const std::size_t x1 = std::min(x0 + 1, cols - 1);
      const double wx = cx - static_cast<double>(x0);
      const double top = (1.0 - wx) * pixels[y0 * cols + x0] + wx * pixels[y0 * cols + x1];
      const double bot = (1.0 - wx) * pixels[y1 * cols + x0] + wx * pixels[y1 * cols + x1];
      out[oy * out_cols + ox] = (1.0 - wy) * top + wy * bot;
    }
  }
  return out;
}

SpikeTensor encode_static(const std::uint8_t* pixels, std::size_t rows, std::size_t cols,
                          std::size_t T, std::uint64_t sample_seed) {
  const std::vector<double> resized =
      resize_bilinear(pixels, rows, cols, kEventGridSide, kEventGridSide);
  SpikeTensor out(Shape5{1, 1, kEventGridSide, kEventGridSide, T});
  std::mt19937_64 rng(sample_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double* v = out.analog().data();
  for (std::size_t px = 0; px < resized.size(); ++px) {
    const double p = resized[px] / 255.0;
    for (std::size_t t = 0; t < T; ++t)
      v[px * T + t] = (unit(rng) < p) ? 1.0 : 0.0;
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int got;
    while ((got = gzread(f, buf, sizeof(buf))) > 0) out.insert(out.end(), buf, buf + got);
    const bool bad = got < 0;
    gzclose(f);
    if (bad) throw FormatError("gzip decode failed for " + path.string());
    return out;
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

DatasetSplit split_dataset(std::size_t total, std::size_t validation_count, std::uint64_t seed) {
  if (validation_count > total)
    throw ContractError("split_dataset: validation count exceeds dataset size");
  std::vector<std::size_t> perm(total);
  for (std::size_t i = 0; i < total; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  DatasetSplit split;
  split.validation.assign(perm.begin(), perm.begin() + validation_count);
  split.train.assign(perm.begin() + validation_count, perm.end());
  return split;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 step
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

NMnistDataset::NMnistDataset(const std::filesystem::path& root, const std::string& split,
                             std::size_t T, std::size_t max_per_class)
    : T_(T) {
  namespace fs = std::filesystem;
  const fs::path base = root / split;
  if (!fs::is_directory(base))
    throw FormatError("N-MNIST split directory not found: " + base.string());
  for (std::size_t cls = 0; cls < 10; ++cls) {
    const fs::path dir = base / std::to_string(cls);
    if (!fs::is_directory(dir))
      throw FormatError("N-MNIST class directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".bin")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (max_per_class && files.size() > max_per_class) files.resize(max_per_class);
    for (const fs::path& f : files)
      samples_.push_back({decode_aer(read_file(f)), cls});
  }
  if (samples_.empty()) throw FormatError("N-MNIST: no .bin files under " + base.string());
}

SpikeTensor NMnistDataset::spikes(std::size_t i) const {
  return events_to_spikes(samples_[i].events, T_);
}

FMnistDataset::FMnistDataset(const std::filesystem::path& images,
                             const std::filesystem::path& labels, std::size_t T,
                             std::uint64_t encode_seed, std::size_t max_samples)
    : T_(T), encode_seed_(encode_seed) {
  images_ = decode_idx_images(read_file(images));
  labels_ = decode_idx_labels(read_file(labels));
  if (images_.count != labels_.size())
    throw FormatError("IDX image/label count mismatch: " + std::to_string(images_.count) +
                      " vs " + std::to_string(labels_.size()));
  if (max_samples && labels_.size() > max_samples) {
    labels_.resize(max_samples);
    images_.count = max_samples;
    images_.pixels.resize(max_samples * images_.rows * images_.cols);
  }
}

SpikeTensor FMnistDataset::spikes(std::size_t i) const {
  const std::uint8_t* px = images_.pixels.data() + i * images_.rows * images_.cols;
  return encode_static(px, images_.rows, images_.cols, T_, mix_seed(encode_seed_, i));
}

Batch make_batch(const SpikeDataset& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("make_batch: empty index list");
  Shape5 shape = data.sample_shape();
  shape.n = indices.size();
  Batch batch{SpikeTensor(shape), {}};
  batch.labels.reserve(indices.size());
  const std::size_t stride = shape.c * shape.h * shape.w * shape.t;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    SpikeTensor s = data.spikes(indices[b]);
    if (s.size() != stride) throw ShapeError("make_batch: sample shape mismatch");
    std::copy(s.analog().values().begin(), s.analog().values().end(),
              batch.spikes.analog().data() + b * stride);
    batch.labels.push_back(data.label(indices[b]));
  }
  return batch;
}

}  // namespace psn
