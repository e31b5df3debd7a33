// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "sqwa/error.hpp"

namespace sqwa {
namespace {

constexpr std::uint8_t kIdxUnsignedByte = 0x08;

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

Shape Dataset::sample_shape() const {
  return Shape(images.shape().begin() + 1, images.shape().end());
}

std::size_t Dataset::sample_size() const { return element_count(sample_shape()); }

Batch Dataset::batch(std::span<const std::size_t> indices) const {
  const std::size_t stride = sample_size();
  Shape shape = images.shape();
  shape[0] = indices.size();
  Batch b{Tensor(shape), std::vector<int>(indices.size())};
  for (std::size_t s = 0; s < indices.size(); ++s) {
    const std::size_t src = indices[s];
    require(src < size(), ErrorCode::kInvalidArgument,
            "sample index " + std::to_string(src) + " out of range");
    std::copy_n(images.data() + src * stride, stride, b.inputs.data() + s * stride);
    b.labels[s] = labels[src];
  }
  return b;
}

Batch Dataset::all() const { return {images, labels}; }

void Dataset::validate() const {
  require(images.rank() >= 2, ErrorCode::kShapeMismatch,
          "dataset images must be (N, ...), got " + shape_string(images.shape()));
  require(images.dim(0) == labels.size(), ErrorCode::kCountMismatch,
          "dataset holds " + std::to_string(images.dim(0)) + " images but " +
              std::to_string(labels.size()) + " labels");
  for (int label : labels)
    require(label >= 0 && label < num_classes, ErrorCode::kLabelOutOfRange,
            "label " + std::to_string(label) + " outside [0, " +
                std::to_string(num_classes) + ")");
  require(normalization.scale > 0.0, ErrorCode::kInvalidArgument,
          "normalization scale must be positive");
}

IdxArray read_idx(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  const std::string where = path.string() + ": ";
  require(bytes.size() >= 4, ErrorCode::kTruncated, where + "truncated header");
  require(bytes[0] == 0 && bytes[1] == 0, ErrorCode::kBadMagic, where + "bad magic");
  require(bytes[2] == kIdxUnsignedByte, ErrorCode::kUnsupportedFormat,
          where + "unsupported IDX element type " + std::to_string(bytes[2]));
  const std::size_t ndims = bytes[3];
  require(ndims >= 1, ErrorCode::kUnsupportedFormat, where + "zero-dimensional IDX array");
  require(bytes.size() >= 4 + 4 * ndims, ErrorCode::kTruncated,
          where + "truncated dimension table");
  IdxArray array;
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    array.dims.push_back(read_be32(bytes.data() + 4 + 4 * d));
    count *= array.dims.back();
  }
  const std::size_t offset = 4 + 4 * ndims;
  require(bytes.size() - offset >= count, ErrorCode::kTruncated,
          where + "truncated payload: expected " + std::to_string(count) + " bytes, found " +
              std::to_string(bytes.size() - offset));
  require(bytes.size() - offset == count, ErrorCode::kUnsupportedFormat,
          where + "trailing bytes after payload");
  array.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return array;
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  require(!array.dims.empty() && array.dims.size() < 256, ErrorCode::kInvalidArgument,
          "IDX arrays need 1..255 dimensions");
  std::vector<std::uint8_t> bytes{0, 0, kIdxUnsignedByte,
                                  static_cast<std::uint8_t>(array.dims.size())};
  std::size_t count = 1;
  for (std::uint32_t d : array.dims) {
    append_be32(bytes, d);
    count *= d;
  }
  require(count == array.payload.size(), ErrorCode::kShapeMismatch,
          "IDX payload does not match its dimensions");
  bytes.insert(bytes.end(), array.payload.begin(), array.payload.end());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const IdxArray images = read_idx(images_path);
  const IdxArray labels = read_idx(labels_path);
  require(labels.dims.size() == 1, ErrorCode::kShapeMismatch,
          labels_path.string() + ": label file must be one-dimensional");
  require(images.dims[0] == labels.dims[0], ErrorCode::kCountMismatch,
          "count mismatch: " + std::to_string(images.dims[0]) + " images vs " +
              std::to_string(labels.dims[0]) + " labels");

  // (N, H, W) images gain a channel axis; (N, F) and (N, C, H, W) are kept.
  Shape shape(images.dims.begin(), images.dims.end());
  if (shape.size() == 3) shape.insert(shape.begin() + 1, 1);
  require(shape.size() == 2 || shape.size() == 4, ErrorCode::kUnsupportedFormat,
          images_path.string() + ": expected 2-, 3- or 4-dimensional image array");

  Dataset ds;
  ds.images = Tensor(shape, std::vector<double>(images.payload.begin(), images.payload.end()));
  ds.labels.assign(labels.payload.begin(), labels.payload.end());
  ds.num_classes =
      ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  ds.id = "idx:" + images_path.filename().string();
  ds.validate();
  return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
  ds.validate();
  IdxArray images;
  for (std::size_t d : ds.images.shape()) images.dims.push_back(static_cast<std::uint32_t>(d));
  images.payload.reserve(ds.images.size());
  for (double v : ds.images.values()) {
    const double raw = v * ds.normalization.scale + ds.normalization.mean;
    const double rounded = std::round(raw);
    require(rounded >= 0.0 && rounded <= 255.0 && std::abs(raw - rounded) < 1e-6,
            ErrorCode::kInvalidArgument, "dataset values are not representable as bytes");
    images.payload.push_back(static_cast<std::uint8_t>(rounded));
  }
  IdxArray labels{{static_cast<std::uint32_t>(ds.size())}, {}};
  for (int l : ds.labels) {
    require(l >= 0 && l < 256, ErrorCode::kInvalidArgument, "label does not fit in a byte");
    labels.payload.push_back(static_cast<std::uint8_t>(l));
  }
  write_idx(images_path, images);
  write_idx(labels_path, labels);
}

std::vector<std::vector<double>> blob_centers(int num_classes, int dims) {
  const auto k = static_cast<std::size_t>(num_classes);
  const auto d = static_cast<std::size_t>(dims);
  std::vector<std::vector<double>> centers(k, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < k; ++c) {
    if (d >= k) {
      centers[c][c] = 1.0;
    } else if (d >= 2) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
      centers[c][0] = std::cos(angle);
      centers[c][1] = std::sin(angle);
    } else {
      centers[c][0] = k == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(c) / static_cast<double>(k - 1);
    }
  }
  return centers;
}

Dataset synthetic_blobs(int num_classes, int samples_per_class, int dims, double spread,
                        std::uint64_t seed) {
  require(num_classes > 0 && samples_per_class > 0 && dims > 0 && spread >= 0.0,
          ErrorCode::kInvalidArgument, "synthetic_blobs parameters must be positive");
  const auto centers = blob_centers(num_classes, dims);
  const auto n = static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(samples_per_class);
  const auto d = static_cast<std::size_t>(dims);
  Dataset ds;
  ds.images = Tensor({n, d});
  ds.labels.resize(n);
  ds.num_classes = num_classes;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int s = 0; s < samples_per_class; ++s, ++row) {
      for (std::size_t j = 0; j < d; ++j)
        ds.images[row * d + j] = centers[static_cast<std::size_t>(c)][j] + spread * noise(rng);
      ds.labels[row] = c;
    }
  }
  std::ostringstream id;
  id << "blobs(classes=" << num_classes << ",per_class=" << samples_per_class
     << ",dims=" << dims << ",spread=" << spread << ",seed=" << seed << ")";
  ds.id = id.str();
  return ds;
}

Normalization compute_normalization(const Dataset& ds) {
  const auto values = ds.images.values();
  require(!values.empty(), ErrorCode::kEmptyDataset, "cannot normalize an empty dataset");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double scale = std::sqrt(var / n);
  return {mean, scale > 0.0 ? scale : 1.0};
}

Dataset normalize(const Dataset& ds) { return normalize(ds, compute_normalization(ds)); }

Dataset normalize(const Dataset& ds, const Normalization& reference) {
  require(reference.scale > 0.0, ErrorCode::kInvalidArgument,
          "normalization scale must be positive");
  Dataset out = ds;
  // Compose with any map already applied so the record stays raw -> current.
  for (double& v : out.images.storage()) v = (v - reference.mean) / reference.scale;
  out.normalization.mean = ds.normalization.mean + reference.mean * ds.normalization.scale;
  out.normalization.scale = ds.normalization.scale * reference.scale;
  return out;
}

Dataset take(const Dataset& ds, std::size_t count) {
  count = std::min(count, ds.size());
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Batch b = ds.batch(idx);
  Dataset out = ds;
  out.images = std::move(b.inputs);
  out.labels = std::move(b.labels);
  out.id = ds.id + "[:" + std::to_string(count) + "]";
  return out;
}

BatchPlan shuffle_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                          std::uint64_t epoch) {
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch size must be at least 1");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  BatchPlan plan;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                      order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return plan;
}

}  // namespace sqwa
