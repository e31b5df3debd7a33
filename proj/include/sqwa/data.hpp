// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sqwa/tensor.hpp"

namespace sqwa {

// Affine map applied to raw features: normalized = (raw - mean) / scale.
struct Normalization {
  double mean = 0.0;
  double scale = 1.0;
};

struct Batch {
  Tensor inputs;
  std::vector<int> labels;
};

struct Dataset {
  Tensor images;  // (N, features) or (N, C, H, W)
  std::vector<int> labels;
  int num_classes = 0;
  Normalization normalization;
  std::string id;

  std::size_t size() const noexcept { return labels.size(); }
  Shape sample_shape() const;
  std::size_t sample_size() const;

  Batch batch(std::span<const std::size_t> indices) const;
  Batch all() const;
  // Throws if labels and images disagree or a label is out of range.
  void validate() const;
};

using BatchPlan = std::vector<std::vector<std::size_t>>;

/// Parses an IDX image file (N x d1 x ... ) and an IDX label file (N) into a
/// dataset. Pixel values are kept raw; call normalize() to standardize.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;
};

IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);
/// Inverse of load_idx for datasets whose raw values are bytes.
void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

/// Gaussian clusters around deterministic class centers. Centers are the
/// standard basis vectors when dims >= num_classes, otherwise evenly spaced
/// points on the unit circle in the first two dimensions (a line for dims 1).
Dataset synthetic_blobs(int num_classes, int samples_per_class, int dims,
                        double spread, std::uint64_t seed);

std::vector<std::vector<double>> blob_centers(int num_classes, int dims);

/// Standardizes features to zero mean / unit scale using global statistics
/// and records the map. With `reference` the statistics are taken from it
/// (use the training split when normalizing a test split).
Dataset normalize(const Dataset& ds);
Dataset normalize(const Dataset& ds, const Normalization& reference);
Normalization compute_normalization(const Dataset& ds);

/// First `count` samples, in order.
Dataset take(const Dataset& ds, std::size_t count);

/// Seeded partition of [0, N) into batches; the permutation depends only on
/// (seed, epoch). The final partial batch is kept.
BatchPlan shuffle_batches(const Dataset& ds, std::size_t batch_size,
                          std::uint64_t seed, std::uint64_t epoch);

}  // namespace sqwa
