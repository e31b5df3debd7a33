// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sqwa/averaging.hpp"
#include "sqwa/network.hpp"
#include "sqwa/qat.hpp"
#include "sqwa/quantizer.hpp"

namespace sqwa {

// A checkpoint is a directory holding manifest.json (topology, tensor
// descriptors, quantization record, provenance, CRC-32 of the payload) and
// payload.bin (little-endian binary32 values, or integer grid levels for
// quantized tensors).
inline constexpr int kCheckpointSchemaVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kPayloadFile = "payload.bin";
inline constexpr const char* kBankManifestFile = "bank.json";

enum class CheckpointKind { kFullPrecision, kQuantized, kShadow, kAveraged, kOptimizer };
std::string_view to_string(CheckpointKind kind);
CheckpointKind checkpoint_kind_from_string(std::string_view name);

struct Provenance {
  std::string stage;
  std::uint64_t seed = 0;
  int epoch = -1;
  double lr = 0.0;
  std::string schedule;
};

enum class TensorEncoding { kF32, kI8, kI32 };

struct TensorDescriptor {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  std::size_t bytes = 0;
  TensorEncoding encoding = TensorEncoding::kF32;
};

struct CheckpointManifest {
  int schema_version = kCheckpointSchemaVersion;
  CheckpointKind kind = CheckpointKind::kFullPrecision;
  Architecture topology;
  std::vector<TensorDescriptor> tensors;
  std::optional<std::vector<QuantizerConfig>> quantization;
  Provenance provenance;
  std::size_t payload_bytes = 0;
  std::uint32_t crc32 = 0;
  // averaged checkpoints
  int average_count = 0;
  int effective_bits = 0;
  std::vector<int> average_epochs;
  // optimizer checkpoints
  double momentum = 0.0;
  double l2_scale = 0.0;
};

using CheckpointObject =
    std::variant<Network, QuantizedModel, ShadowModel, AveragedModel, OptimizerState>;

struct Checkpoint {
  CheckpointManifest manifest;
  CheckpointObject object;
};

CheckpointManifest save(const Network& net, const std::filesystem::path& dir,
                        const Provenance& provenance = {});
CheckpointManifest save(const QuantizedModel& model, const std::filesystem::path& dir,
                        const Provenance& provenance = {});
/// Persists the shadow weights and the frozen grids; the applied weights are
/// rebuilt on load by quantizing the stored shadow.
CheckpointManifest save(const ShadowModel& model, const std::filesystem::path& dir,
                        const Provenance& provenance = {});
/// Persists integer level sums so the averaged grid is reproduced exactly.
CheckpointManifest save(const AveragedModel& model, const std::filesystem::path& dir,
                        const Provenance& provenance = {});
CheckpointManifest save(const OptimizerState& state, const Architecture& arch,
                        const std::filesystem::path& dir, const Provenance& provenance = {});

/// Verifies schema version, payload coverage, checksum and tensor shapes.
Checkpoint load(const std::filesystem::path& dir);
CheckpointManifest read_manifest(const std::filesystem::path& dir);

Network load_network(const std::filesystem::path& dir);
QuantizedModel load_quantized(const std::filesystem::path& dir);
ShadowModel load_shadow(const std::filesystem::path& dir);
AveragedModel load_averaged(const std::filesystem::path& dir);

/// The network a checkpoint evaluates as: full-precision weights, quantized
/// weights, the applied side of a shadow model, or the averaged weights.
Network evaluation_network(const Checkpoint& ckpt);

/// Bank directory: bank.json (ordering, grids, per-capture metrics) plus one
/// quantized checkpoint per capture.
void save_bank(const CaptureBank& bank, const std::filesystem::path& dir);
/// Throws kBankIncomplete when a listed capture is missing.
CaptureBank load_bank(const std::filesystem::path& dir);

/// Whether `dir` holds a checkpoint that loads cleanly.
bool checkpoint_exists(const std::filesystem::path& dir);

std::uint32_t crc32_of(const std::vector<std::uint8_t>& bytes);

}  // namespace sqwa
