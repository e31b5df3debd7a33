// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>

#include "sqwa/error.hpp"
#include "sqwa/json_io.hpp"

namespace sqwa {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t encoding_width(TensorEncoding e) {
  switch (e) {
    case TensorEncoding::kF32: return 4;
    case TensorEncoding::kI8: return 1;
    case TensorEncoding::kI32: return 4;
  }
  return 0;
}

std::string_view encoding_name(TensorEncoding e) {
  switch (e) {
    case TensorEncoding::kF32: return "f32le";
    case TensorEncoding::kI8: return "i8";
    case TensorEncoding::kI32: return "i32le";
  }
  return "?";
}

TensorEncoding encoding_from_name(std::string_view name) {
  if (name == "f32le") return TensorEncoding::kF32;
  if (name == "i8") return TensorEncoding::kI8;
  if (name == "i32le") return TensorEncoding::kI32;
  fail(ErrorCode::kUnsupportedFormat, "unknown tensor encoding '" + std::string(name) + "'");
}

std::string param_name(const Architecture& arch, std::size_t p, std::string_view suffix) {
  return "layer" + std::to_string(arch.layer_of_param(p)) + "." + std::string(suffix);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

class PayloadWriter {
 public:
  void add_f32(std::string name, const Tensor& t) {
    const std::size_t start = begin(std::move(name), t.shape(), TensorEncoding::kF32);
    for (double v : t.values()) put_u32(bytes_, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    finish(start);
  }

  void add_levels(std::string name, const Shape& shape, const std::vector<std::int64_t>& levels,
                  TensorEncoding encoding) {
    const std::size_t start = begin(std::move(name), shape, encoding);
    for (std::int64_t level : levels) {
      if (encoding == TensorEncoding::kI8) {
        require(level >= -128 && level <= 127, ErrorCode::kInvalidArgument,
                "grid level does not fit the i8 encoding");
        bytes_.push_back(static_cast<std::uint8_t>(static_cast<std::int8_t>(level)));
      } else {
        require(level >= INT32_MIN && level <= INT32_MAX, ErrorCode::kInvalidArgument,
                "grid level does not fit the i32 encoding");
        put_u32(bytes_, static_cast<std::uint32_t>(static_cast<std::int32_t>(level)));
      }
    }
    finish(start);
  }

  std::vector<TensorDescriptor>& descriptors() { return descriptors_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::size_t begin(std::string name, const Shape& shape, TensorEncoding encoding) {
    descriptors_.push_back({std::move(name), shape, bytes_.size(), 0, encoding});
    return bytes_.size();
  }
  void finish(std::size_t start) { descriptors_.back().bytes = bytes_.size() - start; }

  std::vector<TensorDescriptor> descriptors_;
  std::vector<std::uint8_t> bytes_;
};

json manifest_to_json(const CheckpointManifest& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["kind"] = std::string(to_string(m.kind));
  j["topology"] = to_json(m.topology);
  json tensors = json::array();
  for (const auto& d : m.tensors)
    tensors.push_back({{"name", d.name},
                       {"shape", d.shape},
                       {"offset", d.offset},
                       {"bytes", d.bytes},
                       {"encoding", std::string(encoding_name(d.encoding))}});
  j["tensors"] = tensors;
  if (m.quantization) {
    json steps = json::array();
    for (const auto& c : *m.quantization) steps.push_back(c.step);
    j["quantization"] = {{"bits", m.quantization->empty() ? 0 : m.quantization->front().bits},
                         {"steps", steps}};
  }
  if (m.kind == CheckpointKind::kAveraged)
    j["averaging"] = {{"count", m.average_count},
                      {"effective_bits", m.effective_bits},
                      {"epochs", m.average_epochs}};
  if (m.kind == CheckpointKind::kOptimizer)
    j["optimizer"] = {{"momentum", m.momentum}, {"l2_scale", m.l2_scale}};
  j["provenance"] = {{"stage", m.provenance.stage},
                     {"seed", m.provenance.seed},
                     {"epoch", m.provenance.epoch},
                     {"lr", m.provenance.lr},
                     {"schedule", m.provenance.schedule}};
  char crc[16];
  std::snprintf(crc, sizeof(crc), "%08x", m.crc32);
  j["payload"] = {{"file", kPayloadFile}, {"bytes", m.payload_bytes}, {"crc32", crc}};
  return j;
}

CheckpointManifest manifest_from_json(const json& j, const fs::path& where) {
  CheckpointManifest m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    require(m.schema_version == kCheckpointSchemaVersion, ErrorCode::kUnsupportedVersion,
            where.string() + ": unsupported version " + std::to_string(m.schema_version) +
                " (this build reads version " + std::to_string(kCheckpointSchemaVersion) + ")");
    m.kind = checkpoint_kind_from_string(j.at("kind").get<std::string>());
    m.topology = architecture_from_json(j.at("topology"));
    for (const auto& d : j.at("tensors"))
      m.tensors.push_back({d.at("name").get<std::string>(), d.at("shape").get<Shape>(),
                           d.at("offset").get<std::size_t>(), d.at("bytes").get<std::size_t>(),
                           encoding_from_name(d.at("encoding").get<std::string>())});
    if (j.contains("quantization")) {
      const int bits = j["quantization"].at("bits").get<int>();
      std::vector<QuantizerConfig> configs;
      for (double s : j["quantization"].at("steps").get<std::vector<double>>())
        configs.push_back({bits, s});
      m.quantization = std::move(configs);
    }
    if (j.contains("averaging")) {
      m.average_count = j["averaging"].at("count").get<int>();
      m.effective_bits = j["averaging"].at("effective_bits").get<int>();
      m.average_epochs = j["averaging"].at("epochs").get<std::vector<int>>();
    }
    if (j.contains("optimizer")) {
      m.momentum = j["optimizer"].at("momentum").get<double>();
      m.l2_scale = j["optimizer"].at("l2_scale").get<double>();
    }
    const json& p = j.at("provenance");
    m.provenance = {p.at("stage").get<std::string>(), p.at("seed").get<std::uint64_t>(),
                    p.at("epoch").get<int>(), p.at("lr").get<double>(),
                    p.at("schedule").get<std::string>()};
    m.payload_bytes = j.at("payload").at("bytes").get<std::size_t>();
    m.crc32 = static_cast<std::uint32_t>(
        std::stoul(j.at("payload").at("crc32").get<std::string>(), nullptr, 16));
  } catch (const json::exception& e) {
    fail(ErrorCode::kUnsupportedFormat, where.string() + ": malformed manifest: " + e.what());
  }
  return m;
}

CheckpointManifest write_checkpoint(const fs::path& dir, CheckpointManifest manifest,
                                    PayloadWriter& payload) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  manifest.tensors = payload.descriptors();
  manifest.payload_bytes = payload.bytes().size();
  manifest.crc32 = crc32_of(payload.bytes());
  {
    const fs::path path = dir / kPayloadFile;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(payload.bytes().data()),
              static_cast<std::streamsize>(payload.bytes().size()));
    require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
  }
  // The manifest goes last: its presence marks a complete checkpoint.
  write_json_file(dir / kManifestFile, manifest_to_json(manifest));
  return manifest;
}

void add_biases(PayloadWriter& w, const Network& net, std::string_view suffix = "bias") {
  for (std::size_t p = 0; p < net.num_params(); ++p)
    if (net.biases[p]) w.add_f32(param_name(net.arch, p, suffix), *net.biases[p]);
}

class PayloadReader {
 public:
  PayloadReader(const CheckpointManifest& m, std::vector<std::uint8_t> bytes, fs::path where)
      : bytes_(std::move(bytes)), where_(std::move(where)) {
    for (const auto& d : m.tensors) by_name_[d.name] = &d;
  }

  bool has(const std::string& name) const { return by_name_.count(name) > 0; }

  const TensorDescriptor& descriptor(const std::string& name, const Shape& expected) const {
    const auto it = by_name_.find(name);
    require(it != by_name_.end(), ErrorCode::kShapeMismatch,
            where_.string() + ": tensor '" + name + "' missing from checkpoint");
    require(it->second->shape == expected, ErrorCode::kShapeMismatch,
            where_.string() + ": tensor '" + name + "' has shape " +
                shape_string(it->second->shape) + ", topology expects " + shape_string(expected));
    return *it->second;
  }

  Tensor f32(const std::string& name, const Shape& expected) const {
    const TensorDescriptor& d = descriptor(name, expected);
    require(d.encoding == TensorEncoding::kF32, ErrorCode::kUnsupportedFormat,
            where_.string() + ": tensor '" + name + "' is not f32le");
    Tensor t(d.shape);
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes_.data() + d.offset + 4 * i)));
    return t;
  }

  std::vector<std::int64_t> levels(const std::string& name, const Shape& expected) const {
    const TensorDescriptor& d = descriptor(name, expected);
    std::vector<std::int64_t> out(element_count(d.shape));
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (d.encoding == TensorEncoding::kI8)
        out[i] = static_cast<std::int8_t>(bytes_[d.offset + i]);
      else if (d.encoding == TensorEncoding::kI32)
        out[i] = static_cast<std::int32_t>(get_u32(bytes_.data() + d.offset + 4 * i));
      else
        fail(ErrorCode::kUnsupportedFormat, where_.string() + ": tensor '" + name + "' is not integer");
    }
    return out;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  fs::path where_;
  std::map<std::string, const TensorDescriptor*> by_name_;
};

std::vector<std::uint8_t> read_payload(const fs::path& dir, const CheckpointManifest& m) {
  const fs::path path = dir / kPayloadFile;
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  require(bytes.size() == m.payload_bytes, ErrorCode::kTruncated,
          path.string() + ": payload holds " + std::to_string(bytes.size()) +
              " bytes, manifest records " + std::to_string(m.payload_bytes));
  require(crc32_of(bytes) == m.crc32, ErrorCode::kChecksumMismatch,
          path.string() + ": checksum failure");

  std::vector<const TensorDescriptor*> order;
  for (const auto& d : m.tensors) order.push_back(&d);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->offset < b->offset; });
  std::size_t cursor = 0;
  for (const auto* d : order) {
    require(d->offset == cursor && d->bytes == element_count(d->shape) * encoding_width(d->encoding),
            ErrorCode::kUnsupportedFormat,
            path.string() + ": tensor descriptors do not tile the payload at '" + d->name + "'");
    cursor += d->bytes;
  }
  require(cursor == bytes.size(), ErrorCode::kUnsupportedFormat,
          path.string() + ": tensor descriptors do not cover the payload");
  return bytes;
}

Network skeleton(const Architecture& arch) { return init_weights(arch, 0); }

void read_biases(const PayloadReader& r, Network& net, std::string_view suffix = "bias") {
  for (std::size_t p = 0; p < net.num_params(); ++p)
    if (net.biases[p])
      net.biases[p] = r.f32(param_name(net.arch, p, suffix), net.biases[p]->shape());
}

const std::vector<QuantizerConfig>& require_quantization(const CheckpointManifest& m,
                                                         const fs::path& dir) {
  require(m.quantization.has_value() && m.quantization->size() == m.topology.num_parameterized(),
          ErrorCode::kShapeMismatch, dir.string() + ": quantization record does not match topology");
  for (const auto& c : *m.quantization) c.validate();
  return *m.quantization;
}

template <typename T>
T expect_kind(Checkpoint ckpt, const fs::path& dir, std::string_view wanted) {
  auto* obj = std::get_if<T>(&ckpt.object);
  require(obj != nullptr, ErrorCode::kUnsupportedFormat,
          dir.string() + ": expected a " + std::string(wanted) + " checkpoint, found " +
              std::string(to_string(ckpt.manifest.kind)));
  return std::move(*obj);
}

}  // namespace

std::string_view to_string(CheckpointKind kind) {
  switch (kind) {
    case CheckpointKind::kFullPrecision: return "full_precision";
    case CheckpointKind::kQuantized: return "quantized";
    case CheckpointKind::kShadow: return "shadow";
    case CheckpointKind::kAveraged: return "averaged";
    case CheckpointKind::kOptimizer: return "optimizer";
  }
  return "unknown";
}

CheckpointKind checkpoint_kind_from_string(std::string_view name) {
  for (auto k : {CheckpointKind::kFullPrecision, CheckpointKind::kQuantized, CheckpointKind::kShadow,
                 CheckpointKind::kAveraged, CheckpointKind::kOptimizer})
    if (to_string(k) == name) return k;
  fail(ErrorCode::kUnsupportedFormat, "unknown checkpoint kind '" + std::string(name) + "'");
}

std::uint32_t crc32_of(const std::vector<std::uint8_t>& bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

CheckpointManifest save(const Network& net, const fs::path& dir, const Provenance& provenance) {
  net.validate();
  PayloadWriter w;
  for (std::size_t p = 0; p < net.num_params(); ++p)
    w.add_f32(param_name(net.arch, p, "weight"), net.weights[p]);
  add_biases(w, net);
  CheckpointManifest m;
  m.kind = CheckpointKind::kFullPrecision;
  m.topology = net.arch;
  m.provenance = provenance;
  return write_checkpoint(dir, std::move(m), w);
}

CheckpointManifest save(const QuantizedModel& model, const fs::path& dir,
                        const Provenance& provenance) {
  model.validate();
  PayloadWriter w;
  for (std::size_t p = 0; p < model.net.num_params(); ++p) {
    const auto& cfg = model.configs[p];
    const std::vector<int> levels = quantize_levels(model.net.weights[p], cfg);
    w.add_levels(param_name(model.net.arch, p, "weight_level"), model.net.weights[p].shape(),
                 std::vector<std::int64_t>(levels.begin(), levels.end()),
                 cfg.bits <= 8 ? TensorEncoding::kI8 : TensorEncoding::kI32);
  }
  add_biases(w, model.net);
  CheckpointManifest m;
  m.kind = CheckpointKind::kQuantized;
  m.topology = model.net.arch;
  m.quantization = model.configs;
  m.provenance = provenance;
  return write_checkpoint(dir, std::move(m), w);
}

CheckpointManifest save(const ShadowModel& model, const fs::path& dir,
                        const Provenance& provenance) {
  const Network& net = model.shadow();
  PayloadWriter w;
  for (std::size_t p = 0; p < net.num_params(); ++p)
    w.add_f32(param_name(net.arch, p, "shadow_weight"), net.weights[p]);
  add_biases(w, net);
  CheckpointManifest m;
  m.kind = CheckpointKind::kShadow;
  m.topology = net.arch;
  m.quantization = model.configs();
  m.provenance = provenance;
  return write_checkpoint(dir, std::move(m), w);
}

CheckpointManifest save(const AveragedModel& model, const fs::path& dir,
                        const Provenance& provenance) {
  const Network& net = model.net;
  PayloadWriter w;
  for (std::size_t p = 0; p < net.num_params(); ++p)
    w.add_levels(param_name(net.arch, p, "weight_level_sum"), net.weights[p].shape(),
                 model.level_sums[p], TensorEncoding::kI32);
  add_biases(w, net);
  CheckpointManifest m;
  m.kind = CheckpointKind::kAveraged;
  m.topology = net.arch;
  m.quantization = model.base_configs;
  m.average_count = model.count;
  m.effective_bits = model.effective_bits;
  m.average_epochs = model.epochs;
  m.provenance = provenance;
  return write_checkpoint(dir, std::move(m), w);
}

CheckpointManifest save(const OptimizerState& state, const Architecture& arch,
                        const fs::path& dir, const Provenance& provenance) {
  require(state.weight_buffers.size() == arch.num_parameterized(), ErrorCode::kShapeMismatch,
          "optimizer state does not match the topology");
  PayloadWriter w;
  for (std::size_t p = 0; p < state.weight_buffers.size(); ++p)
    w.add_f32(param_name(arch, p, "weight_momentum"), state.weight_buffers[p]);
  for (std::size_t p = 0; p < state.bias_buffers.size(); ++p)
    if (state.bias_buffers[p])
      w.add_f32(param_name(arch, p, "bias_momentum"), *state.bias_buffers[p]);
  CheckpointManifest m;
  m.kind = CheckpointKind::kOptimizer;
  m.topology = arch;
  m.momentum = state.momentum;
  m.l2_scale = state.l2_scale;
  m.provenance = provenance;
  return write_checkpoint(dir, std::move(m), w);
}

CheckpointManifest read_manifest(const fs::path& dir) {
  return manifest_from_json(read_json_file(dir / kManifestFile), dir);
}

Checkpoint load(const fs::path& dir) {
  CheckpointManifest m = read_manifest(dir);
  const PayloadReader r(m, read_payload(dir, m), dir);
  Network net = skeleton(m.topology);
  Checkpoint out{m, Network{}};
  switch (m.kind) {
    case CheckpointKind::kFullPrecision: {
      for (std::size_t p = 0; p < net.num_params(); ++p)
        net.weights[p] = r.f32(param_name(net.arch, p, "weight"), net.weights[p].shape());
      read_biases(r, net);
      out.object = std::move(net);
      break;
    }
    case CheckpointKind::kQuantized: {
      const auto& configs = require_quantization(m, dir);
      for (std::size_t p = 0; p < net.num_params(); ++p) {
        const auto levels = r.levels(param_name(net.arch, p, "weight_level"), net.weights[p].shape());
        for (std::size_t i = 0; i < levels.size(); ++i) {
          require(std::llabs(levels[i]) <= configs[p].max_level() &&
                      (!configs[p].binary() || levels[i] != 0),
                  ErrorCode::kUnsupportedFormat,
                  dir.string() + ": grid level outside the quantizer range");
          net.weights[p][i] = static_cast<int>(levels[i]) * configs[p].step;
        }
      }
      read_biases(r, net);
      out.object = QuantizedModel{std::move(net), configs};
      break;
    }
    case CheckpointKind::kShadow: {
      const auto& configs = require_quantization(m, dir);
      for (std::size_t p = 0; p < net.num_params(); ++p)
        net.weights[p] = r.f32(param_name(net.arch, p, "shadow_weight"), net.weights[p].shape());
      read_biases(r, net);
      out.object = ShadowModel(std::move(net), configs);
      break;
    }
    case CheckpointKind::kAveraged: {
      const auto& configs = require_quantization(m, dir);
      require(m.average_count >= 1, ErrorCode::kUnsupportedFormat,
              dir.string() + ": averaged checkpoint without a model count");
      AveragedModel avg;
      avg.count = m.average_count;
      avg.effective_bits = m.effective_bits;
      avg.base_configs = configs;
      avg.epochs = m.average_epochs;
      for (std::size_t p = 0; p < net.num_params(); ++p)
        avg.level_sums.push_back(
            r.levels(param_name(net.arch, p, "weight_level_sum"), net.weights[p].shape()));
      read_biases(r, net);
      avg.net = reconstruct_averaged(net, avg.level_sums, configs, avg.count);
      out.object = std::move(avg);
      break;
    }
    case CheckpointKind::kOptimizer: {
      OptimizerState state = OptimizerState::for_network(net, m.momentum, m.l2_scale);
      for (std::size_t p = 0; p < net.num_params(); ++p) {
        state.weight_buffers[p] =
            r.f32(param_name(net.arch, p, "weight_momentum"), net.weights[p].shape());
        if (state.bias_buffers[p])
          state.bias_buffers[p] =
              r.f32(param_name(net.arch, p, "bias_momentum"), state.bias_buffers[p]->shape());
      }
      out.object = std::move(state);
      break;
    }
  }
  return out;
}

Network load_network(const fs::path& dir) { return expect_kind<Network>(load(dir), dir, "full_precision"); }
QuantizedModel load_quantized(const fs::path& dir) {
  return expect_kind<QuantizedModel>(load(dir), dir, "quantized");
}
ShadowModel load_shadow(const fs::path& dir) { return expect_kind<ShadowModel>(load(dir), dir, "shadow"); }
AveragedModel load_averaged(const fs::path& dir) {
  return expect_kind<AveragedModel>(load(dir), dir, "averaged");
}

Network evaluation_network(const Checkpoint& ckpt) {
  return std::visit(
      [](const auto& obj) -> Network {
        using T = std::decay_t<decltype(obj)>;
        if constexpr (std::is_same_v<T, Network>) return obj;
        else if constexpr (std::is_same_v<T, QuantizedModel>) return obj.net;
        else if constexpr (std::is_same_v<T, ShadowModel>) return obj.applied().net;
        else if constexpr (std::is_same_v<T, AveragedModel>) return obj.net;
        else fail(ErrorCode::kInvalidArgument, "optimizer checkpoints cannot be evaluated");
      },
      ckpt.object);
}

void save_bank(const CaptureBank& bank, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  json entries = json::array();
  for (const CaptureEntry& e : bank.entries()) {
    char name[32];
    std::snprintf(name, sizeof(name), "capture_%05d", e.epoch);
    save(e.model, dir / name, Provenance{"capture", 0, e.epoch, 0.0, ""});
    json entry{{"epoch", e.epoch}, {"path", name}, {"train", to_json(e.train)}};
    if (e.test) entry["test"] = to_json(*e.test);
    if (e.shadow) {
      const std::string shadow_name = std::string(name) + ".shadow";
      save(*e.shadow, dir / shadow_name, Provenance{"capture_shadow", 0, e.epoch, 0.0, ""});
      entry["shadow_path"] = shadow_name;
    }
    entries.push_back(entry);
  }
  json steps = json::array();
  for (const auto& c : bank.configs()) steps.push_back(c.step);
  write_json_file(dir / kBankManifestFile,
                  {{"schema_version", kCheckpointSchemaVersion},
                   {"quantization",
                    {{"bits", bank.configs().empty() ? 0 : bank.configs().front().bits},
                     {"steps", steps}}},
                   {"entries", entries}});
}

CaptureBank load_bank(const fs::path& dir) {
  const json j = read_json_file(dir / kBankManifestFile);
  require(j.value("schema_version", 0) == kCheckpointSchemaVersion, ErrorCode::kUnsupportedVersion,
          dir.string() + ": unsupported version");
  std::vector<QuantizerConfig> configs;
  const int bits = j.at("quantization").at("bits").get<int>();
  for (double s : j.at("quantization").at("steps").get<std::vector<double>>())
    configs.push_back({bits, s});
  CaptureBank bank(configs);
  for (const auto& e : j.at("entries")) {
    const fs::path entry_dir = dir / e.at("path").get<std::string>();
    require(fs::exists(entry_dir / kManifestFile), ErrorCode::kBankIncomplete,
            dir.string() + ": bank incomplete, missing " + entry_dir.filename().string());
    CaptureEntry entry{e.at("epoch").get<int>(), load_quantized(entry_dir),
                       metrics_from_json(e.at("train")), std::nullopt, std::nullopt};
    if (e.contains("test")) entry.test = metrics_from_json(e["test"]);
    if (e.contains("shadow_path")) {
      const fs::path shadow_dir = dir / e["shadow_path"].get<std::string>();
      require(fs::exists(shadow_dir / kManifestFile), ErrorCode::kBankIncomplete,
              dir.string() + ": bank incomplete, missing " + shadow_dir.filename().string());
      entry.shadow = load_network(shadow_dir);
    }
    bank.add(std::move(entry));
  }
  return bank;
}

bool checkpoint_exists(const fs::path& dir) {
  if (!fs::exists(dir / kManifestFile)) return false;
  try {
    load(dir);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace sqwa
