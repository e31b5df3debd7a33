// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/losscape.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sqwa/error.hpp"
#include "text_format.hpp"

namespace sqwa {
namespace {

constexpr int kGridSchemaVersion = 1;
constexpr double kCollinearTolerance = 1e-10;

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void scale_in_place(std::vector<double>& v, double s) {
  for (double& x : v) x *= s;
}

}  // namespace

std::vector<double> flatten_parameters(const Network& net) {
  std::vector<double> flat;
  flat.reserve(net.parameter_count());
  for (std::size_t p = 0; p < net.num_params(); ++p) {
    const auto w = net.weights[p].values();
    flat.insert(flat.end(), w.begin(), w.end());
    if (net.biases[p]) {
      const auto b = net.biases[p]->values();
      flat.insert(flat.end(), b.begin(), b.end());
    }
  }
  return flat;
}

Network unflatten_parameters(const Network& like, std::span<const double> flat) {
  require(flat.size() == like.parameter_count(), ErrorCode::kShapeMismatch,
          "flat vector of " + std::to_string(flat.size()) + " values does not fit a network with " +
              std::to_string(like.parameter_count()) + " parameters");
  Network net = like;
  std::size_t offset = 0;
  const auto fill = [&](Tensor& t) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.data());
    offset += t.size();
  };
  for (std::size_t p = 0; p < net.num_params(); ++p) {
    fill(net.weights[p]);
    if (net.biases[p]) fill(*net.biases[p]);
  }
  return net;
}

LossPlane build_plane(std::span<const double> w1, std::span<const double> w2,
                      std::span<const double> w3) {
  require(!w1.empty() && w1.size() == w2.size() && w1.size() == w3.size(),
          ErrorCode::kShapeMismatch, "plane vectors must be nonempty and of equal dimension");
  const std::size_t n = w1.size();
  std::vector<double> d2(n), d3(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = w2[i] - w1[i];
    d3[i] = w3[i] - w1[i];
  }
  const double u_sq = dot(d2, d2);
  require(u_sq > 0.0, ErrorCode::kDegenerate, "degenerate plane: w1 and w2 coincide");
  const double coef = dot(d3, d2) / u_sq;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = d3[i] - coef * d2[i];
  const double d3_norm = std::sqrt(dot(d3, d3));
  const double v_norm = std::sqrt(dot(v, v));
  require(d3_norm > 0.0 && v_norm > kCollinearTolerance * d3_norm, ErrorCode::kDegenerate,
          "degenerate plane: w3 is collinear with w1 and w2");

  LossPlane plane;
  plane.origin.assign(w1.begin(), w1.end());
  plane.u_norm = std::sqrt(u_sq);
  plane.u_hat = d2;
  scale_in_place(plane.u_hat, 1.0 / plane.u_norm);
  plane.v_hat = std::move(v);
  scale_in_place(plane.v_hat, 1.0 / v_norm);
  // A second Gram-Schmidt pass removes the rounding residue along u_hat.
  const double residue = dot(plane.v_hat, plane.u_hat);
  for (std::size_t i = 0; i < n; ++i) plane.v_hat[i] -= residue * plane.u_hat[i];
  scale_in_place(plane.v_hat, 1.0 / std::sqrt(dot(plane.v_hat, plane.v_hat)));

  plane.anchors = {{0.0, 0.0}, {plane.u_norm, 0.0}, {dot(d3, plane.u_hat), dot(d3, plane.v_hat)}};
  return plane;
}

LossPlane build_plane(const Network& w1, const Network& w2, const Network& w3) {
  require(w1.arch == w2.arch && w1.arch == w3.arch, ErrorCode::kShapeMismatch,
          "plane networks must share one topology");
  return build_plane(flatten_parameters(w1), flatten_parameters(w2), flatten_parameters(w3));
}

std::vector<double> grid_point(const LossPlane& plane, double x, double y) {
  std::vector<double> out(plane.dimension());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = plane.origin[i] + x * plane.u_hat[i] + y * plane.v_hat[i];
  return out;
}

Network grid_network(const LossPlane& plane, const Network& like, double x, double y) {
  return unflatten_parameters(like, grid_point(plane, x, y));
}

Network quantized_grid_network(const LossPlane& plane, const Network& like, double x, double y,
                               const std::vector<QuantizerConfig>& configs) {
  return quantize_model(grid_network(plane, like, x, y), configs).net;
}

std::string_view to_string(SurfaceMode mode) {
  return mode == SurfaceMode::kQuantized ? "quantized" : "full_precision";
}

SurfaceMode surface_mode_from_string(std::string_view name) {
  if (name == "quantized") return SurfaceMode::kQuantized;
  if (name == "full_precision") return SurfaceMode::kFullPrecision;
  fail(ErrorCode::kInvalidArgument, "unknown surface mode '" + std::string(name) + "'");
}

GridSpec default_grid_spec(const LossPlane& plane, std::size_t res_x, std::size_t res_y,
                           double margin) {
  require(!plane.anchors.empty(), ErrorCode::kInvalidArgument, "plane has no anchors");
  require(margin >= 0.0, ErrorCode::kInvalidArgument, "grid margin must be nonnegative");
  double x_lo = plane.anchors[0].x, x_hi = x_lo, y_lo = plane.anchors[0].y, y_hi = y_lo;
  for (const PlanePoint& a : plane.anchors) {
    x_lo = std::min(x_lo, a.x);
    x_hi = std::max(x_hi, a.x);
    y_lo = std::min(y_lo, a.y);
    y_hi = std::max(y_hi, a.y);
  }
  const double wx = x_hi - x_lo, wy = y_hi - y_lo;
  return {x_lo - margin * wx, x_hi + margin * wx, y_lo - margin * wy, y_hi + margin * wy,
          res_x, res_y};
}

std::vector<double> grid_axis(double lo, double hi, std::size_t res,
                              std::vector<double> anchor_coords) {
  require(res >= 2, ErrorCode::kInvalidArgument, "grid resolution must be at least 2");
  require(hi > lo, ErrorCode::kInvalidArgument, "grid range must be nonempty");
  std::vector<double> axis(res);
  for (std::size_t i = 0; i < res; ++i)
    axis[i] = i + 1 == res ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(res - 1);

  std::sort(anchor_coords.begin(), anchor_coords.end());
  anchor_coords.erase(std::unique(anchor_coords.begin(), anchor_coords.end()), anchor_coords.end());
  const double spacing = (hi - lo) / static_cast<double>(res - 1);
  std::ptrdiff_t previous = -1;
  for (double a : anchor_coords) {
    require(a >= lo && a <= hi, ErrorCode::kInvalidArgument,
            "anchor coordinate " + detail::format_double(a) + " outside grid range");
    auto index = static_cast<std::ptrdiff_t>(std::lround((a - lo) / spacing));
    index = std::max(index, previous + 1);
    require(index < static_cast<std::ptrdiff_t>(res), ErrorCode::kInvalidArgument,
            "grid resolution too coarse to hold every anchor");
    axis[static_cast<std::size_t>(index)] = a;
    previous = index;
  }
  for (std::size_t i = 1; i < res; ++i)
    require(axis[i] > axis[i - 1], ErrorCode::kInvalidArgument,
            "grid resolution too coarse to hold every anchor");
  return axis;
}

SurfaceGrid evaluate_surface(const LossPlane& plane, const Network& like, const Dataset& ds,
                             const GridSpec& spec, const SurfaceOptions& options) {
  require(ds.size() > 0, ErrorCode::kEmptyDataset, "cannot evaluate a surface on an empty dataset");
  require(like.parameter_count() == plane.dimension(), ErrorCode::kShapeMismatch,
          "network template does not match the plane dimension");
  if (options.mode == SurfaceMode::kQuantized) {
    require(options.configs.size() == like.num_params(), ErrorCode::kShapeMismatch,
            "quantized surface needs one quantizer config per layer");
    for (const auto& c : options.configs) c.validate();
  }
  std::vector<double> anchor_x, anchor_y;
  for (const PlanePoint& a : plane.anchors) {
    anchor_x.push_back(a.x);
    anchor_y.push_back(a.y);
  }

  SurfaceGrid grid;
  grid.mode = options.mode;
  grid.xs = grid_axis(spec.x_min, spec.x_max, spec.res_x, anchor_x);
  grid.ys = grid_axis(spec.y_min, spec.y_max, spec.res_y, anchor_y);
  grid.anchors = plane.anchors;
  grid.dataset_id = ds.id;
  grid.split = options.split;
  if (options.mode == SurfaceMode::kQuantized) grid.configs = options.configs;
  grid.points.resize(grid.xs.size() * grid.ys.size());

  const auto evaluate_point = [&](std::size_t index) {
    const double x = grid.xs[index % grid.xs.size()];
    const double y = grid.ys[index / grid.xs.size()];
    const Network net = options.mode == SurfaceMode::kQuantized
                            ? quantized_grid_network(plane, like, x, y, options.configs)
                            : grid_network(plane, like, x, y);
    const Metrics m = evaluate(net, ds);
    grid.points[index] = {x, y, m.loss, m.accuracy};
  };

  const std::size_t total = grid.points.size();
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, total);
  if (workers == 1) {
    for (std::size_t i = 0; i < total; ++i) evaluate_point(i);
    return grid;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < total; i += workers) evaluate_point(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  return grid;
}

std::filesystem::path metadata_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p += ".meta.json";
  return p;
}

void export_grid(const SurfaceGrid& grid, const std::filesystem::path& csv_path) {
  {
    std::ofstream out(csv_path);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + csv_path.string());
    out << "x,y,loss,accuracy\n";
    for (const SurfacePoint& p : grid.points)
      out << detail::format_double(p.x) << ',' << detail::format_double(p.y) << ','
          << detail::format_double(p.loss) << ',' << detail::format_double(p.accuracy) << '\n';
    require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + csv_path.string());
  }
  nlohmann::json meta;
  meta["schema_version"] = kGridSchemaVersion;
  meta["mode"] = std::string(to_string(grid.mode));
  meta["dataset_id"] = grid.dataset_id;
  meta["split"] = grid.split;
  meta["resolution"] = {grid.xs.size(), grid.ys.size()};
  meta["x_axis"] = grid.xs;
  meta["y_axis"] = grid.ys;
  nlohmann::json anchors = nlohmann::json::array();
  const char* names[] = {"w1", "w2", "w3"};
  for (std::size_t i = 0; i < grid.anchors.size(); ++i)
    anchors.push_back({{"name", i < 3 ? names[i] : "anchor" + std::to_string(i)},
                       {"x", grid.anchors[i].x},
                       {"y", grid.anchors[i].y}});
  meta["anchors"] = anchors;
  if (grid.mode == SurfaceMode::kQuantized) {
    meta["bits"] = grid.configs.empty() ? 0 : grid.configs.front().bits;
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& c : grid.configs) steps.push_back(c.step);
    meta["steps"] = steps;
  }
  const auto path = metadata_path(csv_path);
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << meta.dump(2) << '\n';
}

SurfaceGrid read_grid(const std::filesystem::path& csv_path) {
  const auto meta_file = metadata_path(csv_path);
  std::ifstream meta_in(meta_file);
  require(static_cast<bool>(meta_in), ErrorCode::kIo, "cannot open " + meta_file.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kUnsupportedFormat, meta_file.string() + ": " + e.what());
  }
  require(meta.value("schema_version", 0) == kGridSchemaVersion, ErrorCode::kUnsupportedVersion,
          meta_file.string() + ": unsupported version");

  SurfaceGrid grid;
  grid.mode = surface_mode_from_string(meta.at("mode").get<std::string>());
  grid.dataset_id = meta.at("dataset_id").get<std::string>();
  grid.split = meta.at("split").get<std::string>();
  grid.xs = meta.at("x_axis").get<std::vector<double>>();
  grid.ys = meta.at("y_axis").get<std::vector<double>>();
  for (const auto& a : meta.at("anchors"))
    grid.anchors.push_back({a.at("x").get<double>(), a.at("y").get<double>()});
  if (grid.mode == SurfaceMode::kQuantized) {
    const int bits = meta.at("bits").get<int>();
    for (double s : meta.at("steps").get<std::vector<double>>()) grid.configs.push_back({bits, s});
  }

  std::ifstream in(csv_path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + csv_path.string());
  std::string line;
  require(std::getline(in, line) && line == "x,y,loss,accuracy", ErrorCode::kUnsupportedFormat,
          csv_path.string() + ": missing x,y,loss,accuracy header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    fields.push_back(rest);
    require(fields.size() == 4, ErrorCode::kUnsupportedFormat,
            csv_path.string() + ": malformed row '" + line + "'");
    grid.points.push_back({detail::parse_double(fields[0]), detail::parse_double(fields[1]),
                           detail::parse_double(fields[2]), detail::parse_double(fields[3])});
  }
  require(grid.points.size() == grid.xs.size() * grid.ys.size(), ErrorCode::kCountMismatch,
          csv_path.string() + ": row count does not match the recorded resolution");
  return grid;
}

}  // namespace sqwa
