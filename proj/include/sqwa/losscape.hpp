// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sqwa/data.hpp"
#include "sqwa/network.hpp"
#include "sqwa/quantizer.hpp"

namespace sqwa {

/// Concatenation of every parameterized layer's weights followed by its bias.
std::vector<double> flatten_parameters(const Network& net);
/// Inverse of flatten_parameters using `like` for shapes and biases layout.
Network unflatten_parameters(const Network& like, std::span<const double> flat);

struct PlanePoint {
  double x = 0.0;
  double y = 0.0;
};

/// Affine plane through three parameter vectors with an orthonormal basis:
///   u = w2 - w1,  v = (w3 - w1) - <w3 - w1, u> / |u|^2 * u,
///   u_hat = u / |u|,  v_hat = v / |v|.
struct LossPlane {
  std::vector<double> origin;  // w1
  std::vector<double> u_hat;
  std::vector<double> v_hat;
  double u_norm = 0.0;
  std::vector<PlanePoint> anchors;  // w1, w2, w3 in plane coordinates

  std::size_t dimension() const noexcept { return origin.size(); }
};

/// Rejects mismatched dimensions, coincident w1/w2 and collinear w3 with
/// kDegenerate.
LossPlane build_plane(std::span<const double> w1, std::span<const double> w2,
                      std::span<const double> w3);
LossPlane build_plane(const Network& w1, const Network& w2, const Network& w3);

/// w1 + x * u_hat + y * v_hat.
std::vector<double> grid_point(const LossPlane& plane, double x, double y);
Network grid_network(const LossPlane& plane, const Network& like, double x, double y);
/// grid_network with each layer's weights quantized onto its grid; biases
/// are left in full precision.
Network quantized_grid_network(const LossPlane& plane, const Network& like, double x, double y,
                               const std::vector<QuantizerConfig>& configs);

enum class SurfaceMode { kFullPrecision, kQuantized };
std::string_view to_string(SurfaceMode mode);
SurfaceMode surface_mode_from_string(std::string_view name);

struct GridSpec {
  double x_min = -1.0;
  double x_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;
  std::size_t res_x = 2;
  std::size_t res_y = 2;
};

/// Bounding box of the anchors widened by `margin` of its extent per side.
GridSpec default_grid_spec(const LossPlane& plane, std::size_t res_x, std::size_t res_y,
                           double margin = 0.2);

/// `res` evenly spaced nodes on [lo, hi] with the nearest node to each
/// anchor coordinate replaced by that coordinate, so anchors are evaluated
/// exactly. Throws if the resolution is too coarse to keep the axis strictly
/// increasing or an anchor lies outside [lo, hi].
std::vector<double> grid_axis(double lo, double hi, std::size_t res,
                              std::vector<double> anchor_coords);

struct SurfacePoint {
  double x = 0.0;
  double y = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const SurfacePoint&, const SurfacePoint&) = default;
};

struct SurfaceGrid {
  SurfaceMode mode = SurfaceMode::kFullPrecision;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<SurfacePoint> points;  // row-major: index = iy * xs.size() + ix
  std::vector<QuantizerConfig> configs;  // quantized mode only
  std::vector<PlanePoint> anchors;
  std::string dataset_id;
  std::string split = "train";

  const SurfacePoint& at(std::size_t ix, std::size_t iy) const {
    return points[iy * xs.size() + ix];
  }
};

struct SurfaceOptions {
  SurfaceMode mode = SurfaceMode::kFullPrecision;
  std::vector<QuantizerConfig> configs;
  std::string split = "train";
  std::size_t workers = 1;
};

/// Loss and accuracy at every grid node. Points are independent and may be
/// evaluated by several workers; results land in canonical order.
SurfaceGrid evaluate_surface(const LossPlane& plane, const Network& like, const Dataset& ds,
                             const GridSpec& spec, const SurfaceOptions& options);

/// Writes `x,y,loss,accuracy` rows to `csv_path` and a JSON sidecar next to
/// it (see metadata_path).
void export_grid(const SurfaceGrid& grid, const std::filesystem::path& csv_path);
std::filesystem::path metadata_path(const std::filesystem::path& csv_path);
SurfaceGrid read_grid(const std::filesystem::path& csv_path);

}  // namespace sqwa
