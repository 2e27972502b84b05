#pragma once

#include <cstdint>
#include <vector>

#include "scalr/common.hpp"

namespace scalr {

/// Points with camera-frame depth below this are treated as invisible; keeps
/// the perspective divide away from z = 0.
inline constexpr double kZNear = 1e-3;

/// Pinhole camera: intrinsics plus a rigid lidar-to-camera transform.
/// Convention: p_cam = rotation * p_lidar + translation, camera x right,
/// y down, z forward (optical axis).
struct CameraModel {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 1, height = 1;

  /// Throws ConfigError if the rotation is not a proper orthonormal matrix
  /// (1e-9 per entry) or the intrinsics/size are degenerate.
  void validate() const;
};

/// One lidar scan. positions are meters in the lidar frame; intensity in
/// [0,1]; labels are class ids or kIgnoreLabel; ring (beam index) optional.
struct PointCloud {
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> positions;
  Eigen::VectorXd intensity;
  Eigen::VectorXi labels;
  std::vector<uint16_t> ring;  // empty = absent

  int size() const { return static_cast<int>(positions.rows()); }
  bool has_ring() const { return !ring.empty(); }
  void resize(int n) {
    positions.resize(n, 3);
    intensity.resize(n);
    labels.resize(n);
  }
};

/// Point-to-pixel mapping rho. pixel_index[i] == -1 iff point i is outside
/// the frustum or behind the camera; for visible points sub_pixel holds the
/// continuous (u, v) and pixel_index == floor(v) * width + floor(u).
struct PixelMapping {
  Eigen::VectorXi pixel_index;
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> sub_pixel;
  int width = 0, height = 0;

  int size() const { return static_cast<int>(pixel_index.size()); }
  bool visible(int i) const { return pixel_index[i] >= 0; }
  int visible_count() const;
};

/// Dense H x W x F2D feature image, row-major over (row, col, channel).
struct FeatureMap2D {
  std::vector<double> data;
  int height = 0, width = 0, channels = 0;

  void resize(int h, int w, int c) {
    height = h;
    width = w;
    channels = c;
    data.assign(static_cast<size_t>(h) * w * c, 0.0);
  }
  double* at(int row, int col) {
    return data.data() + (static_cast<size_t>(row) * width + col) * channels;
  }
  const double* at(int row, int col) const {
    return data.data() + (static_cast<size_t>(row) * width + col) * channels;
  }
};

/// Projects every point into the camera. Degenerate points (behind the
/// camera, outside the image rectangle) map to -1; never throws for them.
PixelMapping project_points(const PointCloud& cloud, const CameraModel& cam);

/// Sub-pixel bilinear sampling of `map` at the visible points of `mapping`.
/// Returns a |V| x F2D matrix and fills `visible_rows` with the point index
/// of each returned row. Coordinates are clamped to the map border.
/// Throws ConfigError when the mapping extent does not match the map.
FeatureMatrix bilinear_sample(const FeatureMap2D& map, const PixelMapping& mapping,
                              std::vector<int>& visible_rows);

/// Rescales sub-pixel coordinates from one raster size to another;
/// visibility is unchanged and pixel_index is recomputed.
PixelMapping rescale_mapping(const PixelMapping& mapping, int from_w, int from_h,
                             int to_w, int to_h);

}  // namespace scalr
