#include "scalr/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace scalr {

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera: focal lengths must be positive");
  if (width < 1 || height < 1) throw ConfigError("camera: image size must be at least 1x1");
  const Mat3 rtr = rotation.transpose() * rotation;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double want = (r == c) ? 1.0 : 0.0;
      if (std::abs(rtr(r, c) - want) > 1e-9)
        throw ConfigError("camera: rotation is not orthonormal");
    }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw ConfigError("camera: rotation determinant is not +1");
}

int PixelMapping::visible_count() const {
  int n = 0;
  for (int i = 0; i < size(); ++i)
    if (pixel_index[i] >= 0) ++n;
  return n;
}

PixelMapping project_points(const PointCloud& cloud, const CameraModel& cam) {
  cam.validate();
  const int n = cloud.size();
  PixelMapping out;
  out.width = cam.width;
  out.height = cam.height;
  out.pixel_index = Eigen::VectorXi::Constant(n, -1);
  out.sub_pixel.resize(n, 2);
  out.sub_pixel.setConstant(-1.0);

  for (int i = 0; i < n; ++i) {
    const Vec3 p_cam = cam.rotation * cloud.positions.row(i).transpose() + cam.translation;
    const double z = p_cam.z();
    if (!(z > kZNear)) continue;
    const double u = cam.fx * p_cam.x() / z + cam.cx;
    const double v = cam.fy * p_cam.y() / z + cam.cy;
    if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) continue;
    out.sub_pixel(i, 0) = u;
    out.sub_pixel(i, 1) = v;
    out.pixel_index[i] = static_cast<int>(std::floor(v)) * cam.width +
                         static_cast<int>(std::floor(u));
  }
  return out;
}

FeatureMatrix bilinear_sample(const FeatureMap2D& map, const PixelMapping& mapping,
                              std::vector<int>& visible_rows) {
  if (mapping.width != map.width || mapping.height != map.height)
    throw ConfigError("bilinear_sample: mapping extent does not match feature map");
  if (map.channels < 1) throw ConfigError("bilinear_sample: feature map has no channels");

  visible_rows.clear();
  for (int i = 0; i < mapping.size(); ++i)
    if (mapping.visible(i)) visible_rows.push_back(i);

  FeatureMatrix out(static_cast<int>(visible_rows.size()), map.channels);
  for (size_t r = 0; r < visible_rows.size(); ++r) {
    const int i = visible_rows[r];
    // clamp to the border; the mapping guarantees u,v inside [0, size) but
    // rescaled maps can land exactly on the last texel
    double u = std::clamp(mapping.sub_pixel(i, 0), 0.0, static_cast<double>(map.width - 1));
    double v = std::clamp(mapping.sub_pixel(i, 1), 0.0, static_cast<double>(map.height - 1));
    const int c0 = static_cast<int>(std::floor(u));
    const int r0 = static_cast<int>(std::floor(v));
    const int c1 = std::min(c0 + 1, map.width - 1);
    const int r1 = std::min(r0 + 1, map.height - 1);
    const double a = u - c0;
    const double b = v - r0;
    const double* f00 = map.at(r0, c0);
    const double* f01 = map.at(r0, c1);
    const double* f10 = map.at(r1, c0);
    const double* f11 = map.at(r1, c1);
    for (int ch = 0; ch < map.channels; ++ch) {
      out(static_cast<int>(r), ch) = (1.0 - a) * (1.0 - b) * f00[ch] + a * (1.0 - b) * f01[ch] +
                                     (1.0 - a) * b * f10[ch] + a * b * f11[ch];
    }
  }
  return out;
}

PixelMapping rescale_mapping(const PixelMapping& mapping, int from_w, int from_h,
                             int to_w, int to_h) {
  if (from_w < 1 || from_h < 1 || to_w < 1 || to_h < 1)
    throw ConfigError("rescale_mapping: sizes must be at least 1");
  const double su = static_cast<double>(to_w) / from_w;
  const double sv = static_cast<double>(to_h) / from_h;
  PixelMapping out;
  out.width = to_w;
  out.height = to_h;
  const int n = mapping.size();
  out.pixel_index = Eigen::VectorXi::Constant(n, -1);
  out.sub_pixel.resize(n, 2);
  out.sub_pixel.setConstant(-1.0);
  for (int i = 0; i < n; ++i) {
    if (!mapping.visible(i)) continue;
    const double u = mapping.sub_pixel(i, 0) * su;
    const double v = mapping.sub_pixel(i, 1) * sv;
    out.sub_pixel(i, 0) = u;
    out.sub_pixel(i, 1) = v;
    const int col = std::min(static_cast<int>(std::floor(u)), to_w - 1);
    const int row = std::min(static_cast<int>(std::floor(v)), to_h - 1);
    out.pixel_index[i] = row * to_w + col;
  }
  return out;
}

}  // namespace scalr
