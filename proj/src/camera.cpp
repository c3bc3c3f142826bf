#include "ofa/camera.hpp"

#include "ofa/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace ofa {

void CameraIntrinsics::validate() const {
  if (fx <= 0.0 || fy <= 0.0) throw ConfigError("camera: focal lengths must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    throw ConfigError("camera: principal point outside the image");
  }
  if (width <= 0 || height <= 0) throw ConfigError("camera: non-positive image size");
}

StereoRig make_lookat_rig(const CameraIntrinsics& intrinsics, const Vec3& position,
                          const Vec3& target, double baseline) {
  intrinsics.validate();
  const Vec3 forward = (target - position).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) {
    right = Vec3::UnitY();  // looking straight down; pick a stable right
  }
  right.normalize();
  const Vec3 down = forward.cross(right).normalized();

  Mat3 basis;
  basis.row(0) = right;
  basis.row(1) = down;
  basis.row(2) = forward;
  const Rotation r = Rotation::from_matrix(basis);

  auto extrinsic_at = [&](const Vec3& center) {
    return Pose{r, -(r * center)};
  };

  StereoRig rig;
  rig.left = intrinsics;
  rig.right = intrinsics;
  rig.left_extrinsic = extrinsic_at(position - 0.5 * baseline * right);
  rig.right_extrinsic = extrinsic_at(position + 0.5 * baseline * right);
  return rig;
}

std::vector<ProjectedPoint> project_points(const CameraIntrinsics& intrinsics,
                                           const Pose& extrinsic,
                                           const std::vector<Vec3>& world_points) {
  std::vector<ProjectedPoint> out;
  out.reserve(world_points.size());
  for (const Vec3& p : world_points) {
    const Vec3 cam = extrinsic.apply(p);
    ProjectedPoint pp;
    pp.depth = cam.z();
    pp.in_front = cam.z() > 1e-6;
    if (pp.in_front) {
      pp.u = intrinsics.fx * cam.x() / cam.z() + intrinsics.cx;
      pp.v = intrinsics.fy * cam.y() / cam.z() + intrinsics.cy;
    }
    out.push_back(pp);
  }
  return out;
}

PixelRect clamp_rect(const PixelRect& rect, int image_width, int image_height) {
  PixelRect out;
  out.x_min = std::clamp(rect.x_min, 0, image_width - 1);
  out.x_max = std::clamp(rect.x_max, 0, image_width - 1);
  out.y_min = std::clamp(rect.y_min, 0, image_height - 1);
  out.y_max = std::clamp(rect.y_max, 0, image_height - 1);
  return out;
}

PixelRect hand_focus_rect(const std::vector<ProjectedPoint>& projected,
                          int image_width, int image_height,
                          const CropOptions& options) {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  bool any = false;
  for (const auto& p : projected) {
    if (!p.in_front) continue;
    if (!any) {
      x_min = x_max = p.u;
      y_min = y_max = p.v;
      any = true;
    } else {
      x_min = std::min(x_min, p.u);
      x_max = std::max(x_max, p.u);
      y_min = std::min(y_min, p.v);
      y_max = std::max(y_max, p.v);
    }
  }
  if (!any) throw DataError("hand_focus_rect: no visible projected point");

  PixelRect tight{static_cast<int>(std::floor(x_min)), static_cast<int>(std::floor(y_min)),
                  static_cast<int>(std::ceil(x_max)), static_cast<int>(std::ceil(y_max))};

  // A zero-span axis (single projected column/row) grows to the minimum
  // extent before enlargement; the 2x scale alone would leave it empty.
  auto pad_axis = [&](int lo, int hi, int min_extent) {
    if (hi > lo) return std::pair<int, int>{lo, hi};
    const int missing = min_extent - 1;
    return std::pair<int, int>{lo - missing / 2, hi + (missing + 1) / 2};
  };
  std::tie(tight.x_min, tight.x_max) = pad_axis(tight.x_min, tight.x_max, options.min_extent);
  std::tie(tight.y_min, tight.y_max) = pad_axis(tight.y_min, tight.y_max, options.min_extent);

  // Scale width and height about the center; outward rounding keeps the
  // tight rect strictly inside.
  const double grow = 0.5 * (options.enlarge_factor - 1.0);
  PixelRect enlarged;
  enlarged.x_min = static_cast<int>(std::floor(tight.x_min - grow * (tight.x_max - tight.x_min)));
  enlarged.x_max = static_cast<int>(std::ceil(tight.x_max + grow * (tight.x_max - tight.x_min)));
  enlarged.y_min = static_cast<int>(std::floor(tight.y_min - grow * (tight.y_max - tight.y_min)));
  enlarged.y_max = static_cast<int>(std::ceil(tight.y_max + grow * (tight.y_max - tight.y_min)));

  return clamp_rect(enlarged, image_width, image_height);
}

Image crop_resize(const Image& image, const PixelRect& rect, int target_size) {
  if (rect.x_min > rect.x_max || rect.y_min > rect.y_max) {
    throw DataError("crop_resize: empty rect");
  }
  if (rect.x_min < 0 || rect.y_min < 0 || rect.x_max >= image.width ||
      rect.y_max >= image.height) {
    throw DataError("crop_resize: rect outside image bounds");
  }
  return bilinear_resize(image, rect.x_min, rect.y_min, rect.x_max, rect.y_max,
                         target_size, target_size);
}

HandFocusResult extract_hand_focus(const StereoRig& rig, const RobotModel& model,
                                   const Pose& wrist, const HandJoints& hand_joints,
                                   const Image& left_image, const Image& right_image,
                                   const CropOptions& options) {
  const auto spheres = hand_sphere_centers(model, wrist, hand_joints);
  std::vector<Vec3> centers;
  centers.reserve(spheres.size());
  for (const auto& s : spheres) centers.push_back(s.center);

  HandFocusResult result;
  const auto left_proj = project_points(rig.left, rig.left_extrinsic, centers);
  result.left_rect = hand_focus_rect(left_proj, rig.left.width, rig.left.height, options);
  result.left_crop = crop_resize(left_image, result.left_rect, options.crop_size);

  const auto right_proj = project_points(rig.right, rig.right_extrinsic, centers);
  result.right_rect = hand_focus_rect(right_proj, rig.right.width, rig.right.height, options);
  result.right_crop = crop_resize(right_image, result.right_rect, options.crop_size);
  return result;
}

}  // namespace ofa
