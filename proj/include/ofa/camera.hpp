#pragma once

#include "ofa/geom.hpp"
#include "ofa/image.hpp"
#include "ofa/kinematics.hpp"

#include <optional>
#include <vector>

namespace ofa {

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;  // throws ConfigError
};

/// Stereo pair. Extrinsics map robot/world coordinates into each camera
/// frame (x right, y down, z forward).
struct StereoRig {
  CameraIntrinsics left;
  CameraIntrinsics right;
  Pose left_extrinsic;
  Pose right_extrinsic;
};

/// Builds a rig from a mount position and look-at target (z up), with the
/// right camera shifted by `baseline` along the camera x axis.
StereoRig make_lookat_rig(const CameraIntrinsics& intrinsics, const Vec3& position,
                          const Vec3& target, double baseline);

struct ProjectedPoint {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;   // camera-frame z
  bool in_front = false;
};

/// Pinhole projection of world points through an extrinsic. Points with
/// camera depth <= 1e-6 are flagged and excluded from rectangles.
std::vector<ProjectedPoint> project_points(const CameraIntrinsics& intrinsics,
                                           const Pose& extrinsic,
                                           const std::vector<Vec3>& world_points);

/// Axis-aligned pixel rectangle, inclusive bounds.
struct PixelRect {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min + 1; }
  int height() const { return y_max - y_min + 1; }
  bool operator==(const PixelRect&) const = default;
};

PixelRect clamp_rect(const PixelRect& rect, int image_width, int image_height);

struct CropOptions {
  double enlarge_factor = 2.0;  // per-axis scale about the rect center
  int min_extent = 16;          // degenerate rects grow to this before enlarging
  int crop_size = 128;          // unified output size (square)
};

/// Tight enclosing rectangle of the visible projections, padded to the
/// minimum extent, scaled by the enlarge factor about its center, clamped
/// to the image bounds. Throws DataError when no point is visible.
PixelRect hand_focus_rect(const std::vector<ProjectedPoint>& projected,
                          int image_width, int image_height,
                          const CropOptions& options);

/// Bilinear crop-and-resize of `rect` to the unified square size.
Image crop_resize(const Image& image, const PixelRect& rect, int target_size);

struct HandFocusResult {
  Image left_crop;
  Image right_crop;
  PixelRect left_rect;
  PixelRect right_rect;
};

/// Full extraction pipeline: hand spheres -> projection -> enclosing rect
/// -> enlargement -> crop -> resize, per camera.
HandFocusResult extract_hand_focus(const StereoRig& rig, const RobotModel& model,
                                   const Pose& wrist, const HandJoints& hand_joints,
                                   const Image& left_image, const Image& right_image,
                                   const CropOptions& options);

}  // namespace ofa
