#pragma once

#include "ofa/camera.hpp"
#include "ofa/image.hpp"
#include "ofa/shapes.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace ofa {

using Rgb = std::array<std::uint8_t, 3>;

enum class BackgroundId { Plain, Checker, Textured1, Textured2 };

BackgroundId background_from_string(const std::string& name);
std::string background_to_string(BackgroundId id);

struct BackgroundSpec {
  BackgroundId id = BackgroundId::Plain;
  Rgb base_color = {172, 180, 188};
};

/// A primitive to draw: geometry, flat base color, and the entity label
/// written into the id buffer.
struct DrawPrimitive {
  Obstacle shape;
  Rgb color = {128, 128, 128};
  std::uint16_t entity_id = 0;
};

struct RenderOutput {
  Image image;
  std::vector<std::uint16_t> id_buffer;  // entity per pixel, 0 = background
  std::vector<float> depth_buffer;       // camera z; +inf where empty

  std::uint16_t id_at(int x, int y) const {
    return id_buffer[static_cast<std::size_t>(y) * image.width + x];
  }
};

/// Z-buffered rasterization with flat Lambertian shading from a fixed
/// directional light. Boxes and cylinders are tessellated; spheres are
/// rasterized analytically (per-pixel ray test). Background variant fills
/// pixels no primitive covers.
RenderOutput render_view(const CameraIntrinsics& intrinsics, const Pose& extrinsic,
                         const std::vector<DrawPrimitive>& primitives,
                         const BackgroundSpec& background);

}  // namespace ofa
