#include "ofa/render.hpp"

#include "ofa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ofa {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kNearPlane = 1e-3;
constexpr double kAmbient = 0.35;

// Fixed directional light (world frame), pointing mostly downward.
const Vec3 kLightDir = Vec3(-0.35, 0.25, -1.0).normalized();

std::uint32_t hash2d(std::uint32_t x, std::uint32_t y) {
  std::uint32_t h = x * 0x8da6b343u + y * 0xd8163841u + 0x9e3779b9u;
  h ^= h >> 13;
  h *= 0x85ebca6bu;
  h ^= h >> 16;
  return h;
}

Rgb background_pixel(const BackgroundSpec& bg, int x, int y) {
  const auto& base = bg.base_color;
  switch (bg.id) {
    case BackgroundId::Plain:
      return base;
    case BackgroundId::Checker: {
      const bool on = ((x / 32) + (y / 32)) % 2 == 0;
      if (on) return base;
      return {static_cast<std::uint8_t>(base[0] / 2), static_cast<std::uint8_t>(base[1] / 2),
              static_cast<std::uint8_t>(base[2] / 2)};
    }
    case BackgroundId::Textured1: {
      // High-contrast diagonal color bands.
      const double phase = std::sin((x + 2 * y) * (2.0 * kPi / 72.0));
      const double t = 0.5 * (phase + 1.0);
      const Rgb a = {215, 120, 40};
      const Rgb b = {60, 40, 150};
      Rgb out;
      for (int c = 0; c < 3; ++c) {
        out[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(
            std::lround(t * a[static_cast<std::size_t>(c)] +
                        (1.0 - t) * b[static_cast<std::size_t>(c)]));
      }
      return out;
    }
    case BackgroundId::Textured2: {
      // Pseudo-random 16 px blocks; the hash is fixed so every render of a
      // variant is identical.
      const std::uint32_t h = hash2d(static_cast<std::uint32_t>(x / 16),
                                     static_cast<std::uint32_t>(y / 16));
      return {static_cast<std::uint8_t>(40 + (h & 0xBF)),
              static_cast<std::uint8_t>(40 + ((h >> 8) & 0xBF)),
              static_cast<std::uint8_t>(40 + ((h >> 16) & 0xBF))};
    }
  }
  return base;
}

struct Framebuffer {
  int width;
  int height;
  Image* image;
  std::vector<std::uint16_t>* ids;
  std::vector<float>* depth;

  void write(int x, int y, double z, const Rgb& color, std::uint16_t id) {
    const std::size_t i = static_cast<std::size_t>(y) * width + x;
    if (z >= (*depth)[i]) return;
    (*depth)[i] = static_cast<float>(z);
    (*ids)[i] = id;
    auto* p = image->at(x, y);
    p[0] = color[0];
    p[1] = color[1];
    p[2] = color[2];
  }
};

Rgb shade(const Rgb& base, const Vec3& normal_cam, const Vec3& light_cam) {
  const double diffuse = std::max(0.0, normal_cam.dot(-light_cam));
  const double s = kAmbient + (1.0 - kAmbient) * diffuse;
  return {static_cast<std::uint8_t>(std::lround(base[0] * s)),
          static_cast<std::uint8_t>(std::lround(base[1] * s)),
          static_cast<std::uint8_t>(std::lround(base[2] * s))};
}

void raster_triangle(Framebuffer& fb, const CameraIntrinsics& cam, const Vec3& a,
                     const Vec3& b, const Vec3& c, const Rgb& base, std::uint16_t id,
                     const Vec3& light_cam) {
  if (a.z() < kNearPlane || b.z() < kNearPlane || c.z() < kNearPlane) return;

  Vec3 n = (b - a).cross(c - a);
  const double nl = n.norm();
  if (nl < 1e-15) return;
  n /= nl;
  if (n.dot(a) > 0.0) n = -n;  // face the camera
  const Rgb color = shade(base, n, light_cam);

  const double ua = cam.fx * a.x() / a.z() + cam.cx, va = cam.fy * a.y() / a.z() + cam.cy;
  const double ub = cam.fx * b.x() / b.z() + cam.cx, vb = cam.fy * b.y() / b.z() + cam.cy;
  const double uc = cam.fx * c.x() / c.z() + cam.cx, vc = cam.fy * c.y() / c.z() + cam.cy;

  const int x0 = std::max(0, static_cast<int>(std::floor(std::min({ua, ub, uc}))));
  const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({ua, ub, uc}))));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min({va, vb, vc}))));
  const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({va, vb, vc}))));
  if (x0 > x1 || y0 > y1) return;

  const double area = (ub - ua) * (vc - va) - (uc - ua) * (vb - va);
  if (std::abs(area) < 1e-12) return;
  const double inv_area = 1.0 / area;
  const double iza = 1.0 / a.z(), izb = 1.0 / b.z(), izc = 1.0 / c.z();

  for (int y = y0; y <= y1; ++y) {
    const double py = y + 0.5;
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5;
      const double w0 = ((ub - px) * (vc - py) - (uc - px) * (vb - py)) * inv_area;
      const double w1 = ((uc - px) * (va - py) - (ua - px) * (vc - py)) * inv_area;
      const double w2 = 1.0 - w0 - w1;
      if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
      // 1/z is affine in screen space: perspective-correct depth.
      const double inv_z = w0 * iza + w1 * izb + w2 * izc;
      fb.write(x, y, 1.0 / inv_z, color, id);
    }
  }
}

void raster_sphere(Framebuffer& fb, const CameraIntrinsics& cam, const Vec3& center,
                   double radius, const Rgb& base, std::uint16_t id, const Vec3& light_cam) {
  if (center.z() < kNearPlane + radius * 0.0) {
    if (center.z() <= kNearPlane) return;
  }
  const double zn = std::max(center.z() - radius, kNearPlane);
  const double ru = cam.fx * radius / zn + 1.0;
  const double rv = cam.fy * radius / zn + 1.0;
  const double uc = cam.fx * center.x() / center.z() + cam.cx;
  const double vc = cam.fy * center.y() / center.z() + cam.cy;

  const int x0 = std::max(0, static_cast<int>(std::floor(uc - ru)));
  const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(uc + ru)));
  const int y0 = std::max(0, static_cast<int>(std::floor(vc - rv)));
  const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(vc + rv)));

  const double cc = center.squaredNorm() - radius * radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      // Ray through the pixel center: d = ((x-cx)/fx, (y-cy)/fy, 1).
      const Vec3 d((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0);
      const double aa = d.squaredNorm();
      const double bb = -2.0 * d.dot(center);
      const double disc = bb * bb - 4.0 * aa * cc;
      if (disc < 0.0) continue;
      const double t = (-bb - std::sqrt(disc)) / (2.0 * aa);
      if (t <= kNearPlane) continue;
      const Vec3 hit = t * d;
      const Vec3 n = (hit - center) / radius;
      fb.write(x, y, hit.z(), shade(base, n, light_cam), id);
    }
  }
}

void tessellate_and_draw(Framebuffer& fb, const CameraIntrinsics& cam, const Pose& extrinsic,
                         const DrawPrimitive& prim, const Vec3& light_cam) {
  const Pose to_cam = compose(extrinsic, prim.shape.pose);
  auto v = [&](double x, double y, double z) { return to_cam.apply(Vec3(x, y, z)); };

  if (prim.shape.type == ShapeType::Box) {
    const Vec3 h = 0.5 * prim.shape.dims;
    const Vec3 c[8] = {v(-h.x(), -h.y(), -h.z()), v(h.x(), -h.y(), -h.z()),
                       v(h.x(), h.y(), -h.z()),   v(-h.x(), h.y(), -h.z()),
                       v(-h.x(), -h.y(), h.z()),  v(h.x(), -h.y(), h.z()),
                       v(h.x(), h.y(), h.z()),    v(-h.x(), h.y(), h.z())};
    static const int faces[6][4] = {{0, 1, 2, 3}, {4, 7, 6, 5}, {0, 4, 5, 1},
                                    {1, 5, 6, 2}, {2, 6, 7, 3}, {3, 7, 4, 0}};
    for (const auto& f : faces) {
      raster_triangle(fb, cam, c[f[0]], c[f[1]], c[f[2]], prim.color, prim.entity_id, light_cam);
      raster_triangle(fb, cam, c[f[0]], c[f[2]], c[f[3]], prim.color, prim.entity_id, light_cam);
    }
    return;
  }

  // Cylinder: n-gon prism with caps. Enough segments to keep the silhouette
  // within a fraction of a percent of the true circle.
  constexpr int kSegments = 64;
  const double r = prim.shape.dims.x();
  const double hh = prim.shape.dims.y();
  std::array<Vec3, kSegments> top;
  std::array<Vec3, kSegments> bottom;
  for (int i = 0; i < kSegments; ++i) {
    const double a = 2.0 * kPi * i / kSegments;
    top[static_cast<std::size_t>(i)] = v(r * std::cos(a), r * std::sin(a), hh);
    bottom[static_cast<std::size_t>(i)] = v(r * std::cos(a), r * std::sin(a), -hh);
  }
  const Vec3 top_center = v(0, 0, hh);
  const Vec3 bottom_center = v(0, 0, -hh);
  for (int i = 0; i < kSegments; ++i) {
    const int j = (i + 1) % kSegments;
    const auto si = static_cast<std::size_t>(i);
    const auto sj = static_cast<std::size_t>(j);
    raster_triangle(fb, cam, bottom[si], bottom[sj], top[sj], prim.color, prim.entity_id, light_cam);
    raster_triangle(fb, cam, bottom[si], top[sj], top[si], prim.color, prim.entity_id, light_cam);
    raster_triangle(fb, cam, top_center, top[si], top[sj], prim.color, prim.entity_id, light_cam);
    raster_triangle(fb, cam, bottom_center, bottom[sj], bottom[si], prim.color, prim.entity_id, light_cam);
  }
}

}  // namespace

BackgroundId background_from_string(const std::string& name) {
  if (name == "plain") return BackgroundId::Plain;
  if (name == "checker") return BackgroundId::Checker;
  if (name == "textured-1") return BackgroundId::Textured1;
  if (name == "textured-2") return BackgroundId::Textured2;
  throw ConfigError("unknown background variant '" + name + "'");
}

std::string background_to_string(BackgroundId id) {
  switch (id) {
    case BackgroundId::Plain: return "plain";
    case BackgroundId::Checker: return "checker";
    case BackgroundId::Textured1: return "textured-1";
    case BackgroundId::Textured2: return "textured-2";
  }
  return "plain";
}

RenderOutput render_view(const CameraIntrinsics& intrinsics, const Pose& extrinsic,
                         const std::vector<DrawPrimitive>& primitives,
                         const BackgroundSpec& background) {
  RenderOutput out;
  out.image = Image(intrinsics.width, intrinsics.height);
  out.id_buffer.assign(static_cast<std::size_t>(intrinsics.width) * intrinsics.height, 0);
  out.depth_buffer.assign(static_cast<std::size_t>(intrinsics.width) * intrinsics.height,
                          std::numeric_limits<float>::infinity());

  for (int y = 0; y < intrinsics.height; ++y) {
    for (int x = 0; x < intrinsics.width; ++x) {
      const Rgb bg = background_pixel(background, x, y);
      auto* p = out.image.at(x, y);
      p[0] = bg[0];
      p[1] = bg[1];
      p[2] = bg[2];
    }
  }

  Framebuffer fb{intrinsics.width, intrinsics.height, &out.image, &out.id_buffer,
                 &out.depth_buffer};
  const Vec3 light_cam = extrinsic.rotation * kLightDir;

  for (const auto& prim : primitives) {
    if (prim.shape.type == ShapeType::Sphere) {
      raster_sphere(fb, intrinsics, extrinsic.apply(prim.shape.pose.translation),
                    prim.shape.dims.x(), prim.color, prim.entity_id, light_cam);
    } else {
      tessellate_and_draw(fb, intrinsics, extrinsic, prim, light_cam);
    }
  }
  return out;
}

}  // namespace ofa
