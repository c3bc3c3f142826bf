#include "ofa/perception.hpp"

#include "ofa/errors.hpp"

namespace ofa {

Category category_from_string(const std::string& name) {
  if (name == "cylinder-graspable") return Category::CylinderGraspable;
  if (name == "handle-graspable") return Category::HandleGraspable;
  if (name == "top-pinchable") return Category::TopPinchable;
  if (name == "flat-liftable") return Category::FlatLiftable;
  throw ConfigError("unknown object category '" + name + "'");
}

std::string category_to_string(Category c) {
  switch (c) {
    case Category::CylinderGraspable: return "cylinder-graspable";
    case Category::HandleGraspable: return "handle-graspable";
    case Category::TopPinchable: return "top-pinchable";
    case Category::FlatLiftable: return "flat-liftable";
  }
  return "cylinder-graspable";
}

void ObjectInstance::validate() const {
  const bool wants_cylinder =
      category == Category::CylinderGraspable || category == Category::HandleGraspable;
  if (wants_cylinder && shape != ShapeType::Cylinder) {
    throw ConfigError("object '" + name + "': category " + category_to_string(category) +
                      " requires a cylinder");
  }
  if (!wants_cylinder && shape != ShapeType::Box) {
    throw ConfigError("object '" + name + "': category " + category_to_string(category) +
                      " requires a box");
  }
  const int live_dims = shape == ShapeType::Cylinder ? 2 : 3;
  for (int i = 0; i < live_dims; ++i) {
    if (dims[i] <= 0.0) {
      throw ConfigError("object '" + name + "': dimensions must be positive");
    }
  }
}

void CategoryOffsetTable::validate() const {
  for (Category c : {Category::CylinderGraspable, Category::HandleGraspable,
                     Category::TopPinchable, Category::FlatLiftable}) {
    if (offsets.find(c) == offsets.end()) {
      throw ConfigError("category offset table: missing entry for " + category_to_string(c));
    }
  }
}

const CategoryOffset& CategoryOffsetTable::at(Category c) const {
  const auto it = offsets.find(c);
  if (it == offsets.end()) {
    throw ConfigError("category offset table: missing entry for " + category_to_string(c));
  }
  return it->second;
}

LocateResult locate_object(const std::vector<SceneEntity>& entities,
                           const RenderOutput& reference_view, const std::string& name,
                           const NoiseModel& noise, Rng& rng) {
  LocateResult result;
  const SceneEntity* entity = nullptr;
  for (const auto& e : entities) {
    if (e.object && e.object->name == name) {
      entity = &e;
      break;
    }
  }
  if (!entity) {
    result.status = LocateStatus::NotFound;
    return result;
  }

  const int w = reference_view.image.width;
  const int h = reference_view.image.height;
  Mask mask(w, h);
  std::size_t visible = 0;
  for (std::size_t i = 0; i < reference_view.id_buffer.size(); ++i) {
    if (reference_view.id_buffer[i] == entity->entity_id) {
      mask.bits[i] = 1;
      ++visible;
    }
  }
  if (visible == 0) {
    result.status = LocateStatus::Occluded;
    return result;
  }

  Pose estimate = entity->object->true_pose;
  if (noise.translation_sigma > 0.0) {
    estimate.translation += Vec3(rng.gaussian(0.0, noise.translation_sigma),
                                 rng.gaussian(0.0, noise.translation_sigma),
                                 rng.gaussian(0.0, noise.translation_sigma));
  } else {
    // Keep the stream aligned between noisy and noise-free runs.
    rng.gaussian();
    rng.gaussian();
    rng.gaussian();
  }
  Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
  while (axis.norm() < 1e-9) axis = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  axis.normalize();
  const double angle = rng.gaussian(0.0, noise.rotation_sigma);
  if (noise.rotation_sigma > 0.0) {
    estimate.rotation = from_axis_angle(AxisAngle(axis * angle)) * estimate.rotation;
  }

  result.status = LocateStatus::Found;
  result.estimate.pose = estimate;
  result.estimate.pixel_mask = std::move(mask);
  return result;
}

Pose pre_manipulation_pose(const Pose& estimate, const CategoryOffsetTable& table,
                           Category category) {
  const CategoryOffset& offset = table.at(category);
  Pose out;
  out.rotation = rot_update(estimate.rotation, offset.rotation);
  if (table.translation_frame == OffsetFrame::Object) {
    out.translation = estimate.translation + estimate.rotation * offset.translation;
  } else {
    out.translation = estimate.translation + offset.translation;
  }
  return out;
}

}  // namespace ofa
