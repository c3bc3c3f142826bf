#include "ofa/config.hpp"

#include "ofa/digest.hpp"
#include "ofa/errors.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace ofa {

using nlohmann::json;
namespace fs = std::filesystem;

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)),
                     std::istreambuf_iterator<char>());
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError("config " + path + ":" + std::to_string(line) + ": " + e.what());
  }
}

namespace {

// Strict merge: every overlay key must already exist in the base tree, so
// typos and unknown settings fail loudly.
void merge_into(json& base, const json& overlay, const std::string& prefix) {
  for (const auto& [key, value] : overlay.items()) {
    if (!base.contains(key)) {
      throw ConfigError("config: unknown key '" + prefix + key + "'");
    }
    if (base[key].is_object() && value.is_object()) {
      merge_into(base[key], value, prefix + key + ".");
    } else {
      base[key] = value;
    }
  }
}

json* walk_path(json& tree, const std::string& path) {
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (!node->is_object() || !node->contains(key)) return nullptr;
    node = &(*node)[key];
    if (dot == std::string::npos) return node;
    start = dot + 1;
  }
}

Vec3 vec3_of(const json& node) {
  return Vec3(node.at(0).get<double>(), node.at(1).get<double>(), node.at(2).get<double>());
}

Rgb rgb_of(const json& node) {
  return Rgb{static_cast<std::uint8_t>(node.at(0).get<int>()),
             static_cast<std::uint8_t>(node.at(1).get<int>()),
             static_cast<std::uint8_t>(node.at(2).get<int>())};
}

CategoryOffsetTable offsets_of(const json& node, OffsetFrame frame) {
  CategoryOffsetTable table;
  table.translation_frame = frame;
  for (const auto& [name, entry] : node.items()) {
    CategoryOffset offset;
    offset.rotation = from_axis_angle(AxisAngle(vec3_of(entry.at("rotation_axis_angle"))));
    offset.translation = vec3_of(entry.at("translation"));
    table.offsets[category_from_string(name)] = offset;
  }
  table.validate();
  return table;
}

template <std::size_t N>
std::array<double, N> joints_of(const json& node) {
  if (node.size() != N) throw ConfigError("config: expected " + std::to_string(N) + " joints");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = node.at(i).get<double>();
  return out;
}

TaskSpec task_of(const std::string& name, const json& node) {
  TaskSpec task;
  task.name = name;
  task.tmpl = template_from_string(node.at("template").get<std::string>());
  task.category = category_from_string(node.at("category").get<std::string>());
  task.object_name = node.at("object_name").get<std::string>();
  task.object_shape =
      node.at("shape").get<std::string>() == "cylinder" ? ShapeType::Cylinder : ShapeType::Box;
  task.object_dims = vec3_of(node.at("dims"));
  task.object_color = rgb_of(node.at("color"));
  const auto& rect = node.at("placement_rect");
  for (std::size_t i = 0; i < 4; ++i) task.placement_rect[i] = rect.at(i).get<double>();
  const auto& yaw = node.at("yaw_range");
  task.yaw_range = {yaw.at(0).get<double>(), yaw.at(1).get<double>()};

  const auto& ex = node.at("expert");
  task.expert.approach_travel = ex.at("approach_travel").get<double>();
  task.expert.lift_height = ex.at("lift_height").get<double>();
  task.expert.approach_steps = ex.at("approach_steps").get<int>();
  task.expert.close_steps = ex.at("close_steps").get<int>();
  task.expert.lift_steps = ex.at("lift_steps").get<int>();
  task.expert.open_pose = joints_of<kHandDof>(ex.at("open"));
  task.expert.closed_pose = joints_of<kHandDof>(ex.at("closed"));
  return task;
}

}  // namespace

SimConfig RunConfig::sim() const {
  SimConfig cfg;
  cfg.robot = load_robot_model(robot_file());

  const auto& cam = tree.at("camera");
  CameraIntrinsics intr;
  intr.width = cam.at("width").get<int>();
  intr.height = cam.at("height").get<int>();
  const double h_half = 0.5 * cam.at("hfov_deg").get<double>() * M_PI / 180.0;
  const double v_half = 0.5 * cam.at("vfov_deg").get<double>() * M_PI / 180.0;
  intr.fx = 0.5 * intr.width / std::tan(h_half);
  intr.fy = 0.5 * intr.height / std::tan(v_half);
  intr.cx = 0.5 * intr.width;
  intr.cy = 0.5 * intr.height;
  cfg.rig = make_lookat_rig(intr, vec3_of(cam.at("position")), vec3_of(cam.at("lookat")),
                            cam.at("baseline").get<double>());

  const auto& crop = tree.at("crop");
  cfg.crop.enlarge_factor = crop.at("enlarge_factor").get<double>();
  cfg.crop.min_extent = crop.at("min_extent").get<int>();
  cfg.crop.crop_size = crop.at("size").get<int>();

  const auto& off = tree.at("offsets");
  const OffsetFrame frame = off.at("frame").get<std::string>() == "world"
                                ? OffsetFrame::World
                                : OffsetFrame::Object;
  cfg.offsets_right = offsets_of(off.at("right"), frame);
  cfg.offsets_left = offsets_of(off.at("left"), frame);

  const auto& noise = tree.at("noise");
  cfg.noise.translation_sigma = noise.at("translation_sigma").get<double>();
  cfg.noise.rotation_sigma = noise.at("rotation_sigma").get<double>();

  const auto& pl = tree.at("planner");
  cfg.planner.collision_margin = pl.at("collision_margin").get<double>();
  cfg.planner.sample_step = pl.at("sample_step").get<double>();
  cfg.planner.edge_resolution = pl.at("edge_resolution").get<double>();
  cfg.planner.shortcut_iterations = pl.at("shortcut_iterations").get<int>();
  cfg.planner.max_samples = pl.at("max_samples").get<int>();
  cfg.planner.timeout_seconds = pl.at("timeout_seconds").get<double>();
  cfg.planner.timestep = pl.at("timestep").get<double>();
  cfg.planner.goal_bias = pl.at("goal_bias").get<double>();

  const auto& world = tree.at("world");
  cfg.table = Obstacle::box(Pose{Rotation(), vec3_of(world.at("table_center"))},
                            vec3_of(world.at("table_extents")));
  cfg.table_color = rgb_of(world.at("table_color"));
  cfg.right_base = Pose{Rotation(), vec3_of(world.at("right_base"))};
  cfg.left_base = Pose{Rotation(), vec3_of(world.at("left_base"))};
  cfg.home_q = joints_of<kArmDof>(world.at("home_joints"));
  cfg.hand_open = joints_of<kHandDof>(world.at("hand_open"));

  const auto& sim = tree.at("sim");
  cfg.control_dt = sim.at("control_dt").get<double>();
  cfg.contact_band = sim.at("contact_band").get<double>();
  cfg.grasp_lift = sim.at("grasp_lift").get<double>();
  cfg.pinch_lift = sim.at("pinch_lift").get<double>();
  cfg.tray_lift = sim.at("tray_lift").get<double>();
  cfg.tray_tilt_deg = sim.at("tray_tilt_deg").get<double>();
  cfg.max_rollout_steps = sim.at("max_rollout_steps").get<int>();
  cfg.jitter_translation = sim.at("jitter_translation").get<double>();
  cfg.jitter_rotation = sim.at("jitter_rotation").get<double>();

  for (const auto& [name, node] : tree.at("tasks").items()) {
    cfg.tasks[name] = task_of(name, node);
  }
  return cfg;
}

PolicyConfig RunConfig::policy() const {
  const auto& p = tree.at("policy");
  PolicyConfig cfg;
  cfg.k = p.at("k").get<int>();
  cfg.z_dim = p.at("z_dim").get<int>();
  cfg.image_feature_dim = p.at("image_feature_dim").get<int>();
  cfg.conv_channels = p.at("conv_channels").get<std::vector<int>>();
  cfg.conv_kernel = p.at("conv_kernel").get<int>();
  cfg.encoder_hidden = p.at("encoder_hidden").get<std::vector<int>>();
  cfg.decoder_hidden = p.at("decoder_hidden").get<std::vector<int>>();
  cfg.crop_size = p.at("crop_size").get<int>();
  cfg.eta = p.at("eta").get<double>();
  cfg.learning_rate = p.at("learning_rate").get<double>();
  cfg.batch_size = p.at("batch_size").get<int>();
  cfg.total_steps = p.at("total_steps").get<int>();
  cfg.log_every = p.at("log_every").get<int>();
  cfg.seed = p.at("seed").get<std::uint64_t>();
  cfg.relative = p.at("relative").get<bool>();
  cfg.hand_focus = p.at("hand_focus").get<bool>();
  cfg.arrival = p.at("arrival").get<bool>();
  cfg.aggregate_m = p.at("aggregate_m").get<double>();
  cfg.validate();
  if (cfg.relative && !cfg.arrival) {
    throw ConfigError("policy config: relative encodings require staged-pose arrival");
  }
  return cfg;
}

std::string RunConfig::robot_file() const {
  const std::string name = tree.at("robot_file").get<std::string>();
  const std::string dir = tree.at("_base_dir").get<std::string>();
  if (fs::path(name).is_absolute()) return name;
  return (fs::path(dir) / name).string();
}

RunConfig load_run_config(const std::string& base_path,
                          const std::vector<std::string>& overlay_paths,
                          const std::vector<std::string>& set_overrides) {
  RunConfig config;
  config.tree = parse_json_file(base_path);

  for (const auto& overlay : overlay_paths) {
    merge_into(config.tree, parse_json_file(overlay), "");
  }

  for (const auto& override_spec : set_overrides) {
    const std::size_t eq = override_spec.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: --set expects key.path=value, got '" + override_spec + "'");
    }
    const std::string path = override_spec.substr(0, eq);
    const std::string raw = override_spec.substr(eq + 1);
    json* node = walk_path(config.tree, path);
    if (!node) throw ConfigError("config: unknown key '" + path + "'");
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // bare strings stay strings
    }
    *node = value;
  }

  // The digest covers only the user-visible settings.
  config.digest = digest_string(config.tree.dump());
  config.tree["_base_dir"] = fs::path(base_path).parent_path().string();
  return config;
}

}  // namespace ofa
