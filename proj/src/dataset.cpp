#include "ofa/dataset.hpp"

#include "ofa/digest.hpp"
#include "ofa/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ofa {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void pack_step(const StepData& s, float* out) {
  const auto wp = pose_to_array(s.wrist_pose);
  const auto ap = pose_to_array(s.action_wrist_pose);
  std::size_t i = 0;
  for (double v : wp) out[i++] = static_cast<float>(v);
  for (double v : s.arm_joints) out[i++] = static_cast<float>(v);
  for (double v : s.hand_joints) out[i++] = static_cast<float>(v);
  for (double v : ap) out[i++] = static_cast<float>(v);
  for (double v : s.action_hand_joints) out[i++] = static_cast<float>(v);
  out[i++] = static_cast<float>(s.timestamp);
}

StepData unpack_step(const float* in) {
  StepData s;
  std::array<double, 12> wp{}, ap{};
  std::size_t i = 0;
  for (auto& v : wp) v = in[i++];
  for (auto& v : s.arm_joints) v = in[i++];
  for (auto& v : s.hand_joints) v = in[i++];
  for (auto& v : ap) v = in[i++];
  for (auto& v : s.action_hand_joints) v = in[i++];
  s.timestamp = in[i++];

  // Rotations were rounded to 32-bit; re-orthonormalize the nearest frame
  // before re-validating so the Pose invariant holds.
  auto renorm = [](std::array<double, 12>& a) {
    Vec3 x(a[0], a[1], a[2]);
    Vec3 y(a[3], a[4], a[5]);
    x.normalize();
    y = (y - y.dot(x) * x).normalized();
    const Vec3 z = x.cross(y);
    a[0] = x.x(); a[1] = x.y(); a[2] = x.z();
    a[3] = y.x(); a[4] = y.y(); a[5] = y.z();
    a[6] = z.x(); a[7] = z.y(); a[8] = z.z();
  };
  renorm(wp);
  renorm(ap);
  s.wrist_pose = pose_from_array(wp);
  s.action_wrist_pose = pose_from_array(ap);
  return s;
}

std::string frame_name(std::size_t step, bool left) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu_%s.png", step, left ? "left" : "right");
  return buf;
}

json pose_to_json(const Pose& p) {
  const auto a = pose_to_array(p);
  return json(a);
}

Pose pose_from_json(const json& node) {
  std::array<double, 12> a{};
  for (std::size_t i = 0; i < 12; ++i) a[i] = node.at(i).get<double>();
  return pose_from_array(a);
}

json object_to_json(const ObjectInstance& o) {
  return json{{"name", o.name},
              {"category", category_to_string(o.category)},
              {"shape", o.shape == ShapeType::Cylinder ? "cylinder" : "box"},
              {"dims", {o.dims.x(), o.dims.y(), o.dims.z()}},
              {"pose", pose_to_json(o.true_pose)}};
}

ObjectInstance object_from_json(const json& node) {
  ObjectInstance o;
  o.name = node.at("name").get<std::string>();
  o.category = category_from_string(node.at("category").get<std::string>());
  o.shape = node.at("shape").get<std::string>() == "cylinder" ? ShapeType::Cylinder
                                                              : ShapeType::Box;
  const auto& d = node.at("dims");
  o.dims = Vec3(d[0].get<double>(), d[1].get<double>(), d[2].get<double>());
  o.true_pose = pose_from_json(node.at("pose"));
  return o;
}

}  // namespace

std::string save_episode(const std::string& dir, const RecordedEpisode& episode) {
  const auto& meta = episode.meta;
  if (meta.steps.size() < 2) throw DataError("save_episode: episodes need at least 2 steps");
  if (episode.left_frames.size() != meta.steps.size() ||
      episode.right_frames.size() != meta.steps.size()) {
    throw DataError("save_episode: frame count mismatch");
  }

  fs::create_directories(fs::path(dir) / "frames");

  std::vector<float> blob(meta.steps.size() * kStepFloats);
  for (std::size_t i = 0; i < meta.steps.size(); ++i) {
    pack_step(meta.steps[i], blob.data() + i * kStepFloats);
  }
  const std::string steps_path = (fs::path(dir) / "steps.bin").string();
  {
    std::ofstream out(steps_path, std::ios::binary);
    if (!out) throw DataError("save_episode: cannot write " + steps_path);
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
  }
  const std::string steps_digest =
      digest_bytes(blob.data(), blob.size() * sizeof(float));

  for (std::size_t i = 0; i < meta.steps.size(); ++i) {
    write_png((fs::path(dir) / "frames" / frame_name(i, true)).string(),
              episode.left_frames[i]);
    write_png((fs::path(dir) / "frames" / frame_name(i, false)).string(),
              episode.right_frames[i]);
  }

  json manifest{{"task", meta.task},
                {"hand", meta.hand},
                {"object", object_to_json(meta.object)},
                {"pre_manip_pose", pose_to_json(meta.pre_manip_pose)},
                {"step_count", meta.steps.size()},
                {"scene_digest", meta.scene_digest},
                {"steps_digest", steps_digest}};
  std::ofstream mf((fs::path(dir) / "manifest.json").string());
  mf << manifest.dump(2) << "\n";
  return steps_digest;
}

EpisodeMeta load_episode_meta(const std::string& dir) {
  std::ifstream mf((fs::path(dir) / "manifest.json").string());
  if (!mf) throw DataError("load_episode_meta: missing manifest in " + dir);
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::parse_error& e) {
    throw DataError("load_episode_meta: " + dir + "/manifest.json: " + e.what());
  }

  EpisodeMeta meta;
  meta.dir = dir;
  meta.task = manifest.at("task").get<std::string>();
  meta.hand = manifest.value("hand", "right");
  meta.pre_manip_pose = pose_from_json(manifest.at("pre_manip_pose"));
  meta.object = object_from_json(manifest.at("object"));
  meta.scene_digest = manifest.value("scene_digest", "");

  const std::string steps_path = (fs::path(dir) / "steps.bin").string();
  std::ifstream in(steps_path, std::ios::binary);
  if (!in) throw DataError("load_episode_meta: missing " + steps_path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % (kStepFloats * sizeof(float)) != 0) {
    throw DataError("load_episode_meta: " + steps_path + " has a truncated record at offset " +
                    std::to_string(bytes - bytes % (kStepFloats * sizeof(float))));
  }
  const std::size_t count = bytes / (kStepFloats * sizeof(float));
  const std::size_t expected = manifest.at("step_count").get<std::size_t>();
  if (count != expected) {
    throw DataError("load_episode_meta: " + steps_path + ": manifest says " +
                    std::to_string(expected) + " steps, file holds " + std::to_string(count));
  }
  std::vector<float> blob(count * kStepFloats);
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(bytes));

  meta.steps.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    meta.steps.push_back(unpack_step(blob.data() + i * kStepFloats));
  }
  return meta;
}

Image load_frame(const std::string& dir, std::size_t step, bool left) {
  return read_png((fs::path(dir) / "frames" / frame_name(step, left)).string());
}

std::size_t DatasetIndex::total_steps() const {
  return std::accumulate(episodes.begin(), episodes.end(), std::size_t{0},
                         [](std::size_t acc, const DatasetIndexEntry& e) {
                           return acc + e.step_count;
                         });
}

void write_dataset_index(const std::string& root, const DatasetIndex& index) {
  json eps = json::array();
  for (const auto& e : index.episodes) {
    eps.push_back(json{{"dir", e.dir},
                       {"task", e.task},
                       {"hand", e.hand},
                       {"steps", e.step_count},
                       {"steps_digest", e.steps_digest}});
  }
  json doc{{"episodes", eps},
           {"seed", index.seed},
           {"config_digest", index.config_digest},
           {"total_steps", index.total_steps()}};
  fs::create_directories(root);
  std::ofstream out((fs::path(root) / "index.json").string());
  out << doc.dump(2) << "\n";
}

DatasetIndex read_dataset_index(const std::string& root) {
  std::ifstream in((fs::path(root) / "index.json").string());
  if (!in) throw DataError("read_dataset_index: missing index.json under " + root);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("read_dataset_index: " + root + "/index.json: " + e.what());
  }
  DatasetIndex index;
  index.seed = doc.value("seed", 0ull);
  index.config_digest = doc.value("config_digest", "");
  for (const auto& e : doc.at("episodes")) {
    DatasetIndexEntry entry;
    entry.dir = e.at("dir").get<std::string>();
    entry.task = e.at("task").get<std::string>();
    entry.hand = e.value("hand", "right");
    entry.step_count = e.at("steps").get<std::size_t>();
    entry.steps_digest = e.at("steps_digest").get<std::string>();
    index.episodes.push_back(entry);
  }
  return index;
}

std::vector<EpisodeMeta> load_episodes(const std::string& root, const std::string& hand) {
  const DatasetIndex index = read_dataset_index(root);
  std::vector<EpisodeMeta> out;
  for (const auto& e : index.episodes) {
    if (!hand.empty() && e.hand != hand) continue;
    out.push_back(load_episode_meta((fs::path(root) / e.dir).string()));
  }
  return out;
}

ProprioVec encode_relative_proprio(const StepData& step, const Pose& pre_manip) {
  const RelativePose rel = relative_pose(pre_manip, step.wrist_pose);
  ProprioVec out;
  for (int i = 0; i < 3; ++i) {
    out.v[static_cast<std::size_t>(i)] = static_cast<float>(rel.delta_p[i]);
    out.v[static_cast<std::size_t>(3 + i)] = static_cast<float>(rel.delta_omega.vector()[i]);
  }
  for (int i = 0; i < kHandDof; ++i) {
    out.v[static_cast<std::size_t>(6 + i)] =
        static_cast<float>(step.hand_joints[static_cast<std::size_t>(i)]);
  }
  return out;
}

ProprioVec encode_absolute_proprio(const StepData& step) {
  const AxisAngle aa = to_axis_angle(step.wrist_pose.rotation);
  ProprioVec out;
  for (int i = 0; i < 3; ++i) {
    out.v[static_cast<std::size_t>(i)] = static_cast<float>(step.wrist_pose.translation[i]);
    out.v[static_cast<std::size_t>(3 + i)] = static_cast<float>(aa.vector()[i]);
  }
  for (int i = 0; i < kHandDof; ++i) {
    out.v[static_cast<std::size_t>(6 + i)] =
        static_cast<float>(step.hand_joints[static_cast<std::size_t>(i)]);
  }
  return out;
}

namespace {

ActionChunk encode_chunk(const EpisodeMeta& episode, std::size_t t, int k, bool relative) {
  if (t >= episode.steps.size()) throw DataError("encode chunk: step index out of range");
  ActionChunk chunk;
  chunk.k = k;
  chunk.data.resize(static_cast<std::size_t>(k) * kActionDim);
  for (int i = 0; i < k; ++i) {
    const std::size_t idx = std::min(t + static_cast<std::size_t>(i),
                                     episode.steps.size() - 1);
    const StepData& s = episode.steps[idx];
    float* row = chunk.step(i);
    if (relative) {
      const RelativePose rel = relative_pose(episode.pre_manip_pose, s.action_wrist_pose);
      for (int j = 0; j < 3; ++j) {
        row[j] = static_cast<float>(rel.delta_p[j]);
        row[3 + j] = static_cast<float>(rel.delta_omega.vector()[j]);
      }
    } else {
      const AxisAngle aa = to_axis_angle(s.action_wrist_pose.rotation);
      for (int j = 0; j < 3; ++j) {
        row[j] = static_cast<float>(s.action_wrist_pose.translation[j]);
        row[3 + j] = static_cast<float>(aa.vector()[j]);
      }
    }
    for (int j = 0; j < kHandDof; ++j) {
      row[6 + j] = static_cast<float>(s.action_hand_joints[static_cast<std::size_t>(j)]);
    }
  }
  return chunk;
}

}  // namespace

ActionChunk encode_relative_chunk(const EpisodeMeta& episode, std::size_t t, int k) {
  return encode_chunk(episode, t, k, true);
}

ActionChunk encode_absolute_chunk(const EpisodeMeta& episode, std::size_t t, int k) {
  return encode_chunk(episode, t, k, false);
}

BuildResult build_samples(const std::vector<EpisodeMeta>& episodes, int k,
                          const StereoRig& rig, const RobotModel& model,
                          const CropOptions& crop, const EncodingOptions& encoding) {
  BuildResult result;
  for (const auto& episode : episodes) {
    for (std::size_t t = 0; t < episode.steps.size(); ++t) {
      const StepData& step = episode.steps[t];
      const Image left = load_frame(episode.dir, t, true);
      const Image right = load_frame(episode.dir, t, false);

      TrainingSample sample;
      if (encoding.hand_focus) {
        try {
          auto focus = extract_hand_focus(rig, model, step.wrist_pose, step.hand_joints,
                                          left, right, crop);
          sample.left = std::move(focus.left_crop);
          sample.right = std::move(focus.right_crop);
        } catch (const DataError&) {
          ++result.skipped;
          continue;
        }
      } else {
        sample.left = bilinear_resize(left, 0, 0, left.width - 1, left.height - 1,
                                      crop.crop_size, crop.crop_size);
        sample.right = bilinear_resize(right, 0, 0, right.width - 1, right.height - 1,
                                       crop.crop_size, crop.crop_size);
      }
      sample.proprio = encoding.relative
                           ? encode_relative_proprio(step, episode.pre_manip_pose)
                           : encode_absolute_proprio(step);
      sample.chunk = encoding.relative ? encode_relative_chunk(episode, t, k)
                                       : encode_absolute_chunk(episode, t, k);
      result.samples.push_back(std::move(sample));
    }
  }
  return result;
}

std::vector<std::size_t> sample_batch_indices(std::size_t sample_count,
                                              std::size_t batch_size, Rng& rng) {
  if (sample_count == 0) throw DataError("sample_batch: empty sample set");
  std::vector<std::size_t> out(batch_size);
  for (auto& idx : out) idx = rng.uniform_index(sample_count);
  return out;
}

}  // namespace ofa
