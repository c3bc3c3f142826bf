#pragma once

#include "ofa/camera.hpp"
#include "ofa/geom.hpp"
#include "ofa/image.hpp"
#include "ofa/kinematics.hpp"
#include "ofa/perception.hpp"
#include "ofa/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ofa {

/// Numeric part of one demonstration step. On disk each step is 43
/// little-endian 32-bit floats: 12 wrist pose, 6 arm joints, 6 hand joints,
/// 12 commanded wrist pose, 6 commanded finger angles, 1 timestamp.
struct StepData {
  Pose wrist_pose;
  ArmJoints arm_joints{};
  HandJoints hand_joints{};
  Pose action_wrist_pose;
  HandJoints action_hand_joints{};
  double timestamp = 0.0;
};

inline constexpr std::size_t kStepFloats = 43;

struct EpisodeMeta {
  std::string dir;  // on-disk location; empty while unsaved
  std::string task;
  std::string hand = "right";
  Pose pre_manip_pose;
  ObjectInstance object;
  std::string scene_digest;
  std::vector<StepData> steps;
};

/// Fully materialized episode as produced by the demonstration oracle.
struct RecordedEpisode {
  EpisodeMeta meta;
  std::vector<Image> left_frames;
  std::vector<Image> right_frames;
};

/// Writes steps.bin, manifest.json and frames/NNNN_{left,right}.png.
/// Returns the digest of steps.bin.
std::string save_episode(const std::string& dir, const RecordedEpisode& episode);

EpisodeMeta load_episode_meta(const std::string& dir);
Image load_frame(const std::string& dir, std::size_t step, bool left);

struct DatasetIndexEntry {
  std::string dir;  // relative to the dataset root
  std::string task;
  std::string hand;
  std::size_t step_count = 0;
  std::string steps_digest;
};

struct DatasetIndex {
  std::vector<DatasetIndexEntry> episodes;
  std::uint64_t seed = 0;
  std::string config_digest;

  std::size_t total_steps() const;
};

void write_dataset_index(const std::string& root, const DatasetIndex& index);
DatasetIndex read_dataset_index(const std::string& root);

/// Loads episode metadata for every index entry (optionally one hand only).
std::vector<EpisodeMeta> load_episodes(const std::string& root, const std::string& hand = "");

// --- Policy-facing encodings ---------------------------------------------

inline constexpr int kProprioDim = 12;  // 3 position + 3 axis-angle + 6 fingers
inline constexpr int kActionDim = 12;   // 6 pose + 6 fingers per step

/// k consecutive actions, each 12 numbers; when `relative` they are wrist
/// poses expressed against the episode's pre-manipulation pose.
struct ActionChunk {
  int k = 0;
  std::vector<float> data;  // k * kActionDim

  float* step(int i) { return data.data() + static_cast<std::size_t>(i) * kActionDim; }
  const float* step(int i) const {
    return data.data() + static_cast<std::size_t>(i) * kActionDim;
  }
};

struct ProprioVec {
  std::array<float, kProprioDim> v{};
};

struct EncodingOptions {
  bool relative = true;    // poses against the pre-manipulation pose
  bool hand_focus = true;  // crops instead of resized full frames
};

/// (delta_p, delta_omega, fingers) of a step against the pre-manipulation
/// pose.
ProprioVec encode_relative_proprio(const StepData& step, const Pose& pre_manip);

/// Absolute variant: wrist translation + axis-angle orientation + fingers.
ProprioVec encode_absolute_proprio(const StepData& step);

/// Action chunk starting at step t; entries beyond the episode end repeat
/// the final action.
ActionChunk encode_relative_chunk(const EpisodeMeta& episode, std::size_t t, int k);
ActionChunk encode_absolute_chunk(const EpisodeMeta& episode, std::size_t t, int k);

struct TrainingSample {
  Image left;   // crop (or resized full frame), unified square size
  Image right;
  ProprioVec proprio;
  ActionChunk chunk;
};

struct BuildResult {
  std::vector<TrainingSample> samples;
  std::size_t skipped = 0;  // steps with no visible hand
};

/// One sample per step per episode; frames are streamed from disk and
/// reduced to crops immediately.
BuildResult build_samples(const std::vector<EpisodeMeta>& episodes, int k,
                          const StereoRig& rig, const RobotModel& model,
                          const CropOptions& crop, const EncodingOptions& encoding);

/// Uniform with replacement; deterministic under the caller's stream.
std::vector<std::size_t> sample_batch_indices(std::size_t sample_count,
                                              std::size_t batch_size, Rng& rng);

}  // namespace ofa
