#pragma once

#include "ofa/dataset.hpp"
#include "ofa/image.hpp"
#include "ofa/nn.hpp"

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

namespace ofa {

/// Model, optimization and method settings for one training run. The three
/// method flags select the ablation variant: relative encodings, hand-focus
/// crops, and whether evaluation starts from the staged wrist pose.
struct PolicyConfig {
  // architecture
  int k = 20;
  int z_dim = 32;
  int image_feature_dim = 64;
  std::vector<int> conv_channels = {16, 32, 64, 128};
  int conv_kernel = 3;
  std::vector<int> encoder_hidden = {256, 256};
  std::vector<int> decoder_hidden = {256, 256, 256};
  int crop_size = 128;

  // optimization
  double eta = 10.0;  // divergence weight
  double learning_rate = 1e-4;
  int batch_size = 64;
  int total_steps = 20000;
  int log_every = 100;
  std::uint64_t seed = 1;

  // method variant
  bool relative = true;
  bool hand_focus = true;
  bool arrival = true;

  double aggregate_m = 0.1;  // exponential age decay for chunk blending

  NetSpec net_spec() const;
  void validate() const;  // throws ConfigError
};

/// Per-dimension dataset statistics; inputs and targets are standardized
/// with these during training and inference.
struct FeatureStats {
  std::array<float, kProprioDim> proprio_mean{};
  std::array<float, kProprioDim> proprio_std{};
  std::array<float, kActionDim> action_mean{};
  std::array<float, kActionDim> action_std{};

  FeatureStats() {
    proprio_std.fill(1.0f);
    action_std.fill(1.0f);
  }
};

struct PolicyParams {
  PolicyConfig config;
  std::vector<float> values;
  FeatureStats stats;
  bool trained = false;

  void validate() const;  // layout size + finiteness
};

struct LossPoint {
  int step = 0;
  double total = 0.0;
  double mse = 0.0;
  double kl = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<LossPoint> curve;
};

/// Seeded initialization + fixed-step Adam over the chunk-prediction loss.
/// Deterministic under config.seed; aborts with diagnostics when the loss
/// leaves the reals.
TrainResult train_policy(const PolicyConfig& config,
                         const std::vector<TrainingSample>& samples);

/// One observation at inference time: unified-size stereo views plus the
/// 12-dim proprioception in the encoding the policy was trained with.
struct Observation {
  Image left;
  Image right;
  ProprioVec proprio;
};

/// Prior-mean latent decode. Throws if the parameters are untrained.
ActionChunk infer_chunk(const PolicyParams& params, const Observation& observation);

/// Reusable inference handle: owns the network structure, applies the
/// stored feature statistics around the raw decode.
class PolicyRuntime {
 public:
  explicit PolicyRuntime(const PolicyParams& params);

  ActionChunk infer(const Observation& observation) const;
  const PolicyParams& params() const { return *params_; }

 private:
  const PolicyParams* params_;
  PolicyNet<float> net_;
};

/// Blends the predictions several overlapping chunks make for step `t`:
/// exponentially decayed by chunk age and normalized. Throws DataError when
/// no chunk covers the step.
std::array<float, kActionDim> temporal_aggregate(
    const std::vector<std::pair<int, const ActionChunk*>>& chunks_with_birth, int t,
    double m);

/// Rolling buffer for inference loops.
class ChunkAggregator {
 public:
  ChunkAggregator(int k, double m) : k_(k), m_(m) {}

  void push(int step, ActionChunk chunk);
  std::array<float, kActionDim> action_at(int step);

 private:
  int k_;
  double m_;
  std::deque<std::pair<int, ActionChunk>> pending_;
};

/// Layout header (JSON, single line) followed by the raw little-endian
/// 32-bit float blob.
void save_policy(const std::string& path, const PolicyParams& params);
PolicyParams load_policy(const std::string& path);

void write_loss_curve_csv(const std::string& path, const std::vector<LossPoint>& curve);

}  // namespace ofa
