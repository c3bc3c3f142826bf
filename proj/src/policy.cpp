#include "ofa/policy.hpp"

#include "ofa/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ofa {

using nlohmann::json;

NetSpec PolicyConfig::net_spec() const {
  NetSpec spec;
  spec.crop_size = crop_size;
  spec.conv_channels = conv_channels;
  spec.conv_kernel = conv_kernel;
  spec.image_feature_dim = image_feature_dim;
  spec.encoder_hidden = encoder_hidden;
  spec.decoder_hidden = decoder_hidden;
  spec.z_dim = z_dim;
  spec.k = k;
  return spec;
}

void PolicyConfig::validate() const {
  if (k <= 0 || z_dim <= 0 || image_feature_dim <= 0 || crop_size <= 0) {
    throw ConfigError("policy config: dimensions must be positive");
  }
  if (eta < 0.0) throw ConfigError("policy config: eta must be >= 0");
  if (batch_size <= 0 || total_steps <= 0 || learning_rate <= 0.0) {
    throw ConfigError("policy config: optimization settings must be positive");
  }
  if (conv_channels.empty() || encoder_hidden.empty() || decoder_hidden.empty()) {
    throw ConfigError("policy config: empty layer stack");
  }
  int side = crop_size;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) side = (side + 1) / 2;
  if (side < 1) throw ConfigError("policy config: crop too small for the conv stack");
}

void PolicyParams::validate() const {
  const PolicyNet<float> net(config.net_spec());
  if (values.size() != net.param_count()) {
    throw DataError("policy params: expected " + std::to_string(net.param_count()) +
                    " floats, got " + std::to_string(values.size()));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw DataError("policy params: non-finite value");
  }
}

namespace {

/// Per-dimension mean/std over the sample set; action statistics pool the
/// chunk steps. A floor keeps constant dimensions harmless.
FeatureStats compute_stats(const std::vector<TrainingSample>& samples, int k) {
  FeatureStats stats;
  std::array<double, kProprioDim> p_sum{}, p_sq{};
  std::array<double, kActionDim> a_sum{}, a_sq{};
  std::size_t a_count = 0;
  for (const auto& s : samples) {
    for (int i = 0; i < kProprioDim; ++i) {
      p_sum[static_cast<std::size_t>(i)] += s.proprio.v[static_cast<std::size_t>(i)];
      p_sq[static_cast<std::size_t>(i)] += static_cast<double>(s.proprio.v[static_cast<std::size_t>(i)]) *
                                           s.proprio.v[static_cast<std::size_t>(i)];
    }
    for (int t = 0; t < k; ++t) {
      const float* row = s.chunk.step(t);
      for (int i = 0; i < kActionDim; ++i) {
        a_sum[static_cast<std::size_t>(i)] += row[i];
        a_sq[static_cast<std::size_t>(i)] += static_cast<double>(row[i]) * row[i];
      }
      ++a_count;
    }
  }
  const double pn = static_cast<double>(samples.size());
  for (int i = 0; i < kProprioDim; ++i) {
    const double mean = p_sum[static_cast<std::size_t>(i)] / pn;
    const double var = std::max(0.0, p_sq[static_cast<std::size_t>(i)] / pn - mean * mean);
    stats.proprio_mean[static_cast<std::size_t>(i)] = static_cast<float>(mean);
    stats.proprio_std[static_cast<std::size_t>(i)] =
        static_cast<float>(std::max(1e-3, std::sqrt(var)));
  }
  const double an = static_cast<double>(a_count);
  for (int i = 0; i < kActionDim; ++i) {
    const double mean = a_sum[static_cast<std::size_t>(i)] / an;
    const double var = std::max(0.0, a_sq[static_cast<std::size_t>(i)] / an - mean * mean);
    stats.action_mean[static_cast<std::size_t>(i)] = static_cast<float>(mean);
    stats.action_std[static_cast<std::size_t>(i)] =
        static_cast<float>(std::max(1e-3, std::sqrt(var)));
  }
  return stats;
}

}  // namespace

TrainResult train_policy(const PolicyConfig& config,
                         const std::vector<TrainingSample>& samples) {
  config.validate();
  if (samples.empty()) throw DataError("train_policy: no training samples");

  const PolicyNet<float> net(config.net_spec());
  for (const auto& s : samples) {
    if (s.chunk.k != config.k) {
      throw DataError("train_policy: sample chunk length " + std::to_string(s.chunk.k) +
                      " does not match configured " + std::to_string(config.k));
    }
  }

  TrainResult result;
  result.params.config = config;
  result.params.stats = compute_stats(samples, config.k);
  const FeatureStats& stats = result.params.stats;

  // Standardized copies of the numeric features; images stay as bytes.
  std::vector<std::array<float, kProprioDim>> norm_proprio(samples.size());
  std::vector<std::vector<float>> norm_chunks(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (int i = 0; i < kProprioDim; ++i) {
      norm_proprio[s][static_cast<std::size_t>(i)] =
          (samples[s].proprio.v[static_cast<std::size_t>(i)] -
           stats.proprio_mean[static_cast<std::size_t>(i)]) /
          stats.proprio_std[static_cast<std::size_t>(i)];
    }
    norm_chunks[s].resize(samples[s].chunk.data.size());
    for (int t = 0; t < config.k; ++t) {
      const float* row = samples[s].chunk.step(t);
      float* out = norm_chunks[s].data() + static_cast<std::size_t>(t) * kActionDim;
      for (int i = 0; i < kActionDim; ++i) {
        out[i] = (row[i] - stats.action_mean[static_cast<std::size_t>(i)]) /
                 stats.action_std[static_cast<std::size_t>(i)];
      }
    }
  }

  Rng init_rng(derive_seed(config.seed, 1));
  Rng batch_rng(derive_seed(config.seed, 2));
  Rng noise_rng(derive_seed(config.seed, 3));

  net.init_params(result.params.values, init_rng);
  auto& params = result.params.values;

  std::vector<float> grad(params.size());
  std::vector<float> m(params.size(), 0.0f);
  std::vector<float> v(params.size(), 0.0f);
  const float beta1 = 0.9f, beta2 = 0.999f, adam_eps = 1e-8f;

  std::vector<SampleRef> batch(static_cast<std::size_t>(config.batch_size));
  std::vector<float> eps(static_cast<std::size_t>(config.batch_size) * config.z_dim);

  for (int step = 0; step < config.total_steps; ++step) {
    const auto indices =
        sample_batch_indices(samples.size(), static_cast<std::size_t>(config.batch_size),
                             batch_rng);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const TrainingSample& s = samples[indices[i]];
      batch[i] = SampleRef{&s.left, &s.right, norm_proprio[indices[i]].data(),
                           norm_chunks[indices[i]].data()};
    }
    for (auto& e : eps) e = static_cast<float>(noise_rng.gaussian());

    std::fill(grad.begin(), grad.end(), 0.0f);
    const auto parts = net.loss_and_grad(params.data(), batch, static_cast<float>(config.eta),
                                         eps, grad.data());

    if (!std::isfinite(parts.total)) {
      double gn = 0.0;
      for (float g : grad) gn += static_cast<double>(g) * g;
      std::ostringstream os;
      os << "train_policy: non-finite loss at step " << step << " (loss=" << parts.total
         << ", grad_norm=" << std::sqrt(gn) << ")";
      throw std::runtime_error(os.str());
    }

    const float t = static_cast<float>(step + 1);
    const float corr1 = 1.0f - std::pow(beta1, t);
    const float corr2 = 1.0f - std::pow(beta2, t);
    const float lr = static_cast<float>(config.learning_rate);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0f - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0f - beta2) * grad[i] * grad[i];
      const float mh = m[i] / corr1;
      const float vh = v[i] / corr2;
      params[i] -= lr * mh / (std::sqrt(vh) + adam_eps);
    }

    if (step % config.log_every == 0 || step == config.total_steps - 1) {
      result.curve.push_back({step, static_cast<double>(parts.total),
                              static_cast<double>(parts.mse),
                              static_cast<double>(parts.kl)});
    }
  }

  result.params.trained = true;
  result.params.validate();
  return result;
}

PolicyRuntime::PolicyRuntime(const PolicyParams& params)
    : params_(&params), net_(params.config.net_spec()) {
  if (!params.trained) throw DataError("PolicyRuntime: parameters are untrained");
}

ActionChunk PolicyRuntime::infer(const Observation& observation) const {
  const FeatureStats& stats = params_->stats;
  std::array<float, kProprioDim> proprio{};
  for (int i = 0; i < kProprioDim; ++i) {
    proprio[static_cast<std::size_t>(i)] =
        (observation.proprio.v[static_cast<std::size_t>(i)] -
         stats.proprio_mean[static_cast<std::size_t>(i)]) /
        stats.proprio_std[static_cast<std::size_t>(i)];
  }
  std::vector<float> z(static_cast<std::size_t>(params_->config.z_dim), 0.0f);
  auto out = net_.decode(params_->values.data(), observation.left, observation.right,
                         proprio.data(), z.data());

  ActionChunk chunk;
  chunk.k = params_->config.k;
  chunk.data.resize(out.size());
  for (int t = 0; t < chunk.k; ++t) {
    const float* row = out.data() + static_cast<std::size_t>(t) * kActionDim;
    float* dst = chunk.step(t);
    for (int i = 0; i < kActionDim; ++i) {
      dst[i] = row[i] * stats.action_std[static_cast<std::size_t>(i)] +
               stats.action_mean[static_cast<std::size_t>(i)];
    }
  }
  return chunk;
}

ActionChunk infer_chunk(const PolicyParams& params, const Observation& observation) {
  if (!params.trained) throw DataError("infer_chunk: parameters are untrained");
  return PolicyRuntime(params).infer(observation);
}

std::array<float, kActionDim> temporal_aggregate(
    const std::vector<std::pair<int, const ActionChunk*>>& chunks_with_birth, int t,
    double m) {
  std::array<double, kActionDim> acc{};
  double weight_sum = 0.0;
  for (const auto& [birth, chunk] : chunks_with_birth) {
    const int age = t - birth;
    if (age < 0 || age >= chunk->k) continue;
    const double w = std::exp(-m * age);
    const float* row = chunk->step(age);
    for (int i = 0; i < kActionDim; ++i) acc[static_cast<std::size_t>(i)] += w * row[i];
    weight_sum += w;
  }
  if (weight_sum <= 0.0) {
    throw DataError("temporal_aggregate: no chunk covers step " + std::to_string(t));
  }
  std::array<float, kActionDim> out{};
  for (int i = 0; i < kActionDim; ++i) {
    out[static_cast<std::size_t>(i)] =
        static_cast<float>(acc[static_cast<std::size_t>(i)] / weight_sum);
  }
  return out;
}

void ChunkAggregator::push(int step, ActionChunk chunk) {
  pending_.emplace_back(step, std::move(chunk));
}

std::array<float, kActionDim> ChunkAggregator::action_at(int step) {
  while (!pending_.empty() && step - pending_.front().first >= k_) {
    pending_.pop_front();
  }
  std::vector<std::pair<int, const ActionChunk*>> view;
  view.reserve(pending_.size());
  for (const auto& [birth, chunk] : pending_) view.emplace_back(birth, &chunk);
  return temporal_aggregate(view, step, m_);
}

namespace {

json config_to_json(const PolicyConfig& c) {
  return json{{"k", c.k},
              {"z_dim", c.z_dim},
              {"image_feature_dim", c.image_feature_dim},
              {"conv_channels", c.conv_channels},
              {"conv_kernel", c.conv_kernel},
              {"encoder_hidden", c.encoder_hidden},
              {"decoder_hidden", c.decoder_hidden},
              {"crop_size", c.crop_size},
              {"eta", c.eta},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"total_steps", c.total_steps},
              {"log_every", c.log_every},
              {"seed", c.seed},
              {"relative", c.relative},
              {"hand_focus", c.hand_focus},
              {"arrival", c.arrival},
              {"aggregate_m", c.aggregate_m}};
}

PolicyConfig config_from_json(const json& j) {
  PolicyConfig c;
  c.k = j.at("k").get<int>();
  c.z_dim = j.at("z_dim").get<int>();
  c.image_feature_dim = j.at("image_feature_dim").get<int>();
  c.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  c.conv_kernel = j.at("conv_kernel").get<int>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
  c.decoder_hidden = j.at("decoder_hidden").get<std::vector<int>>();
  c.crop_size = j.at("crop_size").get<int>();
  c.eta = j.at("eta").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.total_steps = j.at("total_steps").get<int>();
  c.log_every = j.at("log_every").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.relative = j.at("relative").get<bool>();
  c.hand_focus = j.at("hand_focus").get<bool>();
  c.arrival = j.at("arrival").get<bool>();
  c.aggregate_m = j.at("aggregate_m").get<double>();
  return c;
}

}  // namespace

void save_policy(const std::string& path, const PolicyParams& params) {
  params.validate();
  const PolicyNet<float> net(params.config.net_spec());
  json layout = json::array();
  for (const auto& e : net.layout().entries) {
    layout.push_back(json{{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
  }
  json header{{"config", config_to_json(params.config)},
              {"layout", layout},
              {"float_count", params.values.size()},
              {"trained", params.trained},
              {"stats",
               {{"proprio_mean", params.stats.proprio_mean},
                {"proprio_std", params.stats.proprio_std},
                {"action_mean", params.stats.action_mean},
                {"action_std", params.stats.action_std}}}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_policy: cannot open " + path);
  out << header.dump() << "\n";
  out.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(params.values.size() * sizeof(float)));
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_policy: cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError("load_policy: missing header in " + path);

  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::parse_error& e) {
    throw DataError("load_policy: bad header in " + path + ": " + e.what());
  }

  PolicyParams params;
  params.config = config_from_json(header.at("config"));
  params.trained = header.at("trained").get<bool>();
  if (header.contains("stats")) {
    const auto& st = header["stats"];
    auto fill = [](const json& node, auto& arr) {
      for (std::size_t i = 0; i < arr.size(); ++i) arr[i] = node.at(i).get<float>();
    };
    fill(st.at("proprio_mean"), params.stats.proprio_mean);
    fill(st.at("proprio_std"), params.stats.proprio_std);
    fill(st.at("action_mean"), params.stats.action_mean);
    fill(st.at("action_std"), params.stats.action_std);
  }
  const auto count = header.at("float_count").get<std::size_t>();
  params.values.resize(count);
  in.read(reinterpret_cast<char*>(params.values.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float)) {
    throw DataError("load_policy: truncated blob in " + path);
  }
  params.validate();
  return params;
}

void write_loss_curve_csv(const std::string& path, const std::vector<LossPoint>& curve) {
  std::ofstream out(path);
  if (!out) throw DataError("write_loss_curve_csv: cannot open " + path);
  out << "step,total,mse,kl\n";
  char buf[160];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.8g,%.8g,%.8g\n", p.step, p.total, p.mse, p.kl);
    out << buf;
  }
}

}  // namespace ofa
