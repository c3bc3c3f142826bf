#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ofa/errors.hpp"
#include "ofa/nn.hpp"
#include "ofa/policy.hpp"
#include "ofa/rng.hpp"

#include <cmath>
#include <filesystem>

using namespace ofa;

namespace {

NetSpec tiny_spec() {
  NetSpec spec;
  spec.crop_size = 16;
  spec.conv_channels = {4, 6, 8, 10};
  spec.conv_kernel = 3;
  spec.image_feature_dim = 5;
  spec.encoder_hidden = {16};
  spec.decoder_hidden = {16, 16};
  spec.z_dim = 4;
  spec.k = 3;
  return spec;
}

Image random_image(int size, Rng& rng) {
  Image img(size, size);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_index(256));
  return img;
}

TrainingSample random_sample(const NetSpec& spec, Rng& rng) {
  TrainingSample s;
  s.left = random_image(spec.crop_size, rng);
  s.right = random_image(spec.crop_size, rng);
  for (auto& v : s.proprio.v) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  s.chunk.k = spec.k;
  s.chunk.data.resize(static_cast<std::size_t>(spec.k) * kActionDim);
  for (auto& v : s.chunk.data) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  return s;
}

double rel_error(double a, double b) {
  const double denom = std::max(1e-8, std::abs(a) + std::abs(b));
  return std::abs(a - b) / denom;
}

}  // namespace

TEST_CASE("full loss gradient matches central finite differences (64-bit)") {
  const NetSpec spec = tiny_spec();
  const PolicyNet<double> net(spec);
  Rng rng(2025);

  std::vector<double> params;
  net.init_params(params, rng);

  std::vector<TrainingSample> samples = {random_sample(spec, rng), random_sample(spec, rng)};
  std::vector<SampleRef> batch;
  for (const auto& s : samples) {
    batch.push_back({&s.left, &s.right, s.proprio.v.data(), s.chunk.data.data()});
  }
  std::vector<double> eps(2 * static_cast<std::size_t>(spec.z_dim));
  for (auto& e : eps) e = rng.gaussian();

  const double eta = 3.0;
  std::vector<double> grad(params.size(), 0.0);
  const auto parts = net.loss_and_grad(params.data(), batch, eta, eps, grad.data());
  CHECK(std::isfinite(parts.total));

  std::vector<double> scratch(params.size());
  const double h = 1e-6;
  double worst = 0.0;
  int bad = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double lp = net.loss_and_grad(params.data(), batch, eta, eps, scratch.data()).total;
    params[i] = saved - h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double lm = net.loss_and_grad(params.data(), batch, eta, eps, scratch.data()).total;
    params[i] = saved;

    const double fd = (lp - lm) / (2.0 * h);
    // Relative check with an absolute floor: below ~1e-8 the difference
    // quotient itself is cancellation noise, far under any real defect.
    if (std::abs(fd - grad[i]) < 1e-8) continue;
    const double err = rel_error(fd, grad[i]);
    worst = std::max(worst, err);
    if (err >= 1e-4) ++bad;
  }
  CHECK(bad == 0);
  CHECK(worst < 1e-4);
}

TEST_CASE("encoder probe gradient matches finite differences") {
  const NetSpec spec = tiny_spec();
  const PolicyNet<double> net(spec);
  Rng rng(31);
  std::vector<double> params;
  net.init_params(params, rng);

  const TrainingSample s = random_sample(spec, rng);
  std::vector<double> probe_mean(static_cast<std::size_t>(spec.z_dim));
  std::vector<double> probe_logvar(static_cast<std::size_t>(spec.z_dim));
  for (auto& v : probe_mean) v = rng.uniform(-1, 1);
  for (auto& v : probe_logvar) v = rng.uniform(-1, 1);

  std::vector<double> grad(params.size(), 0.0);
  net.encode_probe_and_grad(params.data(), s.chunk.data.data(), s.proprio.v.data(),
                            probe_mean.data(), probe_logvar.data(), grad.data());

  std::vector<double> scratch(params.size());
  const double h = 1e-6;
  int bad = 0;
  for (std::size_t i = 0; i < params.size(); i += 7) {  // stride keeps runtime low
    const double saved = params[i];
    params[i] = saved + h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double vp = net.encode_probe_and_grad(params.data(), s.chunk.data.data(),
                                                s.proprio.v.data(), probe_mean.data(),
                                                probe_logvar.data(), scratch.data());
    params[i] = saved - h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double vm = net.encode_probe_and_grad(params.data(), s.chunk.data.data(),
                                                s.proprio.v.data(), probe_mean.data(),
                                                probe_logvar.data(), scratch.data());
    params[i] = saved;
    const double fd = (vp - vm) / (2.0 * h);
    if (std::abs(fd) + std::abs(grad[i]) < 1e-7) continue;
    if (rel_error(fd, grad[i]) >= 1e-3) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("decoder probe gradient matches finite differences") {
  const NetSpec spec = tiny_spec();
  const PolicyNet<double> net(spec);
  Rng rng(47);
  std::vector<double> params;
  net.init_params(params, rng);

  const TrainingSample s = random_sample(spec, rng);
  std::vector<double> z(static_cast<std::size_t>(spec.z_dim));
  for (auto& v : z) v = rng.gaussian();
  std::vector<double> probe(static_cast<std::size_t>(spec.chunk_dim()));
  for (auto& v : probe) v = rng.uniform(-1, 1);

  std::vector<double> grad(params.size(), 0.0);
  net.decode_probe_and_grad(params.data(), s.left, s.right, s.proprio.v.data(), z.data(),
                            probe.data(), grad.data());

  std::vector<double> scratch(params.size());
  const double h = 1e-6;
  int bad = 0;
  for (std::size_t i = 0; i < params.size(); i += 11) {
    const double saved = params[i];
    params[i] = saved + h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double vp = net.decode_probe_and_grad(params.data(), s.left, s.right,
                                                s.proprio.v.data(), z.data(), probe.data(),
                                                scratch.data());
    params[i] = saved - h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double vm = net.decode_probe_and_grad(params.data(), s.left, s.right,
                                                s.proprio.v.data(), z.data(), probe.data(),
                                                scratch.data());
    params[i] = saved;
    const double fd = (vp - vm) / (2.0 * h);
    if (std::abs(fd) + std::abs(grad[i]) < 1e-7) continue;
    if (rel_error(fd, grad[i]) >= 1e-3) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("loss: zeroed decoder head against zero targets gives zero reconstruction") {
  const NetSpec spec = tiny_spec();
  const PolicyNet<double> net(spec);
  Rng rng(3);
  std::vector<double> params;
  net.init_params(params, rng);

  // Force the prediction to zero, and the target to zero: reconstruction 0.
  for (const auto& e : net.layout().entries) {
    if (e.name.rfind("decoder_head", 0) == 0) {
      std::fill(params.begin() + static_cast<std::ptrdiff_t>(e.offset),
                params.begin() + static_cast<std::ptrdiff_t>(e.offset + e.size), 0.0);
    }
  }
  TrainingSample s = random_sample(spec, rng);
  std::fill(s.chunk.data.begin(), s.chunk.data.end(), 0.0f);
  std::vector<SampleRef> batch = {{&s.left, &s.right, s.proprio.v.data(), s.chunk.data.data()}};
  std::vector<double> eps(static_cast<std::size_t>(spec.z_dim), 0.0);
  std::vector<double> grad(params.size(), 0.0);
  const auto parts = net.loss_and_grad(params.data(), batch, 0.0, eps, grad.data());
  CHECK(parts.mse == doctest::Approx(0.0));
  CHECK(parts.total == doctest::Approx(0.0));
}

TEST_CASE("loss: standard-normal latent stats give zero divergence") {
  const NetSpec spec = tiny_spec();
  const PolicyNet<double> net(spec);
  Rng rng(5);
  std::vector<double> params;
  net.init_params(params, rng);
  for (const auto& e : net.layout().entries) {
    if (e.name.rfind("encoder_head", 0) == 0) {
      std::fill(params.begin() + static_cast<std::ptrdiff_t>(e.offset),
                params.begin() + static_cast<std::ptrdiff_t>(e.offset + e.size), 0.0);
    }
  }
  const TrainingSample s = random_sample(spec, rng);
  std::vector<SampleRef> batch = {{&s.left, &s.right, s.proprio.v.data(), s.chunk.data.data()}};
  std::vector<double> eps(static_cast<std::size_t>(spec.z_dim), 0.0);
  std::vector<double> grad(params.size(), 0.0);
  const auto parts = net.loss_and_grad(params.data(), batch, 7.0, eps, grad.data());
  CHECK(parts.kl == doctest::Approx(0.0));
  CHECK(parts.total == doctest::Approx(parts.mse));
}

TEST_CASE("divergence term is nonnegative on random parameters") {
  const NetSpec spec = tiny_spec();
  const PolicyNet<double> net(spec);
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> params;
    net.init_params(params, rng);
    const TrainingSample s = random_sample(spec, rng);
    std::vector<SampleRef> batch = {
        {&s.left, &s.right, s.proprio.v.data(), s.chunk.data.data()}};
    std::vector<double> eps(static_cast<std::size_t>(spec.z_dim));
    for (auto& e : eps) e = rng.gaussian();
    std::vector<double> grad(params.size(), 0.0);
    const auto parts = net.loss_and_grad(params.data(), batch, 1.0, eps, grad.data());
    CHECK(parts.kl >= -1e-15);
  }
}

TEST_CASE("loss is invariant to sample order within the batch") {
  const NetSpec spec = tiny_spec();
  const PolicyNet<double> net(spec);
  Rng rng(88);
  std::vector<double> params;
  net.init_params(params, rng);

  std::vector<TrainingSample> samples;
  for (int i = 0; i < 4; ++i) samples.push_back(random_sample(spec, rng));
  std::vector<double> eps(4 * static_cast<std::size_t>(spec.z_dim));
  for (auto& e : eps) e = rng.gaussian();

  auto loss_of = [&](const std::vector<int>& order) {
    std::vector<SampleRef> batch;
    std::vector<double> e2;
    for (int idx : order) {
      const auto& s = samples[static_cast<std::size_t>(idx)];
      batch.push_back({&s.left, &s.right, s.proprio.v.data(), s.chunk.data.data()});
      for (int j = 0; j < spec.z_dim; ++j) {
        e2.push_back(eps[static_cast<std::size_t>(idx * spec.z_dim + j)]);
      }
    }
    std::vector<double> grad(params.size(), 0.0);
    return net.loss_and_grad(params.data(), batch, 2.0, e2, grad.data()).total;
  };

  const double a = loss_of({0, 1, 2, 3});
  const double b = loss_of({3, 1, 0, 2});
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("image features: deterministic, asymmetric, correctly sized") {
  const NetSpec spec = tiny_spec();
  const PolicyNet<float> net(spec);
  Rng rng(12);
  std::vector<float> params;
  net.init_params(params, rng);

  Image zero(spec.crop_size, spec.crop_size);
  const auto f1 = net.image_encode(params.data(), zero, zero);
  const auto f2 = net.image_encode(params.data(), zero, zero);
  CHECK(f1 == f2);
  CHECK(static_cast<int>(f1.size()) == 2 * spec.image_feature_dim);
  for (float v : f1) CHECK(std::isfinite(v));

  const Image a = random_image(spec.crop_size, rng);
  const Image b = random_image(spec.crop_size, rng);
  const auto fab = net.image_encode(params.data(), a, b);
  const auto fba = net.image_encode(params.data(), b, a);
  CHECK(fab != fba);

  Image wrong(spec.crop_size + 2, spec.crop_size + 2);
  CHECK_THROWS_AS(net.image_encode(params.data(), wrong, wrong), std::invalid_argument);
}

TEST_CASE("encoder outputs stay finite and clamped for large inputs") {
  const NetSpec spec = tiny_spec();
  const PolicyNet<float> net(spec);
  Rng rng(14);
  std::vector<float> params;
  net.init_params(params, rng);

  std::vector<float> chunk(static_cast<std::size_t>(spec.chunk_dim()));
  std::array<float, kProprioDim> proprio{};
  for (auto& v : chunk) v = static_cast<float>(rng.uniform(-10, 10));
  for (auto& v : proprio) v = static_cast<float>(rng.uniform(-10, 10));

  const auto stats = net.encode(params.data(), chunk.data(), proprio.data());
  for (float v : stats.mean) CHECK(std::isfinite(v));
  for (float v : stats.logvar) {
    CHECK(v >= -10.0f);
    CHECK(v <= 10.0f);
  }
}

TEST_CASE("training overfits a single repeated sample") {
  PolicyConfig config;
  config.k = 3;
  config.z_dim = 4;
  config.image_feature_dim = 5;
  config.conv_channels = {4, 6, 8, 10};
  config.crop_size = 16;
  config.encoder_hidden = {32};
  config.decoder_hidden = {32, 32};
  config.batch_size = 4;
  config.total_steps = 2000;
  config.learning_rate = 1e-3;
  config.eta = 1.0;
  config.seed = 9;

  Rng rng(55);
  const TrainingSample sample = random_sample(config.net_spec(), rng);
  const auto result = train_policy(config, {sample});

  Observation obs{sample.left, sample.right, sample.proprio};
  const ActionChunk pred = infer_chunk(result.params, obs);
  double mse = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - sample.chunk.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.data.size());
  CHECK(mse < 1e-3);
}

TEST_CASE("training is bit-deterministic under the seed") {
  PolicyConfig config;
  config.k = 2;
  config.z_dim = 3;
  config.image_feature_dim = 4;
  config.conv_channels = {3, 4, 5, 6};
  config.crop_size = 16;
  config.encoder_hidden = {8};
  config.decoder_hidden = {8};
  config.batch_size = 2;
  config.total_steps = 50;
  config.seed = 77;

  Rng rng(66);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 3; ++i) samples.push_back(random_sample(config.net_spec(), rng));

  const auto a = train_policy(config, samples);
  const auto b = train_policy(config, samples);
  CHECK(a.params.values == b.params.values);
}

TEST_CASE("a stronger divergence weight shrinks the final divergence") {
  PolicyConfig config;
  config.k = 3;
  config.z_dim = 4;
  config.image_feature_dim = 4;
  config.conv_channels = {3, 4, 5, 6};
  config.crop_size = 16;
  config.encoder_hidden = {16};
  config.decoder_hidden = {16};
  config.batch_size = 4;
  config.total_steps = 600;
  config.learning_rate = 1e-3;
  config.seed = 5;

  Rng rng(91);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 6; ++i) samples.push_back(random_sample(config.net_spec(), rng));

  config.eta = 0.0;
  const auto free_run = train_policy(config, samples);
  config.eta = 10.0;
  const auto tight_run = train_policy(config, samples);

  CHECK(tight_run.curve.back().kl < free_run.curve.back().kl);
}

TEST_CASE("inference: determinism, shape, untrained rejection") {
  PolicyConfig config;
  config.k = 2;
  config.z_dim = 3;
  config.image_feature_dim = 4;
  config.conv_channels = {3, 4, 5, 6};
  config.crop_size = 16;
  config.encoder_hidden = {8};
  config.decoder_hidden = {8};
  config.batch_size = 2;
  config.total_steps = 20;
  config.seed = 31;

  Rng rng(17);
  const auto result = train_policy(config, {random_sample(config.net_spec(), rng)});

  Observation obs;
  obs.left = random_image(16, rng);
  obs.right = random_image(16, rng);
  const auto a = infer_chunk(result.params, obs);
  const auto b = infer_chunk(result.params, obs);
  CHECK(a.data == b.data);
  CHECK(a.k == config.k);
  CHECK(a.data.size() == static_cast<std::size_t>(config.k) * kActionDim);

  PolicyParams untrained = result.params;
  untrained.trained = false;
  CHECK_THROWS_AS(infer_chunk(untrained, obs), DataError);
}

TEST_CASE("temporal aggregation blends overlapping chunks") {
  ActionChunk a;
  a.k = 3;
  a.data.assign(3 * kActionDim, 1.0f);
  ActionChunk b = a;

  // A single chunk passes through unchanged.
  const auto single = temporal_aggregate({{0, &a}}, 1, 0.1);
  for (float v : single) CHECK(v == doctest::Approx(1.0));

  // Identical overlapping chunks agree with themselves.
  const auto same = temporal_aggregate({{0, &a}, {1, &b}}, 1, 0.1);
  for (float v : same) CHECK(v == doctest::Approx(1.0));

  // Two distinct chunks: hand-computed exponential weights.
  ActionChunk c;
  c.k = 3;
  c.data.assign(3 * kActionDim, 2.0f);
  // chunk a born at 0 (age 2), chunk c born at 2 (age 0), query t=2.
  const double wa = std::exp(-0.1 * 2.0);
  const double wc = std::exp(-0.1 * 0.0);
  const double expect = (wa * 1.0 + wc * 2.0) / (wa + wc);
  const auto mixed = temporal_aggregate({{0, &a}, {2, &c}}, 2, 0.1);
  for (float v : mixed) CHECK(v == doctest::Approx(expect));

  CHECK_THROWS_AS(temporal_aggregate({{0, &a}}, 10, 0.1), DataError);
}

TEST_CASE("parameter files round-trip") {
  PolicyConfig config;
  config.k = 2;
  config.z_dim = 3;
  config.image_feature_dim = 4;
  config.conv_channels = {3, 4, 5, 6};
  config.crop_size = 16;
  config.encoder_hidden = {8};
  config.decoder_hidden = {8};
  config.batch_size = 2;
  config.total_steps = 10;
  config.seed = 81;
  config.relative = false;
  config.hand_focus = false;

  Rng rng(19);
  const auto result = train_policy(config, {random_sample(config.net_spec(), rng)});

  const std::string path = "/tmp/ofa_params_test.bin";
  save_policy(path, result.params);
  const PolicyParams loaded = load_policy(path);
  CHECK(loaded.values == result.params.values);
  CHECK(loaded.trained);
  CHECK(loaded.config.relative == false);
  CHECK(loaded.config.hand_focus == false);
  CHECK(loaded.config.k == config.k);
  std::filesystem::remove(path);
}
