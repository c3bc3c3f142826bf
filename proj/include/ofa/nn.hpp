#pragma once

#include "ofa/dataset.hpp"
#include "ofa/image.hpp"
#include "ofa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace ofa {

struct LayoutEntry {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct ParamLayout {
  std::vector<LayoutEntry> entries;
  std::size_t total = 0;

  std::size_t add(const std::string& name, std::vector<int> shape) {
    std::size_t size = 1;
    for (int d : shape) size *= static_cast<std::size_t>(d);
    const std::size_t offset = total;
    entries.push_back({name, std::move(shape), offset, size});
    total += size;
    return offset;
  }
};

/// Architecture numbers of the chunk-prediction model. The conditional
/// encoder sees the target chunk plus proprioception (no images); the
/// decoder sees image features, proprioception and the latent.
struct NetSpec {
  int crop_size = 128;
  std::vector<int> conv_channels = {16, 32, 64, 128};
  int conv_kernel = 3;
  int image_feature_dim = 64;
  std::vector<int> encoder_hidden = {256, 256};
  std::vector<int> decoder_hidden = {256, 256, 256};
  int z_dim = 32;
  int k = 20;

  int chunk_dim() const { return k * kActionDim; }
  int image_feature_total() const { return 2 * image_feature_dim; }
  int decoder_input_dim() const { return image_feature_total() + kProprioDim + z_dim; }
  int encoder_input_dim() const { return chunk_dim() + kProprioDim; }
};

namespace detail {

struct ConvDims {
  int in_c, out_c, kernel, stride, pad;
  int in_h, in_w, out_h, out_w;
  std::size_t w_off, b_off;

  std::size_t in_size() const {
    return static_cast<std::size_t>(in_h) * in_w * in_c;
  }
  std::size_t out_size() const {
    return static_cast<std::size_t>(out_h) * out_w * out_c;
  }
};

struct LinearDims {
  int in_dim, out_dim;
  bool relu;
  std::size_t w_off, b_off;
};

template <typename T>
void conv_forward(const ConvDims& L, const T* w, const T* b, const T* in, T* out) {
  for (int oy = 0; oy < L.out_h; ++oy) {
    for (int ox = 0; ox < L.out_w; ++ox) {
      T* o = out + (static_cast<std::size_t>(oy) * L.out_w + ox) * L.out_c;
      for (int c = 0; c < L.out_c; ++c) o[c] = b[c];
      const int iy0 = oy * L.stride - L.pad;
      const int ix0 = ox * L.stride - L.pad;
      for (int ky = 0; ky < L.kernel; ++ky) {
        const int iy = iy0 + ky;
        if (iy < 0 || iy >= L.in_h) continue;
        for (int kx = 0; kx < L.kernel; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= L.in_w) continue;
          const T* px = in + (static_cast<std::size_t>(iy) * L.in_w + ix) * L.in_c;
          const T* wk = w + (static_cast<std::size_t>(ky) * L.kernel + kx) *
                                static_cast<std::size_t>(L.in_c) * L.out_c;
          for (int ci = 0; ci < L.in_c; ++ci) {
            const T v = px[ci];
            const T* wr = wk + static_cast<std::size_t>(ci) * L.out_c;
            for (int c = 0; c < L.out_c; ++c) o[c] += v * wr[c];
          }
        }
      }
      for (int c = 0; c < L.out_c; ++c) {
        if (o[c] < T(0)) o[c] = T(0);
      }
    }
  }
}

template <typename T>
void conv_backward(const ConvDims& L, const T* w, const T* in, const T* out,
                   const T* dout_raw, T* dw, T* db, T* din) {
  std::vector<T> masked(static_cast<std::size_t>(L.out_c));
  for (int oy = 0; oy < L.out_h; ++oy) {
    for (int ox = 0; ox < L.out_w; ++ox) {
      const std::size_t off = (static_cast<std::size_t>(oy) * L.out_w + ox) * L.out_c;
      const T* o = out + off;
      const T* dr = dout_raw + off;
      for (int c = 0; c < L.out_c; ++c) {
        masked[static_cast<std::size_t>(c)] = o[c] > T(0) ? dr[c] : T(0);
        db[c] += masked[static_cast<std::size_t>(c)];
      }
      const int iy0 = oy * L.stride - L.pad;
      const int ix0 = ox * L.stride - L.pad;
      for (int ky = 0; ky < L.kernel; ++ky) {
        const int iy = iy0 + ky;
        if (iy < 0 || iy >= L.in_h) continue;
        for (int kx = 0; kx < L.kernel; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= L.in_w) continue;
          const std::size_t pix = (static_cast<std::size_t>(iy) * L.in_w + ix) * L.in_c;
          const T* px = in + pix;
          T* dpx = din ? din + pix : nullptr;
          const std::size_t wbase = (static_cast<std::size_t>(ky) * L.kernel + kx) *
                                    static_cast<std::size_t>(L.in_c) * L.out_c;
          for (int ci = 0; ci < L.in_c; ++ci) {
            const T v = px[ci];
            const T* wr = w + wbase + static_cast<std::size_t>(ci) * L.out_c;
            T* dwr = dw + wbase + static_cast<std::size_t>(ci) * L.out_c;
            T acc = T(0);
            for (int c = 0; c < L.out_c; ++c) {
              dwr[c] += v * masked[static_cast<std::size_t>(c)];
              acc += wr[c] * masked[static_cast<std::size_t>(c)];
            }
            if (dpx) dpx[ci] += acc;
          }
        }
      }
    }
  }
}

template <typename T>
void linear_forward(const LinearDims& L, const T* w, const T* b, const T* in, T* out) {
  for (int o = 0; o < L.out_dim; ++o) out[o] = b[o];
  for (int i = 0; i < L.in_dim; ++i) {
    const T v = in[i];
    const T* wr = w + static_cast<std::size_t>(i) * L.out_dim;
    for (int o = 0; o < L.out_dim; ++o) out[o] += v * wr[o];
  }
  if (L.relu) {
    for (int o = 0; o < L.out_dim; ++o) {
      if (out[o] < T(0)) out[o] = T(0);
    }
  }
}

template <typename T>
void linear_backward(const LinearDims& L, const T* w, const T* in, const T* out,
                     const T* dout_raw, T* dw, T* db, T* din) {
  std::vector<T> masked(static_cast<std::size_t>(L.out_dim));
  for (int o = 0; o < L.out_dim; ++o) {
    masked[static_cast<std::size_t>(o)] = (!L.relu || out[o] > T(0)) ? dout_raw[o] : T(0);
    db[o] += masked[static_cast<std::size_t>(o)];
  }
  for (int i = 0; i < L.in_dim; ++i) {
    const T v = in[i];
    const T* wr = w + static_cast<std::size_t>(i) * L.out_dim;
    T* dwr = dw + static_cast<std::size_t>(i) * L.out_dim;
    T acc = T(0);
    for (int o = 0; o < L.out_dim; ++o) {
      dwr[o] += v * masked[static_cast<std::size_t>(o)];
      acc += wr[o] * masked[static_cast<std::size_t>(o)];
    }
    if (din) din[i] += acc;
  }
}

}  // namespace detail

/// View of one training sample for the loss; pointers stay owned by the
/// caller.
struct SampleRef {
  const Image* left = nullptr;
  const Image* right = nullptr;
  const float* proprio = nullptr;  // kProprioDim
  const float* chunk = nullptr;    // k * kActionDim target
};

/// The whole model over a flat parameter vector, templated on the scalar so
/// the test suite can re-run every gradient in 64-bit.
template <typename T>
class PolicyNet {
 public:
  explicit PolicyNet(const NetSpec& spec) : spec_(spec) { build(); }

  const NetSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t param_count() const { return layout_.total; }

  /// Uniform fan-in initialization, biases zero.
  void init_params(std::vector<T>& params, Rng& rng) const {
    params.assign(layout_.total, T(0));
    auto fill = [&](std::size_t off, std::size_t n, int fan_in) {
      const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (std::size_t i = 0; i < n; ++i) {
        params[off + i] = static_cast<T>(rng.uniform(-s, s));
      }
    };
    for (const auto& c : conv_) {
      fill(c.w_off, static_cast<std::size_t>(c.kernel) * c.kernel * c.in_c * c.out_c,
           c.kernel * c.kernel * c.in_c);
    }
    fill(proj_.w_off, static_cast<std::size_t>(proj_.in_dim) * proj_.out_dim, proj_.in_dim);
    for (const auto& l : encoder_) {
      fill(l.w_off, static_cast<std::size_t>(l.in_dim) * l.out_dim, l.in_dim);
    }
    for (const auto& l : decoder_) {
      fill(l.w_off, static_cast<std::size_t>(l.in_dim) * l.out_dim, l.in_dim);
    }
  }

  // --- forward-only entry points ------------------------------------------

  /// Concatenated per-image features, length 2 * image_feature_dim.
  std::vector<T> image_encode(const T* params, const Image& left, const Image& right) const {
    ImageActs acts(*this);
    std::vector<T> out(static_cast<std::size_t>(spec_.image_feature_total()));
    image_forward(params, left, acts);
    std::copy(acts.feature.begin(), acts.feature.end(), out.begin());
    image_forward(params, right, acts);
    std::copy(acts.feature.begin(), acts.feature.end(),
              out.begin() + spec_.image_feature_dim);
    return out;
  }

  struct LatentStats {
    std::vector<T> mean;
    std::vector<T> logvar;  // clamped to [-10, 10]
  };

  LatentStats encode(const T* params, const float* chunk, const float* proprio) const {
    EncoderActs acts(*this);
    encoder_forward(params, chunk, proprio, acts);
    LatentStats stats;
    stats.mean.assign(acts.out().begin(), acts.out().begin() + spec_.z_dim);
    stats.logvar.resize(static_cast<std::size_t>(spec_.z_dim));
    for (int i = 0; i < spec_.z_dim; ++i) {
      stats.logvar[static_cast<std::size_t>(i)] =
          clamp_logvar(acts.out()[static_cast<std::size_t>(spec_.z_dim + i)]);
    }
    return stats;
  }

  /// Decoder pass from precomputed image features.
  std::vector<T> decode_features(const T* params, const std::vector<T>& image_features,
                                 const float* proprio, const T* z) const {
    DecoderActs acts(*this);
    decoder_forward(params, image_features.data(), proprio, z, acts);
    return acts.out();
  }

  std::vector<T> decode(const T* params, const Image& left, const Image& right,
                        const float* proprio, const T* z) const {
    return decode_features(params, image_encode(params, left, right), proprio, z);
  }

  // --- loss with gradients --------------------------------------------------

  struct LossParts {
    T total = T(0);
    T mse = T(0);
    T kl = T(0);
  };

  /// Reconstruction + weighted Gaussian-prior divergence over a batch, with
  /// the full parameter gradient accumulated into `grad` (caller zeroes it).
  /// `eps` supplies the reparameterization draws, batch * z_dim, tied to the
  /// samples so batch order cannot change the value.
  LossParts loss_and_grad(const T* params, const std::vector<SampleRef>& batch, T eta,
                          const std::vector<T>& eps, T* grad) const {
    const int B = static_cast<int>(batch.size());
    const int zd = spec_.z_dim;
    const int out_dim = spec_.chunk_dim();
    LossParts parts;

    ImageActs left_acts(*this), right_acts(*this);
    EncoderActs enc_acts(*this);
    DecoderActs dec_acts(*this);
    std::vector<T> dec_in(static_cast<std::size_t>(spec_.decoder_input_dim()));
    std::vector<T> ddec_in(dec_in.size());
    std::vector<T> dout(static_cast<std::size_t>(out_dim));
    std::vector<T> denc_out(static_cast<std::size_t>(2 * zd));

    const T mse_norm = T(1) / (T(B) * T(out_dim));
    const T kl_norm = T(1) / T(B);

    for (int s = 0; s < B; ++s) {
      const SampleRef& sample = batch[static_cast<std::size_t>(s)];
      const T* eps_s = eps.data() + static_cast<std::size_t>(s) * zd;

      image_forward(params, *sample.left, left_acts);
      image_forward(params, *sample.right, right_acts);
      encoder_forward(params, sample.chunk, sample.proprio, enc_acts);

      const T* enc_out = enc_acts.out().data();
      std::vector<T> z(static_cast<std::size_t>(zd));
      for (int i = 0; i < zd; ++i) {
        const T mu = enc_out[i];
        const T lv = clamp_logvar(enc_out[zd + i]);
        z[static_cast<std::size_t>(i)] = mu + std::exp(T(0.5) * lv) * eps_s[i];
        parts.kl += kl_norm * T(-0.5) * (T(1) + lv - mu * mu - std::exp(lv));
      }

      std::copy(left_acts.feature.begin(), left_acts.feature.end(), dec_in.begin());
      std::copy(right_acts.feature.begin(), right_acts.feature.end(),
                dec_in.begin() + spec_.image_feature_dim);
      for (int i = 0; i < kProprioDim; ++i) {
        dec_in[static_cast<std::size_t>(spec_.image_feature_total() + i)] =
            static_cast<T>(sample.proprio[i]);
      }
      std::copy(z.begin(), z.end(),
                dec_in.begin() + spec_.image_feature_total() + kProprioDim);

      decoder_forward_raw(params, dec_in.data(), dec_acts);

      const T* pred = dec_acts.out().data();
      for (int i = 0; i < out_dim; ++i) {
        const T diff = pred[i] - static_cast<T>(sample.chunk[i]);
        parts.mse += mse_norm * diff * diff;
        dout[static_cast<std::size_t>(i)] = T(2) * mse_norm * diff;
      }

      // Backward: decoder -> (image features, z) -> encoder, plus the
      // divergence terms straight into the latent stats.
      std::fill(ddec_in.begin(), ddec_in.end(), T(0));
      decoder_backward(params, dec_acts, dout.data(), grad, ddec_in.data());

      image_backward(params, left_acts, ddec_in.data(), grad);
      image_backward(params, right_acts, ddec_in.data() + spec_.image_feature_dim, grad);

      const T* dz = ddec_in.data() + spec_.image_feature_total() + kProprioDim;
      for (int i = 0; i < zd; ++i) {
        const T mu = enc_out[i];
        const T lv_raw = enc_out[zd + i];
        const T lv = clamp_logvar(lv_raw);
        const bool inside = lv_raw > T(-10) && lv_raw < T(10);
        T dmu = dz[i] + eta * kl_norm * mu;
        T dlv = dz[i] * eps_s[i] * T(0.5) * std::exp(T(0.5) * lv) +
                eta * kl_norm * T(0.5) * (std::exp(lv) - T(1));
        denc_out[static_cast<std::size_t>(i)] = dmu;
        denc_out[static_cast<std::size_t>(zd + i)] = inside ? dlv : T(0);
      }
      encoder_backward(params, enc_acts, denc_out.data(), grad);
    }

    parts.total = parts.mse + eta * parts.kl;
    return parts;
  }

  // --- scalar probes for derivative verification ---------------------------

  /// probe . mean + probe2 . logvar of the conditional encoder, with its
  /// parameter gradient.
  T encode_probe_and_grad(const T* params, const float* chunk, const float* proprio,
                          const T* probe_mean, const T* probe_logvar, T* grad) const {
    EncoderActs acts(*this);
    encoder_forward(params, chunk, proprio, acts);
    const int zd = spec_.z_dim;
    T value = T(0);
    std::vector<T> dout(static_cast<std::size_t>(2 * zd));
    for (int i = 0; i < zd; ++i) {
      const T lv_raw = acts.out()[static_cast<std::size_t>(zd + i)];
      value += probe_mean[i] * acts.out()[static_cast<std::size_t>(i)];
      value += probe_logvar[i] * clamp_logvar(lv_raw);
      dout[static_cast<std::size_t>(i)] = probe_mean[i];
      dout[static_cast<std::size_t>(zd + i)] =
          (lv_raw > T(-10) && lv_raw < T(10)) ? probe_logvar[i] : T(0);
    }
    encoder_backward(params, acts, dout.data(), grad);
    return value;
  }

  /// probe . decode(images, proprio, z), with its parameter gradient.
  T decode_probe_and_grad(const T* params, const Image& left, const Image& right,
                          const float* proprio, const T* z, const T* probe, T* grad) const {
    ImageActs la(*this), ra(*this);
    image_forward(params, left, la);
    image_forward(params, right, ra);

    std::vector<T> dec_in(static_cast<std::size_t>(spec_.decoder_input_dim()));
    std::copy(la.feature.begin(), la.feature.end(), dec_in.begin());
    std::copy(ra.feature.begin(), ra.feature.end(), dec_in.begin() + spec_.image_feature_dim);
    for (int i = 0; i < kProprioDim; ++i) {
      dec_in[static_cast<std::size_t>(spec_.image_feature_total() + i)] =
          static_cast<T>(proprio[i]);
    }
    for (int i = 0; i < spec_.z_dim; ++i) {
      dec_in[static_cast<std::size_t>(spec_.image_feature_total() + kProprioDim + i)] = z[i];
    }

    DecoderActs acts(*this);
    decoder_forward_raw(params, dec_in.data(), acts);

    T value = T(0);
    for (int i = 0; i < spec_.chunk_dim(); ++i) {
      value += probe[i] * acts.out()[static_cast<std::size_t>(i)];
    }
    std::vector<T> ddec_in(dec_in.size(), T(0));
    decoder_backward(params, acts, probe, grad, ddec_in.data());
    image_backward(params, la, ddec_in.data(), grad);
    image_backward(params, ra, ddec_in.data() + spec_.image_feature_dim, grad);
    return value;
  }

 private:
  static T clamp_logvar(T v) { return std::clamp(v, T(-10), T(10)); }

  void build() {
    int h = spec_.crop_size;
    int w = spec_.crop_size;
    int c = 3;
    for (std::size_t i = 0; i < spec_.conv_channels.size(); ++i) {
      detail::ConvDims d;
      d.in_c = c;
      d.out_c = spec_.conv_channels[i];
      d.kernel = spec_.conv_kernel;
      d.stride = 2;
      d.pad = spec_.conv_kernel / 2;
      d.in_h = h;
      d.in_w = w;
      d.out_h = (h + 2 * d.pad - d.kernel) / 2 + 1;
      d.out_w = (w + 2 * d.pad - d.kernel) / 2 + 1;
      const std::string name = "image_conv" + std::to_string(i + 1);
      d.w_off = layout_.add(name + ".w", {d.kernel, d.kernel, d.in_c, d.out_c});
      d.b_off = layout_.add(name + ".b", {d.out_c});
      conv_.push_back(d);
      h = d.out_h;
      w = d.out_w;
      c = d.out_c;
    }
    gap_dim_ = c;
    proj_ = {c, spec_.image_feature_dim, false, 0, 0};
    proj_.w_off = layout_.add("image_proj.w", {c, spec_.image_feature_dim});
    proj_.b_off = layout_.add("image_proj.b", {spec_.image_feature_dim});

    int in = spec_.encoder_input_dim();
    for (std::size_t i = 0; i < spec_.encoder_hidden.size(); ++i) {
      add_linear(encoder_, "encoder_fc" + std::to_string(i + 1), in,
                 spec_.encoder_hidden[i], true);
      in = spec_.encoder_hidden[i];
    }
    add_linear(encoder_, "encoder_head", in, 2 * spec_.z_dim, false);

    in = spec_.decoder_input_dim();
    for (std::size_t i = 0; i < spec_.decoder_hidden.size(); ++i) {
      add_linear(decoder_, "decoder_fc" + std::to_string(i + 1), in,
                 spec_.decoder_hidden[i], true);
      in = spec_.decoder_hidden[i];
    }
    add_linear(decoder_, "decoder_head", in, spec_.chunk_dim(), false);
  }

  void add_linear(std::vector<detail::LinearDims>& list, const std::string& name, int in,
                  int out, bool relu) {
    detail::LinearDims d{in, out, relu, 0, 0};
    d.w_off = layout_.add(name + ".w", {in, out});
    d.b_off = layout_.add(name + ".b", {out});
    list.push_back(d);
  }

  struct ImageActs {
    std::vector<T> input;                 // HWC float image
    std::vector<std::vector<T>> conv;     // post-activation per layer
    std::vector<T> pooled;                // gap_dim
    std::vector<T> feature;               // image_feature_dim

    explicit ImageActs(const PolicyNet& net) {
      input.resize(static_cast<std::size_t>(net.spec_.crop_size) * net.spec_.crop_size * 3);
      conv.resize(net.conv_.size());
      for (std::size_t i = 0; i < net.conv_.size(); ++i) {
        conv[i].resize(net.conv_[i].out_size());
      }
      pooled.resize(static_cast<std::size_t>(net.gap_dim_));
      feature.resize(static_cast<std::size_t>(net.spec_.image_feature_dim));
    }
  };

  struct MlpActs {
    std::vector<std::vector<T>> layers;  // post-activation outputs per layer

    MlpActs(const std::vector<detail::LinearDims>& dims, std::size_t in_dim) {
      layers.resize(dims.size() + 1);
      layers[0].resize(in_dim);
      for (std::size_t i = 0; i < dims.size(); ++i) {
        layers[i + 1].resize(static_cast<std::size_t>(dims[i].out_dim));
      }
    }
    std::vector<T>& out() { return layers.back(); }
    const std::vector<T>& out() const { return layers.back(); }
  };

  struct EncoderActs : MlpActs {
    explicit EncoderActs(const PolicyNet& net)
        : MlpActs(net.encoder_, static_cast<std::size_t>(net.spec_.encoder_input_dim())) {}
  };
  struct DecoderActs : MlpActs {
    explicit DecoderActs(const PolicyNet& net)
        : MlpActs(net.decoder_, static_cast<std::size_t>(net.spec_.decoder_input_dim())) {}
  };

  void image_forward(const T* params, const Image& img, ImageActs& acts) const {
    if (img.width != spec_.crop_size || img.height != spec_.crop_size) {
      throw std::invalid_argument("image_encode: expected " +
                                  std::to_string(spec_.crop_size) + "x" +
                                  std::to_string(spec_.crop_size) + " input, got " +
                                  std::to_string(img.width) + "x" + std::to_string(img.height));
    }
    for (std::size_t i = 0; i < acts.input.size(); ++i) {
      acts.input[i] = static_cast<T>(img.pixels[i]) / T(255);
    }
    const T* in = acts.input.data();
    for (std::size_t i = 0; i < conv_.size(); ++i) {
      detail::conv_forward(conv_[i], params + conv_[i].w_off, params + conv_[i].b_off, in,
                           acts.conv[i].data());
      in = acts.conv[i].data();
    }
    const auto& last = conv_.back();
    const T inv = T(1) / (T(last.out_h) * T(last.out_w));
    std::fill(acts.pooled.begin(), acts.pooled.end(), T(0));
    for (int p = 0; p < last.out_h * last.out_w; ++p) {
      const T* row = in + static_cast<std::size_t>(p) * last.out_c;
      for (int c = 0; c < last.out_c; ++c) acts.pooled[static_cast<std::size_t>(c)] += row[c];
    }
    for (auto& v : acts.pooled) v *= inv;
    detail::linear_forward(proj_, params + proj_.w_off, params + proj_.b_off,
                           acts.pooled.data(), acts.feature.data());
  }

  void image_backward(const T* params, const ImageActs& acts, const T* dfeature,
                      T* grad) const {
    std::vector<T> dpooled(static_cast<std::size_t>(gap_dim_), T(0));
    detail::linear_backward(proj_, params + proj_.w_off, acts.pooled.data(),
                            acts.feature.data(), dfeature, grad + proj_.w_off,
                            grad + proj_.b_off, dpooled.data());

    const auto& last = conv_.back();
    std::vector<T> dconv(last.out_size());
    const T inv = T(1) / (T(last.out_h) * T(last.out_w));
    for (int p = 0; p < last.out_h * last.out_w; ++p) {
      T* row = dconv.data() + static_cast<std::size_t>(p) * last.out_c;
      for (int c = 0; c < last.out_c; ++c) {
        row[c] = dpooled[static_cast<std::size_t>(c)] * inv;
      }
    }

    std::vector<T> dnext = std::move(dconv);
    for (std::size_t i = conv_.size(); i-- > 0;) {
      const auto& L = conv_[i];
      const T* in = i == 0 ? acts.input.data() : acts.conv[i - 1].data();
      std::vector<T> din;
      T* din_ptr = nullptr;
      if (i > 0) {
        din.assign(conv_[i - 1].out_size(), T(0));
        din_ptr = din.data();
      }
      detail::conv_backward(L, params + L.w_off, in, acts.conv[i].data(), dnext.data(),
                            grad + L.w_off, grad + L.b_off, din_ptr);
      if (i > 0) dnext = std::move(din);
    }
  }

  void encoder_forward(const T* params, const float* chunk, const float* proprio,
                       EncoderActs& acts) const {
    auto& in = acts.layers[0];
    for (int i = 0; i < spec_.chunk_dim(); ++i) in[static_cast<std::size_t>(i)] = static_cast<T>(chunk[i]);
    for (int i = 0; i < kProprioDim; ++i) {
      in[static_cast<std::size_t>(spec_.chunk_dim() + i)] = static_cast<T>(proprio[i]);
    }
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
      detail::linear_forward(encoder_[i], params + encoder_[i].w_off,
                             params + encoder_[i].b_off, acts.layers[i].data(),
                             acts.layers[i + 1].data());
    }
  }

  void encoder_backward(const T* params, const EncoderActs& acts, const T* dout,
                        T* grad) const {
    std::vector<T> d(acts.out().size());
    std::copy(dout, dout + d.size(), d.begin());
    for (std::size_t i = encoder_.size(); i-- > 0;) {
      const auto& L = encoder_[i];
      std::vector<T> din(static_cast<std::size_t>(L.in_dim), T(0));
      detail::linear_backward(L, params + L.w_off, acts.layers[i].data(),
                              acts.layers[i + 1].data(), d.data(), grad + L.w_off,
                              grad + L.b_off, i > 0 ? din.data() : nullptr);
      d = std::move(din);
    }
  }

  void decoder_forward(const T* params, const T* image_features, const float* proprio,
                       const T* z, DecoderActs& acts) const {
    auto& in = acts.layers[0];
    std::copy(image_features, image_features + spec_.image_feature_total(), in.begin());
    for (int i = 0; i < kProprioDim; ++i) {
      in[static_cast<std::size_t>(spec_.image_feature_total() + i)] =
          static_cast<T>(proprio[i]);
    }
    for (int i = 0; i < spec_.z_dim; ++i) {
      in[static_cast<std::size_t>(spec_.image_feature_total() + kProprioDim + i)] = z[i];
    }
    decoder_forward_from_input(params, acts);
  }

  void decoder_forward_raw(const T* params, const T* input, DecoderActs& acts) const {
    std::copy(input, input + acts.layers[0].size(), acts.layers[0].begin());
    decoder_forward_from_input(params, acts);
  }

  void decoder_forward_from_input(const T* params, DecoderActs& acts) const {
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
      detail::linear_forward(decoder_[i], params + decoder_[i].w_off,
                             params + decoder_[i].b_off, acts.layers[i].data(),
                             acts.layers[i + 1].data());
    }
  }

  void decoder_backward(const T* params, const DecoderActs& acts, const T* dout, T* grad,
                        T* dinput) const {
    std::vector<T> d(acts.out().size());
    std::copy(dout, dout + d.size(), d.begin());
    for (std::size_t i = decoder_.size(); i-- > 0;) {
      const auto& L = decoder_[i];
      std::vector<T> din(static_cast<std::size_t>(L.in_dim), T(0));
      detail::linear_backward(L, params + L.w_off, acts.layers[i].data(),
                              acts.layers[i + 1].data(), d.data(), grad + L.w_off,
                              grad + L.b_off, din.data());
      d = std::move(din);
    }
    std::copy(d.begin(), d.end(), dinput);
  }

  NetSpec spec_;
  ParamLayout layout_;
  std::vector<detail::ConvDims> conv_;
  detail::LinearDims proj_{};
  int gap_dim_ = 0;
  std::vector<detail::LinearDims> encoder_;
  std::vector<detail::LinearDims> decoder_;
};

}  // namespace ofa
