#pragma once

#include "nlap/errors.hpp"
#include "nlap/layers.hpp"
#include "nlap/rng.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlap {

/// Generator/discriminator architecture with the ablation switches.
struct ArchConfig {
  bool use_past_encoder = true;
  bool use_current_encoder = true;
  bool skip_connections = true;
  bool adversarial = true;
  int base_channels = 32;
  int levels = 4;
  int patch_size = 64;
  std::uint64_t seed = 0;

  int encoder_passes() const { return int(use_past_encoder) + int(use_current_encoder); }

  /// Throws ConfigError on an invalid combination.
  void validate() const;

  bool operator==(const ArchConfig&) const = default;
};

/// Fixed PatchGAN stack: three stride-2 4x4 convolutions and a stride-1 3x3
/// convolution to one linear channel.
inline constexpr int kDiscriminatorChannels[3] = {64, 128, 256};

/// Layer shapes implied by an ArchConfig.
std::vector<ConvShape> encoder_shapes(const ArchConfig& cfg);
std::vector<ConvShape> decoder_shapes(const ArchConfig& cfg);
std::vector<ConvShape> discriminator_shapes();

/// Closed-form parameter counts.
std::int64_t generator_parameter_count(const ArchConfig& cfg);
std::int64_t discriminator_parameter_count();

/// Mutable view of one named parameter tensor.
template <typename Scalar>
struct ParamView {
  std::string name;
  std::vector<std::int64_t> shape;
  Scalar* data;
  Eigen::Index size;

  Eigen::Map<Vector<Scalar>> flat() const { return Eigen::Map<Vector<Scalar>>(data, size); }
};

template <typename Scalar>
std::vector<ParamView<Scalar>> conv_views(const std::string& prefix, std::vector<ConvParams<Scalar>>& layers) {
  std::vector<ParamView<Scalar>> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string base = prefix + "." + std::to_string(i);
    out.push_back({base + ".weight", {l.weight.rows(), l.weight.cols()}, l.weight.data(), l.weight.size()});
    out.push_back({base + ".bias", {l.bias.size()}, l.bias.data(), l.bias.size()});
  }
  return out;
}

/// Generator weights. There is a single encoder stack; the past and current
/// appearances both run through it.
template <typename Scalar>
struct GeneratorParams {
  std::vector<ConvParams<Scalar>> encoder;
  std::vector<ConvParams<Scalar>> decoder;  // deepest level first

  static GeneratorParams zeros(const ArchConfig& cfg) {
    GeneratorParams p;
    for (const auto& s : encoder_shapes(cfg)) p.encoder.push_back(ConvParams<Scalar>::zeros(s, false));
    for (const auto& s : decoder_shapes(cfg)) p.decoder.push_back(ConvParams<Scalar>::zeros(s, true));
    return p;
  }

  std::vector<ParamView<Scalar>> views() {
    auto v = conv_views("encoder", encoder);
    auto d = conv_views("decoder", decoder);
    v.insert(v.end(), d.begin(), d.end());
    return v;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& l : encoder) n += l.parameter_count();
    for (const auto& l : decoder) n += l.parameter_count();
    return n;
  }

  template <typename Other>
  GeneratorParams<Other> cast() const {
    GeneratorParams<Other> o;
    for (const auto& l : encoder) o.encoder.push_back(l.template cast<Other>());
    for (const auto& l : decoder) o.decoder.push_back(l.template cast<Other>());
    return o;
  }
};

template <typename Scalar>
struct DiscriminatorParams {
  std::vector<ConvParams<Scalar>> layers;

  static DiscriminatorParams zeros() {
    DiscriminatorParams p;
    for (const auto& s : discriminator_shapes()) p.layers.push_back(ConvParams<Scalar>::zeros(s, false));
    return p;
  }

  std::vector<ParamView<Scalar>> views() { return conv_views("discriminator", layers); }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
  }

  template <typename Other>
  DiscriminatorParams<Other> cast() const {
    DiscriminatorParams<Other> o;
    for (const auto& l : layers) o.layers.push_back(l.template cast<Other>());
    return o;
  }
};

namespace detail {

/// He-normal for leaky-ReLU layers, 1/sqrt(fan_in) for output layers.
template <typename Scalar>
void init_conv(ConvParams<Scalar>& p, bool output_layer, Rng& rng) {
  const auto& s = p.shape;
  double fan_in = double(s.in_channels) * s.kernel * s.kernel;
  if (p.transposed) fan_in /= double(s.stride) * s.stride;
  const double gain = output_layer ? 1.0 : 2.0 / (1.0 + kLeakySlope * kLeakySlope);
  const double stddev = std::sqrt(gain / fan_in);
  for (Eigen::Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = static_cast<Scalar>(rng.normal(0.0, stddev));
  p.bias.setZero();
}

inline constexpr std::uint64_t kGeneratorStream = 0x67656e;
inline constexpr std::uint64_t kDiscriminatorStream = 0x646973;

}  // namespace detail

template <typename Scalar = float>
GeneratorParams<Scalar> init_generator(const ArchConfig& cfg) {
  cfg.validate();
  auto p = GeneratorParams<Scalar>::zeros(cfg);
  auto rng = Rng::stream(cfg.seed, detail::kGeneratorStream);
  for (auto& l : p.encoder) detail::init_conv(l, false, rng);
  for (std::size_t i = 0; i < p.decoder.size(); ++i) detail::init_conv(p.decoder[i], i + 1 == p.decoder.size(), rng);
  return p;
}

template <typename Scalar = float>
DiscriminatorParams<Scalar> init_discriminator(const ArchConfig& cfg) {
  cfg.validate();
  auto p = DiscriminatorParams<Scalar>::zeros();
  auto rng = Rng::stream(cfg.seed, detail::kDiscriminatorStream);
  for (std::size_t i = 0; i < p.layers.size(); ++i) detail::init_conv(p.layers[i], i + 1 == p.layers.size(), rng);
  return p;
}

/// Intermediate activations kept for the generator backward pass.
template <typename Scalar>
struct GeneratorTrace {
  // Index 0 is the past pass, 1 the current pass; a disabled pass stays empty.
  std::vector<ConvCache<Scalar>> encoder_cache[2];
  std::vector<Tensor<Scalar>> encoder_out[2];
  std::vector<ConvCache<Scalar>> decoder_cache;
  std::vector<Tensor<Scalar>> decoder_out;
};

namespace detail {

template <typename Scalar>
std::vector<Tensor<Scalar>> encode(const GeneratorParams<Scalar>& p, const Tensor<Scalar>& x,
                                   std::vector<ConvCache<Scalar>>* caches) {
  std::vector<Tensor<Scalar>> feats;
  feats.reserve(p.encoder.size());
  if (caches) caches->assign(p.encoder.size(), {});
  const Tensor<Scalar>* in = &x;
  for (std::size_t k = 0; k < p.encoder.size(); ++k) {
    feats.push_back(conv_forward(p.encoder[k], *in, caches ? &(*caches)[k] : nullptr));
    leaky_relu_inplace(feats.back());
    in = &feats.back();
  }
  return feats;
}

}  // namespace detail

/// Predicts the next appearance for a batch of (past, current) patches.
/// Both tensors are 1 x B x S x S; the output has the same shape with values
/// in (0,1). A disabled encoder never reads its input.
template <typename Scalar>
Tensor<Scalar> generator_forward(const GeneratorParams<Scalar>& p, const Tensor<Scalar>& past,
                                 const Tensor<Scalar>& current, const ArchConfig& cfg,
                                 GeneratorTrace<Scalar>* trace = nullptr) {
  const bool enabled[2] = {cfg.use_past_encoder, cfg.use_current_encoder};
  const Tensor<Scalar>* inputs[2] = {&past, &current};
  std::vector<Tensor<Scalar>> local[2];
  std::vector<Tensor<Scalar>>* feats[2] = {&local[0], &local[1]};
  int batch = -1;
  for (int pass = 0; pass < 2; ++pass) {
    if (!enabled[pass]) continue;
    const auto& x = *inputs[pass];
    if (x.channels != 1 || x.height != cfg.patch_size || x.width != cfg.patch_size)
      throw std::invalid_argument("generator_forward: input shape does not match patch size");
    if (batch >= 0 && x.batch != batch) throw std::invalid_argument("generator_forward: batch mismatch");
    batch = x.batch;
    if (trace) feats[pass] = &trace->encoder_out[pass];
    *feats[pass] = detail::encode(p, x, trace ? &trace->encoder_cache[pass] : nullptr);
  }
  if (trace) {
    trace->decoder_cache.assign(p.decoder.size(), {});
    trace->decoder_out.clear();
    trace->decoder_out.reserve(p.decoder.size());
  }

  const int levels = static_cast<int>(p.encoder.size());
  Tensor<Scalar> y;
  for (int i = 0; i < levels; ++i) {
    const int level = levels - 1 - i;
    std::vector<const Tensor<Scalar>*> parts;
    if (i > 0) parts.push_back(trace ? &trace->decoder_out.back() : &y);
    if (i == 0 || cfg.skip_connections)
      for (int pass = 0; pass < 2; ++pass)
        if (enabled[pass]) parts.push_back(&(*feats[pass])[level]);
    const Tensor<Scalar> in = parts.size() == 1 ? *parts.front() : concat_channels(parts);
    Tensor<Scalar> out = conv_forward(p.decoder[i], in, trace ? &trace->decoder_cache[i] : nullptr);
    if (level == 0)
      sigmoid_inplace(out);
    else
      leaky_relu_inplace(out);
    if (trace)
      trace->decoder_out.push_back(std::move(out));
    else
      y = std::move(out);
  }
  return trace ? trace->decoder_out.back() : y;
}

/// Accumulates generator parameter gradients given dLoss/dOutput.
template <typename Scalar>
void generator_backward(const GeneratorParams<Scalar>& p, const GeneratorTrace<Scalar>& trace,
                        const Tensor<Scalar>& grad_out, const ArchConfig& cfg, GeneratorParams<Scalar>& grads) {
  const bool enabled[2] = {cfg.use_past_encoder, cfg.use_current_encoder};
  const int levels = static_cast<int>(p.encoder.size());
  std::vector<Tensor<Scalar>> enc_grad[2];
  for (int pass = 0; pass < 2; ++pass) {
    if (!enabled[pass]) continue;
    for (const auto& f : trace.encoder_out[pass]) enc_grad[pass].emplace_back(f.channels, f.batch, f.height, f.width);
  }

  Tensor<Scalar> dy = grad_out;
  for (int i = levels - 1; i >= 0; --i) {
    const int level = levels - 1 - i;
    const auto& out = trace.decoder_out[i];
    if (level == 0)
      sigmoid_backward_inplace(out, dy);
    else
      leaky_relu_backward_inplace(out, dy);
    Tensor<Scalar> dx = conv_backward(p.decoder[i], trace.decoder_cache[i], dy, &grads.decoder[i], true);

    int row = 0;
    Tensor<Scalar> next_dy;
    if (i > 0) {
      const auto& prev = trace.decoder_out[i - 1];
      next_dy = Tensor<Scalar>(prev.channels, prev.batch, prev.height, prev.width);
      next_dy.data = dx.data.topRows(prev.channels);
      row = prev.channels;
    }
    if (i == 0 || cfg.skip_connections) {
      for (int pass = 0; pass < 2; ++pass) {
        if (!enabled[pass]) continue;
        auto& g = enc_grad[pass][level];
        g.data += dx.data.middleRows(row, g.channels);
        row += g.channels;
      }
    }
    dy = std::move(next_dy);
  }

  for (int pass = 0; pass < 2; ++pass) {
    if (!enabled[pass]) continue;
    for (int k = levels - 1; k >= 0; --k) {
      auto& g = enc_grad[pass][k];
      leaky_relu_backward_inplace(trace.encoder_out[pass][k], g);
      Tensor<Scalar> dx = conv_backward(p.encoder[k], trace.encoder_cache[pass][k], g, &grads.encoder[k], k > 0);
      if (k > 0) enc_grad[pass][k - 1].data += dx.data;
    }
  }
}

template <typename Scalar>
struct DiscriminatorTrace {
  std::vector<ConvCache<Scalar>> cache;
  std::vector<Tensor<Scalar>> out;
};

/// Maps a 1 x B x S x S batch to 1 x B x (S/8) x (S/8) linear patch scores.
template <typename Scalar>
Tensor<Scalar> discriminator_forward(const DiscriminatorParams<Scalar>& p, const Tensor<Scalar>& image,
                                     DiscriminatorTrace<Scalar>* trace = nullptr) {
  if (image.channels != 1 || image.height != image.width || image.height % 8 != 0)
    throw std::invalid_argument("discriminator_forward: expected 1-channel square input with side divisible by 8");
  if (trace) {
    trace->cache.assign(p.layers.size(), {});
    trace->out.clear();
  }
  Tensor<Scalar> x = image;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    x = conv_forward(p.layers[i], x, trace ? &trace->cache[i] : nullptr);
    if (i + 1 < p.layers.size()) leaky_relu_inplace(x);
    if (trace) trace->out.push_back(x);
  }
  return x;
}

/// Backpropagates dLoss/dMap. Parameter gradients are accumulated into
/// `grads` when non-null; the image gradient is returned when requested.
template <typename Scalar>
Tensor<Scalar> discriminator_backward(const DiscriminatorParams<Scalar>& p, const DiscriminatorTrace<Scalar>& trace,
                                      const Tensor<Scalar>& grad_map, DiscriminatorParams<Scalar>* grads,
                                      bool want_input_grad) {
  Tensor<Scalar> dy = grad_map;
  const int n = static_cast<int>(p.layers.size());
  for (int i = n - 1; i >= 0; --i) {
    if (i + 1 < n) leaky_relu_backward_inplace(trace.out[i], dy);
    const bool need_dx = i > 0 || want_input_grad;
    dy = conv_backward(p.layers[i], trace.cache[i], dy, grads ? &grads->layers[i] : nullptr, need_dx);
    if (!need_dx) break;
  }
  return want_input_grad ? dy : Tensor<Scalar>{};
}

}  // namespace nlap
