#include "nlap/model.hpp"

namespace nlap {

void ArchConfig::validate() const {
  if (!use_past_encoder && !use_current_encoder) throw ConfigError("at least one encoder must be enabled");
  if (base_channels < 1) throw ConfigError("base_channels must be positive");
  if (levels < 1) throw ConfigError("levels must be positive");
  if (patch_size < 16 || (patch_size & (patch_size - 1)) != 0)
    throw ConfigError("patch_size must be a power of two >= 16");
  if (patch_size % (1 << levels) != 0) throw ConfigError("patch_size must be divisible by 2^levels");
}

std::vector<ConvShape> encoder_shapes(const ArchConfig& cfg) {
  std::vector<ConvShape> out;
  int in = 1;
  for (int k = 0; k < cfg.levels; ++k) {
    const int ch = cfg.base_channels << k;
    out.push_back({in, ch, 4, 2, 1});
    in = ch;
  }
  return out;
}

std::vector<ConvShape> decoder_shapes(const ArchConfig& cfg) {
  std::vector<ConvShape> out;
  const int m = cfg.encoder_passes();
  for (int level = cfg.levels - 1; level >= 0; --level) {
    const int enc_ch = cfg.base_channels << level;
    int in = m * enc_ch;
    if (level < cfg.levels - 1) in = enc_ch + (cfg.skip_connections ? m * enc_ch : 0);
    const int out_ch = level == 0 ? 1 : cfg.base_channels << (level - 1);
    out.push_back({in, out_ch, 4, 2, 1});
  }
  return out;
}

std::vector<ConvShape> discriminator_shapes() {
  return {{1, kDiscriminatorChannels[0], 4, 2, 1},
          {kDiscriminatorChannels[0], kDiscriminatorChannels[1], 4, 2, 1},
          {kDiscriminatorChannels[1], kDiscriminatorChannels[2], 4, 2, 1},
          {kDiscriminatorChannels[2], 1, 3, 1, 1}};
}

namespace {

std::int64_t count(const std::vector<ConvShape>& shapes) {
  std::int64_t n = 0;
  for (const auto& s : shapes)
    n += std::int64_t(s.in_channels) * s.out_channels * s.kernel * s.kernel + s.out_channels;
  return n;
}

}  // namespace

std::int64_t generator_parameter_count(const ArchConfig& cfg) {
  cfg.validate();
  return count(encoder_shapes(cfg)) + count(decoder_shapes(cfg));
}

std::int64_t discriminator_parameter_count() { return count(discriminator_shapes()); }

}  // namespace nlap
