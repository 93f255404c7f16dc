#include "nlap/trainer.hpp"

#include "nlap/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <cstring>
#include <map>
#include <numeric>
#include <set>

namespace nlap {

void TrainConfig::validate() const {
  if (!(lr_g > 0) || !(lr_d > 0)) throw ConfigError("learning rates must be positive");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
    throw ConfigError("Adam betas must lie in [0,1)");
  if (!(adam_epsilon > 0)) throw ConfigError("Adam epsilon must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(adv_weight >= 0)) throw ConfigError("adv_weight must be >= 0");
  if (k_shot && *k_shot < 1) throw ConfigError("k_shot must be >= 1");
}

bool AdamState::operator==(const AdamState& o) const {
  if (step != o.step || m.size() != o.m.size() || v.size() != o.v.size()) return false;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i].size() != o.m[i].size() || std::memcmp(m[i].data(), o.m[i].data(), sizeof(float) * m[i].size()) != 0)
      return false;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i].size() != o.v[i].size() || std::memcmp(v[i].data(), o.v[i].data(), sizeof(float) * v[i].size()) != 0)
      return false;
  return true;
}

Checkpoint initial_checkpoint(const ArchConfig& arch) {
  Checkpoint c;
  c.arch = arch;
  c.generator = init_generator<float>(arch);
  c.discriminator = init_discriminator<float>(arch);
  return c;
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kKShotStream = 0x6b73686f74;
constexpr std::uint64_t kGradCheckStream = 0x67636b;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename Params>
std::uint64_t digest_views(Params& p) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& v : p.views()) h = fnv1a(v.data, sizeof(float) * static_cast<std::size_t>(v.size), h);
  return h;
}

template <typename Params>
void adam_update(Params& params, Params& grads, AdamState& state, double lr, const TrainConfig& cfg) {
  auto pv = params.views();
  auto gv = grads.views();
  if (state.m.empty()) {
    for (const auto& v : pv) {
      state.m.push_back(Vector<float>::Zero(v.size));
      state.v.push_back(Vector<float>::Zero(v.size));
    }
  }
  ++state.step;
  const auto b1 = static_cast<float>(cfg.adam_beta1);
  const auto b2 = static_cast<float>(cfg.adam_beta2);
  const auto bc1 = static_cast<float>(1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step)));
  const auto bc2 = static_cast<float>(1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step)));
  const auto step = static_cast<float>(lr);
  const auto eps = static_cast<float>(cfg.adam_epsilon);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    auto g = gv[i].flat();
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
    auto p = pv[i].flat();
    p.array() -= step * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
}

template <typename Params>
void require_finite_grads(Params& grads, const char* which) {
  for (const auto& v : grads.views())
    if (!v.flat().allFinite()) throw TrainingError(std::string("non-finite gradient in ") + which + " tensor " + v.name);
}

Tensor<float> stack_field(std::span<const AppearanceTriplet* const> batch, Patch AppearanceTriplet::*field) {
  std::vector<Patch> imgs;
  imgs.reserve(batch.size());
  for (const auto* t : batch) imgs.push_back(t->*field);
  return stack_images<float>(imgs);
}

}  // namespace

std::uint64_t digest(const GeneratorParams<float>& p) { return digest_views(const_cast<GeneratorParams<float>&>(p)); }
std::uint64_t digest(const DiscriminatorParams<float>& p) {
  return digest_views(const_cast<DiscriminatorParams<float>&>(p));
}

StepLosses train_step(Checkpoint& st, std::span<const AppearanceTriplet* const> batch, const TrainConfig& cfg,
                      const StepHooks* hooks, StepTrace* trace) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto& arch = st.arch;
  const int b = static_cast<int>(batch.size());
  const float inv_b = 1.0f / static_cast<float>(b);

  const Tensor<float> past = stack_field(batch, &AppearanceTriplet::past);
  const Tensor<float> current = stack_field(batch, &AppearanceTriplet::current);
  const Tensor<float> next = stack_field(batch, &AppearanceTriplet::next);
  if (next.height != arch.patch_size) throw ConfigError("triplet patch size does not match the architecture");

  if (trace) {
    trace->generator_before = digest(st.generator);
    trace->discriminator_before = digest(st.discriminator);
  }

  // The fake batch is produced once; G does not change during the D sub-step,
  // so the same prediction feeds both sub-steps.
  GeneratorTrace<float> g_trace;
  const Tensor<float> fake = generator_forward(st.generator, past, current, arch, &g_trace);
  if (trace) {
    trace->generator_for_fake = digest(st.generator);
    trace->fake_batch = std::hash<std::string_view>{}(
        std::string_view(reinterpret_cast<const char*>(fake.data.data()), sizeof(float) * fake.data.size()));
  }

  StepLosses losses;
  if (arch.adversarial) {
    DiscriminatorTrace<float> real_trace, fake_trace;
    const Tensor<float> d_real = discriminator_forward(st.discriminator, next, &real_trace);
    const Tensor<float> d_fake = discriminator_forward(st.discriminator, fake, &fake_trace);
    Tensor<float> g_real(1, b, d_real.height, d_real.width), g_fake(1, b, d_fake.height, d_fake.width);
    double total = 0;
    for (int n = 0; n < b; ++n) {
      Matrix<float> gr, gf;
      total += loss_adv_d<float>(d_real.image(n), d_fake.image(n), cfg.adv_reduction, &gr, &gf);
      g_real.image(n) = gr * inv_b;
      g_fake.image(n) = gf * inv_b;
    }
    losses.loss_d = total / b;
    if (!std::isfinite(losses.loss_d)) throw TrainingError("non-finite discriminator loss");
    auto d_grads = DiscriminatorParams<float>::zeros();
    discriminator_backward(st.discriminator, real_trace, g_real, &d_grads, false);
    discriminator_backward(st.discriminator, fake_trace, g_fake, &d_grads, false);
    require_finite_grads(d_grads, "discriminator");
    adam_update(st.discriminator, d_grads, st.adam_d, cfg.lr_d, cfg);
  }
  if (trace) trace->discriminator_after_d = digest(st.discriminator);
  if (hooks && hooks->after_discriminator) hooks->after_discriminator(st);

  Tensor<float> grad_fake(1, b, fake.height, fake.width);
  double total_g = 0;
  for (int n = 0; n < b; ++n) {
    Matrix<float> gp;
    total_g += loss_g<float>(next.image(n), fake.image(n), cfg.ssim, &gp);
    grad_fake.image(n) = gp * inv_b;
  }
  losses.loss_g = total_g / b;
  if (arch.adversarial) {
    DiscriminatorTrace<float> d_trace;
    const Tensor<float> d_fake = discriminator_forward(st.discriminator, fake, &d_trace);
    Tensor<float> g_map(1, b, d_fake.height, d_fake.width);
    const auto scale = static_cast<float>(cfg.adv_weight) * inv_b;
    double total_adv = 0;
    for (int n = 0; n < b; ++n) {
      Matrix<float> gm;
      total_adv += loss_adv_g<float>(d_fake.image(n), cfg.adv_reduction, &gm);
      g_map.image(n) = gm * scale;
    }
    losses.loss_adv_g = total_adv / b;
    const Tensor<float> through_d = discriminator_backward<float>(st.discriminator, d_trace, g_map, nullptr, true);
    grad_fake.data += through_d.data;
  }
  losses.objective_g = losses.loss_g + cfg.adv_weight * losses.loss_adv_g;
  if (!std::isfinite(losses.objective_g))
    throw TrainingError("non-finite generator objective (loss_g=" + std::to_string(losses.loss_g) +
                        ", loss_adv_g=" + std::to_string(losses.loss_adv_g) + ")");

  auto g_grads = GeneratorParams<float>::zeros(arch);
  generator_backward(st.generator, g_trace, grad_fake, arch, g_grads);
  require_finite_grads(g_grads, "generator");
  adam_update(st.generator, g_grads, st.adam_g, cfg.lr_g, cfg);

  if (trace) {
    trace->generator_after = digest(st.generator);
    trace->discriminator_after = digest(st.discriminator);
  }
  if (hooks && hooks->after_generator) hooks->after_generator(st);
  return losses;
}

Checkpoint train(std::span<const AppearanceTriplet> triplets, const ArchConfig& arch, const TrainConfig& cfg,
                 const Checkpoint* init) {
  cfg.validate();
  arch.validate();
  if (triplets.empty()) throw EmptyDatasetError("empty training set");
  if (init && !(init->arch == arch)) throw ConfigError("initial checkpoint architecture differs from the requested one");
  for (const auto& t : triplets)
    if (t.next.rows() != arch.patch_size || t.next.cols() != arch.patch_size)
      throw ConfigError("triplet patch size does not match the architecture");

  Checkpoint st = init ? *init : initial_checkpoint(arch);
  const std::size_t n = triplets.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<const AppearanceTriplet*> ptrs(batch);
  for (int e = 0; e < cfg.epochs; ++e) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = Rng::stream(cfg.seed, kShuffleStream + static_cast<std::uint64_t>(st.epoch));
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(n, begin + batch);
      ptrs.resize(end - begin);
      for (std::size_t i = begin; i < end; ++i) ptrs[i - begin] = &triplets[order[i]];
      LossRecord rec;
      rec.step = static_cast<std::int64_t>(st.history.size());
      rec.epoch = st.epoch;
      rec.losses = train_step(st, ptrs, cfg);
      st.history.push_back(rec);
      if (cfg.progress) cfg.progress(rec);
    }
    ++st.epoch;
  }
  return st;
}

std::vector<std::pair<std::string, std::vector<int>>> select_k_shot_frames(std::span<const AppearanceTriplet> triplets,
                                                                          int k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("k_shot must be >= 1");
  std::map<std::string, std::set<int>> frames;
  for (const auto& t : triplets) frames[t.video_id].insert(t.frame_index);
  auto rng = Rng::stream(seed, kKShotStream);
  std::vector<std::pair<std::string, std::vector<int>>> out;
  for (const auto& [video, set] : frames) {
    std::vector<int> candidates(set.begin(), set.end());
    rng.shuffle(candidates);
    candidates.resize(std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(k)));
    std::sort(candidates.begin(), candidates.end());
    out.emplace_back(video, std::move(candidates));
  }
  return out;
}

Checkpoint fine_tune(const Checkpoint& ckpt, std::span<const AppearanceTriplet> target, int k, const TrainConfig& cfg) {
  const auto selection = select_k_shot_frames(target, k, cfg.seed);
  std::map<std::string, std::set<int>> keep;
  for (const auto& [video, frames] : selection) keep[video].insert(frames.begin(), frames.end());
  std::vector<AppearanceTriplet> chosen;
  for (const auto& t : target) {
    const auto it = keep.find(t.video_id);
    if (it != keep.end() && it->second.count(t.frame_index)) chosen.push_back(t);
  }
  if (chosen.empty()) throw EmptyDatasetError("no triplet survives the k-shot frame selection");
  return train(chosen, ckpt.arch, cfg, &ckpt);
}

// Gradient check -------------------------------------------------------------

double relative_error(double analytic, double numeric, double floor) {
  if (analytic == 0.0 && numeric == 0.0) return 0.0;
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

ArchConfig gradient_check_arch() {
  ArchConfig a;
  a.patch_size = 16;
  a.levels = 2;
  a.base_channels = 4;
  a.seed = 1;
  return a;
}

namespace {

/// Signs of every hidden activation; a change means a finite-difference
/// step crossed a leaky-ReLU kink.
using Signature = std::vector<bool>;

void append_signs(Signature& sig, const std::vector<Tensor<double>>& outs, std::size_t drop_last) {
  for (std::size_t i = 0; i + drop_last < outs.size(); ++i)
    for (Eigen::Index k = 0; k < outs[i].data.size(); ++k) sig.push_back(outs[i].data.data()[k] > 0);
}

struct DoubleProblem {
  ArchConfig arch;
  Tensor<double> past, current, next;
  double adv_weight;
  SsimConfig ssim;

  double generator_objective(const GeneratorParams<double>& g, const DiscriminatorParams<double>& d,
                             GeneratorParams<double>* grads, Signature* sig) const {
    GeneratorTrace<double> trace;
    const Tensor<double> fake = generator_forward(g, past, current, arch, &trace);
    Matrix<double> grad_pred;
    double j = loss_g<double>(next.image(0), fake.image(0), ssim, grads ? &grad_pred : nullptr);
    Tensor<double> grad_fake(1, 1, fake.height, fake.width);
    if (grads) grad_fake.image(0) = grad_pred;
    DiscriminatorTrace<double> d_trace;
    if (arch.adversarial) {
      const Tensor<double> map = discriminator_forward(d, fake, &d_trace);
      Matrix<double> gm;
      j += adv_weight * loss_adv_g<double>(map.image(0), PatchReduction::sum, grads ? &gm : nullptr);
      if (grads) {
        Tensor<double> g_map(1, 1, map.height, map.width);
        g_map.image(0) = adv_weight * gm;
        grad_fake.data += discriminator_backward<double>(d, d_trace, g_map, nullptr, true).data;
      }
    }
    if (grads) generator_backward(g, trace, grad_fake, arch, *grads);
    if (sig) {
      sig->clear();
      append_signs(*sig, trace.encoder_out[0], 0);
      append_signs(*sig, trace.encoder_out[1], 0);
      append_signs(*sig, trace.decoder_out, 1);
      append_signs(*sig, d_trace.out, 1);
    }
    return j;
  }

  double discriminator_objective(const GeneratorParams<double>& g, const DiscriminatorParams<double>& d,
                                 DiscriminatorParams<double>* grads, Signature* sig) const {
    const Tensor<double> fake = generator_forward(g, past, current, arch);
    DiscriminatorTrace<double> rt, ft;
    const Tensor<double> real_map = discriminator_forward(d, next, &rt);
    const Tensor<double> fake_map = discriminator_forward(d, fake, &ft);
    Matrix<double> gr, gf;
    const double j = loss_adv_d<double>(real_map.image(0), fake_map.image(0), PatchReduction::sum,
                                        grads ? &gr : nullptr, grads ? &gf : nullptr);
    if (grads) {
      Tensor<double> tr(1, 1, real_map.height, real_map.width), tf(1, 1, fake_map.height, fake_map.width);
      tr.image(0) = gr;
      tf.image(0) = gf;
      discriminator_backward(d, rt, tr, grads, false);
      discriminator_backward(d, ft, tf, grads, false);
    }
    if (sig) {
      sig->clear();
      append_signs(*sig, rt.out, 1);
      append_signs(*sig, ft.out, 1);
    }
    return j;
  }
};

struct CoordinateResult {
  double worst = 0;
  int checked = 0;
  int kinks = 0;
  int zero_agreements = 0;
};

/// Checks `count` distinct random coordinates whose +-eps steps leave every
/// activation sign unchanged; coordinates that straddle a kink are counted
/// and replaced by fresh draws.
template <typename Params, typename Objective>
CoordinateResult check_coordinates(Params& params, Params& grads, const Objective& objective, int count, double eps,
                                   double floor, Rng& rng) {
  auto pv = params.views();
  auto gv = grads.views();
  std::int64_t total = 0;
  for (const auto& v : pv) total += v.size;
  Signature base, up_sig, down_sig;
  objective(&base);
  CoordinateResult res;
  std::set<std::int64_t> tried;
  while (res.checked < count && static_cast<std::int64_t>(tried.size()) < total) {
    std::int64_t flat = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(total)));
    if (!tried.insert(flat).second) continue;
    std::size_t t = 0;
    while (flat >= pv[t].size) flat -= pv[t++].size;
    double& x = pv[t].data[flat];
    const double analytic = gv[t].data[flat];
    const double orig = x;
    x = orig + eps;
    const double up = objective(&up_sig);
    x = orig - eps;
    const double down = objective(&down_sig);
    x = orig;
    if (up_sig != base || down_sig != base) {
      ++res.kinks;
      continue;
    }
    const double numeric = (up - down) / (2 * eps);
    if (analytic == 0.0 && numeric == 0.0) ++res.zero_agreements;
    res.worst = std::max(res.worst, relative_error(analytic, numeric, floor));
    ++res.checked;
  }
  return res;
}

}  // namespace

GradientCheckReport gradient_check(const ArchConfig& arch, const AppearanceTriplet& triplet,
                                   const GradientCheckOptions& opt) {
  arch.validate();
  if (triplet.next.rows() != arch.patch_size) throw ConfigError("gradient_check: triplet patch size mismatch");
  DoubleProblem problem{arch, {}, {}, {}, opt.adv_weight, opt.ssim};
  problem.past = stack_images<double>(std::vector<Patch>{triplet.past});
  problem.current = stack_images<double>(std::vector<Patch>{triplet.current});
  problem.next = stack_images<double>(std::vector<Patch>{triplet.next});

  auto g = init_generator<double>(arch);
  auto d = init_discriminator<double>(arch);
  auto rng = Rng::stream(opt.seed, kGradCheckStream);
  GradientCheckReport report;

  auto g_grads = GeneratorParams<double>::zeros(arch);
  problem.generator_objective(g, d, &g_grads, nullptr);
  const auto gr = check_coordinates(
      g, g_grads, [&](Signature* sig) { return problem.generator_objective(g, d, nullptr, sig); }, opt.coordinates,
      opt.epsilon, opt.denominator_floor, rng);
  report.max_rel_error_generator = gr.worst;
  report.coordinates_generator = gr.checked;
  report.kink_crossings += gr.kinks;
  report.zero_agreements += gr.zero_agreements;

  if (arch.adversarial) {
    auto d_grads = DiscriminatorParams<double>::zeros();
    problem.discriminator_objective(g, d, &d_grads, nullptr);
    const auto dr = check_coordinates(
        d, d_grads, [&](Signature* sig) { return problem.discriminator_objective(g, d, nullptr, sig); },
        opt.coordinates, opt.epsilon, opt.denominator_floor, rng);
    report.max_rel_error_discriminator = dr.worst;
    report.coordinates_discriminator = dr.checked;
    report.kink_crossings += dr.kinks;
    report.zero_agreements += dr.zero_agreements;
  }
  return report;
}

// Checkpoint file ------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'N', 'L', 'A', 'P', 'C', 'K', 'P', 'T'};

template <typename Params>
void write_tensors(BinaryWriter& w, Params& p) {
  auto views = p.views();
  w.put(static_cast<std::uint32_t>(views.size()));
  for (const auto& v : views) {
    w.put_string(v.name);
    w.put(static_cast<std::uint32_t>(v.shape.size()));
    for (auto d : v.shape) w.put(static_cast<std::int64_t>(d));
    w.put_array(v.data, static_cast<std::size_t>(v.size));
  }
}

template <typename Params>
void read_tensors(BinaryReader& r, Params& p) {
  auto views = p.views();
  if (r.get<std::uint32_t>() != views.size()) throw FormatError("tensor count mismatch");
  for (const auto& v : views) {
    if (r.get_string() != v.name) throw FormatError("unexpected tensor name, expected " + v.name);
    const auto ndim = r.get<std::uint32_t>();
    if (ndim != v.shape.size()) throw FormatError("rank mismatch for " + v.name);
    for (auto d : v.shape)
      if (r.get<std::int64_t>() != d) throw FormatError("shape mismatch for " + v.name);
    r.get_array(v.data, static_cast<std::size_t>(v.size));
  }
}

/// Adam moments are stored as a manifest aligned with the parameter views.
template <typename Params>
void write_moments(BinaryWriter& w, const AdamState& s, Params& p, const char* tag) {
  auto views = p.views();
  w.put(static_cast<std::int64_t>(s.step));
  w.put(static_cast<std::uint32_t>(s.m.empty() ? 0 : views.size()));
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    for (const auto* moment : {&s.m[i], &s.v[i]}) {
      w.put_string(std::string("adam.") + tag + (moment == &s.m[i] ? ".m." : ".v.") + views[i].name);
      w.put(static_cast<std::int64_t>(moment->size()));
      w.put_array(moment->data(), static_cast<std::size_t>(moment->size()));
    }
  }
}

template <typename Params>
void read_moments(BinaryReader& r, AdamState& s, Params& p) {
  auto views = p.views();
  s.step = r.get<std::int64_t>();
  const auto n = r.get<std::uint32_t>();
  if (n != 0 && n != views.size()) throw FormatError("optimizer state size mismatch");
  s.m.assign(n, {});
  s.v.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    for (auto* moment : {&s.m[i], &s.v[i]}) {
      r.get_string();
      const auto len = r.get<std::int64_t>();
      if (len != views[i].size) throw FormatError("optimizer moment size mismatch for " + views[i].name);
      moment->resize(len);
      r.get_array(moment->data(), static_cast<std::size_t>(len));
    }
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  auto& c = const_cast<Checkpoint&>(ckpt);
  try {
    write_file_atomically(
        path,
        [&](std::ostream& out) {
          BinaryWriter w(out);
          w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
          w.put(kCheckpointVersion);
          w.put(std::uint32_t{0});
          const auto& a = c.arch;
          w.put(static_cast<std::uint8_t>(a.use_past_encoder));
          w.put(static_cast<std::uint8_t>(a.use_current_encoder));
          w.put(static_cast<std::uint8_t>(a.skip_connections));
          w.put(static_cast<std::uint8_t>(a.adversarial));
          w.put(static_cast<std::int32_t>(a.base_channels));
          w.put(static_cast<std::int32_t>(a.levels));
          w.put(static_cast<std::int32_t>(a.patch_size));
          w.put(static_cast<std::uint64_t>(a.seed));
          write_tensors(w, c.generator);
          write_tensors(w, c.discriminator);
          write_moments(w, c.adam_g, c.generator, "g");
          write_moments(w, c.adam_d, c.discriminator, "d");
          w.put(static_cast<std::int64_t>(c.epoch));
          w.put(static_cast<std::uint64_t>(c.history.size()));
          for (const auto& h : c.history) {
            w.put(static_cast<std::int64_t>(h.step));
            w.put(static_cast<std::int64_t>(h.epoch));
            w.put(h.losses.loss_d);
            w.put(h.losses.loss_g);
            w.put(h.losses.loss_adv_g);
            w.put(h.losses.objective_g);
          }
        },
        true);
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointErrc::io_failure, e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrc::io_failure, "cannot open checkpoint " + path.string());
  BinaryReader r(in);
  try {
    char magic[8];
    r.get_bytes(magic, sizeof(magic));
    if (!std::equal(magic, magic + 8, kCheckpointMagic))
      throw CheckpointError(CheckpointErrc::bad_magic, "not a checkpoint file: " + path.string());
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
      throw CheckpointError(CheckpointErrc::version_mismatch, "checkpoint version " + std::to_string(version) +
                                                                   " is not supported (expected " +
                                                                   std::to_string(kCheckpointVersion) + ")");
    r.get<std::uint32_t>();
    Checkpoint c;
    auto& a = c.arch;
    a.use_past_encoder = r.get<std::uint8_t>() != 0;
    a.use_current_encoder = r.get<std::uint8_t>() != 0;
    a.skip_connections = r.get<std::uint8_t>() != 0;
    a.adversarial = r.get<std::uint8_t>() != 0;
    a.base_channels = r.get<std::int32_t>();
    a.levels = r.get<std::int32_t>();
    a.patch_size = r.get<std::int32_t>();
    a.seed = r.get<std::uint64_t>();
    try {
      a.validate();
    } catch (const ConfigError& e) {
      throw FormatError(std::string("invalid architecture: ") + e.what());
    }
    c.generator = GeneratorParams<float>::zeros(a);
    c.discriminator = DiscriminatorParams<float>::zeros();
    read_tensors(r, c.generator);
    read_tensors(r, c.discriminator);
    read_moments(r, c.adam_g, c.generator);
    read_moments(r, c.adam_d, c.discriminator);
    c.epoch = r.get<std::int64_t>();
    const auto count = r.get<std::uint64_t>();
    if (count > (1ull << 32)) throw FormatError("history length out of range");
    c.history.resize(count);
    for (auto& h : c.history) {
      h.step = r.get<std::int64_t>();
      h.epoch = r.get<std::int64_t>();
      h.losses.loss_d = r.get<double>();
      h.losses.loss_g = r.get<double>();
      h.losses.loss_adv_g = r.get<double>();
      h.losses.objective_g = r.get<double>();
    }
    if (!r.at_end()) throw FormatError("trailing bytes");
    return c;
  } catch (const FormatError& e) {
    throw CheckpointError(CheckpointErrc::corrupt, "corrupt checkpoint " + path.string() + ": " + e.what());
  }
}

void write_loss_history_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path) {
  write_file_atomically(path, [&](std::ostream& out) {
    out << "step,epoch,loss_d,loss_g,loss_adv_g,objective_g\n";
    char line[256];
    for (const auto& h : history) {
      std::snprintf(line, sizeof(line), "%lld,%lld,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(h.step),
                    static_cast<long long>(h.epoch), h.losses.loss_d, h.losses.loss_g, h.losses.loss_adv_g,
                    h.losses.objective_g);
      out << line;
    }
  });
}

bool same_parameters(const Checkpoint& a, const Checkpoint& b) {
  if (!(a.arch == b.arch)) return false;
  return digest(a.generator) == digest(b.generator) && digest(a.discriminator) == digest(b.discriminator) &&
         [&] {
           auto& ga = const_cast<GeneratorParams<float>&>(a.generator);
           auto& gb = const_cast<GeneratorParams<float>&>(b.generator);
           auto va = ga.views(), vb = gb.views();
           for (std::size_t i = 0; i < va.size(); ++i)
             if (std::memcmp(va[i].data, vb[i].data, sizeof(float) * va[i].size) != 0) return false;
           auto& da = const_cast<DiscriminatorParams<float>&>(a.discriminator);
           auto& db = const_cast<DiscriminatorParams<float>&>(b.discriminator);
           auto wa = da.views(), wb = db.views();
           for (std::size_t i = 0; i < wa.size(); ++i)
             if (std::memcmp(wa[i].data, wb[i].data, sizeof(float) * wa[i].size) != 0) return false;
           return true;
         }();
}

}  // namespace nlap
