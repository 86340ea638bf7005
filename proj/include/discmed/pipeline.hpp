#pragma once

// End-to-end run: phantom -> semantics -> compress -> channel -> upsample ->
// denoise -> reconstruct -> metrics.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "discmed/channel.hpp"
#include "discmed/codec.hpp"
#include "discmed/config.hpp"
#include "discmed/diffusion.hpp"
#include "discmed/metrics.hpp"
#include "discmed/phantom.hpp"
#include "discmed/receiver.hpp"
#include "discmed/rng.hpp"
#include "discmed/semantics.hpp"

namespace discmed {

/// Which latent payloads a bit-flip channel corrupts.
enum class FlipTargets : std::uint8_t { both, edges, seg };

inline FlipTargets parse_flip_targets(const std::string& s) {
  if (s == "both") return FlipTargets::both;
  if (s == "edges") return FlipTargets::edges;
  if (s == "seg") return FlipTargets::seg;
  throw UsageError("channel.targets: expected both|edges|seg, got '" + s + "'");
}

enum class PredictorKind : std::uint8_t { renderer, oracle };

struct PipelineConfig {
  Dims dims{16, 64, 64};
  double texture_hu = 15.0;
  CannyParams canny;
  Strides strides;
  ChannelState channel;  // the seed field is ignored; runs derive it from `seed`
  FlipTargets flip_targets = FlipTargets::both;
  bool denoise = true;
  DenoiseConfig denoise_cfg;  // channel_state is filled in per run
  int ddpm_steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  SigmaRule sigma_rule = SigmaRule::beta;
  PredictorKind predictor = PredictorKind::renderer;
  double oracle_mu = 0.0;
  double oracle_s2 = 1.0;
  Spacing spacing{1.0, 1.0, 1.0};
  HdMode hd_mode = HdMode::pooled;
  std::uint64_t seed = 0;
};

/// Number of classes in the default abdominal phantom.
inline constexpr int kPhantomClasses = 5;

namespace detail {
inline std::array<std::size_t, 3> triple(const Config& c, const std::string& key, std::array<std::size_t, 3> fallback) {
  const auto v = c.get_list(key, {double(fallback[0]), double(fallback[1]), double(fallback[2])});
  if (v.size() != 3) throw UsageError(key + ": expected three comma-separated values");
  std::array<std::size_t, 3> out{};
  for (int i = 0; i < 3; ++i) {
    if (v[i] < 1 || v[i] != std::floor(v[i])) throw UsageError(key + ": expected positive integers");
    out[i] = static_cast<std::size_t>(v[i]);
  }
  return out;
}
}  // namespace detail

/// Read pipeline settings from a flat config. Missing keys keep defaults.
inline PipelineConfig pipeline_config_from(const Config& c) {
  PipelineConfig p;
  const auto dims = detail::triple(c, "phantom.dims", {16, 64, 64});
  p.dims = {dims[0], dims[1], dims[2]};
  p.texture_hu = c.get_double("phantom.texture_hu", p.texture_hu);
  p.canny.gaussian_sigma = c.get_double("canny.sigma", p.canny.gaussian_sigma);
  p.canny.low_threshold = c.get_double("canny.low", p.canny.low_threshold);
  p.canny.high_threshold = c.get_double("canny.high", p.canny.high_threshold);
  const auto st = detail::triple(c, "codec.strides", {2, 4, 4});
  p.strides = {st[0], st[1], st[2]};

  try {
    p.channel.kind = parse_channel_kind(c.get("channel.kind", "none"));
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  p.channel.snr_db = c.get_double("channel.snr_db", 10.0);
  p.channel.flip_p = c.get_double("channel.flip_p", 0.1);
  const double label_error = c.get_double("channel.label_error", 0.1);
  const auto entries = c.get_list("channel.transition", {});
  if (!entries.empty()) {
    if (entries.size() != std::size_t(kPhantomClasses * kPhantomClasses))
      throw UsageError("channel.transition: expected " + std::to_string(kPhantomClasses * kPhantomClasses) + " entries");
    p.channel.transition = TransitionMatrix{kPhantomClasses, entries};
  } else {
    p.channel.transition = TransitionMatrix::symmetric(kPhantomClasses, label_error);
  }
  p.flip_targets = parse_flip_targets(c.get("channel.targets", "both"));

  p.denoise = c.get_bool("denoise.enabled", p.denoise);
  p.denoise_cfg.kernel = detail::triple(c, "denoise.kernel", p.denoise_cfg.kernel);
  p.denoise_cfg.prior_strength = c.get_double("denoise.prior_strength", p.denoise_cfg.prior_strength);
  p.denoise_cfg.laplace = c.get_double("denoise.laplace", p.denoise_cfg.laplace);
  p.denoise_cfg.sigma_ref = c.get_double("denoise.sigma_ref", p.denoise_cfg.sigma_ref);
  p.denoise_cfg.sigma_max = c.get_double("denoise.sigma_max", p.denoise_cfg.sigma_max);

  p.ddpm_steps = c.get_int("ddpm.steps", p.ddpm_steps);
  p.beta_start = c.get_double("ddpm.beta_start", p.beta_start);
  p.beta_end = c.get_double("ddpm.beta_end", p.beta_end);
  try {
    p.sigma_rule = parse_sigma_rule(c.get("ddpm.sigma_rule", "beta"));
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  const auto pred = c.get("ddpm.predictor", "renderer");
  if (pred == "renderer") p.predictor = PredictorKind::renderer;
  else if (pred == "oracle") p.predictor = PredictorKind::oracle;
  else throw UsageError("ddpm.predictor: expected renderer|oracle, got '" + pred + "'");
  p.oracle_mu = c.get_double("ddpm.oracle_mu", p.oracle_mu);
  p.oracle_s2 = c.get_double("ddpm.oracle_s2", p.oracle_s2);

  const auto sp = c.get_list("metrics.spacing", {1.0, 1.0, 1.0});
  if (sp.size() != 3) throw UsageError("metrics.spacing: expected three values");
  p.spacing = {sp[0], sp[1], sp[2]};
  const auto mode = c.get("metrics.hd_mode", "pooled");
  if (mode == "pooled") p.hd_mode = HdMode::pooled;
  else if (mode == "directed_max") p.hd_mode = HdMode::directed_max;
  else throw UsageError("metrics.hd_mode: expected pooled|directed_max");
  p.seed = c.get_u64("seed", p.seed);
  return p;
}

// ---------------------------------------------------------------------------
// Stage helpers shared with the CLI

/// Seeds for each stochastic stage, derived from the master seed.
struct RunSeeds {
  std::uint64_t phantom, channel, ddpm;
  static RunSeeds from(std::uint64_t master) {
    return {rng::derive(master, 0x9a17), rng::derive(master, 0xc4a2), rng::derive(master, 0xdd93)};
  }
};

/// Real-valued view of a packet's latents: C one-hot seg channels followed by
/// the edge channel, each in latent row-major order.
inline std::vector<double> real_view(const LatentPacket& p) {
  const std::size_t n = p.seg_latent.labels.size();
  const int C = p.num_classes();
  std::vector<double> out(n * std::size_t(C + 1), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    out[std::size_t(p.seg_latent.labels[i]) * n + i] = 1.0;
    out[std::size_t(C) * n + i] = p.edge_latent.mask[i];
  }
  return out;
}

/// Channel c of a real view as a latent-shaped grid.
inline Grid3<double> real_channel(std::span<const double> view, const Dims& latent, int c) {
  const std::size_t n = latent.size();
  const auto part = view.subspan(std::size_t(c) * n, n);
  return Grid3<double>(latent, std::vector<double>(part.begin(), part.end()));
}

/// Per-voxel hard decision on a received real view: argmax over the seg
/// channels, edge bit set when its channel exceeds 0.5.
inline void hard_decide(std::span<const double> view, LatentPacket& p) {
  const std::size_t n = p.seg_latent.labels.size();
  const int C = p.num_classes();
  detail::require(view.size() == n * std::size_t(C + 1), "hard_decide: real view size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int c = 1; c < C; ++c)
      if (view[std::size_t(c) * n + i] > view[std::size_t(best) * n + i]) best = c;
    p.seg_latent.labels[i] = static_cast<std::uint8_t>(best);
    p.edge_latent.mask[i] = view[std::size_t(C) * n + i] > 0.5 ? 1 : 0;
  }
}

struct Transmission {
  LatentPacket received;               // hard-decided latents, declared channel state
  std::vector<double> real_sent;       // real view of the sent packet
  std::optional<std::vector<double>> real_received;  // continuous channel output (awgn only)
};

/// Push a packet through the channel. Seg labels travel as packed
/// ceil(log2 C)-bit codes under bit flips; codes >= C decode to class 0.
inline Transmission transmit(const LatentPacket& sent, const ChannelState& channel, FlipTargets targets,
                             std::uint64_t seed) {
  validate(channel);
  Transmission tx{sent, real_view(sent), std::nullopt};
  tx.received.channel_state = channel;
  tx.received.channel_state.seed = 0;
  const int C = sent.num_classes();
  switch (channel.kind) {
    case ChannelKind::none: break;
    case ChannelKind::awgn:
      tx.real_received = awgn_transmit(tx.real_sent, channel.snr_db, seed);
      hard_decide(*tx.real_received, tx.received);
      break;
    case ChannelKind::bitflip: {
      if (targets != FlipTargets::seg)
        tx.received.edge_latent.mask.storage() =
            bitflip_transmit(sent.edge_latent.mask.values(), channel.flip_p, rng::derive(seed, 1));
      if (targets != FlipTargets::edges) {
        const int width = bits::label_width(C);
        const std::size_t n = sent.seg_latent.labels.size();
        const auto packed = bits::pack(sent.seg_latent.labels.values(), width);
        const auto flipped = bitflip_packed(packed, n * std::size_t(width), channel.flip_p, rng::derive(seed, 2));
        const auto codes = bits::unpack(flipped, n, width);
        for (std::size_t i = 0; i < n; ++i) tx.received.seg_latent.labels[i] = decode_label_code(codes[i], C);
      }
      break;
    }
    case ChannelKind::transition:
      tx.received.seg_latent = label_transmit(sent.seg_latent, channel.transition, rng::derive(seed, 3));
      break;
  }
  return tx;
}

struct ReceivedSemantics {
  SegVolume seg;
  EdgeVolume edges;
};

/// Discrete restoration: label interpolation followed by MAP denoising under
/// the packet's declared channel state.
inline ReceivedSemantics receive_discrete(const LatentPacket& p, bool denoise, DenoiseConfig dcfg,
                                          FlipTargets targets = FlipTargets::both) {
  LabelVolume seg = upsample_labels(p.seg_latent, p.num_classes(), p.original_dims);
  EdgeVolume edges = upsample_edges(p.edge_latent, p.original_dims);
  const auto& cs = p.channel_state;
  if (denoise && cs.kind != ChannelKind::none) {
    dcfg.channel_state = cs;
    if (cs.kind != ChannelKind::bitflip || targets != FlipTargets::edges) seg = denoise_labels(seg, dcfg);
    if (cs.kind == ChannelKind::bitflip && targets != FlipTargets::seg) edges = denoise_edges(edges, dcfg);
  }
  return {SegVolume{std::move(seg)}, std::move(edges)};
}

/// Continuous restoration: interpolate every real channel, smooth according
/// to the declared SNR, then decide per voxel.
inline ReceivedSemantics receive_continuous(std::span<const double> view, const LatentPacket& meta, bool denoise,
                                            DenoiseConfig dcfg) {
  const int C = meta.num_classes();
  const Dims latent = meta.seg_latent.dims();
  detail::require(view.size() == latent.size() * std::size_t(C + 1), "receive_continuous: real view size mismatch");
  dcfg.channel_state = meta.channel_state;
  if (meta.channel_state.kind == ChannelKind::awgn) {
    const double ratio = std::pow(10.0, -meta.channel_state.snr_db / 10.0);
    dcfg.signal_power = mean_square(view) / (1.0 + ratio);
  }
  std::vector<Grid3<double>> channels;
  for (int c = 0; c <= C; ++c) {
    Grid3<double> up = trilinear_upsample(real_channel(view, latent, c), meta.original_dims);
    if (denoise) up = denoise_continuous(up, dcfg);
    channels.push_back(std::move(up));
  }
  Grid3<double> edge_channel = std::move(channels.back());
  channels.pop_back();
  EdgeVolume edges{Grid3<std::uint8_t>(meta.original_dims)};
  for (std::size_t i = 0; i < edges.mask.size(); ++i) edges.mask[i] = edge_channel[i] > 0.5 ? 1 : 0;
  return {SegVolume{LabelVolume{argmax_channels(channels), C}}, std::move(edges)};
}

inline NoisePredictor make_predictor(const PipelineConfig& cfg, const NoiseSchedule& schedule,
                                     std::vector<double> table) {
  if (cfg.predictor == PredictorKind::oracle) return oracle_gaussian_predictor(cfg.oracle_mu, cfg.oracle_s2, schedule);
  return renderer_predictor(std::move(table), schedule);
}

// ---------------------------------------------------------------------------
// Full run

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

/// Ordered metric values. Names follow the CSV metric column.
struct MetricsRecord {
  std::vector<std::pair<std::string, MetricValue>> values;
  std::vector<StageTiming> timings;

  MetricValue get(const std::string& name) const {
    for (const auto& [k, v] : values)
      if (k == name) return v;
    throw ContractError("no metric named '" + name + "'");
  }
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"dice", "iou",    "miou_w", "hd95", "ber",
                                              "ber_seg", "snr_db", "mse",    "psnr", "cr"};
  return names;
}

struct PipelineArtifacts {
  PhantomSpec spec;
  LabelVolume ground_truth;
  CtVolume ct;  // normalized
  SegVolume seg;
  EdgeVolume edges;
  LatentPacket sent;
  Transmission transmission;
  ReceivedSemantics received;
  CtVolume reconstruction;
  LabelVolume resegmented;
};

struct PipelineResult {
  MetricsRecord metrics;
  PipelineArtifacts artifacts;
};

/// Exceptions escaping a stage are rethrown with the stage name prefixed and
/// their category preserved.
template <class F>
auto run_stage(const char* name, std::vector<StageTiming>& timings, F&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  auto record = [&] {
    timings.push_back({name, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()});
  };
  try {
    auto out = fn();
    record();
    return out;
  } catch (const ContractError& e) {
    throw ContractError(std::string("stage '") + name + "': " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(std::string("stage '") + name + "': " + e.what());
  }
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const RunSeeds seeds = RunSeeds::from(cfg.seed);
  PipelineResult r;
  auto& a = r.artifacts;
  auto& timings = r.metrics.timings;

  a.spec = default_abdomen_spec(cfg.dims, seeds.phantom, cfg.texture_hu);
  const auto table = class_intensity_table(a.spec);
  auto phantom = run_stage("phantom", timings, [&] { return generate_phantom(a.spec); });
  a.ground_truth = phantom.labels;
  a.ct = run_stage("phantom", timings, [&] { return normalize_hu(phantom.ct); });
  a.seg = run_stage("semantics", timings, [&] { return extract_segmentation(a.ground_truth); });
  a.edges = run_stage("semantics", timings, [&] { return extract_edges(a.ct, cfg.canny); });
  a.sent = run_stage("compress", timings, [&] {
    auto p = compress(a.seg, a.edges, cfg.strides);
    p.channel_state = cfg.channel;
    p.channel_state.seed = 0;
    return p;
  });
  a.transmission = run_stage("channel", timings, [&] { return transmit(a.sent, cfg.channel, cfg.flip_targets, seeds.channel); });
  a.received = run_stage("receive", timings, [&] {
    if (a.transmission.real_received)
      return receive_continuous(*a.transmission.real_received, a.transmission.received, cfg.denoise, cfg.denoise_cfg);
    return receive_discrete(a.transmission.received, cfg.denoise, cfg.denoise_cfg, cfg.flip_targets);
  });
  a.reconstruction = run_stage("reconstruct", timings, [&] {
    const auto schedule = make_schedule(cfg.ddpm_steps, cfg.beta_start, cfg.beta_end, cfg.sigma_rule);
    return reconstruct_volume(a.received.seg, a.received.edges, make_predictor(cfg, schedule, table), schedule,
                              seeds.ddpm);
  });

  r.metrics.values = run_stage("metrics", timings, [&] {
    a.resegmented = segment_by_intensity(a.reconstruction, table);
    const int C = a.spec.num_classes;
    const auto counts = confusion(a.resegmented, a.ground_truth, C);
    std::vector<MetricValue> dices, ious, hds;
    for (int c = 1; c < C; ++c) {
      dices.push_back(dice(counts, c));
      ious.push_back(iou(counts, c));
      hds.push_back(hd95(class_mask(a.resegmented, c), class_mask(a.ground_truth, c), cfg.spacing, cfg.hd_mode));
    }
    const auto& rx = a.transmission.received;
    const auto real_rx = a.transmission.real_received ? *a.transmission.real_received : real_view(rx);
    const double m = mse(a.reconstruction, a.ct);
    std::vector<std::pair<std::string, MetricValue>> v{
        {"dice", mean_defined(dices)},
        {"iou", mean_defined(ious)},
        {"miou_w", weighted_miou(counts)},
        {"hd95", mean_defined(hds)},
        {"ber", measure_ber(a.sent.edge_latent.mask.storage(), rx.edge_latent.mask.storage())},
        {"ber_seg", measure_ber(a.sent.seg_latent.labels.storage(), rx.seg_latent.labels.storage())},
        {"snr_db", measure_snr_db(a.transmission.real_sent, real_rx)},
        {"mse", m},
        {"psnr", psnr_from_mse(m)},
        {"cr", compression_ratio(original_bits(cfg.dims), latent_bits(a.sent))},
    };
    return v;
  });
  return r;
}

}  // namespace discmed
