// Command-line front end. Every stage of the pipeline is exposed as its own
// subcommand reading and writing volume / packet files, plus `pipeline` and
// `sweep` for whole runs.
//
// Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 contract
// violation.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "discmed/config.hpp"
#include "discmed/pipeline.hpp"
#include "discmed/sweep.hpp"
#include "discmed/volume_io.hpp"

using namespace discmed;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_desc, bool out_required = true) {
  cmd->add_option("--config", c.config, "Flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config's seed key)");
  auto* out = cmd->add_option("--out", c.out, out_desc);
  if (out_required) out->required();
}

Config load_config(const Common& c) {
  Config cfg = c.config.empty() ? Config{} : Config::load(c.config);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  return cfg;
}

PipelineConfig pipeline_config(const Common& c) {
  const Config cfg = load_config(c);
  auto p = pipeline_config_from(cfg);
  // A shared config file may carry sweep settings; single-run commands ignore them.
  for (const char* k : {"sweep.param", "sweep.values", "sweep.repetitions"}) cfg.get(k, "");
  cfg.reject_unknown();
  return p;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw FormatError("write to '" + path + "' failed");
}

std::string metrics_text(const MetricsRecord& m) {
  std::string out = "metric,value\n";
  for (const auto& [k, v] : m.values) out += k + "," + format_metric(v) + "\n";
  return out;
}

std::string timings_text(const MetricsRecord& m) {
  std::string out;
  for (const auto& t : m.timings) out += "  " + t.stage + ": " + format_real(t.ms) + " ms\n";
  return out;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Semantic compression, noisy transmission and diffusion reconstruction of CT phantoms"};
  app.require_subcommand(1);

  // phantom ------------------------------------------------------------------
  Common ph;
  std::string ph_labels;
  bool ph_raw = false;
  auto* phantom = app.add_subcommand("phantom", "Generate an abdominal phantom");
  add_common(phantom, ph, "CT volume output (normalized unless --raw-hu)");
  phantom->add_option("--labels", ph_labels, "Ground-truth label volume output")->required();
  phantom->add_flag("--raw-hu", ph_raw, "Write Hounsfield units instead of normalized intensities");
  phantom->callback([&] {
    const auto cfg = pipeline_config(ph);
    const auto spec = default_abdomen_spec(cfg.dims, RunSeeds::from(cfg.seed).phantom, cfg.texture_hu);
    const auto p = generate_phantom(spec);
    write_volume(ph.out, ph_raw ? p.ct : normalize_hu(p.ct));
    write_volume(ph_labels, p.labels);
  });

  // extract ------------------------------------------------------------------
  Common ex;
  std::string ex_ct, ex_gt, ex_edges;
  auto* extract = app.add_subcommand("extract", "Build the segmentation and edge volumes");
  add_common(extract, ex, "Segmentation volume output");
  extract->add_option("--ct", ex_ct, "Normalized CT volume")->required()->check(CLI::ExistingFile);
  extract->add_option("--labels", ex_gt, "Label volume used as the segmentation")->required()->check(CLI::ExistingFile);
  extract->add_option("--edges", ex_edges, "Edge volume output")->required();
  extract->callback([&] {
    const auto cfg = pipeline_config(ex);
    const auto ct = read_volume_as<CtVolume>(ex_ct);
    const auto seg = extract_segmentation(read_volume_as<LabelVolume>(ex_gt));
    write_volume(ex.out, seg.labels);
    write_volume(ex_edges, extract_edges(ct, cfg.canny));
  });

  // compress -----------------------------------------------------------------
  Common co;
  std::string co_seg, co_edges;
  auto* comp = app.add_subcommand("compress", "Stride-sample the semantic volumes into a latent packet");
  add_common(comp, co, "Latent packet output");
  comp->add_option("--seg", co_seg, "Segmentation label volume")->required()->check(CLI::ExistingFile);
  comp->add_option("--edges", co_edges, "Edge volume")->required()->check(CLI::ExistingFile);
  comp->callback([&] {
    const auto cfg = pipeline_config(co);
    const auto p = compress(SegVolume{read_volume_as<LabelVolume>(co_seg)}, read_volume_as<EdgeVolume>(co_edges),
                            cfg.strides);
    write_file(co.out, serialize(p));
    std::printf("latent %s, %llu bits, CR %s\n", p.seg_latent.dims().str().c_str(),
                static_cast<unsigned long long>(latent_bits(p)),
                format_real(compression_ratio(original_bits(p.original_dims), latent_bits(p))).c_str());
  });

  // transmit -----------------------------------------------------------------
  Common tx;
  std::string tx_in;
  auto* transmit_cmd = app.add_subcommand(
      "transmit", "Pass a packet through the configured channel; AWGN output is hard-decided per voxel");
  add_common(transmit_cmd, tx, "Received packet output");
  transmit_cmd->add_option("--in", tx_in, "Input packet")->required()->check(CLI::ExistingFile);
  transmit_cmd->callback([&] {
    const auto cfg = pipeline_config(tx);
    const auto sent = deserialize(read_file(tx_in));
    const auto t = transmit(sent, cfg.channel, cfg.flip_targets, RunSeeds::from(cfg.seed).channel);
    write_file(tx.out, serialize(t.received));
    std::printf("edge BER %s, label error rate %s\n",
                format_real(measure_ber(sent.edge_latent.mask.storage(), t.received.edge_latent.mask.storage())).c_str(),
                format_real(measure_ber(sent.seg_latent.labels.storage(), t.received.seg_latent.labels.storage())).c_str());
  });

  // receive ------------------------------------------------------------------
  Common rx;
  std::string rx_in, rx_edges;
  auto* receive = app.add_subcommand("receive", "Upsample and denoise a received packet");
  add_common(receive, rx, "Segmentation volume output");
  receive->add_option("--in", rx_in, "Received packet")->required()->check(CLI::ExistingFile);
  receive->add_option("--edges", rx_edges, "Edge volume output")->required();
  receive->callback([&] {
    const auto cfg = pipeline_config(rx);
    const auto p = deserialize(read_file(rx_in));
    const auto r = p.channel_state.kind == ChannelKind::awgn
                       ? receive_continuous(real_view(p), p, cfg.denoise, cfg.denoise_cfg)
                       : receive_discrete(p, cfg.denoise, cfg.denoise_cfg, cfg.flip_targets);
    write_volume(rx.out, r.seg.labels);
    write_volume(rx_edges, r.edges);
  });

  // reconstruct --------------------------------------------------------------
  Common re;
  std::string re_seg, re_edges;
  auto* recon = app.add_subcommand("reconstruct", "Sample a CT volume conditioned on seg + edge volumes");
  add_common(recon, re, "Reconstructed CT volume output");
  recon->add_option("--seg", re_seg, "Segmentation label volume")->required()->check(CLI::ExistingFile);
  recon->add_option("--edges", re_edges, "Edge volume")->required()->check(CLI::ExistingFile);
  recon->callback([&] {
    const auto cfg = pipeline_config(re);
    const SegVolume seg{read_volume_as<LabelVolume>(re_seg)};
    const auto edges = read_volume_as<EdgeVolume>(re_edges);
    const auto spec = default_abdomen_spec(seg.dims(), 0, cfg.texture_hu);
    auto table = class_intensity_table(spec);
    detail::require(seg.num_classes() <= int(table.size()), "reconstruct: more classes than the render table has");
    table.resize(std::size_t(seg.num_classes()));
    const auto schedule = make_schedule(cfg.ddpm_steps, cfg.beta_start, cfg.beta_end, cfg.sigma_rule);
    write_volume(re.out, reconstruct_volume(seg, edges, make_predictor(cfg, schedule, table), schedule,
                                            RunSeeds::from(cfg.seed).ddpm));
  });

  // evaluate -----------------------------------------------------------------
  Common ev;
  std::string ev_ct, ev_ref, ev_gt;
  auto* evaluate = app.add_subcommand("evaluate", "Score a reconstruction against the reference CT and labels");
  add_common(evaluate, ev, "Metrics CSV output (default: stdout)", false);
  evaluate->add_option("--ct", ev_ct, "Reconstructed normalized CT")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--ref", ev_ref, "Reference normalized CT")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--labels", ev_gt, "Ground-truth labels")->required()->check(CLI::ExistingFile);
  evaluate->callback([&] {
    const auto cfg = pipeline_config(ev);
    const auto ct = read_volume_as<CtVolume>(ev_ct);
    const auto ref = read_volume_as<CtVolume>(ev_ref);
    const auto gt = read_volume_as<LabelVolume>(ev_gt);
    detail::require(ct.dims() == gt.dims() && ref.dims() == gt.dims(), "evaluate: volume dims differ");
    auto table = class_intensity_table(default_abdomen_spec(gt.dims(), 0, cfg.texture_hu));
    table.resize(std::size_t(gt.num_classes), 0.0);
    const auto seg = segment_by_intensity(ct, table);
    const auto counts = confusion(seg, gt, gt.num_classes);
    std::vector<MetricValue> dices, ious, hds;
    for (int c = 1; c < gt.num_classes; ++c) {
      dices.push_back(dice(counts, c));
      ious.push_back(iou(counts, c));
      hds.push_back(hd95(class_mask(seg, c), class_mask(gt, c), cfg.spacing, cfg.hd_mode));
    }
    const double m = mse(ct, ref);
    MetricsRecord rec;
    rec.values = {{"dice", mean_defined(dices)}, {"iou", mean_defined(ious)}, {"miou_w", weighted_miou(counts)},
                  {"hd95", mean_defined(hds)},   {"mse", m},                  {"psnr", psnr_from_mse(m)}};
    for (int c = 1; c < gt.num_classes; ++c) {
      rec.values.emplace_back("dice_" + std::to_string(c), dices[c - 1]);
      rec.values.emplace_back("hd95_" + std::to_string(c), hds[c - 1]);
    }
    write_text(ev.out, metrics_text(rec));
  });

  // pipeline -----------------------------------------------------------------
  Common pl;
  std::string pl_volume;
  bool pl_timings = false;
  auto* pipeline = app.add_subcommand("pipeline", "Run phantom -> ... -> metrics once and write CSV rows");
  add_common(pipeline, pl, "CSV output (default: stdout)", false);
  pipeline->add_option("--volume", pl_volume, "Also write the reconstructed CT volume here");
  pipeline->add_flag("--timings", pl_timings, "Print per-stage timings to stderr");
  pipeline->callback([&] {
    const auto cfg = pipeline_config(pl);
    const auto r = run_pipeline(cfg);
    write_text(pl.out, to_csv(rows_for(cfg, r.metrics)));
    if (!pl_volume.empty()) write_volume(pl_volume, r.artifacts.reconstruction);
    if (pl_timings) std::cerr << timings_text(r.metrics);
  });

  // sweep --------------------------------------------------------------------
  Common sw;
  unsigned sw_workers = 0;
  auto* sweep = app.add_subcommand("sweep", "Sweep snr_db or flip_p (sweep.* config keys) and write CSV rows");
  add_common(sweep, sw, "CSV output (default: stdout)", false);
  sweep->add_option("--workers", sw_workers, "Worker threads (default: hardware concurrency)");
  sweep->callback([&] {
    const Config cfg = load_config(sw);
    const auto s = sweep_config_from(cfg);
    cfg.reject_unknown();
    const unsigned workers = sw_workers ? sw_workers : std::max(1u, std::thread::hardware_concurrency());
    write_text(sw.out, to_csv(run_sweep(s, workers)));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
