#pragma once

// Parameter sweeps over channel quality with CSV output.
//
// CSV columns: seed,channel_kind,param_name,param_value,metric,value
// Reals use "%.6g"; undefined metrics print "Fail"; infinities print "inf".
// Rows are ordered by (value index, repetition, metric) whatever the worker
// count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "discmed/config.hpp"
#include "discmed/pipeline.hpp"
#include "discmed/rng.hpp"

namespace discmed {

enum class SweepParam : std::uint8_t { snr_db, flip_p };

inline const char* to_string(SweepParam p) { return p == SweepParam::snr_db ? "snr_db" : "flip_p"; }

struct SweepConfig {
  PipelineConfig base;
  SweepParam param = SweepParam::flip_p;
  std::vector<double> values;
  int repetitions = 5;
};

inline void validate(const SweepConfig& s) {
  detail::require(!s.values.empty(), "sweep: empty value list");
  detail::require(s.repetitions >= 1, "sweep: repetitions must be >= 1");
}

/// Default grids: SNR -5..20 dB step 5; flip probability 0..0.3 step 0.05.
inline std::vector<double> default_sweep_values(SweepParam p) {
  if (p == SweepParam::snr_db) return {-5, 0, 5, 10, 15, 20};
  return {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
}

inline SweepConfig sweep_config_from(const Config& c) {
  SweepConfig s;
  s.base = pipeline_config_from(c);
  const auto param = c.get("sweep.param", "flip_p");
  if (param == "snr_db") s.param = SweepParam::snr_db;
  else if (param == "flip_p") s.param = SweepParam::flip_p;
  else throw UsageError("sweep.param: expected snr_db|flip_p, got '" + param + "'");
  s.values = c.get_list("sweep.values", default_sweep_values(s.param));
  s.repetitions = c.get_int("sweep.repetitions", s.repetitions);
  return s;
}

/// The pipeline config of one sweep point. Repetition r uses master seed
/// derive(base.seed, r), shared across sweep values.
inline PipelineConfig sweep_point(const SweepConfig& s, double value, int rep) {
  PipelineConfig cfg = s.base;
  cfg.seed = rng::derive(s.base.seed, std::uint64_t(rep));
  if (s.param == SweepParam::snr_db) {
    cfg.channel.kind = ChannelKind::awgn;
    cfg.channel.snr_db = value;
  } else {
    cfg.channel.kind = ChannelKind::bitflip;
    cfg.channel.flip_p = value;
  }
  return cfg;
}

struct CsvRow {
  std::uint64_t seed = 0;
  std::string channel_kind;
  std::string param_name;
  double param_value = 0.0;
  std::string metric;
  MetricValue value;
};

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string format_metric(const MetricValue& v) { return v ? format_real(*v) : "Fail"; }

inline const char* kCsvHeader = "seed,channel_kind,param_name,param_value,metric,value";

inline void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.seed << ',' << r.channel_kind << ',' << r.param_name << ',' << format_real(r.param_value) << ','
        << r.metric << ',' << format_metric(r.value) << '\n';
}

inline std::string to_csv(const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  write_csv(out, rows);
  return out.str();
}

/// Rows for a single pipeline run. The parameter column carries the value
/// that matters for the channel kind.
inline std::vector<CsvRow> rows_for(const PipelineConfig& cfg, const MetricsRecord& m) {
  std::string name = "none";
  double value = 0.0;
  switch (cfg.channel.kind) {
    case ChannelKind::awgn: name = "snr_db", value = cfg.channel.snr_db; break;
    case ChannelKind::bitflip: name = "flip_p", value = cfg.channel.flip_p; break;
    case ChannelKind::transition: name = "label_error", value = 1.0 - cfg.channel.transition(0, 0); break;
    case ChannelKind::none: break;
  }
  std::vector<CsvRow> rows;
  for (const auto& [metric, v] : m.values)
    rows.push_back({cfg.seed, std::string(to_string(cfg.channel.kind)), name, value, metric, v});
  return rows;
}

/// Run every (value, repetition) point on `workers` threads. A failing run
/// yields "Fail" for each metric instead of aborting the sweep.
inline std::vector<CsvRow> run_sweep(const SweepConfig& s, unsigned workers = 1) {
  validate(s);
  const std::size_t jobs = s.values.size() * std::size_t(s.repetitions);
  std::vector<std::vector<CsvRow>> results(jobs);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const double value = s.values[j / s.repetitions];
      const int rep = static_cast<int>(j % s.repetitions);
      const PipelineConfig cfg = sweep_point(s, value, rep);
      try {
        results[j] = rows_for(cfg, run_pipeline(cfg).metrics);
      } catch (const std::exception&) {
        MetricsRecord failed;
        for (const auto& name : metric_names()) failed.values.emplace_back(name, std::nullopt);
        results[j] = rows_for(cfg, failed);
      }
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
  }

  std::vector<CsvRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

/// Mean of a metric per sweep value over repetitions (Fail entries skipped).
inline std::vector<MetricValue> mean_by_value(const SweepConfig& s, const std::vector<CsvRow>& rows,
                                              const std::string& metric) {
  std::vector<MetricValue> out;
  for (double v : s.values) {
    std::vector<MetricValue> vals;
    for (const auto& r : rows)
      if (r.metric == metric && r.param_value == v) vals.push_back(r.value);
    out.push_back(mean_defined(vals));
  }
  return out;
}

}  // namespace discmed
