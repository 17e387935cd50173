// SPDX-License-Identifier: Apache-2.0
//
// Monte-Carlo driver. Each (point, trial) pair owns a derived random key and
// an output slot, and slots are reduced in trial order, so the emitted CSV is
// byte-identical for any thread count. Rows are flushed per operating point
// so partial results survive interruption.
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cpscm/analysis.hpp"
#include "cpscm/channel.hpp"
#include "cpscm/common.hpp"
#include "cpscm/config.hpp"
#include "cpscm/detection.hpp"
#include "cpscm/rng.hpp"
#include "cpscm/waveform.hpp"

namespace cpscm {

inline constexpr std::string_view kCsvHeader =
    "es_n0_db,gain_db,gain_db_stderr,asymptote_db,mse,trials,mode,M,K,L,Lk_profile";

namespace detail {

// Shortest round-trippable decimal form, fixed across locales.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void run_parallel(int threads, int count, const std::function<void(int)>& fn) {
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (workers > count) workers = count;
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto body = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// One transmit-propagate-detect round trip; returns the frame's symbol MSE.
inline double scm_trial_mse(const SimConfig& cfg, const SpreadingOperator& spread,
                            const StreamAllocation& alloc, double noise_variance,
                            std::uint64_t trial_key) {
  const ChannelSet ch = draw_channels(cfg.antennas, cfg.ues, cfg.frame_len,
                                      cfg.power_delay_profile(), trial_key);
  const int per = cfg.frame_len / cfg.max_streams;
  const int bps = bits_per_symbol(cfg.constellation);

  std::vector<UplinkFrame> frames;
  frames.reserve(static_cast<std::size_t>(cfg.ues));
  std::vector<CVec> truth;
  truth.reserve(static_cast<std::size_t>(alloc.virtual_users()));
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(bps) * per);
  for (int ue = 0; ue < cfg.ues; ++ue) {
    std::vector<SymbolStream> streams;
    streams.reserve(static_cast<std::size_t>(alloc.streams(ue)));
    for (int s = 0; s < alloc.streams(ue); ++s) {
      auto bsub = rng::Substream::at(
          trial_key, {rng::kSymbolBits, static_cast<std::uint64_t>(ue),
                      static_cast<std::uint64_t>(s)});
      for (auto& b : bits) b = static_cast<std::uint8_t>(bsub.next_bit());
      CVec sym = map_symbols(bits, per, cfg.constellation);
      truth.push_back(sym);
      streams.push_back({ue, s, std::move(sym)});
    }
    frames.push_back(assemble_frame(streams, alloc, spread, cfg.cp_len));
  }

  std::vector<CVec> rx = propagate(frames, ch);
  if (noise_variance > 0.0) {
    const NoiseModel noise{noise_variance};
    for (int m = 0; m < cfg.antennas; ++m) {
      auto nsub = rng::Substream::at(trial_key, {rng::kNoiseDraw, static_cast<std::uint64_t>(m)});
      rx[static_cast<std::size_t>(m)] = add_noise(rx[static_cast<std::size_t>(m)], noise, nsub);
    }
  }

  DetectorConfig dcfg;
  dcfg.noise_variance = noise_variance;
  dcfg.unbias = cfg.unbias;
  dcfg.mode = cfg.mode == SimMode::scm_single ? DetectorMode::single_stream
                                              : DetectorMode::multi_stream;
  const DetectedFrame det = detect_frame(rx, spread, ch, alloc, dcfg);

  double err = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j)
    err += (det.symbols[j] - truth[j]).squaredNorm();
  return err / (static_cast<double>(truth.size()) * per);
}

inline OfdmScenario to_ofdm_scenario(const SimConfig& cfg) {
  OfdmScenario sc;
  sc.antennas = cfg.antennas;
  sc.ues = cfg.ues;
  sc.groups = cfg.max_streams;
  sc.frame_len = cfg.frame_len;
  sc.pdp = cfg.power_delay_profile();
  sc.constellation = cfg.constellation;
  sc.unbias = cfg.unbias;
  return sc;
}

}  // namespace detail

inline void write_csv_row(std::ostream& os, const CurveMeta& meta, const GainPoint& p) {
  os << detail::format_double(p.es_n0_db) << ',' << detail::format_double(p.gain_db)
     << ',' << detail::format_double(p.gain_db_stderr) << ','
     << detail::format_double(p.asymptote_db) << ',' << detail::format_double(p.mse)
     << ',' << p.trials << ',' << meta.mode << ',' << meta.antennas << ','
     << meta.ues << ',' << meta.max_streams << ',' << meta.lk_profile << '\n';
}

struct RunReport {
  SimConfig config;
  GainCurve curve;
  double wall_seconds = 0.0;
};

// Sweeps the configured Es/N0 grid. If `rows` is given, finished points are
// written and flushed immediately.
inline RunReport run_sweep(const SimConfig& cfg, std::ostream* rows = nullptr) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();

  RunReport rep;
  rep.config = cfg;
  rep.curve.meta = {to_string(cfg.mode), cfg.antennas, cfg.ues, cfg.max_streams,
                    cfg.lk_profile_string()};
  const double asym = cfg.asymptote_linear();

  const SpreadingOperator spread = build_spreading(cfg.frame_len, cfg.zc_root);
  const StreamAllocation alloc = cfg.allocation();
  const OfdmScenario ofdm = cfg.mode == SimMode::ofdm_baseline
                                ? detail::to_ofdm_scenario(cfg)
                                : OfdmScenario{};
  const long symbols = static_cast<long>(cfg.virtual_users()) *
                       (cfg.frame_len / cfg.max_streams);

  std::vector<double> mses(static_cast<std::size_t>(cfg.trials));
  for (std::size_t pt = 0; pt < cfg.es_n0_db.size(); ++pt) {
    const NoiseModel noise = NoiseModel::from_es_n0_db(cfg.es_n0_db[pt]);
    detail::run_parallel(cfg.threads, cfg.trials, [&](int t) {
      const std::uint64_t key = rng::derive_key(
          cfg.seed, {rng::kTrialKey, static_cast<std::uint64_t>(pt),
                     static_cast<std::uint64_t>(t)});
      mses[static_cast<std::size_t>(t)] =
          cfg.mode == SimMode::ofdm_baseline
              ? ofdm_trial_mse(ofdm, noise.variance, key)
              : detail::scm_trial_mse(cfg, spread, alloc, noise.variance, key);
    });
    GainEstimator ge;
    for (int t = 0; t < cfg.trials; ++t)
      ge.add_frame_mse(mses[static_cast<std::size_t>(t)], symbols);
    rep.curve.points.push_back(ge.finalize(noise, asym));
    if (rows) {
      write_csv_row(*rows, rep.curve.meta, rep.curve.points.back());
      rows->flush();
    }
  }

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

// Runs several sweeps into one CSV document: comment lines echoing each run's
// configuration, one header, then rows in run order.
inline std::vector<RunReport> run_batch(const std::vector<SimConfig>& runs,
                                        std::ostream* csv) {
  if (runs.empty()) throw std::invalid_argument("run_batch: no runs");
  if (csv) {
    *csv << "# cpscm " << kVersion << '\n';
    for (std::size_t i = 0; i < runs.size(); ++i)
      *csv << "# run " << (i + 1) << ": " << runs[i].echo() << '\n';
    *csv << kCsvHeader << '\n';
    csv->flush();
  }
  std::vector<RunReport> reports;
  reports.reserve(runs.size());
  for (const auto& r : runs) reports.push_back(run_sweep(r, csv));
  return reports;
}

// CSV document as a string; what `run_batch` would write. Used by the
// determinism self-checks and handy in tests.
inline std::string run_batch_to_string(const std::vector<SimConfig>& runs) {
  std::ostringstream os;
  run_batch(runs, &os);
  return os.str();
}

}  // namespace cpscm
