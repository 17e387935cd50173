// SPDX-License-Identifier: Apache-2.0
//
// Fast structural self-checks: algebraic identities the pipeline relies on,
// end-to-end noiseless recovery, detector mode equivalence, and CSV
// determinism across seeds and thread counts. Runs in well under two minutes.
#pragma once

#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cpscm/analysis.hpp"
#include "cpscm/channel.hpp"
#include "cpscm/common.hpp"
#include "cpscm/detection.hpp"
#include "cpscm/fft.hpp"
#include "cpscm/harness.hpp"
#include "cpscm/rng.hpp"
#include "cpscm/waveform.hpp"

namespace cpscm {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

inline CVec random_symbols(rng::Substream& sub, int count) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(2 * count));
  for (auto& b : bits) b = static_cast<std::uint8_t>(sub.next_bit());
  return map_symbols(bits, count);
}

inline CheckResult check_spreading_unitarity() {
  double worst = 0.0;
  for (const auto& [n, root] : std::vector<std::pair<int, int>>{{64, 3}, {256, 5}, {1024, 1}}) {
    const SpreadingOperator z = build_spreading(n, root);
    worst = std::max(worst, (z.fd_diagonal.cwiseAbs().array() - 1.0).abs().maxCoeff());
    worst = std::max(worst, std::abs(z.base.norm() - 1.0));
  }
  return {"spreading unitarity", worst < 1e-10,
          "max eigenvalue magnitude deviation " + sci(worst)};
}

// Expansion by L with a cyclic shift must equal, in the frequency domain, L
// tiled copies of the block spectrum under the shift's phase ramp, scaled by
// 1/sqrt(L).
inline CheckResult check_expansion_identity() {
  double worst = 0.0;
  const int n = 64;
  for (int l : {2, 4, 8}) {
    const int per = n / l;
    for (int shift = 0; shift < l; ++shift) {
      auto sub = rng::Substream::at(7, {0x31, static_cast<std::uint64_t>(l),
                                        static_cast<std::uint64_t>(shift)});
      const CVec s = random_symbols(sub, per);
      const CVec lhs = fft::fft_unitary(expand_and_shift(s, l, shift));
      const CVec block = fft::fft_unitary(s);
      const double inv_sqrt_l = 1.0 / std::sqrt(static_cast<double>(l));
      CVec rhs(n);
      for (int i = 0; i < n; ++i)
        rhs(i) = inv_sqrt_l * unit_phase(static_cast<long long>(shift) * i, n) *
                 block(i % per);
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
  }
  return {"expansion phase-ramp identity", worst < 1e-9, "max error " + sci(worst)};
}

inline CheckResult check_energy_conservation() {
  const int n = 64, l = 4;
  StreamAllocation alloc;
  alloc.max_streams = l;
  alloc.shifts = {{0, 2, 3}, {1}};
  const SpreadingOperator z = build_spreading(n, 3);
  double worst = 0.0;
  for (int ue = 0; ue < alloc.ue_count(); ++ue) {
    auto sub = rng::Substream::at(11, {0x32, static_cast<std::uint64_t>(ue)});
    std::vector<SymbolStream> streams;
    double energy = 0.0;
    for (int s = 0; s < alloc.streams(ue); ++s) {
      CVec sym = random_symbols(sub, n / l);
      energy += sym.squaredNorm();
      streams.push_back({ue, s, std::move(sym)});
    }
    const UplinkFrame f = assemble_frame(streams, alloc, z);
    worst = std::max(worst, std::abs(f.payload.squaredNorm() - energy));
  }
  return {"frame energy conservation", worst < 1e-10, "max energy drift " + sci(worst)};
}

inline CheckResult check_cp_round_trip() {
  auto sub = rng::Substream::at(13, {0x33});
  const CVec x = random_symbols(sub, 48);
  const int cp = 12;
  const CVec framed = add_cp(x, cp);
  const bool prefix_ok = (framed.head(cp) - x.tail(cp)).cwiseAbs().maxCoeff() == 0.0;
  const bool body_ok = (remove_cp(framed, cp) - x).cwiseAbs().maxCoeff() == 0.0;
  return {"cyclic prefix round trip", prefix_ok && body_ok,
          prefix_ok && body_ok ? "exact" : "prefix or body mismatch"};
}

inline CheckResult check_noiseless_recovery() {
  const int n = 32, l = 4, m = 3, k = 2;
  StreamAllocation alloc;
  alloc.max_streams = l;
  alloc.shifts = {{0, 1}, {2, 1, 3}};  // K_v = 5 < ML = 12
  const SpreadingOperator z = build_spreading(n, 3);
  const ChannelSet ch = draw_channels(m, k, n, PowerDelayProfile::uniform(4), 99);

  std::vector<UplinkFrame> frames;
  std::vector<CVec> truth;
  for (int ue = 0; ue < k; ++ue) {
    auto sub = rng::Substream::at(17, {0x34, static_cast<std::uint64_t>(ue)});
    std::vector<SymbolStream> streams;
    for (int s = 0; s < alloc.streams(ue); ++s) {
      CVec sym = random_symbols(sub, n / l);
      truth.push_back(sym);
      streams.push_back({ue, s, std::move(sym)});
    }
    frames.push_back(assemble_frame(streams, alloc, z, 3));
  }
  const auto rx = propagate(frames, ch, PropagationPath::cp_linear);

  DetectorConfig dcfg;
  dcfg.noise_variance = 0.0;
  dcfg.unbias = UnbiasPolicy::none;
  dcfg.mode = DetectorMode::multi_stream;
  const DetectedFrame det = detect_frame(rx, z, ch, alloc, dcfg);
  double worst = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j)
    worst = std::max(worst, (det.symbols[j] - truth[j]).cwiseAbs().maxCoeff());
  return {"noiseless end-to-end recovery", worst < 1e-8, "max symbol error " + sci(worst)};
}

// With every user on one stream and shift 0, the multi-stream detector must
// reproduce the single-stream detector exactly, unbiasing included.
inline CheckResult check_mode_equivalence() {
  const int n = 32, l = 4, m = 2, k = 3;
  const StreamAllocation alloc = StreamAllocation::single_stream(k, l);
  const SpreadingOperator z = build_spreading(n, 1);
  const ChannelSet ch = draw_channels(m, k, n, PowerDelayProfile::uniform(4), 101);

  std::vector<UplinkFrame> frames;
  for (int ue = 0; ue < k; ++ue) {
    auto sub = rng::Substream::at(19, {0x35, static_cast<std::uint64_t>(ue)});
    frames.push_back(assemble_frame({{ue, 0, random_symbols(sub, n / l)}}, alloc, z));
  }
  auto rx = propagate(frames, ch);
  const NoiseModel noise{0.05};
  for (int mi = 0; mi < m; ++mi) {
    auto nsub = rng::Substream::at(19, {rng::kNoiseDraw, static_cast<std::uint64_t>(mi)});
    rx[static_cast<std::size_t>(mi)] = add_noise(rx[static_cast<std::size_t>(mi)], noise, nsub);
  }

  DetectorConfig dcfg;
  dcfg.noise_variance = noise.variance;
  dcfg.unbias = UnbiasPolicy::per_stream;
  dcfg.mode = DetectorMode::single_stream;
  const DetectedFrame single = detect_frame(rx, z, ch, alloc, dcfg);
  dcfg.mode = DetectorMode::multi_stream;
  const DetectedFrame multi = detect_frame(rx, z, ch, alloc, dcfg);
  double worst = 0.0;
  for (int j = 0; j < k; ++j)
    worst = std::max(worst, (single.symbols[static_cast<std::size_t>(j)] -
                             multi.symbols[static_cast<std::size_t>(j)])
                                .cwiseAbs()
                                .maxCoeff());
  return {"detector mode equivalence", worst < 1e-10, "max difference " + sci(worst)};
}

inline CheckResult check_csv_determinism() {
  SimConfig cfg;
  cfg.frame_len = 32;
  cfg.max_streams = 2;
  cfg.antennas = 2;
  cfg.ues = 2;
  cfg.channel_taps = 4;
  cfg.cp_len = 4;
  cfg.zc_root = 1;
  cfg.es_n0_db = {0, 10};
  cfg.trials = 4;
  cfg.seed = 42;
  cfg.mode = SimMode::scm_single;

  cfg.threads = 1;
  const std::string a = run_batch_to_string({cfg});
  const std::string b = run_batch_to_string({cfg});
  cfg.threads = 4;
  const std::string c = run_batch_to_string({cfg});
  const bool repeatable = a == b;
  const bool thread_invariant = a == c;
  std::string detail;
  if (repeatable && thread_invariant) detail = "byte-identical across reruns and thread counts";
  else if (!repeatable) detail = "rerun with the same seed differed";
  else detail = "thread count changed the output";
  return {"seeded CSV determinism", repeatable && thread_invariant, detail};
}

}  // namespace detail

inline std::vector<CheckResult> run_verification() {
  return {
      detail::check_spreading_unitarity(),
      detail::check_expansion_identity(),
      detail::check_energy_conservation(),
      detail::check_cp_round_trip(),
      detail::check_noiseless_recovery(),
      detail::check_mode_equivalence(),
      detail::check_csv_determinism(),
  };
}

// Prints one PASS/FAIL line per check; returns true when all pass.
inline bool print_verification(std::ostream& os) {
  bool all = true;
  for (const auto& c : run_verification()) {
    os << (c.passed ? "PASS" : "FAIL") << "  " << c.name << ": " << c.detail << '\n';
    all = all && c.passed;
  }
  return all;
}

}  // namespace cpscm
