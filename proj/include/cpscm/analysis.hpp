// SPDX-License-Identifier: Apache-2.0
//
// Performance analysis: closed-form processing-gain asymptotes, Monte-Carlo
// gain measurement with per-point standard errors, inverse-Wishart trace
// checks that back the asymptotes, Gram conditioning statistics, and a
// DFT-precoded per-subcarrier OFDM baseline for comparison.
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cpscm/channel.hpp"
#include "cpscm/common.hpp"
#include "cpscm/detection.hpp"
#include "cpscm/fft.hpp"
#include "cpscm/rng.hpp"
#include "cpscm/waveform.hpp"

namespace cpscm {

// High-SNR output-over-input SNR ratio with K single-stream users: M - K/L.
inline double asymptotic_gain_single(int antennas, int ues, int max_streams) {
  if (antennas < 1 || ues < 1 || max_streams < 1)
    throw std::invalid_argument("asymptotic gain: M, K, L must be >= 1");
  if (ues >= antennas * max_streams)
    throw std::invalid_argument("asymptotic gain: K (" + std::to_string(ues) +
                                ") must be < ML (" +
                                std::to_string(antennas * max_streams) + ")");
  return antennas - static_cast<double>(ues) / max_streams;
}

// Multi-stream form: M - K_v/L with K_v total streams across all users.
inline double asymptotic_gain_multi(int antennas, int max_streams,
                                    const std::vector<int>& streams_per_ue) {
  if (antennas < 1 || max_streams < 1)
    throw std::invalid_argument("asymptotic gain: M and L must be >= 1");
  if (streams_per_ue.empty())
    throw std::invalid_argument("asymptotic gain: no users");
  int kv = 0;
  for (int lk : streams_per_ue) {
    if (lk < 1 || lk > max_streams)
      throw std::invalid_argument("asymptotic gain: L_k out of [1, L]");
    kv += lk;
  }
  if (kv >= antennas * max_streams)
    throw std::invalid_argument("asymptotic gain: K_v (" + std::to_string(kv) +
                                ") must be < ML (" +
                                std::to_string(antennas * max_streams) + ")");
  return antennas - static_cast<double>(kv) / max_streams;
}

// One Monte-Carlo operating point.
struct GainPoint {
  double es_n0_db = 0.0;
  double es_n0_linear = 0.0;
  double mse = 0.0;
  double gain_linear = 0.0;      // noise variance / mse
  double gain_db = 0.0;
  double gain_db_stderr = 0.0;   // delta-method standard error of gain_db
  double asymptote_db = 0.0;
  long trials = 0;
};

struct CurveMeta {
  std::string mode;
  int antennas = 0;
  int ues = 0;
  int max_streams = 0;
  std::string lk_profile;
};

struct GainCurve {
  CurveMeta meta;
  std::vector<GainPoint> points;  // strictly increasing Es/N0
};

// Accumulates per-frame symbol MSE; frames enter one at a time so the
// between-frame variance gives the standard error.
class GainEstimator {
 public:
  void add_frame(const std::vector<CVec>& estimates,
                 const std::vector<CVec>& truth) {
    if (estimates.size() != truth.size() || estimates.empty())
      throw std::invalid_argument("gain estimator: stream count mismatch");
    double err = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      if (estimates[i].size() != truth[i].size())
        throw std::invalid_argument("gain estimator: stream length mismatch");
      err += (estimates[i] - truth[i]).squaredNorm();
      count += estimates[i].size();
    }
    add_frame_mse(err / static_cast<double>(count), count);
  }

  void add_frame_mse(double frame_mse, long symbols) {
    if (symbols < 1)
      throw std::invalid_argument("gain estimator: empty frame");
    mse_sum_ += frame_mse;
    mse_sq_sum_ += frame_mse * frame_mse;
    symbols_ += symbols;
    frames_ += 1;
  }

  long frames() const { return frames_; }

  GainPoint finalize(const NoiseModel& noise, double asymptote_linear) const {
    if (frames_ < 1)
      throw std::invalid_argument("gain estimator: no frames");
    const double n = static_cast<double>(frames_);
    const double mse = mse_sum_ / n;
    GainPoint p;
    p.es_n0_linear = noise.es_n0_linear();
    p.es_n0_db = to_db(p.es_n0_linear);
    p.mse = mse;
    p.gain_linear = noise.variance / mse;
    p.gain_db = to_db(p.gain_linear);
    if (frames_ > 1) {
      const double var = std::max(0.0, (mse_sq_sum_ - n * mse * mse) / (n - 1.0));
      const double se_mse = std::sqrt(var / n);
      // d(10 log10 g)/d mse = -10 / (ln 10 * mse).
      p.gain_db_stderr = 10.0 / std::log(10.0) * se_mse / mse;
    }
    p.asymptote_db = to_db(asymptote_linear);
    p.trials = frames_;
    return p;
  }

 private:
  double mse_sum_ = 0.0;
  double mse_sq_sum_ = 0.0;
  long symbols_ = 0;
  long frames_ = 0;
};

// Convenience wrapper over GainEstimator for already-detected frames.
inline GainPoint measure_gain(const std::vector<std::vector<CVec>>& estimates,
                              const std::vector<std::vector<CVec>>& truth,
                              const NoiseModel& noise, double asymptote_linear) {
  if (estimates.size() != truth.size())
    throw std::invalid_argument("measure_gain: frame count mismatch");
  GainEstimator ge;
  for (std::size_t i = 0; i < estimates.size(); ++i)
    ge.add_frame(estimates[i], truth[i]);
  return ge.finalize(noise, asymptote_linear);
}

// Mean of tr{(G^H G)^-1} * (rows - cols) / cols over i.i.d. standard complex
// Gaussian G. The inverse-Wishart mean makes this 1 for rows > cols, which
// anchors the asymptote bookkeeping.
inline double wishart_trace_mc(int rows, int cols, int trials, std::uint64_t seed) {
  if (rows <= cols || cols < 1)
    throw std::invalid_argument("wishart_trace_mc: need rows > cols >= 1");
  if (trials < 1)
    throw std::invalid_argument("wishart_trace_mc: trials must be >= 1");
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    auto sub = rng::Substream::at(seed, {rng::kWishartDraw, static_cast<std::uint64_t>(t)});
    CMat g(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) g(r, c) = sub.next_cnormal(1.0);
    const CMat s = detail::gram(g);
    Eigen::LLT<CMat> llt(s);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("wishart_trace_mc: singular draw");
    acc += llt.solve(CMat::Identity(cols, cols)).trace().real();
  }
  const double mean_trace = acc / trials;
  return mean_trace * static_cast<double>(rows - cols) / cols;
}

struct CompositeTraceResult {
  double measured = 0.0;   // mean of tr{(B^H B)^-1} / L over channel draws
  double expected = 0.0;   // K_v / (ML - K_v)
  int trials = 0;
  bool low_delay_spread = false;  // fewer taps than streams per alias group

  double rel_error() const { return std::abs(measured - expected) / expected; }
};

// Checks how closely the composite Gram behaves like a K_v-column Wishart
// matrix with ML degrees of freedom. Rich enough delay spread (L_h >= L, and
// exactly when L divides L_h under a uniform profile) decorrelates the alias
// blocks; low delay spread is flagged because the match degrades there.
inline CompositeTraceResult composite_trace_check(int antennas, int ues,
                                                  int max_streams,
                                                  int streams_per_ue, int taps,
                                                  int trials, std::uint64_t seed,
                                                  int frame_len = 256) {
  const auto alloc = StreamAllocation::uniform(ues, streams_per_ue, max_streams);
  const int kv = alloc.virtual_users();
  const int ml = antennas * max_streams;
  if (kv >= ml)
    throw std::invalid_argument("composite_trace_check: K_v (" +
                                std::to_string(kv) + ") must be < ML (" +
                                std::to_string(ml) + ")");
  if (frame_len % max_streams != 0)
    throw std::invalid_argument("composite_trace_check: N not divisible by L");
  if (taps > frame_len)
    throw std::invalid_argument("composite_trace_check: L_h must be <= N");
  if (trials < 1)
    throw std::invalid_argument("composite_trace_check: trials must be >= 1");

  const auto pdp = PowerDelayProfile::uniform(taps);
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t key =
        rng::derive_key(seed, {rng::kAnalysisDraw, static_cast<std::uint64_t>(t)});
    const ChannelSet ch = draw_channels(antennas, ues, frame_len, pdp, key);
    const CMat b = assemble_B(ch, alloc, 0).model;
    const CMat s = detail::gram(b);
    Eigen::LLT<CMat> llt(s);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("composite_trace_check: singular draw");
    acc += llt.solve(CMat::Identity(kv, kv)).trace().real();
  }
  CompositeTraceResult out;
  out.measured = acc / trials / max_streams;
  out.expected = static_cast<double>(kv) / (ml - kv);
  out.trials = trials;
  out.low_delay_spread = taps < max_streams;
  return out;
}

struct ConditionReport {
  // Condition numbers of the composite Gram B^H B (K_v x K_v) and of the
  // single-bin Gram A^H A (K x K), as median and quartiles over draws.
  double composite_median = 0.0, composite_q1 = 0.0, composite_q3 = 0.0;
  double per_bin_median = 0.0, per_bin_q1 = 0.0, per_bin_q3 = 0.0;
  int trials = 0;
};

namespace detail {

inline double gram_condition(const CMat& gram_matrix) {
  Eigen::SelfAdjointEigenSolver<CMat> es(gram_matrix, Eigen::EigenvaluesOnly);
  const double lo = std::max(es.eigenvalues()(0), 2.3e-308);
  return es.eigenvalues()(es.eigenvalues().size() - 1) / lo;
}

inline void quartiles(std::vector<double>& v, double& q1, double& med, double& q3) {
  std::sort(v.begin(), v.end());
  auto at = [&](double fraction) {
    const double pos = fraction * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[hi];
  };
  q1 = at(0.25);
  med = at(0.5);
  q3 = at(0.75);
}

}  // namespace detail

// Compares conditioning of the alias-stacked composite Gram against a single
// bin's Gram over independent channel draws. The stacked system sees L times
// the observations per unknown, which shows up as better conditioning.
inline ConditionReport condition_study(int antennas, int ues, int max_streams,
                                       int streams_per_ue, int taps, int trials,
                                       std::uint64_t seed, int frame_len = 256) {
  const auto alloc = StreamAllocation::uniform(ues, streams_per_ue, max_streams);
  if (alloc.virtual_users() >= antennas * max_streams)
    throw std::invalid_argument("condition_study: K_v must be < ML");
  if (frame_len % max_streams != 0)
    throw std::invalid_argument("condition_study: N not divisible by L");
  if (trials < 1)
    throw std::invalid_argument("condition_study: trials must be >= 1");
  const auto pdp = PowerDelayProfile::uniform(taps);
  std::vector<double> cond_b, cond_a;
  cond_b.reserve(static_cast<std::size_t>(trials));
  cond_a.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t key =
        rng::derive_key(seed, {rng::kAnalysisDraw, static_cast<std::uint64_t>(t)});
    const ChannelSet ch = draw_channels(antennas, ues, frame_len, pdp, key);
    cond_b.push_back(detail::gram_condition(detail::gram(assemble_B(ch, alloc, 0).model)));
    cond_a.push_back(detail::gram_condition(detail::gram(ch.bin_matrix(0))));
  }
  ConditionReport rep;
  rep.trials = trials;
  detail::quartiles(cond_b, rep.composite_q1, rep.composite_median, rep.composite_q3);
  detail::quartiles(cond_a, rep.per_bin_q1, rep.per_bin_median, rep.per_bin_q3);
  return rep;
}

// DFT-precoded OFDM reference: users are split into L groups of K/L, each
// group owns N/L consecutive subcarriers, and every subcarrier is solved as
// an M x K/L MMSE problem with the same unbiasing options.
struct OfdmScenario {
  int antennas = 0;
  int ues = 0;
  int groups = 0;     // plays the role of L: group count and bandwidth divisor
  int frame_len = 0;
  PowerDelayProfile pdp;
  Constellation constellation = Constellation::qpsk;
  UnbiasPolicy unbias = UnbiasPolicy::per_stream;
};

inline void validate_ofdm(const OfdmScenario& sc) {
  if (sc.antennas < 1 || sc.ues < 1 || sc.groups < 1 || sc.frame_len < 1)
    throw std::invalid_argument("ofdm baseline: M, K, L, N must be >= 1");
  if (sc.ues % sc.groups != 0)
    throw std::invalid_argument("ofdm baseline: K (" + std::to_string(sc.ues) +
                                ") not divisible by L (" +
                                std::to_string(sc.groups) + ")");
  if (sc.frame_len % sc.groups != 0)
    throw std::invalid_argument("ofdm baseline: N not divisible by L");
  if (sc.ues / sc.groups >= sc.antennas)
    throw std::invalid_argument("ofdm baseline: K/L must be < M");
  if (sc.pdp.taps() > sc.frame_len)
    throw std::invalid_argument("ofdm baseline: L_h must be <= N");
}

// Mean square symbol error of one OFDM frame at the given noise level.
inline double ofdm_trial_mse(const OfdmScenario& sc, double noise_variance,
                             std::uint64_t trial_key) {
  validate_ofdm(sc);
  const int per = sc.frame_len / sc.groups;  // symbols per user, bins per group
  const int kg = sc.ues / sc.groups;         // users per group
  const ChannelSet ch =
      draw_channels(sc.antennas, sc.ues, sc.frame_len, sc.pdp, trial_key);

  const int bps = bits_per_symbol(sc.constellation);
  std::vector<CVec> truth(static_cast<std::size_t>(sc.ues));
  CMat precoded(sc.ues, per);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(bps) * per);
  for (int ue = 0; ue < sc.ues; ++ue) {
    auto bsub = rng::Substream::at(trial_key, {rng::kSymbolBits, static_cast<std::uint64_t>(ue)});
    for (auto& b : bits) b = static_cast<std::uint8_t>(bsub.next_bit());
    truth[static_cast<std::size_t>(ue)] = map_symbols(bits, per, sc.constellation);
    precoded.row(ue) = fft::fft_unitary(truth[static_cast<std::size_t>(ue)]).transpose();
  }

  std::vector<rng::Substream> noise_subs;
  noise_subs.reserve(static_cast<std::size_t>(sc.antennas));
  for (int m = 0; m < sc.antennas; ++m)
    noise_subs.push_back(rng::Substream::at(trial_key, {rng::kNoiseDraw, static_cast<std::uint64_t>(m)}));

  DetectorConfig dcfg;
  dcfg.noise_variance = noise_variance;
  dcfg.unbias = sc.unbias;
  dcfg.mode = DetectorMode::multi_stream;

  CMat estimates(sc.ues, per);
  CMat a(sc.antennas, kg);
  CVec xg(kg), ybin(sc.antennas);
  for (int bin = 0; bin < sc.frame_len; ++bin) {
    const int g = bin / per;
    const int i = bin % per;
    for (int u = 0; u < kg; ++u) {
      const int ue = g * kg + u;
      xg(u) = precoded(ue, i);
      for (int m = 0; m < sc.antennas; ++m) a(m, u) = ch.lambda(m, ue, bin);
    }
    ybin = a * xg;
    if (noise_variance > 0.0)
      for (int m = 0; m < sc.antennas; ++m)
        ybin(m) += noise_subs[static_cast<std::size_t>(m)].next_cnormal(noise_variance);
    const BinDetection det = mmse_detect_multi(ybin, a, dcfg);
    for (int u = 0; u < kg; ++u) estimates(g * kg + u, i) = det.estimate(u);
  }

  double err = 0.0;
  for (int ue = 0; ue < sc.ues; ++ue)
    err += (fft::ifft_unitary(estimates.row(ue).transpose()) -
            truth[static_cast<std::size_t>(ue)])
               .squaredNorm();
  return err / (static_cast<double>(sc.ues) * per);
}

inline GainCurve ofdm_baseline_gain(const OfdmScenario& sc,
                                    const std::vector<double>& sweep_db,
                                    int trials, std::uint64_t seed) {
  validate_ofdm(sc);
  if (sweep_db.empty())
    throw std::invalid_argument("ofdm baseline: es_n0_db sweep must not be empty");
  if (trials < 1)
    throw std::invalid_argument("ofdm baseline: trials must be >= 1");
  const double asym = asymptotic_gain_single(sc.antennas, sc.ues, sc.groups);
  GainCurve curve;
  curve.meta = {"ofdm-baseline", sc.antennas, sc.ues, sc.groups,
                std::to_string(sc.ues) + "*1"};
  const long symbols = static_cast<long>(sc.ues) * (sc.frame_len / sc.groups);
  for (std::size_t pt = 0; pt < sweep_db.size(); ++pt) {
    const NoiseModel noise = NoiseModel::from_es_n0_db(sweep_db[pt]);
    GainEstimator ge;
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t key = rng::derive_key(
          seed, {rng::kTrialKey, static_cast<std::uint64_t>(pt), static_cast<std::uint64_t>(t)});
      ge.add_frame_mse(ofdm_trial_mse(sc, noise.variance, key), symbols);
    }
    curve.points.push_back(ge.finalize(noise, asym));
  }
  return curve;
}

}  // namespace cpscm
