// SPDX-License-Identifier: Apache-2.0
//
// Block-fading multipath channels between every (antenna, user) pair, drawn
// independently per pair from a shared power-delay profile. Within a frame
// the channel is static; with a long enough cyclic prefix each pair acts as a
// circulant operator whose eigenvalues are the N-point DFT of its taps. Those
// per-bin responses are computed once per draw and cached.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpscm/common.hpp"
#include "cpscm/fft.hpp"
#include "cpscm/rng.hpp"
#include "cpscm/waveform.hpp"

namespace cpscm {

// Tap variances, normalized to sum to one so E|h|^2 = 1 per pair and the
// per-bin responses have unit average power.
struct PowerDelayProfile {
  RVec tap_variances;

  int taps() const { return static_cast<int>(tap_variances.size()); }

  static PowerDelayProfile uniform(int taps) {
    if (taps < 1)
      throw std::invalid_argument("pdp: taps must be >= 1");
    PowerDelayProfile p;
    p.tap_variances = RVec::Constant(taps, 1.0 / taps);
    return p;
  }

  // w_t proportional to exp(-t / decay), t = 0 .. taps-1.
  static PowerDelayProfile exponential(int taps, double decay) {
    if (taps < 1)
      throw std::invalid_argument("pdp: taps must be >= 1");
    if (!(decay > 0.0))
      throw std::invalid_argument("pdp: decay must be > 0");
    PowerDelayProfile p;
    p.tap_variances = RVec(taps);
    for (int t = 0; t < taps; ++t)
      p.tap_variances(t) = std::exp(-static_cast<double>(t) / decay);
    p.tap_variances /= p.tap_variances.sum();
    return p;
  }
};

// Taps for a single (antenna, user) pair.
struct ChannelRealization {
  int antenna = 0;
  int ue = 0;
  CVec taps;
};

// All M*K channels of one coherence block plus their cached bin responses.
// Pairs are indexed cell = ue * M + antenna; `freq()` keeps one column per
// cell so a fixed user's antennas occupy consecutive columns.
class ChannelSet {
 public:
  ChannelSet(int antennas, int ues, int frame_len, CMat taps)
      : antennas_(antennas), ues_(ues), frame_len_(frame_len), taps_(std::move(taps)) {
    if (antennas_ < 1 || ues_ < 1)
      throw std::invalid_argument("channel set: M and K must be >= 1");
    if (taps_.cols() != static_cast<Eigen::Index>(antennas_) * ues_)
      throw std::invalid_argument("channel set: tap matrix must have M*K columns");
    if (taps_.rows() < 1 || taps_.rows() > frame_len_)
      throw std::invalid_argument("channel set: L_h must be in [1, N]");
    freq_.resize(frame_len_, taps_.cols());
    CVec padded = CVec::Zero(frame_len_);
    for (Eigen::Index c = 0; c < taps_.cols(); ++c) {
      padded.setZero();
      padded.head(taps_.rows()) = taps_.col(c);
      freq_.col(c) = fft::fft(padded);
    }
  }

  int antennas() const { return antennas_; }
  int ues() const { return ues_; }
  int frame_len() const { return frame_len_; }
  int memory() const { return static_cast<int>(taps_.rows()); }

  const CMat& taps() const { return taps_; }
  const CMat& freq() const { return freq_; }

  int cell(int antenna, int ue) const { return ue * antennas_ + antenna; }

  // Bin response of one pair.
  Cplx lambda(int antenna, int ue, int bin) const {
    return freq_(bin, cell(antenna, ue));
  }

  ChannelRealization realization(int antenna, int ue) const {
    if (antenna < 0 || antenna >= antennas_ || ue < 0 || ue >= ues_)
      throw std::invalid_argument("channel set: pair index out of range");
    return {antenna, ue, taps_.col(cell(antenna, ue))};
  }

  // M x K matrix of bin responses, antennas down the rows.
  CMat bin_matrix(int bin) const {
    if (bin < 0 || bin >= frame_len_)
      throw std::invalid_argument("channel set: bin out of range");
    CMat a(antennas_, ues_);
    for (int k = 0; k < ues_; ++k)
      for (int m = 0; m < antennas_; ++m) a(m, k) = freq_(bin, cell(m, k));
    return a;
  }

 private:
  int antennas_;
  int ues_;
  int frame_len_;
  CMat taps_;
  CMat freq_;
};

// Independent Rayleigh taps for every pair. Each pair draws from its own
// substream keyed by the cell index, so the set is reproducible regardless of
// evaluation order.
inline ChannelSet draw_channels(int antennas, int ues, int frame_len,
                                const PowerDelayProfile& pdp, std::uint64_t seed) {
  if (antennas < 1 || ues < 1)
    throw std::invalid_argument("draw_channels: M and K must be >= 1");
  if (pdp.taps() > frame_len)
    throw std::invalid_argument("draw_channels: L_h must be <= N");
  const int cells = antennas * ues;
  CMat taps(pdp.taps(), cells);
  for (int c = 0; c < cells; ++c) {
    auto sub = rng::Substream::at(seed, {rng::kChannelDraw, static_cast<std::uint64_t>(c)});
    for (int t = 0; t < pdp.taps(); ++t)
      taps(t, c) = sub.next_cnormal(pdp.tap_variances(t));
  }
  return ChannelSet(antennas, ues, frame_len, std::move(taps));
}

enum class PropagationPath {
  frequency_domain,  // exact circular convolution via cached bin responses
  cp_linear,         // add CP, linearly convolve, strip CP (reference path)
};

// Superimposes every user's frame at each antenna. The cp_linear path checks
// that each frame's prefix covers the channel memory; it is O(M K N L_h) and
// meant for validation at small sizes.
inline std::vector<CVec> propagate(const std::vector<UplinkFrame>& frames,
                                   const ChannelSet& ch,
                                   PropagationPath path = PropagationPath::frequency_domain) {
  if (frames.empty()) throw std::invalid_argument("propagate: no frames");
  const int n = ch.frame_len();
  const int m = ch.antennas();
  for (const auto& f : frames) {
    if (static_cast<int>(f.payload.size()) != n)
      throw std::invalid_argument("propagate: frame length != N");
    if (f.ue < 0 || f.ue >= ch.ues())
      throw std::invalid_argument("propagate: UE " + std::to_string(f.ue) +
                                  " has no channel");
  }

  std::vector<CVec> rx(static_cast<std::size_t>(m));
  if (path == PropagationPath::frequency_domain) {
    std::vector<CVec> spectra;
    spectra.reserve(frames.size());
    for (const auto& f : frames) spectra.push_back(fft::fft(f.payload));
    for (int mi = 0; mi < m; ++mi) {
      CVec acc = CVec::Zero(n);
      for (std::size_t fi = 0; fi < frames.size(); ++fi)
        acc += ch.freq().col(ch.cell(mi, frames[fi].ue)).cwiseProduct(spectra[fi]);
      rx[static_cast<std::size_t>(mi)] = fft::ifft(acc);
    }
    return rx;
  }

  const int lh = ch.memory();
  for (const auto& f : frames)
    if (f.cp_len < lh - 1)
      throw std::invalid_argument(
          "propagate: cyclic prefix shorter than channel memory (N_cp=" +
          std::to_string(f.cp_len) + ", L_h=" + std::to_string(lh) + ")");
  for (int mi = 0; mi < m; ++mi) {
    CVec y = CVec::Zero(n);
    for (const auto& f : frames) {
      const CVec tx = add_cp(f.payload, f.cp_len);
      const auto h = ch.taps().col(ch.cell(mi, f.ue));
      for (int i = 0; i < n; ++i) {
        const int at = f.cp_len + i;
        Cplx acc = 0.0;
        for (int t = 0; t < lh && t <= at; ++t) acc += h(t) * tx(at - t);
        y(i) += acc;
      }
    }
    rx[static_cast<std::size_t>(mi)] = y;
  }
  return rx;
}

// Complex AWGN level expressed as symbol energy over noise density; symbols
// are unit energy, so Es/N0 = 1 / variance.
struct NoiseModel {
  double variance = 0.0;

  double es_n0_linear() const {
    if (variance <= 0.0)
      throw std::domain_error("noise model: Es/N0 undefined at zero variance");
    return 1.0 / variance;
  }

  double es_n0_db() const { return to_db(es_n0_linear()); }

  static NoiseModel from_es_n0_db(double db) { return {1.0 / from_db(db)}; }
};

inline CVec add_noise(const CVec& rx, const NoiseModel& noise, rng::Substream& sub) {
  if (noise.variance < 0.0)
    throw std::invalid_argument("add_noise: variance must be >= 0");
  if (noise.variance == 0.0) return rx;
  CVec out(rx.size());
  for (Eigen::Index i = 0; i < rx.size(); ++i)
    out(i) = rx(i) + sub.next_cnormal(noise.variance);
  return out;
}

}  // namespace cpscm
