// SPDX-License-Identifier: Apache-2.0
//
// Frequency-domain MRC-MMSE detection. After despreading, the N bins split
// into N/L groups of L aliased bins; stacking the M antenna observations of
// one group gives an ML-dimensional measurement of the K (or K_v) symbols
// that share it. Each group is solved independently:
//
//   single-stream:  shat = sqrt(L) (A^H A + L var I)^-1 A^H ybar
//   multi-stream:   shat =         (B^H B +   var I)^-1 B^H ybar
//
// where B already folds in the 1/sqrt(L) expander gain and the per-stream
// shift phase ramps. The regularized solution is biased toward zero; the
// diagonal of D = (S + c I)^-1 S says by how much, and UnbiasPolicy chooses
// whether to divide it back out per stream, by its mean, or not at all.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cpscm/channel.hpp"
#include "cpscm/common.hpp"
#include "cpscm/fft.hpp"
#include "cpscm/waveform.hpp"

namespace cpscm {

enum class UnbiasPolicy { per_stream, scalar_alpha, none };
enum class DetectorMode { single_stream, multi_stream };

struct DetectorConfig {
  double noise_variance = 0.0;
  UnbiasPolicy unbias = UnbiasPolicy::per_stream;
  DetectorMode mode = DetectorMode::multi_stream;
  // Relative singular value cutoff for the zero-noise pseudoinverse path.
  double sv_cutoff = 1e-12;
};

// Per-group detector output. bias_diagonal holds diag(D) before unbiasing;
// residual is ||ybar - model * raw|| for the group.
struct BinDetection {
  CVec estimate;
  RVec bias_diagonal;
  double residual = 0.0;
};

// Stacked antenna observations of one alias group together with its model
// matrix, ready for the per-group solve.
struct CompositeReceived {
  int group = 0;
  CVec stacked;  // ML entries: antennas 0..M-1 of alias 0, then alias 1, ...
};

struct CompositeChannelMatrix {
  int group = 0;
  CMat model;  // ML x K (single) or ML x K_v (multi)
};

// Undoes the spreader: with unit-magnitude eigenvalues the inverse is the
// conjugate diagonal. Returns the despread unitary spectrum of rx.
inline CVec fd_despread(const CVec& rx, const SpreadingOperator& spread) {
  if (rx.size() != spread.base.size())
    throw std::invalid_argument("fd_despread: length mismatch");
  return spread.fd_diagonal.conjugate().cwiseProduct(fft::fft_unitary(rx));
}

// The L bins that alias onto `group` after N/L-fold decimation.
inline std::vector<int> alias_bins(int group, int frame_len, int max_streams) {
  if (max_streams < 1 || frame_len % max_streams != 0)
    throw std::invalid_argument("alias_bins: N not divisible by L");
  const int groups = frame_len / max_streams;
  if (group < 0 || group >= groups)
    throw std::invalid_argument("alias_bins: group out of range");
  std::vector<int> bins(static_cast<std::size_t>(max_streams));
  for (int r = 0; r < max_streams; ++r) bins[static_cast<std::size_t>(r)] = group + r * groups;
  return bins;
}

// Stacks the M despread spectra on one alias group, antenna-major within each
// alias block, blocks in ascending alias order.
inline CompositeReceived assemble_composite(const std::vector<CVec>& despread,
                                            int group, int max_streams) {
  if (despread.empty())
    throw std::invalid_argument("assemble_composite: no antennas");
  const int m = static_cast<int>(despread.size());
  const int n = static_cast<int>(despread.front().size());
  for (const auto& v : despread)
    if (static_cast<int>(v.size()) != n)
      throw std::invalid_argument("assemble_composite: ragged antenna spectra");
  const auto bins = alias_bins(group, n, max_streams);
  CompositeReceived out;
  out.group = group;
  out.stacked.resize(static_cast<Eigen::Index>(m) * max_streams);
  for (int r = 0; r < max_streams; ++r)
    for (int mi = 0; mi < m; ++mi)
      out.stacked(r * m + mi) = despread[static_cast<std::size_t>(mi)](bins[static_cast<std::size_t>(r)]);
  return out;
}

// ML x K single-stream model: alias block r holds the bin responses of bin
// group + r N/L for all users.
inline CompositeChannelMatrix assemble_A(const ChannelSet& ch, int group,
                                         int max_streams) {
  const int n = ch.frame_len();
  const int m = ch.antennas();
  const int k = ch.ues();
  const auto bins = alias_bins(group, n, max_streams);
  CompositeChannelMatrix out;
  out.group = group;
  out.model.resize(static_cast<Eigen::Index>(m) * max_streams, k);
  for (int r = 0; r < max_streams; ++r) {
    const int bin = bins[static_cast<std::size_t>(r)];
    for (int kk = 0; kk < k; ++kk)
      for (int mi = 0; mi < m; ++mi)
        out.model(r * m + mi, kk) = ch.lambda(mi, kk, bin);
  }
  return out;
}

// ML x K_v multi-stream model. Column (ue, stream) carries that user's bin
// responses times the stream's shift phase ramp e^{-j 2 pi shift bin / N},
// scaled by 1/sqrt(L). Columns are user-major in allocation order.
inline CompositeChannelMatrix assemble_B(const ChannelSet& ch,
                                         const StreamAllocation& alloc,
                                         int group) {
  alloc.validate();
  if (alloc.ue_count() != ch.ues())
    throw std::invalid_argument("assemble_B: allocation has " +
                                std::to_string(alloc.ue_count()) +
                                " users, channel set has " +
                                std::to_string(ch.ues()));
  const int n = ch.frame_len();
  const int m = ch.antennas();
  const int l = alloc.max_streams;
  const int kv = alloc.virtual_users();
  const auto bins = alias_bins(group, n, l);
  const double inv_sqrt_l = 1.0 / std::sqrt(static_cast<double>(l));

  CompositeChannelMatrix out;
  out.group = group;
  out.model.resize(static_cast<Eigen::Index>(m) * l, kv);
  for (int r = 0; r < l; ++r) {
    const int bin = bins[static_cast<std::size_t>(r)];
    int col = 0;
    for (int ue = 0; ue < alloc.ue_count(); ++ue) {
      for (int s = 0; s < alloc.streams(ue); ++s, ++col) {
        const int shift = alloc.shifts[static_cast<std::size_t>(ue)][static_cast<std::size_t>(s)];
        const Cplx w = inv_sqrt_l *
                       unit_phase(static_cast<long long>(shift) * bin, n);
        for (int mi = 0; mi < m; ++mi)
          out.model(r * m + mi, col) = w * ch.lambda(mi, ue, bin);
      }
    }
  }
  return out;
}

namespace detail {

// G^H G through a Hermitian rank update; returns the full matrix.
inline CMat gram(const CMat& g) {
  CMat s = CMat::Zero(g.cols(), g.cols());
  s.selfadjointView<Eigen::Lower>().rankUpdate(g.adjoint());
  return s.selfadjointView<Eigen::Lower>();
}

struct RawSolve {
  CVec raw;
  RVec bias_diagonal;
};

// Solves (S + reg I) raw = prescale * matched via Cholesky and extracts
// diag(D) = 1 - reg diag((S + reg I)^-1) without forming the full inverse.
inline RawSolve solve_regularized(CMat gram_matrix, double reg,
                                  const CVec& matched, double prescale) {
  const Eigen::Index k = gram_matrix.rows();
  gram_matrix.diagonal().array() += reg;
  Eigen::LLT<CMat> llt(gram_matrix);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("mmse: normal matrix factorization failed");
  RawSolve out;
  out.raw = prescale * llt.solve(matched);
  const CMat linv = llt.matrixL().solve(CMat::Identity(k, k));
  out.bias_diagonal =
      RVec::Ones(k) - reg * linv.colwise().squaredNorm().transpose();
  return out;
}

// Zero-noise limit: rank-revealing pseudoinverse of the model matrix itself.
inline RawSolve solve_pinv(const CMat& model, const CVec& stacked,
                           double rel_cutoff) {
  Eigen::BDCSVD<CMat> svd(model, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(rel_cutoff);
  if (svd.rank() < model.cols())
    throw std::runtime_error(
        "mmse: zero-noise detection is degenerate, numerical rank " +
        std::to_string(svd.rank()) + " < " + std::to_string(model.cols()));
  RawSolve out;
  out.raw = svd.solve(stacked);
  out.bias_diagonal = RVec::Ones(model.cols());
  return out;
}

inline CVec apply_unbias(const CVec& raw, const RVec& d, UnbiasPolicy policy) {
  switch (policy) {
    case UnbiasPolicy::none:
      return raw;
    case UnbiasPolicy::scalar_alpha: {
      const double alpha = std::max(d.mean(), 1e-12);
      return raw / alpha;
    }
    case UnbiasPolicy::per_stream:
    default: {
      CVec out(raw.size());
      for (Eigen::Index i = 0; i < raw.size(); ++i)
        out(i) = raw(i) / std::max(d(i), 1e-12);
      return out;
    }
  }
}

}  // namespace detail

// Single-stream per-group solve. abar is the ML x K stacked bin-response
// matrix; the expander gain shows up as the sqrt(L) prescale and the L-fold
// noise regularizer.
inline BinDetection mmse_detect_single(const CVec& ybar, const CMat& abar,
                                       int max_streams,
                                       const DetectorConfig& cfg) {
  const Eigen::Index rows = abar.rows();
  const Eigen::Index k = abar.cols();
  if (ybar.size() != rows)
    throw std::invalid_argument("mmse_detect_single: ybar length != rows of A");
  if (max_streams < 1 || rows % max_streams != 0)
    throw std::invalid_argument("mmse_detect_single: rows not divisible by L");
  if (k >= rows)
    throw std::invalid_argument("mmse_detect_single: K (" + std::to_string(k) +
                                ") must be < ML (" + std::to_string(rows) + ")");
  if (cfg.noise_variance < 0.0)
    throw std::invalid_argument("mmse_detect_single: negative noise variance");

  const double sqrt_l = std::sqrt(static_cast<double>(max_streams));
  detail::RawSolve rs =
      cfg.noise_variance == 0.0
          ? detail::solve_pinv(abar / sqrt_l, ybar, cfg.sv_cutoff)
          : detail::solve_regularized(detail::gram(abar),
                                      max_streams * cfg.noise_variance,
                                      abar.adjoint() * ybar, sqrt_l);
  BinDetection out;
  out.residual = (ybar - abar * (rs.raw / sqrt_l)).norm();
  out.estimate = detail::apply_unbias(rs.raw, rs.bias_diagonal, cfg.unbias);
  out.bias_diagonal = std::move(rs.bias_diagonal);
  return out;
}

// Multi-stream per-group solve against the composite model B.
inline BinDetection mmse_detect_multi(const CVec& ybar, const CMat& bbar,
                                      const DetectorConfig& cfg) {
  const Eigen::Index rows = bbar.rows();
  const Eigen::Index kv = bbar.cols();
  if (ybar.size() != rows)
    throw std::invalid_argument("mmse_detect_multi: ybar length != rows of B");
  if (kv >= rows)
    throw std::invalid_argument("mmse_detect_multi: K_v (" + std::to_string(kv) +
                                ") must be < ML (" + std::to_string(rows) + ")");
  if (cfg.noise_variance < 0.0)
    throw std::invalid_argument("mmse_detect_multi: negative noise variance");

  detail::RawSolve rs =
      cfg.noise_variance == 0.0
          ? detail::solve_pinv(bbar, ybar, cfg.sv_cutoff)
          : detail::solve_regularized(detail::gram(bbar), cfg.noise_variance,
                                      bbar.adjoint() * ybar, 1.0);
  BinDetection out;
  out.residual = (ybar - bbar * rs.raw).norm();
  out.estimate = detail::apply_unbias(rs.raw, rs.bias_diagonal, cfg.unbias);
  out.bias_diagonal = std::move(rs.bias_diagonal);
  return out;
}

// Recovered streams in allocation order plus per-group diagnostics.
struct DetectedFrame {
  std::vector<CVec> symbols;                      // K_v vectors of N/L symbols
  std::vector<std::pair<int, int>> stream_index;  // column -> (ue, stream)
  CMat bias_diagonals;                            // K_v x N/L
  RVec residuals;                                 // N/L
};

// Brings per-group frequency estimates (column per group) back to time-domain
// symbol blocks with the unitary inverse DFT.
inline DetectedFrame demap_to_time(const CMat& fd_estimates,
                                   const StreamAllocation& alloc) {
  alloc.validate();
  if (fd_estimates.rows() != alloc.virtual_users())
    throw std::invalid_argument("demap_to_time: row count != K_v");
  if (fd_estimates.cols() < 1)
    throw std::invalid_argument("demap_to_time: no groups");
  DetectedFrame out;
  const int kv = static_cast<int>(fd_estimates.rows());
  out.symbols.reserve(static_cast<std::size_t>(kv));
  out.stream_index.reserve(static_cast<std::size_t>(kv));
  for (int j = 0; j < kv; ++j) {
    out.symbols.push_back(fft::ifft_unitary(fd_estimates.row(j).transpose()));
    out.stream_index.push_back(alloc.stream_at(j));
  }
  return out;
}

// Full receive pipeline: despread every antenna, solve each alias group with
// the configured detector, and demap to time-domain symbol estimates.
inline DetectedFrame detect_frame(const std::vector<CVec>& rx,
                                  const SpreadingOperator& spread,
                                  const ChannelSet& ch,
                                  const StreamAllocation& alloc,
                                  const DetectorConfig& cfg) {
  alloc.validate();
  if (static_cast<int>(rx.size()) != ch.antennas())
    throw std::invalid_argument("detect_frame: rx count != antennas");
  const int n = ch.frame_len();
  if (spread.size() != n)
    throw std::invalid_argument("detect_frame: spreader length != N");
  for (const auto& v : rx)
    if (static_cast<int>(v.size()) != n)
      throw std::invalid_argument("detect_frame: rx length != N");
  const int l = alloc.max_streams;
  if (n % l != 0)
    throw std::invalid_argument("detect_frame: N not divisible by L");
  if (alloc.ue_count() != ch.ues())
    throw std::invalid_argument("detect_frame: allocation users != channel users");
  if (cfg.mode == DetectorMode::single_stream) {
    for (int ue = 0; ue < alloc.ue_count(); ++ue)
      if (alloc.streams(ue) != 1)
        throw std::invalid_argument(
            "detect_frame: single_stream mode requires L_k = 1 for every user");
  }

  std::vector<CVec> despread;
  despread.reserve(rx.size());
  for (const auto& v : rx) despread.push_back(fd_despread(v, spread));

  const int groups = n / l;
  const int kv = alloc.virtual_users();
  CMat fd_estimates(kv, groups);
  CMat bias(kv, groups);
  RVec residuals(groups);
  for (int g = 0; g < groups; ++g) {
    const CompositeReceived ybar = assemble_composite(despread, g, l);
    BinDetection det;
    if (cfg.mode == DetectorMode::single_stream) {
      det = mmse_detect_single(ybar.stacked, assemble_A(ch, g, l).model, l, cfg);
    } else {
      det = mmse_detect_multi(ybar.stacked, assemble_B(ch, alloc, g).model, cfg);
    }
    fd_estimates.col(g) = det.estimate;
    bias.col(g) = det.bias_diagonal;
    residuals(g) = det.residual;
  }

  DetectedFrame out = demap_to_time(fd_estimates, alloc);
  out.bias_diagonals = std::move(bias);
  out.residuals = std::move(residuals);
  return out;
}

}  // namespace cpscm
