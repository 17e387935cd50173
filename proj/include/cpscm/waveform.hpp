// SPDX-License-Identifier: Apache-2.0
//
// Uplink transmit chain: symbol mapping, interleaved stream expansion with
// cyclic shifts, circulant spreading, and cyclic-prefix framing.
//
// Conventions used throughout the library:
//  * A circulant operator is represented by its first column; its eigenvalues
//    are the unnormalized DFT of that column (`fd_diagonal` below, and the
//    per-bin channel responses in channel.hpp).
//  * Signal vectors move between domains with the unitary DFT pair from
//    fft.hpp, so symbol energy and noise variance are domain independent.
#pragma once

#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cpscm/common.hpp"
#include "cpscm/fft.hpp"

namespace cpscm {

enum class Constellation { qpsk, qam16 };

inline int bits_per_symbol(Constellation c) {
  return c == Constellation::qpsk ? 2 : 4;
}

// Gray-mapped unit-energy symbols. QPSK: bit pair (b0, b1) selects the sign of
// the I and Q rails, 00 -> (+1+j)/sqrt(2), 11 -> (-1-j)/sqrt(2). 16-QAM uses
// the Gray level map 00,01,11,10 -> -3,-1,+1,+3 per rail, scaled by sqrt(10).
inline CVec map_symbols(const std::vector<std::uint8_t>& bits, int count,
                        Constellation c = Constellation::qpsk) {
  const int bps = bits_per_symbol(c);
  if (count < 1) throw std::invalid_argument("map_symbols: count must be >= 1");
  if (static_cast<int>(bits.size()) != bps * count)
    throw std::invalid_argument("map_symbols: expected " +
                                std::to_string(bps * count) + " bits, got " +
                                std::to_string(bits.size()));
  for (std::uint8_t b : bits)
    if (b > 1) throw std::invalid_argument("map_symbols: bits must be 0 or 1");

  CVec out(count);
  if (c == Constellation::qpsk) {
    const double a = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < count; ++i) {
      const double re = bits[2 * i] ? -a : a;
      const double im = bits[2 * i + 1] ? -a : a;
      out(i) = Cplx(re, im);
    }
  } else {
    const double a = 1.0 / std::sqrt(10.0);
    auto level = [](std::uint8_t hi, std::uint8_t lo) {
      // Gray order over {00, 01, 11, 10}.
      if (!hi) return lo ? -1.0 : -3.0;
      return lo ? 1.0 : 3.0;
    };
    for (int i = 0; i < count; ++i) {
      const double re = level(bits[4 * i], bits[4 * i + 1]);
      const double im = level(bits[4 * i + 2], bits[4 * i + 3]);
      out(i) = a * Cplx(re, im);
    }
  }
  return out;
}

// Nearest-symbol decisions, inverse of map_symbols.
inline std::vector<std::uint8_t> hard_demap(const CVec& symbols,
                                            Constellation c = Constellation::qpsk) {
  std::vector<std::uint8_t> bits;
  bits.reserve(static_cast<std::size_t>(symbols.size()) * bits_per_symbol(c));
  if (c == Constellation::qpsk) {
    for (Eigen::Index i = 0; i < symbols.size(); ++i) {
      bits.push_back(symbols(i).real() < 0.0 ? 1 : 0);
      bits.push_back(symbols(i).imag() < 0.0 ? 1 : 0);
    }
  } else {
    const double t = 2.0 / std::sqrt(10.0);
    auto rail = [&](double v, std::vector<std::uint8_t>& b) {
      b.push_back(v < 0.0 ? 0 : 1);
      b.push_back(std::abs(v) < t ? 1 : 0);
    };
    for (Eigen::Index i = 0; i < symbols.size(); ++i) {
      rail(symbols(i).real(), bits);
      rail(symbols(i).imag(), bits);
    }
  }
  return bits;
}

// Which cyclic shift each stream of each user transmits on. max_streams is
// the interleaving factor L; a user may carry between 1 and L streams and all
// of its shifts must be distinct values in [0, L).
struct StreamAllocation {
  int max_streams = 1;
  std::vector<std::vector<int>> shifts;  // shifts[ue][stream]

  int ue_count() const { return static_cast<int>(shifts.size()); }
  int streams(int ue) const { return static_cast<int>(shifts.at(ue).size()); }

  int virtual_users() const {
    int kv = 0;
    for (const auto& s : shifts) kv += static_cast<int>(s.size());
    return kv;
  }

  // First column of this user's block in the composite model matrix.
  int column_offset(int ue) const {
    int off = 0;
    for (int k = 0; k < ue; ++k) off += streams(k);
    return off;
  }

  // Maps a composite column back to (ue, stream within ue).
  std::pair<int, int> stream_at(int column) const {
    int col = column;
    for (int k = 0; k < ue_count(); ++k) {
      if (col < streams(k)) return {k, col};
      col -= streams(k);
    }
    throw std::invalid_argument("stream_at: column out of range");
  }

  void validate() const {
    if (max_streams < 1)
      throw std::invalid_argument("allocation: L must be >= 1");
    if (shifts.empty()) throw std::invalid_argument("allocation: no users");
    for (int k = 0; k < ue_count(); ++k) {
      if (streams(k) < 1 || streams(k) > max_streams)
        throw std::invalid_argument("allocation: UE " + std::to_string(k) +
                                    " has L_k=" + std::to_string(streams(k)) +
                                    ", must be in [1, " +
                                    std::to_string(max_streams) + "]");
      std::set<int> seen;
      for (int s : shifts[k]) {
        if (s < 0 || s >= max_streams)
          throw std::invalid_argument("allocation: UE " + std::to_string(k) +
                                      " shift " + std::to_string(s) +
                                      " out of [0, " +
                                      std::to_string(max_streams) + ")");
        if (!seen.insert(s).second)
          throw std::invalid_argument("allocation: UE " + std::to_string(k) +
                                      " has duplicate shift " +
                                      std::to_string(s));
      }
    }
  }

  // Every user carries `streams_per_ue` streams on shifts 0, 1, ...
  static StreamAllocation uniform(int ues, int streams_per_ue, int max_streams) {
    if (ues < 1) throw std::invalid_argument("allocation: K must be >= 1");
    StreamAllocation a;
    a.max_streams = max_streams;
    a.shifts.assign(static_cast<std::size_t>(ues), {});
    for (auto& s : a.shifts) {
      s.resize(static_cast<std::size_t>(streams_per_ue));
      std::iota(s.begin(), s.end(), 0);
    }
    a.validate();
    return a;
  }

  static StreamAllocation single_stream(int ues, int max_streams) {
    return uniform(ues, 1, max_streams);
  }
};

// One stream's payload before expansion: N/L data symbols.
struct SymbolStream {
  int ue = 0;
  int stream = 0;  // index within the user's allocation
  CVec symbols;
};

// Circulant spreader. `base` is the first column (the waveform every symbol
// rides on); `fd_diagonal` holds its eigenvalues, all of unit magnitude.
struct SpreadingOperator {
  CVec base;
  CVec fd_diagonal;

  int size() const { return static_cast<int>(base.size()); }
};

// Zadoff-Chu spreading of the given root, scaled to a unitary operator.
// root == 0 selects the identity (no spreading), handy for tests. The
// quadratic phase index is reduced mod 2N before entering the exponential so
// large frames keep full precision.
inline SpreadingOperator build_spreading(int frame_len, int root) {
  if (frame_len < 1)
    throw std::invalid_argument("build_spreading: N must be >= 1");
  if (root < 0) throw std::invalid_argument("build_spreading: root must be >= 0");
  SpreadingOperator op;
  if (root == 0) {
    op.base = CVec::Zero(frame_len);
    op.base(0) = 1.0;
    op.fd_diagonal = CVec::Ones(frame_len);
    return op;
  }
  if (std::gcd(root, frame_len) != 1)
    throw std::invalid_argument("build_spreading: root " + std::to_string(root) +
                                " not coprime with N=" + std::to_string(frame_len));
  const long long n = frame_len;
  const long long two_n = 2 * n;
  op.base = CVec(frame_len);
  const double scale = 1.0 / std::sqrt(static_cast<double>(frame_len));
  for (long long i = 0; i < n; ++i) {
    // Exponent of e^{-j pi r q / N}: q = i^2 for even N, i (i + 1) for odd N.
    const long long q = (frame_len % 2 == 0) ? (i * i) % two_n : (i * (i + 1)) % two_n;
    const long long e = (static_cast<long long>(root) * q) % two_n;
    op.base(i) = scale * std::polar(1.0, -kPi * static_cast<double>(e) /
                                             static_cast<double>(n));
  }
  op.fd_diagonal = fft::fft(op.base);
  return op;
}

// Places N/L symbols on every L-th sample starting at `shift`; the remaining
// samples are zero. This is the expander followed by a cyclic shift.
inline CVec expand_and_shift(const CVec& symbols, int max_streams, int shift) {
  if (max_streams < 1)
    throw std::invalid_argument("expand_and_shift: L must be >= 1");
  if (shift < 0 || shift >= max_streams)
    throw std::invalid_argument("expand_and_shift: shift " + std::to_string(shift) +
                                " out of [0, " + std::to_string(max_streams) + ")");
  if (symbols.size() == 0)
    throw std::invalid_argument("expand_and_shift: empty symbol block");
  const int per = static_cast<int>(symbols.size());
  CVec out = CVec::Zero(static_cast<Eigen::Index>(per) * max_streams);
  for (int t = 0; t < per; ++t) out(shift + t * max_streams) = symbols(t);
  return out;
}

// One user's transmit frame (no cyclic prefix attached; cp_len records what
// add_cp should use).
struct UplinkFrame {
  int ue = 0;
  CVec payload;
  int cp_len = 0;
};

// Superimposes a user's streams on their allocated shifts and applies the
// spreader in the frequency domain.
inline UplinkFrame assemble_frame(const std::vector<SymbolStream>& streams,
                                  const StreamAllocation& alloc,
                                  const SpreadingOperator& spread,
                                  int cp_len = 0) {
  if (streams.empty())
    throw std::invalid_argument("assemble_frame: no streams");
  const int ue = streams.front().ue;
  if (ue < 0 || ue >= alloc.ue_count())
    throw std::invalid_argument("assemble_frame: UE " + std::to_string(ue) +
                                " not in allocation");
  if (static_cast<int>(streams.size()) != alloc.streams(ue))
    throw std::invalid_argument(
        "assemble_frame: UE " + std::to_string(ue) + " expects " +
        std::to_string(alloc.streams(ue)) + " streams, got " +
        std::to_string(streams.size()));
  const int n = spread.size();
  const int l = alloc.max_streams;
  if (n % l != 0)
    throw std::invalid_argument("assemble_frame: N not divisible by L");
  const int per = n / l;
  if (cp_len < 0 || cp_len >= n)
    throw std::invalid_argument("assemble_frame: cp_len out of range");

  std::set<int> used;
  CVec sum = CVec::Zero(n);
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const auto& s = streams[i];
    if (s.ue != ue)
      throw std::invalid_argument("assemble_frame: streams from different UEs");
    if (static_cast<int>(s.symbols.size()) != per)
      throw std::invalid_argument(
          "assemble_frame: stream length " + std::to_string(s.symbols.size()) +
          " != N/L = " + std::to_string(per));
    const int shift = alloc.shifts[static_cast<std::size_t>(ue)][i];
    if (!used.insert(shift).second)
      throw std::invalid_argument("assemble_frame: duplicate shift " +
                                  std::to_string(shift));
    sum += expand_and_shift(s.symbols, l, shift);
  }
  // Circulant multiply via its eigenvalues.
  CVec payload = fft::ifft(spread.fd_diagonal.cwiseProduct(fft::fft(sum)));
  return {ue, std::move(payload), cp_len};
}

// Prepends the last cp_len samples of the payload.
inline CVec add_cp(const CVec& payload, int cp_len) {
  const int n = static_cast<int>(payload.size());
  if (cp_len < 0 || cp_len >= n)
    throw std::invalid_argument("add_cp: cp_len must be in [0, N)");
  CVec out(n + cp_len);
  out.head(cp_len) = payload.tail(cp_len);
  out.tail(n) = payload;
  return out;
}

inline CVec remove_cp(const CVec& rx, int cp_len) {
  const int total = static_cast<int>(rx.size());
  if (cp_len < 0 || cp_len >= total)
    throw std::invalid_argument("remove_cp: cp_len must be in [0, len)");
  return rx.tail(total - cp_len);
}

}  // namespace cpscm
