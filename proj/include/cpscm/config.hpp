// SPDX-License-Identifier: Apache-2.0
//
// Simulation configuration: a flat key=value format (with '#' comments), CLI
// override points, validation with field-specific messages, and a catalog of
// named presets covering the standard experiment grids.
#pragma once

#include <cstdint>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cpscm/analysis.hpp"
#include "cpscm/common.hpp"
#include "cpscm/waveform.hpp"

namespace cpscm {

enum class SimMode { scm_single, scm_multi, ofdm_baseline };

inline std::string to_string(SimMode m) {
  switch (m) {
    case SimMode::scm_single: return "scm-single";
    case SimMode::scm_multi: return "scm-multi";
    case SimMode::ofdm_baseline: return "ofdm-baseline";
  }
  return "scm-single";
}

inline SimMode parse_mode(const std::string& s) {
  if (s == "scm-single") return SimMode::scm_single;
  if (s == "scm-multi") return SimMode::scm_multi;
  if (s == "ofdm-baseline") return SimMode::ofdm_baseline;
  throw std::invalid_argument(
      "mode must be scm-single, scm-multi or ofdm-baseline, got '" + s + "'");
}

inline std::string to_string(UnbiasPolicy p) {
  switch (p) {
    case UnbiasPolicy::per_stream: return "per-stream";
    case UnbiasPolicy::scalar_alpha: return "scalar";
    case UnbiasPolicy::none: return "none";
  }
  return "per-stream";
}

inline UnbiasPolicy parse_unbias(const std::string& s) {
  if (s == "per-stream") return UnbiasPolicy::per_stream;
  if (s == "scalar") return UnbiasPolicy::scalar_alpha;
  if (s == "none") return UnbiasPolicy::none;
  throw std::invalid_argument("unbias must be per-stream, scalar or none, got '" + s + "'");
}

struct SimConfig {
  int frame_len = 1024;              // n
  int max_streams = 8;               // l
  int antennas = 64;                 // m
  int ues = 32;                      // k
  std::vector<int> streams_per_ue;   // lk; empty means one stream per user
  int channel_taps = 32;             // l_h
  std::string pdp = "uniform";       // or "exp:<decay>"
  int cp_len = 32;                   // n_cp
  int zc_root = 1;
  std::vector<double> es_n0_db = {0, 5, 10, 15, 20, 25, 30};
  int trials = 200;
  std::uint64_t seed = 1;
  int threads = 0;                   // 0 = hardware concurrency
  SimMode mode = SimMode::scm_single;
  Constellation constellation = Constellation::qpsk;
  UnbiasPolicy unbias = UnbiasPolicy::per_stream;
  std::string out_path;              // empty = stdout

  std::vector<int> lk_or_default() const {
    if (!streams_per_ue.empty()) return streams_per_ue;
    return std::vector<int>(static_cast<std::size_t>(ues), 1);
  }

  int virtual_users() const {
    const auto lk = lk_or_default();
    return std::accumulate(lk.begin(), lk.end(), 0);
  }

  StreamAllocation allocation() const {
    StreamAllocation a;
    a.max_streams = max_streams;
    for (int lk : lk_or_default()) {
      std::vector<int> shifts(static_cast<std::size_t>(lk));
      std::iota(shifts.begin(), shifts.end(), 0);
      a.shifts.push_back(std::move(shifts));
    }
    return a;
  }

  PowerDelayProfile power_delay_profile() const {
    if (pdp == "uniform") return PowerDelayProfile::uniform(channel_taps);
    if (pdp.rfind("exp:", 0) == 0) {
      const double decay = std::stod(pdp.substr(4));
      return PowerDelayProfile::exponential(channel_taps, decay);
    }
    throw std::invalid_argument("pdp must be 'uniform' or 'exp:<decay>', got '" + pdp + "'");
  }

  double asymptote_linear() const {
    if (mode == SimMode::scm_multi)
      return asymptotic_gain_multi(antennas, max_streams, lk_or_default());
    return asymptotic_gain_single(antennas, ues, max_streams);
  }

  // Run-length encoding of the allocation, e.g. "32*1" or "16*2|16*3".
  std::string lk_profile_string() const {
    const auto lk = lk_or_default();
    std::string out;
    std::size_t i = 0;
    while (i < lk.size()) {
      std::size_t j = i;
      while (j < lk.size() && lk[j] == lk[i]) ++j;
      if (!out.empty()) out += '|';
      out += std::to_string(j - i) + "*" + std::to_string(lk[i]);
      i = j;
    }
    return out;
  }

  void validate() const {
    if (frame_len < 2) throw std::invalid_argument("N must be >= 2");
    if (max_streams < 1) throw std::invalid_argument("L must be >= 1");
    if (frame_len % max_streams != 0)
      throw std::invalid_argument("N not divisible by L (N=" +
                                  std::to_string(frame_len) + ", L=" +
                                  std::to_string(max_streams) + ")");
    if (antennas < 1) throw std::invalid_argument("M must be >= 1");
    if (ues < 1) throw std::invalid_argument("K must be >= 1");
    const auto lk = lk_or_default();
    if (static_cast<int>(lk.size()) != ues)
      throw std::invalid_argument("lk profile must have K=" + std::to_string(ues) +
                                  " entries, got " + std::to_string(lk.size()));
    for (int v : lk)
      if (v < 1 || v > max_streams)
        throw std::invalid_argument("L_k must be in [1, L], got " + std::to_string(v));
    const int kv = std::accumulate(lk.begin(), lk.end(), 0);
    const int ml = antennas * max_streams;
    if (kv >= ml)
      throw std::invalid_argument("K_v (" + std::to_string(kv) +
                                  ") must be < ML (" + std::to_string(ml) + ")");
    if (mode == SimMode::scm_single || mode == SimMode::ofdm_baseline) {
      for (int v : lk)
        if (v != 1)
          throw std::invalid_argument("mode " + to_string(mode) +
                                      " requires L_k = 1 for every user");
    }
    if (mode == SimMode::ofdm_baseline && ues % max_streams != 0)
      throw std::invalid_argument("K (" + std::to_string(ues) +
                                  ") must be divisible by L (" +
                                  std::to_string(max_streams) +
                                  ") for ofdm-baseline");
    if (channel_taps < 1) throw std::invalid_argument("L_h must be >= 1");
    if (channel_taps > frame_len)
      throw std::invalid_argument("L_h must be <= N (L_h=" +
                                  std::to_string(channel_taps) + ", N=" +
                                  std::to_string(frame_len) + ")");
    if (cp_len < 0 || cp_len >= frame_len)
      throw std::invalid_argument("N_cp must be in [0, N)");
    if (cp_len < channel_taps - 1)
      throw std::invalid_argument("N_cp must be >= L_h-1 (N_cp=" +
                                  std::to_string(cp_len) + ", L_h=" +
                                  std::to_string(channel_taps) + ")");
    if (zc_root < 0) throw std::invalid_argument("zc_root must be >= 0");
    if (zc_root != 0 && std::gcd(zc_root, frame_len) != 1)
      throw std::invalid_argument("zc_root (" + std::to_string(zc_root) +
                                  ") not coprime with N (" +
                                  std::to_string(frame_len) + ")");
    if (es_n0_db.empty())
      throw std::invalid_argument("es_n0_db sweep must not be empty");
    for (std::size_t i = 1; i < es_n0_db.size(); ++i)
      if (!(es_n0_db[i] > es_n0_db[i - 1]))
        throw std::invalid_argument("es_n0_db sweep must be strictly increasing");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
    power_delay_profile();  // validates the pdp string
  }

  // One-line summary sufficient to reproduce the run bit for bit. Thread
  // count and output path are deliberately omitted: they do not affect the
  // numbers.
  std::string echo() const {
    std::ostringstream os;
    os << "mode=" << to_string(mode) << " n=" << frame_len << " l=" << max_streams
       << " m=" << antennas << " k=" << ues << " lk=" << lk_profile_string()
       << " l_h=" << channel_taps << " pdp=" << pdp << " n_cp=" << cp_len
       << " zc_root=" << zc_root << " constellation="
       << (constellation == Constellation::qpsk ? "qpsk" : "qam16")
       << " unbias=" << to_string(unbias) << " es_n0_db=";
    for (std::size_t i = 0; i < es_n0_db.size(); ++i) {
      if (i) os << ',';
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", es_n0_db[i]);
      os << buf;
    }
    os << " trials=" << trials << " seed=" << seed;
    return os.str();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Strict conversions: the whole token must parse.
inline int to_int(const std::string& s) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value '" + s + "', expected an integer");
  }
  if (pos != s.size())
    throw std::invalid_argument("bad value '" + s + "', expected an integer");
  return v;
}

inline std::uint64_t to_u64(const std::string& s) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value '" + s + "', expected an unsigned integer");
  }
  if (pos != s.size())
    throw std::invalid_argument("bad value '" + s + "', expected an unsigned integer");
  return v;
}

inline double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value '" + s + "', expected a number");
  }
  if (pos != s.size())
    throw std::invalid_argument("bad value '" + s + "', expected a number");
  return v;
}

// "0:5:30" (start:step:stop, inclusive) or a comma list.
inline std::vector<double> parse_sweep(const std::string& value) {
  std::vector<double> out;
  if (value.find(':') != std::string::npos) {
    const auto parts = split(value, ':');
    if (parts.size() != 3)
      throw std::invalid_argument("es_n0_db range must be start:step:stop, got '" + value + "'");
    const double start = to_double(trim(parts[0]));
    const double step = to_double(trim(parts[1]));
    const double stop = to_double(trim(parts[2]));
    if (!(step > 0.0))
      throw std::invalid_argument("es_n0_db range step must be > 0");
    for (double v = start; v <= stop + 1e-9; v += step) out.push_back(v);
    return out;
  }
  for (const auto& p : split(value, ',')) out.push_back(to_double(trim(p)));
  return out;
}

// "3" (uniform) or one entry per user, "2,3,4".
inline std::vector<int> parse_lk(const std::string& value, int ues) {
  std::vector<int> out;
  const auto parts = split(value, ',');
  if (parts.size() == 1) {
    out.assign(static_cast<std::size_t>(ues), to_int(trim(parts[0])));
    return out;
  }
  for (const auto& p : parts) out.push_back(to_int(trim(p)));
  return out;
}

}  // namespace detail

// Parses the key=value config format. Unknown keys are rejected so typos do
// not silently fall back to defaults. The result is not yet validated;
// callers apply CLI overrides first and then call validate().
inline SimConfig parse_config_text(std::istream& in,
                                   const std::string& origin = "config") {
  SimConfig cfg;
  std::string raw_lk;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      if (key == "n") cfg.frame_len = detail::to_int(value);
      else if (key == "l") cfg.max_streams = detail::to_int(value);
      else if (key == "m") cfg.antennas = detail::to_int(value);
      else if (key == "k") cfg.ues = detail::to_int(value);
      else if (key == "lk") raw_lk = value;
      else if (key == "l_h") cfg.channel_taps = detail::to_int(value);
      else if (key == "pdp") cfg.pdp = value;
      else if (key == "n_cp") cfg.cp_len = detail::to_int(value);
      else if (key == "zc_root") cfg.zc_root = detail::to_int(value);
      else if (key == "es_n0_db") cfg.es_n0_db = detail::parse_sweep(value);
      else if (key == "trials") cfg.trials = detail::to_int(value);
      else if (key == "seed") cfg.seed = detail::to_u64(value);
      else if (key == "threads") cfg.threads = detail::to_int(value);
      else if (key == "mode") cfg.mode = parse_mode(value);
      else if (key == "constellation") {
        if (value == "qpsk") cfg.constellation = Constellation::qpsk;
        else if (value == "qam16") cfg.constellation = Constellation::qam16;
        else throw std::invalid_argument("constellation must be qpsk or qam16");
      }
      else if (key == "unbias") cfg.unbias = parse_unbias(value);
      else if (key == "out") cfg.out_path = value;
      else
        throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception&) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": bad value '" + value + "' for key '" + key + "'");
    }
  }
  if (!raw_lk.empty()) cfg.streams_per_ue = detail::parse_lk(raw_lk, cfg.ues);
  return cfg;
}

struct Preset {
  std::string name;
  std::string summary;
  std::vector<SimConfig> runs;
};

namespace detail {

inline SimConfig base_large() {
  SimConfig c;
  c.frame_len = 1024;
  c.max_streams = 8;
  c.antennas = 64;
  c.channel_taps = 32;
  c.cp_len = 32;
  c.es_n0_db = {0, 5, 10, 15, 20, 25, 30};
  c.trials = 200;
  return c;
}

inline SimConfig base_small() {
  SimConfig c;
  c.frame_len = 256;
  c.max_streams = 4;
  c.antennas = 16;
  c.channel_taps = 16;
  c.cp_len = 16;
  c.es_n0_db = {0, 5, 10, 15, 20, 25, 30};
  c.trials = 200;
  return c;
}

inline std::vector<Preset> make_presets() {
  std::vector<Preset> out;

  {
    Preset p;
    p.name = "fig2";
    p.summary = "single-stream gain sweep, M=64, L=8, K in {32, 64, 128}";
    for (int k : {32, 64, 128}) {
      SimConfig c = base_large();
      c.mode = SimMode::scm_single;
      c.ues = k;
      p.runs.push_back(c);
    }
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "fig2-small";
    p.summary = "single-stream sweep at desk scale, M=16, L=4, K in {8, 16, 32}";
    for (int k : {8, 16, 32}) {
      SimConfig c = base_small();
      c.mode = SimMode::scm_single;
      c.ues = k;
      p.runs.push_back(c);
    }
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "fig4";
    p.summary = "multi-stream sweep, M=64, L=8, K=32, L_k in {2, 3, 4}";
    for (int lk : {2, 3, 4}) {
      SimConfig c = base_large();
      c.mode = SimMode::scm_multi;
      c.ues = 32;
      c.streams_per_ue.assign(32, lk);
      p.runs.push_back(c);
    }
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "fig4-small";
    p.summary = "multi-stream sweep at desk scale, M=16, L=4, K=8, L_k in {2, 3, 4}";
    for (int lk : {2, 3, 4}) {
      SimConfig c = base_small();
      c.mode = SimMode::scm_multi;
      c.ues = 8;
      c.streams_per_ue.assign(8, lk);
      p.runs.push_back(c);
    }
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "example-16db";
    p.summary = "M=64, K=32, L=4, L_k=3: measured gain against the 16 dB closed form";
    SimConfig c = base_large();
    c.max_streams = 4;
    c.mode = SimMode::scm_multi;
    c.ues = 32;
    c.streams_per_ue.assign(32, 3);
    p.runs.push_back(c);
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "ofdm-vs-scm";
    p.summary = "OFDM baseline and single-stream run with matched M=16, K=8, L=4";
    SimConfig c = base_small();
    c.ues = 8;
    c.mode = SimMode::ofdm_baseline;
    p.runs.push_back(c);
    c.mode = SimMode::scm_single;
    p.runs.push_back(c);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace detail

inline const std::vector<Preset>& builtin_presets() {
  static const std::vector<Preset> presets = detail::make_presets();
  return presets;
}

inline const Preset* find_preset(const std::string& name) {
  for (const auto& p : builtin_presets())
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace cpscm
