// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cpscm/config.hpp"
#include "cpscm/harness.hpp"
#include "cpscm/verify.hpp"

using namespace cpscm;
using Catch::Matchers::ContainsSubstring;

namespace {

SimConfig tiny_config() {
  SimConfig c;
  c.frame_len = 32;
  c.max_streams = 2;
  c.antennas = 2;
  c.ues = 2;
  c.channel_taps = 4;
  c.cp_len = 4;
  c.es_n0_db = {0, 10};
  c.trials = 3;
  c.seed = 5;
  c.threads = 1;
  c.mode = SimMode::scm_single;
  return c;
}

}  // namespace

TEST_CASE("config file parsing") {
  std::istringstream in(
      "# comment line\n"
      "n = 64        # trailing comment\n"
      "l = 4\n"
      "m = 8\n"
      "k = 4\n"
      "lk = 2,1,2,1\n"
      "l_h = 8\n"
      "pdp = exp:4.0\n"
      "n_cp = 8\n"
      "zc_root = 3\n"
      "es_n0_db = 0:10:30\n"
      "trials = 7\n"
      "seed = 99\n"
      "threads = 2\n"
      "mode = scm-multi\n"
      "constellation = qpsk\n"
      "unbias = scalar\n"
      "out = /tmp/x.csv\n");
  const SimConfig c = parse_config_text(in, "test");
  REQUIRE(c.frame_len == 64);
  REQUIRE(c.max_streams == 4);
  REQUIRE(c.antennas == 8);
  REQUIRE(c.ues == 4);
  REQUIRE(c.streams_per_ue == std::vector<int>{2, 1, 2, 1});
  REQUIRE(c.channel_taps == 8);
  REQUIRE(c.pdp == "exp:4.0");
  REQUIRE(c.cp_len == 8);
  REQUIRE(c.zc_root == 3);
  REQUIRE(c.es_n0_db == std::vector<double>{0, 10, 20, 30});
  REQUIRE(c.trials == 7);
  REQUIRE(c.seed == 99);
  REQUIRE(c.threads == 2);
  REQUIRE(c.mode == SimMode::scm_multi);
  REQUIRE(c.unbias == UnbiasPolicy::scalar_alpha);
  REQUIRE(c.out_path == "/tmp/x.csv");
  REQUIRE_NOTHROW(c.validate());
  REQUIRE(c.virtual_users() == 6);
}

TEST_CASE("config parser reports the offending line") {
  std::istringstream bad1("n = 64\nbogus_key = 3\n");
  REQUIRE_THROWS_WITH(parse_config_text(bad1, "f"),
                      ContainsSubstring("f:2") && ContainsSubstring("bogus_key"));
  std::istringstream bad2("n 64\n");
  REQUIRE_THROWS_WITH(parse_config_text(bad2, "f"), ContainsSubstring("key=value"));
  std::istringstream bad3("n = sixty\n");
  REQUIRE_THROWS_WITH(parse_config_text(bad3, "f"), ContainsSubstring("bad value"));
  std::istringstream bad4("mode = other\n");
  REQUIRE_THROWS_WITH(parse_config_text(bad4, "f"), ContainsSubstring("mode"));
  std::istringstream bad5("es_n0_db = 0:5\n");
  REQUIRE_THROWS_WITH(parse_config_text(bad5, "f"), ContainsSubstring("start:step:stop"));
}

TEST_CASE("uniform lk shorthand expands to K entries") {
  std::istringstream in("n = 32\nl = 4\nm = 8\nk = 3\nlk = 2\nl_h = 4\nn_cp = 4\nmode = scm-multi\n");
  const SimConfig c = parse_config_text(in);
  REQUIRE(c.streams_per_ue == std::vector<int>{2, 2, 2});
}

TEST_CASE("validation messages name the violated constraint") {
  SimConfig c = tiny_config();
  c.frame_len = 33;
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("N not divisible by L"));

  c = tiny_config();
  c.ues = 4;  // K_v = 4 = ML
  REQUIRE_THROWS_WITH(c.validate(),
                      ContainsSubstring("K_v (4) must be < ML (4)"));

  c = tiny_config();
  c.cp_len = 2;
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("N_cp must be >= L_h-1"));

  c = tiny_config();
  c.channel_taps = 64;
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("L_h must be <= N"));

  c = tiny_config();
  c.es_n0_db = {};
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("must not be empty"));

  c = tiny_config();
  c.es_n0_db = {0, 0};
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("strictly increasing"));

  c = tiny_config();
  c.trials = 0;
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("trials"));

  c = tiny_config();
  c.zc_root = 2;  // gcd(2, 32) != 1
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("not coprime"));

  c = tiny_config();
  c.streams_per_ue = {2, 1};
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("requires L_k = 1"));

  c = tiny_config();
  c.mode = SimMode::ofdm_baseline;
  c.ues = 1;
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("divisible by L"));

  c = tiny_config();
  c.pdp = "gaussian";
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("pdp"));
}

TEST_CASE("lk profile string run-length encodes the allocation") {
  SimConfig c = tiny_config();
  REQUIRE(c.lk_profile_string() == "2*1");
  c.ues = 5;
  c.streams_per_ue = {2, 2, 1, 1, 1};
  REQUIRE(c.lk_profile_string() == "2*2|3*1");
  c.streams_per_ue = {2, 1, 2, 1, 1};
  REQUIRE(c.lk_profile_string() == "1*2|1*1|1*2|2*1");
}

TEST_CASE("allocation uses the first L_k shifts per user") {
  SimConfig c = tiny_config();
  c.mode = SimMode::scm_multi;
  c.max_streams = 4;
  c.frame_len = 64;
  c.streams_per_ue = {3, 2};
  const StreamAllocation a = c.allocation();
  REQUIRE(a.shifts[0] == std::vector<int>{0, 1, 2});
  REQUIRE(a.shifts[1] == std::vector<int>{0, 1});
  REQUIRE(a.virtual_users() == 5);
}

TEST_CASE("csv row formatting is stable") {
  GainPoint p;
  p.es_n0_db = 10.0;
  p.gain_db = 13.9794000867;
  p.gain_db_stderr = 0.0123456789;
  p.asymptote_db = 11.4612803568;
  p.mse = 0.000399;
  p.trials = 200;
  const CurveMeta meta{"scm-single", 16, 8, 4, "8*1"};
  std::ostringstream os;
  write_csv_row(os, meta, p);
  REQUIRE(os.str() ==
          "10,13.97940009,0.0123456789,11.46128036,0.000399,200,scm-single,16,8,4,8*1\n");
}

TEST_CASE("run_sweep emits one point per sweep entry and flushes rows") {
  const SimConfig c = tiny_config();
  std::ostringstream os;
  const RunReport rep = run_sweep(c, &os);
  REQUIRE(rep.curve.points.size() == 2);
  REQUIRE(rep.curve.points[0].es_n0_db == Catch::Approx(0.0));
  REQUIRE(rep.curve.points[1].es_n0_db == Catch::Approx(10.0));
  REQUIRE(rep.curve.points[0].trials == 3);
  REQUIRE(rep.curve.meta.lk_profile == "2*1");
  REQUIRE(rep.wall_seconds >= 0.0);

  // Two CSV rows, no header (run_batch owns the header).
  const std::string text = os.str();
  REQUIRE(std::count(text.begin(), text.end(), '\n') == 2);
  REQUIRE(text.find("scm-single,2,2,2,2*1") != std::string::npos);
}

TEST_CASE("run_batch writes config echoes and a single header") {
  SimConfig c = tiny_config();
  std::ostringstream os;
  const auto reports = run_batch({c, c}, &os);
  REQUIRE(reports.size() == 2);
  const std::string text = os.str();
  REQUIRE(text.find("# cpscm") == 0);
  REQUIRE(text.find("# run 1: mode=scm-single") != std::string::npos);
  REQUIRE(text.find("# run 2: mode=scm-single") != std::string::npos);
  std::size_t headers = 0;
  for (std::size_t pos = text.find(kCsvHeader); pos != std::string::npos;
       pos = text.find(kCsvHeader, pos + 1))
    ++headers;
  REQUIRE(headers == 1);
}

TEST_CASE("sweep output is byte-identical across thread counts and reruns") {
  SimConfig c = tiny_config();
  c.trials = 6;
  c.threads = 1;
  const std::string once = run_batch_to_string({c});
  const std::string twice = run_batch_to_string({c});
  REQUIRE(once == twice);
  c.threads = 3;
  REQUIRE(run_batch_to_string({c}) == once);
  // A different seed changes the numbers.
  c.threads = 1;
  c.seed = 6;
  REQUIRE(run_batch_to_string({c}) != once);
}

TEST_CASE("multi-stream and ofdm modes run through the sweep driver") {
  SimConfig c = tiny_config();
  c.mode = SimMode::scm_multi;
  c.max_streams = 2;
  c.streams_per_ue = {2, 1};
  c.es_n0_db = {20};
  const RunReport rep = run_sweep(c);
  REQUIRE(rep.curve.points.size() == 1);
  // K_v = 3, ML = 4: asymptote 2 - 3/2 = 0.5.
  REQUIRE(rep.curve.points[0].asymptote_db == Catch::Approx(to_db(0.5)));

  SimConfig o = tiny_config();
  o.mode = SimMode::ofdm_baseline;
  o.antennas = 4;
  o.es_n0_db = {20};
  const RunReport orep = run_sweep(o);
  REQUIRE(orep.curve.meta.mode == "ofdm-baseline");
  REQUIRE(orep.curve.points[0].asymptote_db == Catch::Approx(to_db(3.0)));
}

TEST_CASE("presets are all valid and discoverable") {
  REQUIRE_FALSE(builtin_presets().empty());
  for (const auto& p : builtin_presets()) {
    CAPTURE(p.name);
    REQUIRE_FALSE(p.runs.empty());
    for (const auto& r : p.runs) REQUIRE_NOTHROW(r.validate());
  }
  REQUIRE(find_preset("fig2") != nullptr);
  REQUIRE(find_preset("fig2")->runs.size() == 3);
  REQUIRE(find_preset("fig4-small") != nullptr);
  REQUIRE(find_preset("nope") == nullptr);
}

TEST_CASE("verification checks all pass") {
  for (const auto& c : run_verification()) {
    CAPTURE(c.name, c.detail);
    REQUIRE(c.passed);
  }
}
