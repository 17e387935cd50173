// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "cpscm/analysis.hpp"

using namespace cpscm;

TEST_CASE("single-stream asymptote M - K/L") {
  REQUIRE(asymptotic_gain_single(64, 32, 8) == Catch::Approx(60.0));
  REQUIRE(asymptotic_gain_single(64, 64, 8) == Catch::Approx(56.0));
  REQUIRE(asymptotic_gain_single(64, 128, 8) == Catch::Approx(48.0));
  REQUIRE(asymptotic_gain_single(16, 8, 4) == Catch::Approx(14.0));
  REQUIRE(to_db(asymptotic_gain_single(16, 8, 4)) == Catch::Approx(11.4613).margin(1e-4));
  REQUIRE_THROWS_AS(asymptotic_gain_single(4, 16, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(asymptotic_gain_single(4, 0, 4), std::invalid_argument);
}

TEST_CASE("multi-stream asymptote M - K_v/L") {
  REQUIRE(asymptotic_gain_multi(64, 8, std::vector<int>(32, 2)) == Catch::Approx(56.0));
  REQUIRE(asymptotic_gain_multi(64, 8, std::vector<int>(32, 3)) == Catch::Approx(52.0));
  REQUIRE(asymptotic_gain_multi(64, 8, std::vector<int>(32, 4)) == Catch::Approx(48.0));
  // Mixed allocation: K_v = 2 + 3 + 4 = 9.
  REQUIRE(asymptotic_gain_multi(8, 4, {2, 3, 4}) == Catch::Approx(8.0 - 9.0 / 4.0));
  // 32 users at 3 streams each over L = 4: 64 - 96/4 = 40, i.e. 16.02 dB.
  const double g = asymptotic_gain_multi(64, 4, std::vector<int>(32, 3));
  REQUIRE(g == Catch::Approx(40.0));
  REQUIRE(to_db(g) == Catch::Approx(16.0206).margin(1e-4));
  REQUIRE_THROWS_AS(asymptotic_gain_multi(8, 4, std::vector<int>(16, 2)),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(asymptotic_gain_multi(8, 4, {5}), std::invalid_argument);
  REQUIRE_THROWS_AS(asymptotic_gain_multi(8, 4, {}), std::invalid_argument);
}

TEST_CASE("gain estimator aggregates per-frame MSE") {
  GainEstimator ge;
  ge.add_frame_mse(0.5, 10);
  ge.add_frame_mse(1.5, 10);
  const NoiseModel noise{0.1};
  const GainPoint p = ge.finalize(noise, 14.0);
  REQUIRE(p.trials == 2);
  REQUIRE(p.mse == Catch::Approx(1.0));
  REQUIRE(p.gain_linear == Catch::Approx(0.1));
  REQUIRE(p.gain_db == Catch::Approx(-10.0));
  REQUIRE(p.es_n0_db == Catch::Approx(10.0));
  // Sample sd of {0.5, 1.5} is 1/sqrt(2); se of the mean is 0.5;
  // se in dB is 10/ln(10) * 0.5 / 1.0.
  REQUIRE(p.gain_db_stderr == Catch::Approx(10.0 / std::log(10.0) * 0.5).epsilon(1e-12));
  REQUIRE(p.asymptote_db == Catch::Approx(to_db(14.0)));

  GainEstimator empty;
  REQUIRE_THROWS_AS(empty.finalize(noise, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(ge.add_frame_mse(0.1, 0), std::invalid_argument);
}

TEST_CASE("measure_gain wraps frame pairs") {
  CVec a(2), b(2);
  a << Cplx(1, 0), Cplx(0, 1);
  b << Cplx(1, 0), Cplx(0, 0);
  // Error energy 1 over 2 symbols: mse = 0.5.
  const GainPoint p = measure_gain({{a}}, {{b}}, NoiseModel{1.0}, 2.0);
  REQUIRE(p.mse == Catch::Approx(0.5));
  REQUIRE(p.gain_linear == Catch::Approx(2.0));
  REQUIRE(p.trials == 1);
  REQUIRE(p.gain_db_stderr == 0.0);
  REQUIRE_THROWS_AS(measure_gain({{a}}, {}, NoiseModel{1.0}, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(measure_gain({{a}}, {{CVec(3)}}, NoiseModel{1.0}, 1.0),
                    std::invalid_argument);
}

TEST_CASE("normalized inverse-Wishart trace concentrates at one") {
  const double v = wishart_trace_mc(8, 4, 2000, 77);
  REQUIRE(v == Catch::Approx(1.0).margin(0.05));
  REQUIRE_THROWS_AS(wishart_trace_mc(4, 4, 10, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(wishart_trace_mc(8, 4, 0, 1), std::invalid_argument);
}

TEST_CASE("composite trace matches the Wishart prediction with rich delay spread") {
  // M=8, K=4, L=2, two streams each: K_v = 8, ML = 16, expected 8/8 = 1.
  const CompositeTraceResult r = composite_trace_check(8, 4, 2, 2, 32, 400, 79, 256);
  REQUIRE(r.expected == Catch::Approx(1.0));
  REQUIRE_FALSE(r.low_delay_spread);
  REQUIRE(r.rel_error() < 0.1);
}

TEST_CASE("composite trace deviates for a flat channel") {
  // One tap: all alias blocks are identical, so the composite Gram is far
  // from Wishart with ML degrees of freedom. Single-stream K=4 on L=2 gives
  // measured ~ K/(M-K)/L = 0.5 against expected K/(ML-K) = 1/3.
  const CompositeTraceResult r = composite_trace_check(8, 4, 2, 1, 1, 400, 81, 256);
  REQUIRE(r.low_delay_spread);
  REQUIRE(r.rel_error() > 0.2);
}

TEST_CASE("composite trace check validates arguments") {
  REQUIRE_THROWS_AS(composite_trace_check(2, 4, 2, 2, 8, 10, 1, 256),
                    std::invalid_argument);  // K_v = 8 >= ML = 4
  REQUIRE_THROWS_AS(composite_trace_check(8, 4, 3, 1, 8, 10, 1, 256),
                    std::invalid_argument);  // 256 % 3 != 0
  REQUIRE_THROWS_AS(composite_trace_check(8, 4, 2, 1, 512, 10, 1, 256),
                    std::invalid_argument);  // L_h > N
}

TEST_CASE("alias stacking improves Gram conditioning") {
  const ConditionReport rep = condition_study(16, 8, 4, 2, 16, 60, 83, 128);
  REQUIRE(rep.trials == 60);
  REQUIRE(rep.composite_q1 <= rep.composite_median);
  REQUIRE(rep.composite_median <= rep.composite_q3);
  REQUIRE(rep.per_bin_q1 <= rep.per_bin_median);
  // The composite system sees L observations per unknown stream where the
  // single bin sees one per user; its spread of condition numbers sits lower.
  REQUIRE(rep.composite_median < rep.per_bin_median);
}

TEST_CASE("ofdm baseline converges to the shared asymptote") {
  OfdmScenario sc;
  sc.antennas = 8;
  sc.ues = 4;
  sc.groups = 2;
  sc.frame_len = 64;
  sc.pdp = PowerDelayProfile::uniform(8);
  const GainCurve curve = ofdm_baseline_gain(sc, {30.0}, 40, 85);
  REQUIRE(curve.points.size() == 1);
  REQUIRE(curve.meta.mode == "ofdm-baseline");
  // M - K/L = 6 -> 7.78 dB.
  REQUIRE(curve.points[0].asymptote_db == Catch::Approx(to_db(6.0)));
  REQUIRE(curve.points[0].gain_db == Catch::Approx(to_db(6.0)).margin(0.5));
}

TEST_CASE("ofdm baseline validates the layout") {
  OfdmScenario sc;
  sc.antennas = 8;
  sc.ues = 5;
  sc.groups = 2;
  sc.frame_len = 64;
  sc.pdp = PowerDelayProfile::uniform(8);
  REQUIRE_THROWS_AS(ofdm_baseline_gain(sc, {10.0}, 4, 1), std::invalid_argument);
  sc.ues = 4;
  REQUIRE_THROWS_AS(ofdm_baseline_gain(sc, {}, 4, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(ofdm_baseline_gain(sc, {10.0}, 0, 1), std::invalid_argument);
  sc.ues = 16;  // K/L = 8 >= M = 8
  REQUIRE_THROWS_AS(ofdm_baseline_gain(sc, {10.0}, 4, 1), std::invalid_argument);
}
