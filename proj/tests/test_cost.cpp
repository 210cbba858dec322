#include <doctest.h>

#include <array>
#include <random>

#include "datslice/cost.hpp"

using namespace datslice;

namespace {

const CostModelParams kFixture{16, 0.0, 131072, 64, 16};

}  // namespace

TEST_CASE("cost model parameter validation") {
  CostModelParams p = kFixture;
  p.bit_width = 12;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = kFixture;
  p.burst_bytes = 48;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = kFixture;
  p.buffer_capacity_bits = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("resource formula on the found slice") {
  // 16 * (14+1) * (28+1) = 6960
  CHECK(resource({28, 14, 1}, kFixture) == 6960.0);
}

TEST_CASE("resource unit and beta cases") {
  CHECK(resource({1, 1, 0}, CostModelParams{8, 0.0, 1024, 64, 1}) == 8.0);

  CostModelParams with_beta{8, 100.0, 1024, 64, 1};
  CHECK(resource({8, 8, 0}, with_beta) == 612.0);  // 8*8*8 + 100
}

TEST_CASE("resource matches an independent re-derivation on random configs") {
  std::mt19937 gen(123);
  for (int trial = 0; trial < 20; ++trial) {
    const SliceConfig cfg{1 + static_cast<int>(gen() % 40), 1 + static_cast<int>(gen() % 40),
                          static_cast<int>(gen() % 3)};
    const int bw = std::array<int, 3>{8, 16, 32}[gen() % 3];
    const double beta = static_cast<double>(gen() % 1000);
    CostModelParams params{bw, beta, 1024, 64, 4};
    double expected = beta;
    for (int r = 0; r < cfg.h_s + cfg.overlap; ++r) {
      expected += static_cast<double>(bw) * (cfg.w_s + cfg.overlap);
    }
    CHECK(resource(cfg, params) == expected);
  }
}

TEST_CASE("resource is strictly increasing in every argument") {
  for (int h = 1; h < 30; ++h) {
    CHECK(resource({h + 1, 14, 1}, kFixture) > resource({h, 14, 1}, kFixture));
    CHECK(resource({14, h + 1, 1}, kFixture) > resource({14, h, 1}, kFixture));
  }
  CHECK(resource({14, 14, 1}, kFixture) > resource({14, 14, 0}, kFixture));
  CHECK(resource({14, 14, 2}, kFixture) > resource({14, 14, 1}, kFixture));
}

TEST_CASE("baseline normalizes to exactly one") {
  const TrafficReport r = simulate_traffic(56, 56, TrafficMode::kBaseline, std::nullopt, kFixture);
  CHECK(r.normalized == 1.0);
  CHECK(r.total_bits() == r.baseline_total_bits);
}

TEST_CASE("sliced full-map patch with a big buffer equals fused") {
  CostModelParams big = kFixture;
  big.buffer_capacity_bits = 1LL << 40;
  const TrafficReport fused = simulate_traffic(56, 56, TrafficMode::kFused, std::nullopt, big);
  const TrafficReport sliced =
      simulate_traffic(56, 56, TrafficMode::kSliced, SliceConfig{56, 56, 0}, big);
  CHECK(sliced.dram_read_bits == fused.dram_read_bits);
  CHECK(sliced.dram_write_bits == fused.dram_write_bits);
  CHECK(sliced.normalized == fused.normalized);
}

TEST_CASE("fixture traffic ordering and exact burst counts") {
  // 56x56x16ch at 16-bit: map row = 1792 B = 28 bursts, map = 100352 B.
  const TrafficReport base = simulate_traffic(56, 56, TrafficMode::kBaseline, std::nullopt, kFixture);
  CHECK(base.baseline_total_bits == 5 * 100352 * 8);

  // Buffer (131072 bits) holds one padded 30x16 patch footprint (122880
  // bits) but not the map (802816 bits), so fused spills its intermediate.
  const TrafficReport fused = simulate_traffic(56, 56, TrafficMode::kFused, std::nullopt, kFixture);
  CHECK(fused.normalized == 0.8);

  // Sliced 28x14x1: padded reads 8 patches x 29 rows x 512 B (widths 15 and
  // 16 both round to 8 bursts); core writes 8 x 28 rows x 448 B exact.
  const TrafficReport sliced =
      simulate_traffic(56, 56, TrafficMode::kSliced, SliceConfig{28, 14, 1}, kFixture);
  CHECK(sliced.dram_read_bits == 8 * 29 * 512 * 8);
  CHECK(sliced.dram_write_bits == 8 * 28 * 448 * 8);
  CHECK(sliced.normalized < fused.normalized);
  CHECK(fused.normalized < base.normalized);
  CHECK(sliced.normalized <= 0.5);
  REQUIRE(sliced.per_patch.size() == 8);
  for (const PatchTraffic& p : sliced.per_patch) CHECK_FALSE(p.spilled);
}

TEST_CASE("sliced reads cover the map at least once") {
  std::mt19937 gen(99);
  for (int trial = 0; trial < 20; ++trial) {
    const SliceConfig cfg{1 + static_cast<int>(gen() % 30), 1 + static_cast<int>(gen() % 30),
                          static_cast<int>(gen() % 3)};
    const TrafficReport r = simulate_traffic(56, 56, TrafficMode::kSliced, cfg, kFixture);
    CHECK(r.dram_read_bits >= 16 * 56 * 56 * 16);  // C*H*W*bit_width
  }
}

TEST_CASE("sliced traffic is non-decreasing in overlap") {
  std::mt19937 gen(7);
  for (int trial = 0; trial < 15; ++trial) {
    const int hs = 4 + static_cast<int>(gen() % 26);
    const int ws = 4 + static_cast<int>(gen() % 26);
    std::int64_t last = -1;
    for (int k = 0; k <= 2; ++k) {
      const TrafficReport r =
          simulate_traffic(56, 56, TrafficMode::kSliced, SliceConfig{hs, ws, k}, kFixture);
      CHECK(r.total_bits() >= last);
      last = r.total_bits();
    }
  }
}

TEST_CASE("buffer threshold is exact") {
  const SliceConfig cfg{28, 14, 1};
  const std::int64_t footprint = 16LL * 16 * (14 + 2) * (28 + 2);  // bw * C * (w+2k) * (h+2k)
  CostModelParams at = kFixture;
  at.buffer_capacity_bits = footprint;
  const TrafficReport fit = simulate_traffic(56, 56, TrafficMode::kSliced, cfg, at);
  for (const PatchTraffic& p : fit.per_patch) CHECK_FALSE(p.spilled);

  at.buffer_capacity_bits = footprint - 1;
  const TrafficReport spill = simulate_traffic(56, 56, TrafficMode::kSliced, cfg, at);
  for (const PatchTraffic& p : spill.per_patch) CHECK(p.spilled);
  CHECK(spill.total_bits() > fit.total_bits());
}

TEST_CASE("sliced mode requires a config") {
  CHECK_THROWS_AS(simulate_traffic(56, 56, TrafficMode::kSliced, std::nullopt, kFixture),
                  ValidationError);
}
