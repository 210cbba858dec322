#include "datslice/cost.hpp"

#include <string>

namespace datslice {

void CostModelParams::validate() const {
  if (bit_width != 8 && bit_width != 16 && bit_width != 32) {
    throw ValidationError("CostModelParams: bit_width must be 8, 16 or 32");
  }
  if (buffer_capacity_bits <= 0) {
    throw ValidationError("CostModelParams: buffer_capacity_bits must be > 0");
  }
  if (burst_bytes <= 0 || (burst_bytes & (burst_bytes - 1)) != 0) {
    throw ValidationError("CostModelParams: burst_bytes must be a power of two");
  }
  if (channels < 1) {
    throw ValidationError("CostModelParams: channels must be >= 1");
  }
  if (beta < 0.0) {
    throw ValidationError("CostModelParams: beta must be >= 0");
  }
}

double resource(const SliceConfig& cfg, const CostModelParams& params) {
  cfg.validate();
  params.validate();
  const std::int64_t cells = static_cast<std::int64_t>(cfg.w_s + cfg.overlap) *
                             static_cast<std::int64_t>(cfg.h_s + cfg.overlap);
  return static_cast<double>(params.bit_width * cells) + params.beta;
}

namespace {

// One contiguous DRAM run of `bytes`, rounded up to burst granularity;
// returns bits.
std::int64_t run_bits(std::int64_t bytes, std::int64_t burst_bytes) {
  const std::int64_t bursts = (bytes + burst_bytes - 1) / burst_bytes;
  return bursts * burst_bytes * 8;
}

struct Model {
  std::int64_t bytes_per_pixel;
  std::int64_t burst;

  // A w x h rectangle moved row by row (rows are not contiguous in DRAM).
  std::int64_t rect_bits(const Rect& r) const {
    return static_cast<std::int64_t>(r.height()) * run_bits(r.width() * bytes_per_pixel, burst);
  }
  // A contiguous region of n pixels (full map or an intermediate buffer).
  std::int64_t contiguous_bits(std::int64_t pixels) const {
    return run_bits(pixels * bytes_per_pixel, burst);
  }
};

}  // namespace

TrafficReport simulate_traffic(Eigen::Index h, Eigen::Index w, TrafficMode mode,
                               const std::optional<SliceConfig>& cfg,
                               const CostModelParams& params) {
  params.validate();
  if (h < 1 || w < 1) {
    throw ShapeError("simulate_traffic: map extents must be >= 1");
  }
  if (mode == TrafficMode::kSliced && !cfg) {
    throw ValidationError("simulate_traffic: sliced mode needs a SliceConfig");
  }

  const Model m{static_cast<std::int64_t>(params.channels) * params.bit_width / 8,
                params.burst_bytes};
  const std::int64_t map_pixels = static_cast<std::int64_t>(h) * w;
  const std::int64_t map_bits = m.rect_bits(Rect{0, 0, h, w});
  const std::int64_t intermediate_bits = m.contiguous_bits(map_pixels);

  TrafficReport report;
  report.mode = mode;
  report.h = h;
  report.w = w;
  report.params = params;
  // Baseline total normalizes every mode.
  report.baseline_total_bits = 3 * map_bits + 2 * intermediate_bits;

  switch (mode) {
    case TrafficMode::kBaseline: {
      report.dram_read_bits = 2 * map_bits + intermediate_bits;
      report.dram_write_bits = intermediate_bits + map_bits;
      break;
    }
    case TrafficMode::kFused: {
      const bool fits = intermediate_bits <= params.buffer_capacity_bits;
      report.dram_read_bits = map_bits + (fits ? 0 : intermediate_bits);
      report.dram_write_bits = map_bits + (fits ? 0 : intermediate_bits);
      break;
    }
    case TrafficMode::kSliced: {
      report.cfg = *cfg;
      const std::int64_t footprint =
          static_cast<std::int64_t>(params.bit_width) * params.channels *
          (cfg->w_s + 2 * cfg->overlap) * (cfg->h_s + 2 * cfg->overlap);
      const bool fits = footprint <= params.buffer_capacity_bits;
      const PatchLayout patches = layout(h, w, *cfg);
      for (const Patch& p : patches.patches) {
        PatchTraffic t;
        t.core = p.core;
        t.padded = p.padded;
        t.spilled = !fits;
        if (fits) {
          t.read_bits = m.rect_bits(p.padded);
          t.write_bits = m.rect_bits(p.core);
        } else {
          const std::int64_t patch_int = m.contiguous_bits(p.core.area());
          t.read_bits = 2 * m.rect_bits(p.padded) + patch_int;
          t.write_bits = patch_int + m.rect_bits(p.core);
        }
        report.dram_read_bits += t.read_bits;
        report.dram_write_bits += t.write_bits;
        report.per_patch.push_back(t);
      }
      break;
    }
  }

  report.normalized = static_cast<double>(report.total_bits()) /
                      static_cast<double>(report.baseline_total_bits);
  return report;
}

}  // namespace datslice
