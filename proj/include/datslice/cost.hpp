#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "datslice/slicer.hpp"

namespace datslice {

/// Hardware-side constants of the resource and traffic models. bit_width is
/// the accelerator's storage precision; the reference computation stays in
/// float64 regardless.
struct CostModelParams {
  int bit_width = 16;
  double beta = 0.0;
  std::int64_t buffer_capacity_bits = 131072;
  std::int64_t burst_bytes = 64;
  int channels = 16;

  void validate() const;
};

/// Buffer resource estimate R = bit_width * (W_S + O_W) * (H_S + O_H) + beta
/// with O_W = O_H = overlap. Exact integer arithmetic plus beta.
double resource(const SliceConfig& cfg, const CostModelParams& params);

enum class TrafficMode { kBaseline, kFused, kSliced };

struct PatchTraffic {
  Rect core;
  Rect padded;
  std::int64_t read_bits = 0;
  std::int64_t write_bits = 0;
  bool spilled = false;
};

struct TrafficReport {
  TrafficMode mode = TrafficMode::kBaseline;
  std::optional<SliceConfig> cfg;
  Eigen::Index h = 0, w = 0;
  CostModelParams params;

  std::int64_t dram_read_bits = 0;
  std::int64_t dram_write_bits = 0;
  std::int64_t total_bits() const { return dram_read_bits + dram_write_bits; }
  std::int64_t baseline_total_bits = 0;
  double normalized = 0.0;

  std::vector<PatchTraffic> per_patch;  // sliced mode only
};

/// DRAM traffic at burst granularity for one deformable attention layer over
/// an h x w x channels map.
///
/// Model (feature maps stored channel-last, so a rectangle row is one
/// contiguous DRAM run; every run is rounded up to burst_bytes):
///   baseline  layer-by-layer: the sampling layer reads the full map and
///             writes per-pixel gathered features to DRAM; the attention
///             layer reads them back plus the map again and writes the
///             output. 2 map reads + intermediate write/read + output write.
///   fused     one map read and one output write; the intermediate stays
///             on-chip iff it fits in buffer_capacity_bits, else it spills
///             (write + read back).
///   sliced    per patch: the padded rectangle is read once and the core
///             written once, all intermediates on-chip, iff
///             bit_width * C * (w_s + 2k) * (h_s + 2k) <= buffer capacity;
///             otherwise that patch is processed layer-by-layer like the
///             baseline. Overlap pixels are re-read by each neighbor that
///             pads over them.
/// The intermediate gathered-feature size is modeled as one C-vector per
/// pixel of the region at bit_width precision.
TrafficReport simulate_traffic(Eigen::Index h, Eigen::Index w, TrafficMode mode,
                               const std::optional<SliceConfig>& cfg,
                               const CostModelParams& params);

}  // namespace datslice
