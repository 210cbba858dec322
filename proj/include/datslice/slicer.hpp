#pragma once

#include <compare>
#include <vector>

#include "datslice/deform_attn.hpp"

namespace datslice {

/// One slicing scheme: patch extents in pixels plus the overlap width k
/// shared with neighboring patches (k in {0, 1, 2}).
struct SliceConfig {
  int h_s = 0;
  int w_s = 0;
  int overlap = 0;

  auto operator<=>(const SliceConfig&) const = default;
  void validate() const;
};

/// A patch owns its core rectangle exclusively; its padded rectangle is the
/// core grown by the overlap on every interior side, clipped to the map.
struct Patch {
  Rect core;
  Rect padded;
};

struct PatchLayout {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<Patch> patches;  // row-major
};

/// Partitions an h x w map. Core rectangles tile the map exactly; last
/// row/column patches absorb any remainder.
PatchLayout layout(Eigen::Index h, Eigen::Index w, const SliceConfig& cfg);

struct SlicedForwardResult {
  Tensor output;                    // same dims as the input map
  std::vector<SampleTrace> traces;  // one per patch, layout order
  PatchLayout patch_layout;
};

/// Slicing strategy forward pass: attention runs per patch over its core
/// pixels, with sampling coordinates confined to the padded rectangle.
/// Patches are independent; `threads` > 1 evaluates them concurrently with
/// identical results.
SlicedForwardResult forward_sliced(const Tensor& x, const DeformAttnParams& params,
                                   const SliceConfig& cfg, int threads = 1);

enum class FidelityMetric { kRelativeL2, kMaxAbsError };

/// Agreement score in [0, 1] between precomputed full and sliced outputs:
/// 1 - min(1, |sliced - full|_2 / |full|_2) for the default metric.
double fidelity_from_outputs(const Tensor& full_output, const Tensor& sliced_output,
                             FidelityMetric metric = FidelityMetric::kRelativeL2);

/// Convenience wrapper running both forward passes.
double fidelity(const Tensor& x, const DeformAttnParams& params, const SliceConfig& cfg,
                FidelityMetric metric = FidelityMetric::kRelativeL2);

/// True when every sampled coordinate lies inside the rect's closed pixel
/// bounds.
bool trace_confined(const SampleTrace& trace, const Rect& bounds);

}  // namespace datslice
