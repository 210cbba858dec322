#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "datslice/tensor.hpp"

namespace datslice {

/// Half-open pixel rectangle [y0, y1) x [x0, x1).
struct Rect {
  Eigen::Index y0 = 0;
  Eigen::Index x0 = 0;
  Eigen::Index y1 = 0;
  Eigen::Index x1 = 0;

  Eigen::Index height() const { return y1 - y0; }
  Eigen::Index width() const { return x1 - x0; }
  Eigen::Index area() const { return height() * width(); }
  bool contains(const Rect& inner) const {
    return inner.y0 >= y0 && inner.x0 >= x0 && inner.y1 <= y1 && inner.x1 <= x1;
  }
  /// True when the continuous coordinate lies within the closed pixel range
  /// [y0, y1-1] x [x0, x1-1] reachable by sampling inside this rect.
  bool contains_point(double y, double x) const {
    return y >= static_cast<double>(y0) && y <= static_cast<double>(y1 - 1) &&
           x >= static_cast<double>(x0) && x <= static_cast<double>(x1 - 1);
  }
  bool operator==(const Rect&) const = default;
};

/// One deformable attention layer: query/key/value/output projections plus a
/// small two-layer tanh network that turns the query feature at a reference
/// point into per-head 2-D sampling offsets, bounded by offset_scale.
struct DeformAttnParams {
  int d_model = 16;
  int n_heads = 4;
  int n_ref_points = 4;  // sampled keys per reference cell, per head
  int grid_stride = 7;
  double offset_scale = 14.0;
  bool per_head_offsets = true;
  std::uint64_t seed = 0;

  Tensor w_q, b_q;  // [d_model, d_model], [d_model]
  Tensor w_k, b_k;
  Tensor w_v, b_v;
  Tensor w_o, b_o;
  Tensor off_w1, off_b1;  // [hidden, d_model], [hidden]
  Tensor off_w2, off_b2;  // [2 * offset_groups * n_ref_points, hidden]

  int head_dim() const { return d_model / n_heads; }
  int offset_groups() const { return per_head_offsets ? n_heads : 1; }
  int offset_outputs() const { return 2 * offset_groups() * n_ref_points; }

  /// Checks the mutual-consistency invariants; throws ValidationError or
  /// ShapeError.
  void validate() const;
};

/// Deterministically synthesized parameters; every weight entry is drawn from
/// a fixed-seed uniform distribution in [-1/sqrt(D_in), 1/sqrt(D_in)].
DeformAttnParams make_params(int d_model, int n_heads, int n_ref_points, double offset_scale,
                             std::uint64_t seed, int grid_stride = 7,
                             bool per_head_offsets = true);

/// Loads parameters from a DATP weights file (see tensor_io).
DeformAttnParams make_params(const std::string& weights_path);

/// Reference points placed at the center of each stride x stride cell; ragged
/// cells at the bottom/right edge use their actual (clipped) center, so every
/// point stays inside [0, h-1] x [0, w-1].
struct ReferenceGrid {
  std::vector<Point2d> points;  // row-major cell order, (y, x)
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index stride = 0;
};

ReferenceGrid reference_grid(Eigen::Index h, Eigen::Index w, Eigen::Index stride);

/// One sampled key/value position. ref_* is the generating reference point,
/// (y, x) the continuous coordinate actually passed to the sampler (after
/// confinement clamping when a confinement rect is active).
struct SampleRecord {
  int head = 0;
  Eigen::Index cell = 0;
  double ref_y = 0, ref_x = 0;
  double y = 0, x = 0;
};

using SampleTrace = std::vector<SampleRecord>;

struct ForwardResult {
  Tensor output;  // same dims as the input map
  SampleTrace trace;
};

/// Attention over the pixels of `core`: a reference grid is laid over the
/// core, each cell samples n_ref_points keys/values per head at
/// offset-displaced positions, and every pixel query in the cell attends to
/// its cell's sampled set. Results are written into the core region of `out`.
/// When `confine` is set, sampling coordinates are clamped to it first.
SampleTrace forward_region(const Tensor& x, const DeformAttnParams& params, const Rect& core,
                           const std::optional<Rect>& confine, Tensor& out);

/// Reference (unsliced) forward pass over the whole map. Trace coordinates
/// are the raw reference + offset positions (no confinement).
ForwardResult forward_full(const Tensor& x, const DeformAttnParams& params);

}  // namespace datslice
