#include "datslice/deform_attn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "datslice/rng.hpp"
#include "datslice/tensor_io.hpp"

namespace datslice {

namespace {

void expect_dims(const Tensor& t, std::vector<Eigen::Index> dims, const char* name) {
  if (t.dims() != dims) {
    throw ShapeError(std::string("DeformAttnParams: tensor ") + name + " has inconsistent extents");
  }
}

Tensor random_tensor(std::vector<Eigen::Index> dims, Eigen::Index fan_in, SplitMix64& rng) {
  Tensor t(std::move(dims));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void DeformAttnParams::validate() const {
  if (d_model < 1 || n_heads < 1) {
    throw ValidationError("DeformAttnParams: d_model and n_heads must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ValidationError("DeformAttnParams: d_model " + std::to_string(d_model) +
                          " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (n_ref_points < 1) {
    throw ValidationError("DeformAttnParams: n_ref_points must be >= 1");
  }
  if (grid_stride < 1) {
    throw ValidationError("DeformAttnParams: grid_stride must be >= 1");
  }
  if (!(offset_scale > 0.0)) {
    throw ValidationError("DeformAttnParams: offset_scale must be > 0");
  }
  const Eigen::Index d = d_model;
  expect_dims(w_q, {d, d}, "w_q");
  expect_dims(b_q, {d}, "b_q");
  expect_dims(w_k, {d, d}, "w_k");
  expect_dims(b_k, {d}, "b_k");
  expect_dims(w_v, {d, d}, "w_v");
  expect_dims(b_v, {d}, "b_v");
  expect_dims(w_o, {d, d}, "w_o");
  expect_dims(b_o, {d}, "b_o");
  if (off_w1.rank() != 2 || off_w1.dim(1) != d) {
    throw ShapeError("DeformAttnParams: off_w1 must be [hidden, d_model]");
  }
  const Eigen::Index hidden = off_w1.dim(0);
  expect_dims(off_b1, {hidden}, "off_b1");
  expect_dims(off_w2, {offset_outputs(), hidden}, "off_w2");
  expect_dims(off_b2, {offset_outputs()}, "off_b2");
}

DeformAttnParams make_params(int d_model, int n_heads, int n_ref_points, double offset_scale,
                             std::uint64_t seed, int grid_stride, bool per_head_offsets) {
  DeformAttnParams p;
  p.d_model = d_model;
  p.n_heads = n_heads;
  p.n_ref_points = n_ref_points;
  p.grid_stride = grid_stride;
  p.offset_scale = offset_scale;
  p.per_head_offsets = per_head_offsets;
  p.seed = seed;
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
    throw ValidationError("make_params: d_model " + std::to_string(d_model) +
                          " not divisible by n_heads " + std::to_string(n_heads));
  }

  const Eigen::Index d = d_model;
  const Eigen::Index hidden = d;
  const Eigen::Index n_off = p.offset_outputs();

  SplitMix64 rng(seed);
  p.w_q = random_tensor({d, d}, d, rng);
  p.b_q = random_tensor({d}, d, rng);
  p.w_k = random_tensor({d, d}, d, rng);
  p.b_k = random_tensor({d}, d, rng);
  p.w_v = random_tensor({d, d}, d, rng);
  p.b_v = random_tensor({d}, d, rng);
  p.w_o = random_tensor({d, d}, d, rng);
  p.b_o = random_tensor({d}, d, rng);
  p.off_w1 = random_tensor({hidden, d}, d, rng);
  p.off_b1 = random_tensor({hidden}, d, rng);
  p.off_w2 = random_tensor({n_off, hidden}, hidden, rng);
  p.off_b2 = random_tensor({n_off}, hidden, rng);
  p.validate();
  return p;
}

DeformAttnParams make_params(const std::string& weights_path) { return load_params(weights_path); }

ReferenceGrid reference_grid(Eigen::Index h, Eigen::Index w, Eigen::Index stride) {
  if (h < 1 || w < 1) {
    throw ShapeError("reference_grid: extents must be >= 1");
  }
  if (stride < 1) {
    throw ValidationError("reference_grid: stride must be >= 1");
  }
  ReferenceGrid grid;
  grid.stride = stride;
  grid.rows = (h + stride - 1) / stride;
  grid.cols = (w + stride - 1) / stride;
  grid.points.reserve(static_cast<std::size_t>(grid.rows * grid.cols));
  for (Eigen::Index i = 0; i < grid.rows; ++i) {
    const Eigen::Index ylo = i * stride;
    const Eigen::Index yhi = std::min(ylo + stride, h);
    const double cy = 0.5 * static_cast<double>(ylo + yhi - 1);
    for (Eigen::Index j = 0; j < grid.cols; ++j) {
      const Eigen::Index xlo = j * stride;
      const Eigen::Index xhi = std::min(xlo + stride, w);
      const double cx = 0.5 * static_cast<double>(xlo + xhi - 1);
      grid.points.emplace_back(cy, cx);
    }
  }
  return grid;
}

SampleTrace forward_region(const Tensor& x, const DeformAttnParams& params, const Rect& core,
                           const std::optional<Rect>& confine, Tensor& out) {
  params.validate();
  if (x.rank() != 3) {
    throw ShapeError("forward: input must be rank 3 [C, H, W]");
  }
  const Eigen::Index c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (c != params.d_model) {
    throw ShapeError("forward: channel count " + std::to_string(c) + " != d_model " +
                     std::to_string(params.d_model));
  }
  if (!Rect{0, 0, h, w}.contains(core) || core.area() < 1) {
    throw ShapeError("forward: core rect outside the map");
  }
  if (!out.same_dims(x)) {
    throw ShapeError("forward: output buffer extents must match the input map");
  }

  const int heads = params.n_heads;
  const int dh = params.head_dim();
  const int n_pts = params.n_ref_points;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const ConstMatrixMap wq = params.w_q.matrix(c, c);
  const ConstMatrixMap wk = params.w_k.matrix(c, c);
  const ConstMatrixMap wv = params.w_v.matrix(c, c);
  const ConstMatrixMap wo = params.w_o.matrix(c, c);
  Eigen::Map<const Eigen::VectorXd> bq(params.b_q.data(), c);
  Eigen::Map<const Eigen::VectorXd> bk(params.b_k.data(), c);
  Eigen::Map<const Eigen::VectorXd> bv(params.b_v.data(), c);
  Eigen::Map<const Eigen::VectorXd> bo(params.b_o.data(), c);
  const Eigen::Index hidden = params.off_w1.dim(0);
  const ConstMatrixMap ow1 = params.off_w1.matrix(hidden, c);
  const ConstMatrixMap ow2 = params.off_w2.matrix(params.offset_outputs(), hidden);
  Eigen::Map<const Eigen::VectorXd> ob1(params.off_b1.data(), hidden);
  Eigen::Map<const Eigen::VectorXd> ob2(params.off_b2.data(), params.offset_outputs());

  const ReferenceGrid grid = reference_grid(core.height(), core.width(), params.grid_stride);
  SampleTrace trace;
  trace.reserve(grid.points.size() * static_cast<std::size_t>(heads * n_pts));

  Eigen::VectorXd x_ref(c), q_ref(c), hid(hidden), off_raw(params.offset_outputs());
  Eigen::VectorXd sample_col(c), key_full(c), val_full(c);
  RowMatrixXd keys(heads * n_pts, dh), values(heads * n_pts, dh);

  for (Eigen::Index cell = 0; cell < static_cast<Eigen::Index>(grid.points.size()); ++cell) {
    const Eigen::Index ci = cell / grid.cols;
    const Eigen::Index cj = cell % grid.cols;
    const double ref_y = grid.points[static_cast<std::size_t>(cell)][0] + static_cast<double>(core.y0);
    const double ref_x = grid.points[static_cast<std::size_t>(cell)][1] + static_cast<double>(core.x0);

    // Offsets from the query feature at the reference point.
    bilinear_sample_into(x, ref_y, ref_x, x_ref);
    q_ref.noalias() = wq * x_ref;
    q_ref += bq;
    hid.noalias() = ow1 * q_ref;
    hid += ob1;
    hid = hid.array().tanh();
    off_raw.noalias() = ow2 * hid;
    off_raw += ob2;
    off_raw = off_raw.array().tanh() * params.offset_scale;

    for (int head = 0; head < heads; ++head) {
      const int group = params.per_head_offsets ? head : 0;
      for (int j = 0; j < n_pts; ++j) {
        const Eigen::Index base = 2 * (static_cast<Eigen::Index>(group) * n_pts + j);
        double sy = ref_y + off_raw[base];
        double sx = ref_x + off_raw[base + 1];
        if (confine) {
          sy = std::clamp(sy, static_cast<double>(confine->y0), static_cast<double>(confine->y1 - 1));
          sx = std::clamp(sx, static_cast<double>(confine->x0), static_cast<double>(confine->x1 - 1));
        }
        trace.push_back({head, cell, ref_y, ref_x, sy, sx});

        bilinear_sample_into(x, sy, sx, sample_col);
        key_full.noalias() = wk * sample_col;
        key_full += bk;
        val_full.noalias() = wv * sample_col;
        val_full += bv;
        keys.row(head * n_pts + j) = key_full.segment(head * dh, dh);
        values.row(head * n_pts + j) = val_full.segment(head * dh, dh);
      }
    }

    // Pixel queries of this cell attend to the cell's sampled set, head-wise.
    const Eigen::Index py0 = core.y0 + ci * grid.stride;
    const Eigen::Index py1 = std::min(py0 + grid.stride, core.y1);
    const Eigen::Index px0 = core.x0 + cj * grid.stride;
    const Eigen::Index px1 = std::min(px0 + grid.stride, core.x1);
    const Eigen::Index n_pix = (py1 - py0) * (px1 - px0);

    RowMatrixXd pix(n_pix, c);
    Eigen::Index row = 0;
    for (Eigen::Index y = py0; y < py1; ++y) {
      for (Eigen::Index xx = px0; xx < px1; ++xx, ++row) {
        for (Eigen::Index ch = 0; ch < c; ++ch) pix(row, ch) = x[(ch * h + y) * w + xx];
      }
    }

    RowMatrixXd queries(n_pix, c);
    queries.noalias() = pix * wq.transpose();
    queries.rowwise() += bq.transpose();

    RowMatrixXd attn_out(n_pix, c);
    RowMatrixXd scores(n_pix, n_pts);
    for (int head = 0; head < heads; ++head) {
      auto q_h = queries.middleCols(head * dh, dh);
      auto k_h = keys.middleRows(head * n_pts, n_pts);
      auto v_h = values.middleRows(head * n_pts, n_pts);
      scores.noalias() = q_h * k_h.transpose();
      scores *= scale;
      softmax_rows(scores);
      attn_out.middleCols(head * dh, dh).noalias() = scores * v_h;
    }

    RowMatrixXd projected(n_pix, c);
    projected.noalias() = attn_out * wo.transpose();
    projected.rowwise() += bo.transpose();

    row = 0;
    for (Eigen::Index y = py0; y < py1; ++y) {
      for (Eigen::Index xx = px0; xx < px1; ++xx, ++row) {
        for (Eigen::Index ch = 0; ch < c; ++ch) out[(ch * h + y) * w + xx] = projected(row, ch);
      }
    }
  }
  return trace;
}

ForwardResult forward_full(const Tensor& x, const DeformAttnParams& params) {
  ForwardResult result;
  result.output = Tensor(x.dims());
  const Rect full{0, 0, x.dim(1), x.dim(2)};
  result.trace = forward_region(x, params, full, std::nullopt, result.output);
  return result;
}

}  // namespace datslice
