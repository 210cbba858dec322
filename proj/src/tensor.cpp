#include "datslice/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "datslice/rng.hpp"

namespace datslice {

namespace {

Eigen::Index checked_volume(const std::vector<Eigen::Index>& dims) {
  if (dims.empty() || dims.size() > 4) {
    throw ShapeError("tensor rank must be between 1 and 4, got " + std::to_string(dims.size()));
  }
  Eigen::Index volume = 1;
  for (Eigen::Index d : dims) {
    if (d < 1) {
      throw ShapeError("tensor extents must be >= 1, got " + std::to_string(d));
    }
    volume *= d;
  }
  return volume;
}

}  // namespace

Tensor::Tensor(std::vector<Eigen::Index> dims) : dims_(std::move(dims)) {
  data_ = Eigen::ArrayXd::Zero(checked_volume(dims_));
}

Tensor::Tensor(std::vector<Eigen::Index> dims, Eigen::ArrayXd data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (checked_volume(dims_) != data_.size()) {
    throw ShapeError("tensor data length does not match extents");
  }
}

Tensor Tensor::filled(std::vector<Eigen::Index> dims, double value) {
  Tensor t(std::move(dims));
  t.data_.setConstant(value);
  return t;
}

Eigen::Index Tensor::flat_index(std::initializer_list<Eigen::Index> idx) const {
  Eigen::Index flat = 0;
  std::size_t axis = 0;
  for (Eigen::Index i : idx) {
    flat = flat * dims_[axis] + i;
    ++axis;
  }
  return flat;
}

MatrixMap Tensor::matrix(Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != size()) {
    throw ShapeError("matrix view extents do not cover the tensor");
  }
  return MatrixMap(data_.data(), rows, cols);
}

ConstMatrixMap Tensor::matrix(Eigen::Index rows, Eigen::Index cols) const {
  if (rows * cols != size()) {
    throw ShapeError("matrix view extents do not cover the tensor");
  }
  return ConstMatrixMap(data_.data(), rows, cols);
}

MatrixMap Tensor::plane(Eigen::Index channel) {
  const Eigen::Index h = dim(1), w = dim(2);
  return MatrixMap(data_.data() + channel * h * w, h, w);
}

ConstMatrixMap Tensor::plane(Eigen::Index channel) const {
  const Eigen::Index h = dim(1), w = dim(2);
  return ConstMatrixMap(data_.data() + channel * h * w, h, w);
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2) {
    throw ShapeError("linear: weight must be rank 2");
  }
  const Eigen::Index d_out = weight.dim(0);
  const Eigen::Index d_in = weight.dim(1);
  if (input.dim(input.rank() - 1) != d_in) {
    throw ShapeError("linear: input inner extent " + std::to_string(input.dim(input.rank() - 1)) +
                     " does not match weight inner extent " + std::to_string(d_in));
  }
  if (bias.rank() != 1 || bias.dim(0) != d_out) {
    throw ShapeError("linear: bias extent does not match weight rows");
  }

  const Eigen::Index rows = input.size() / d_in;
  std::vector<Eigen::Index> out_dims = input.dims();
  out_dims.back() = d_out;
  Tensor out(std::move(out_dims));

  Eigen::Map<const Eigen::VectorXd> b(bias.data(), d_out);
  out.matrix(rows, d_out).noalias() = input.matrix(rows, d_in) * weight.matrix(d_out, d_in).transpose();
  out.matrix(rows, d_out).rowwise() += b.transpose();
  return out;
}

Tensor softmax(const Tensor& input, Eigen::Index axis) {
  if (axis < 0 || axis >= input.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range");
  }
  if (!input.array().isFinite().all()) {
    throw NumericError("softmax: input contains non-finite values");
  }

  const Eigen::Index n = input.dim(axis);
  Eigen::Index inner = 1;
  for (Eigen::Index a = axis + 1; a < input.rank(); ++a) inner *= input.dim(a);
  const Eigen::Index outer = input.size() / (n * inner);

  Tensor out = input;
  for (Eigen::Index o = 0; o < outer; ++o) {
    for (Eigen::Index i = 0; i < inner; ++i) {
      const Eigen::Index base = o * n * inner + i;
      double mx = out[base];
      for (Eigen::Index j = 1; j < n; ++j) mx = std::max(mx, out[base + j * inner]);
      double sum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        double& v = out[base + j * inner];
        v = std::exp(v - mx);
        sum += v;
      }
      for (Eigen::Index j = 0; j < n; ++j) out[base + j * inner] /= sum;
    }
  }
  return out;
}

void softmax_rows(Eigen::Ref<RowMatrixXd> rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    auto row = rows.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp();
    row /= row.sum();
  }
}

void bilinear_sample_into(const Tensor& map, double y, double x, Eigen::Ref<Eigen::VectorXd> out) {
  if (std::isnan(y) || std::isnan(x)) {
    throw NumericError("bilinear_sample: NaN coordinate");
  }
  const Eigen::Index c = map.dim(0), h = map.dim(1), w = map.dim(2);
  const double yc = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const double xc = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(yc));
  const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(xc));
  const Eigen::Index y1 = std::min(y0 + 1, h - 1);
  const Eigen::Index x1 = std::min(x0 + 1, w - 1);
  const double wy = yc - static_cast<double>(y0);
  const double wx = xc - static_cast<double>(x0);

  const double w00 = (1.0 - wy) * (1.0 - wx);
  const double w01 = (1.0 - wy) * wx;
  const double w10 = wy * (1.0 - wx);
  const double w11 = wy * wx;

  const double* base = map.data();
  const Eigen::Index plane = h * w;
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    const double* p = base + ch * plane;
    out[ch] = w00 * p[y0 * w + x0] + w01 * p[y0 * w + x1] + w10 * p[y1 * w + x0] +
              w11 * p[y1 * w + x1];
  }
}

Tensor uniform_random_tensor(std::vector<Eigen::Index> dims, std::uint64_t seed, double lo,
                             double hi) {
  Tensor t(std::move(dims));
  SplitMix64 rng(seed);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Tensor bilinear_sample(const Tensor& map, std::span<const Point2d> points) {
  if (map.rank() != 3) {
    throw ShapeError("bilinear_sample: map must be rank 3 [C, H, W]");
  }
  const Eigen::Index c = map.dim(0);
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  if (n == 0) {
    throw ShapeError("bilinear_sample: empty point list");
  }
  Tensor out({c, n});
  Eigen::VectorXd column(c);
  for (Eigen::Index i = 0; i < n; ++i) {
    bilinear_sample_into(map, points[static_cast<std::size_t>(i)][0],
                         points[static_cast<std::size_t>(i)][1], column);
    for (Eigen::Index ch = 0; ch < c; ++ch) out[ch * n + i] = column[ch];
  }
  return out;
}

}  // namespace datslice
