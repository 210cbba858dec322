#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <span>
#include <vector>

#include "datslice/errors.hpp"

namespace datslice {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrixXd>;
using ConstMatrixMap = Eigen::Map<const RowMatrixXd>;

// Continuous image coordinate, index 0 = y (row), index 1 = x (column).
using Point2d = Eigen::Vector2d;

/// Dense numeric array, rank 1..4, flat row-major float64 storage.
/// Feature maps use the [C, H, W] convention.
class Tensor {
public:
  Tensor() = default;

  /// Zero-filled tensor of the given extents.
  explicit Tensor(std::vector<Eigen::Index> dims);

  /// Wraps existing flat row-major data; length must equal the product of dims.
  Tensor(std::vector<Eigen::Index> dims, Eigen::ArrayXd data);

  static Tensor filled(std::vector<Eigen::Index> dims, double value);

  Eigen::Index rank() const { return static_cast<Eigen::Index>(dims_.size()); }
  Eigen::Index dim(Eigen::Index axis) const { return dims_[static_cast<std::size_t>(axis)]; }
  const std::vector<Eigen::Index>& dims() const { return dims_; }
  Eigen::Index size() const { return data_.size(); }

  Eigen::ArrayXd& array() { return data_; }
  const Eigen::ArrayXd& array() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](Eigen::Index flat) { return data_[flat]; }
  double operator[](Eigen::Index flat) const { return data_[flat]; }

  double& at(std::initializer_list<Eigen::Index> idx) { return data_[flat_index(idx)]; }
  double at(std::initializer_list<Eigen::Index> idx) const { return data_[flat_index(idx)]; }

  /// Row-major reshape view; rows*cols must equal size().
  MatrixMap matrix(Eigen::Index rows, Eigen::Index cols);
  ConstMatrixMap matrix(Eigen::Index rows, Eigen::Index cols) const;

  /// Channel plane of a rank-3 [C, H, W] tensor, viewed as H x W.
  MatrixMap plane(Eigen::Index channel);
  ConstMatrixMap plane(Eigen::Index channel) const;

  bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

private:
  Eigen::Index flat_index(std::initializer_list<Eigen::Index> idx) const;

  std::vector<Eigen::Index> dims_;
  Eigen::ArrayXd data_;
};

/// Affine map along the last axis: input [*, D_in] x weight [D_out, D_in]
/// (+ bias [D_out]) -> [*, D_out].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Numerically stabilized softmax along `axis`. Output sums to 1 along the
/// axis; throws NumericError on non-finite input.
Tensor softmax(const Tensor& input, Eigen::Index axis);

/// In-place stabilized softmax over each row of an Eigen matrix block.
void softmax_rows(Eigen::Ref<RowMatrixXd> rows);

/// Samples a [C, H, W] map at continuous (y, x) positions with bilinear
/// interpolation; coordinates are clamped to [0, H-1] x [0, W-1] first.
/// Returns [C, N_points]. NaN coordinates throw NumericError.
Tensor bilinear_sample(const Tensor& map, std::span<const Point2d> points);

/// Single-point variant writing into a caller-provided channel vector.
void bilinear_sample_into(const Tensor& map, double y, double x, Eigen::Ref<Eigen::VectorXd> out);

/// Seed-reproducible tensor with entries uniform in [lo, hi).
Tensor uniform_random_tensor(std::vector<Eigen::Index> dims, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0);

}  // namespace datslice
