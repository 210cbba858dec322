#include "datslice/divergence.hpp"

#include <cmath>
#include <string>

namespace datslice {

ProbVector::ProbVector(Eigen::ArrayXd values) : values_(std::move(values)) {
  if (values_.size() < 1) {
    throw ShapeError("ProbVector: empty");
  }
  if ((values_ < 0.0).any() || !values_.isFinite().all()) {
    throw ValidationError("ProbVector: entries must be finite and non-negative");
  }
  if (std::abs(values_.sum() - 1.0) > 1e-9) {
    throw ValidationError("ProbVector: entries must sum to 1 within 1e-9");
  }
  values_ = values_.max(kFloor);
}

ProbVector ProbVector::from_logits(const Eigen::ArrayXd& logits) {
  Eigen::ArrayXd v = (logits - logits.maxCoeff()).exp();
  v /= v.sum();
  return ProbVector(std::move(v));
}

void DivergenceParams::validate() const {
  auto check = [](double alpha, const char* name) {
    if (alpha == 0.0 || alpha == 1.0) {
      throw ValidationError(std::string("DivergenceParams: ") + name +
                            " must avoid the poles at 0 and 1");
    }
  };
  check(alpha_plus, "alpha_plus");
  check(alpha_minus, "alpha_minus");
}

double alpha_divergence(const ProbVector& p, const ProbVector& q, double alpha) {
  if (p.size() != q.size()) {
    throw ShapeError("alpha_divergence: length mismatch");
  }
  if (alpha == 0.0 || alpha == 1.0) {
    throw ValidationError("alpha_divergence: alpha in {0, 1} is a pole; use kl_divergence");
  }
  const Eigen::ArrayXd ratio = p.values() / q.values();
  const double sum = (q.values() * (ratio.pow(alpha) - 1.0)).sum();
  return sum / (alpha * (alpha - 1.0));
}

double kl_divergence(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) {
    throw ShapeError("kl_divergence: length mismatch");
  }
  return (p.values() * (p.values() / q.values()).log()).sum();
}

double clamped_alpha_divergence(const ProbVector& p, const ProbVector& q,
                                const DivergenceParams& params) {
  params.validate();
  return std::max(alpha_divergence(p, q, params.alpha_plus),
                  alpha_divergence(p, q, params.alpha_minus));
}

namespace {

void check_logit_batch(const Tensor& teacher, const Tensor& student) {
  if (teacher.rank() != 2 || student.rank() != 2) {
    throw ShapeError("kd_loss: logits must be rank 2 [batch, classes]");
  }
  if (!teacher.same_dims(student)) {
    throw ShapeError("kd_loss: teacher and student extents differ");
  }
}

}  // namespace

double kd_loss(const Tensor& teacher_logits, const Tensor& student_logits,
               const DivergenceParams& params) {
  check_logit_batch(teacher_logits, student_logits);
  const Eigen::Index batch = teacher_logits.dim(0);
  const Eigen::Index m = teacher_logits.dim(1);
  double total = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const ProbVector p =
        ProbVector::from_logits(teacher_logits.array().segment(b * m, m));
    const ProbVector q =
        ProbVector::from_logits(student_logits.array().segment(b * m, m));
    total += clamped_alpha_divergence(p, q, params);
  }
  return total / static_cast<double>(batch);
}

Tensor kd_loss_student_gradient(const Tensor& teacher_logits, const Tensor& student_logits,
                                const DivergenceParams& params) {
  check_logit_batch(teacher_logits, student_logits);
  params.validate();
  const Eigen::Index batch = teacher_logits.dim(0);
  const Eigen::Index m = teacher_logits.dim(1);
  Tensor grad(student_logits.dims());

  for (Eigen::Index b = 0; b < batch; ++b) {
    const ProbVector p =
        ProbVector::from_logits(teacher_logits.array().segment(b * m, m));
    const ProbVector q =
        ProbVector::from_logits(student_logits.array().segment(b * m, m));
    const double d_plus = alpha_divergence(p, q, params.alpha_plus);
    const double d_minus = alpha_divergence(p, q, params.alpha_minus);
    const double alpha = d_plus >= d_minus ? params.alpha_plus : params.alpha_minus;

    // dD/dq_j = -(1/alpha) (p_j/q_j)^alpha, composed with the softmax
    // Jacobian dq_j/ds_k = q_j (delta_jk - q_k).
    const Eigen::ArrayXd g = -(p.values() / q.values()).pow(alpha) / alpha;
    const double mean_g = (q.values() * g).sum();
    grad.array().segment(b * m, m) =
        q.values() * (g - mean_g) / static_cast<double>(batch);
  }
  return grad;
}

}  // namespace datslice
