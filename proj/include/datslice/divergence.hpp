#pragma once

#include <Eigen/Dense>

#include "datslice/tensor.hpp"

namespace datslice {

/// Discrete probability distribution. Entries must be non-negative and sum
/// to 1 within 1e-9; construction floors every entry at 1e-12 so that later
/// ratios are well defined.
class ProbVector {
public:
  static constexpr double kFloor = 1e-12;

  explicit ProbVector(Eigen::ArrayXd values);

  /// Softmax of a logit vector (always a valid distribution).
  static ProbVector from_logits(const Eigen::ArrayXd& logits);

  const Eigen::ArrayXd& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }

private:
  Eigen::ArrayXd values_;
};

/// Orders of the two one-sided divergences plus the named settings used to
/// tag base/student/random sub-net logits in reports. The artifact ships
/// alpha_plus = 2 and alpha_minus = -1 as defaults; these are
/// library-chosen, config-overridable values.
struct DivergenceParams {
  double alpha_plus = 2.0;
  double alpha_minus = -1.0;
  double alpha_b = 1.0;
  double alpha_s = 1.0;
  double alpha_r = 1.0;

  void validate() const;
};

/// alpha-divergence D_alpha(p || q) = 1/(alpha(alpha-1)) sum q_i [(p_i/q_i)^alpha - 1].
/// alpha in {0, 1} is a domain error; use kl_divergence for the alpha -> 1 limit.
double alpha_divergence(const ProbVector& p, const ProbVector& q, double alpha);

/// KL(p || q) = sum p_i ln(p_i / q_i).
double kl_divergence(const ProbVector& p, const ProbVector& q);

/// max{ D_{alpha+}(p || q), D_{alpha-}(p || q) }.
double clamped_alpha_divergence(const ProbVector& p, const ProbVector& q,
                                const DivergenceParams& params);

/// Distillation loss: batch mean of the clamped divergence between softmaxed
/// teacher and student logits. Both tensors are [batch, classes].
double kd_loss(const Tensor& teacher_logits, const Tensor& student_logits,
               const DivergenceParams& params);

/// Analytic gradient of kd_loss with respect to each student logit (the max
/// branch is differentiated); same dims as student_logits.
Tensor kd_loss_student_gradient(const Tensor& teacher_logits, const Tensor& student_logits,
                                const DivergenceParams& params);

}  // namespace datslice
