#include "scalr/distill.hpp"

#include <cmath>

#include "scalr/nets.hpp"

namespace scalr {

LossOutput cosine_loss(const FeatureMatrix& student, const FeatureMatrix& teacher) {
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols())
    throw ConfigError("cosine_loss: shape mismatch");
  const int n = static_cast<int>(student.rows());
  if (n == 0) throw DataError("cosine_loss: empty batch");

  const FeatureMatrix s_hat = l2_normalize_rows(student);
  const FeatureMatrix t_hat = l2_normalize_rows(teacher);

  LossOutput out;
  out.count = n;
  FeatureMatrix grad_hat(n, student.cols());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::RowVectorXd diff = s_hat.row(i) - t_hat.row(i);
    const double dist = std::sqrt(diff.squaredNorm() + kDistEps);
    total += dist;
    grad_hat.row(i) = diff / (static_cast<double>(n) * dist);
  }
  out.value = total / n;
  out.grad_student = l2_normalize_rows_backward(student, grad_hat);
  return out;
}

LossOutput infonce_loss(const FeatureMatrix& student, const FeatureMatrix& teacher,
                        double temperature) {
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols())
    throw ConfigError("infonce_loss: shape mismatch");
  if (!(temperature > 0.0)) throw ConfigError("infonce_loss: temperature must be positive");
  const int n = static_cast<int>(student.rows());
  if (n < 2) throw DataError("infonce_loss: needs at least 2 rows (no negatives)");

  const FeatureMatrix s_hat = l2_normalize_rows(student);
  const FeatureMatrix t_hat = l2_normalize_rows(teacher);

  LossOutput out;
  out.count = n;
  FeatureMatrix grad_hat = FeatureMatrix::Zero(n, student.cols());
  double total = 0.0;
  Eigen::VectorXd logits(n), probs(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) logits[j] = s_hat.row(i).dot(t_hat.row(j)) / temperature;
    const double m = logits.maxCoeff();
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      probs[j] = std::exp(logits[j] - m);
      z += probs[j];
    }
    probs /= z;
    total += -(logits[i] - m - std::log(z));
    // d/d s_hat_i of -log p_ii = (1/tau) sum_j (p_ij - delta_ij) t_hat_j
    for (int j = 0; j < n; ++j) {
      const double coef = (probs[j] - (j == i ? 1.0 : 0.0)) / (temperature * n);
      grad_hat.row(i) += coef * t_hat.row(j);
    }
  }
  out.value = total / n;
  out.grad_student = l2_normalize_rows_backward(student, grad_hat);
  return out;
}

std::pair<FeatureMatrix, FeatureMatrix> false_negative_probe(
    const FeatureMatrix& teacher_dup, const FeatureMatrix& student_opt,
    double temperature) {
  bool has_dup = false;
  for (int i = 0; i < teacher_dup.rows() && !has_dup; ++i)
    for (int j = i + 1; j < teacher_dup.rows() && !has_dup; ++j)
      if ((teacher_dup.row(i) - teacher_dup.row(j)).lpNorm<Eigen::Infinity>() == 0.0)
        has_dup = true;
  if (!has_dup) throw DataError("false_negative_probe: teacher has no duplicate rows");

  const LossOutput cos = cosine_loss(student_opt, teacher_dup);
  const LossOutput nce = infonce_loss(student_opt, teacher_dup, temperature);
  return {cos.grad_student, nce.grad_student};
}

LossOutput multi_teacher_loss(const FeatureMatrix& student_concat,
                              const FeatureMatrix& teacher1,
                              const FeatureMatrix& teacher2) {
  if (teacher1.rows() != teacher2.rows())
    throw ConfigError("multi_teacher_loss: teacher row mismatch");
  if (student_concat.cols() != teacher1.cols() + teacher2.cols())
    throw ConfigError("multi_teacher_loss: split-size mismatch");
  if (student_concat.rows() != teacher1.rows())
    throw ConfigError("multi_teacher_loss: row mismatch");
  const int n = static_cast<int>(student_concat.rows());
  if (n == 0) throw DataError("multi_teacher_loss: empty batch");

  FeatureMatrix target(n, student_concat.cols());
  target.leftCols(teacher1.cols()) = l2_normalize_rows(teacher1);
  target.rightCols(teacher2.cols()) = l2_normalize_rows(teacher2);

  LossOutput out;
  out.count = n;
  out.grad_student.resize(n, student_concat.cols());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::RowVectorXd diff = student_concat.row(i) - target.row(i);
    const double dist = std::sqrt(diff.squaredNorm() + kDistEps);
    total += dist;
    out.grad_student.row(i) = diff / (static_cast<double>(n) * dist);
  }
  out.value = total / n;
  return out;
}

}  // namespace scalr
