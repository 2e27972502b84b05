#pragma once

#include <utility>

#include "scalr/common.hpp"

namespace scalr {

/// Smoothing added under the square root of each row's distance; the plain
/// L2 norm is not differentiable at zero.
inline constexpr double kDistEps = 1e-12;

/// Scalar loss plus its gradient with respect to the student-side input
/// rows; the teacher side is constant.
struct LossOutput {
  double value = 0.0;
  FeatureMatrix grad_student;
  int count = 0;
};

/// Mean over matched rows of || normalize(f_i) - normalize(g_i) ||_2.
/// The gradient flows through the student normalization only.
/// Throws DataError on an empty batch.
LossOutput cosine_loss(const FeatureMatrix& student, const FeatureMatrix& teacher);

/// Contrastive baseline: -1/|V| sum_i log softmax_j(<f_i, g_j> / tau)[i],
/// rows l2-normalized internally, negatives are all in-batch pairs.
/// Requires at least 2 rows.
LossOutput infonce_loss(const FeatureMatrix& student, const FeatureMatrix& teacher,
                        double temperature);

/// Gradients of both losses at the cosine optimum (student == teacher) when
/// the teacher contains duplicated rows: the cosine gradient vanishes while
/// the contrastive one keeps repelling the duplicates.
/// Throws DataError if the teacher has no duplicate rows.
std::pair<FeatureMatrix, FeatureMatrix> false_negative_probe(
    const FeatureMatrix& teacher_dup, const FeatureMatrix& student_opt,
    double temperature);

/// Distance loss on concatenated per-part-normalized features. Inputs are
/// already normalized per part (each part carries unit norm); the
/// concatenation is NOT re-normalized.
LossOutput multi_teacher_loss(const FeatureMatrix& student_concat,
                              const FeatureMatrix& teacher1,
                              const FeatureMatrix& teacher2);

}  // namespace scalr
