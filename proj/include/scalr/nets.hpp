#pragma once

#include <memory>
#include <string>
#include <vector>

#include "scalr/common.hpp"
#include "scalr/geometry.hpp"
#include "scalr/rng.hpp"

namespace scalr {

inline constexpr double kNormEps = 1e-12;  // l2 normalization guard
inline constexpr double kBnEps = 1e-5;     // batch/layer norm variance guard
inline constexpr double kBnMomentum = 0.9; // running-statistics momentum

/// Named parameter tensor with its gradient accumulator. Vectors are stored
/// as 1 x n. no_decay marks bias and normalization parameters, which the
/// optimizer exempts from weight decay.
struct Param {
  std::string name;
  FeatureMatrix value;
  FeatureMatrix grad;
  bool no_decay = false;

  void init(const std::string& n, int rows, int cols, bool nd = false) {
    name = n;
    value = FeatureMatrix::Zero(rows, cols);
    grad = FeatureMatrix::Zero(rows, cols);
    no_decay = nd;
  }
  void zero_grad() { grad.setZero(); }
};

/// Symmetric uniform init scaled by 1/sqrt(fan_in).
void init_uniform(Param& p, int fan_in, Rng& rng);

/// Row-wise l2 normalization; rows with norm below kNormEps come back as
/// zeros.
FeatureMatrix l2_normalize_rows(const FeatureMatrix& feats);

/// Adjoint of l2_normalize_rows: maps d(loss)/d(normalized rows) back to
/// d(loss)/d(raw rows). Zero-guarded rows get zero gradient.
FeatureMatrix l2_normalize_rows_backward(const FeatureMatrix& raw,
                                         const FeatureMatrix& grad_normalized);

/// k-nearest-neighbor index lists over cloud positions (Euclidean, each
/// point is its own nearest neighbor). Lists have min(k, N) entries.
std::vector<std::vector<int>> knn_lists(const PointCloud& cloud, int k);

// ---------------------------------------------------------------------------
// Student backbone: per-point token embedding plus residual blocks that mix
// neighbor means through a per-point MLP.
// ---------------------------------------------------------------------------

struct StudentConfig {
  int f3d = 32;
  int depth = 4;
  int k = 16;
  bool trunk_layernorm = false;  // optional stabilization swap; off by default
};

/// Per-forward activation cache consumed by backward().
struct StudentCache {
  std::vector<std::vector<int>> neighbors;
  FeatureMatrix tokens;                 // N x 10
  FeatureMatrix feat5;                  // N x 5 raw per-point features
  FeatureMatrix embed_out;              // N x F3D
  std::vector<FeatureMatrix> block_in;  // input x of each block
  std::vector<FeatureMatrix> block_mix; // neighbor mean m
  std::vector<FeatureMatrix> block_pre; // pre-activation (post-norm if enabled)
  std::vector<FeatureMatrix> block_lin; // linear output before norm (layernorm path)
  std::vector<Eigen::VectorXd> ln_mean, ln_istd;
  std::vector<char> block_active;       // stochastic-depth mask
};

/// Gradients of a scalar loss with respect to the backbone inputs, holding
/// the neighbor graph fixed.
struct StudentInputGrad {
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> d_positions;
  Eigen::VectorXd d_intensity;
};

class StudentNet {
 public:
  StudentNet() = default;
  StudentNet(const StudentConfig& cfg, uint64_t seed);

  const StudentConfig& config() const { return cfg_; }

  /// Forward pass. Token i is [intensity, x, y, z, range] concatenated with
  /// the mean of that 5-vector over the point's k nearest neighbors.
  /// `neighbors` may supply a precomputed graph (must match cloud size);
  /// `drop_block` enables stochastic depth (block skipped = identity).
  FeatureMatrix forward(const PointCloud& cloud, StudentCache* cache = nullptr,
                        const std::vector<std::vector<int>>* neighbors = nullptr,
                        const std::vector<char>* drop_block = nullptr) const;

  /// Accumulates parameter gradients from d(loss)/d(output); returns the
  /// input gradients when requested.
  void backward(const StudentCache& cache, const FeatureMatrix& grad_out,
                StudentInputGrad* input_grad = nullptr);

  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
  void zero_grad();

  /// Block index of a parameter for layer-wise lr decay: depth 0 is the
  /// topmost trunk block, embed sits deepest.
  int depth_from_top(const Param& p) const;

 private:
  StudentConfig cfg_;
  Param embed_w_, embed_b_;
  struct Block {
    Param w, b;
    Param ln_gamma, ln_beta;  // only used when trunk_layernorm
  };
  std::vector<Block> blocks_;
};

// ---------------------------------------------------------------------------
// Heads
// ---------------------------------------------------------------------------

/// Common interface so the pretraining loop can swap projection heads.
class Head {
 public:
  virtual ~Head() = default;
  virtual FeatureMatrix forward(const FeatureMatrix& feats) = 0;
  /// Returns d(loss)/d(input feats); accumulates parameter grads.
  virtual FeatureMatrix backward(const FeatureMatrix& grad_out) = 0;
  virtual std::vector<Param*> parameters() = 0;
  void zero_grad() {
    for (Param* p : parameters()) p->zero_grad();
  }
};

/// Plain affine projection, the single-teacher psi.
class HeadLinear : public Head {
 public:
  HeadLinear() = default;
  HeadLinear(int in_dim, int out_dim, uint64_t seed);
  FeatureMatrix forward(const FeatureMatrix& feats) override;
  FeatureMatrix backward(const FeatureMatrix& grad_out) override;
  std::vector<Param*> parameters() override;

  Param weight, bias;

 private:
  FeatureMatrix in_;
};

/// Two-layer MLP head for distilling a pair of teachers: linear to 2*F3D,
/// layer norm, ReLU, linear to F2D1+F2D2, then each part is l2-normalized
/// independently and re-concatenated.
class HeadMultiTeacher : public Head {
 public:
  HeadMultiTeacher() = default;
  HeadMultiTeacher(int f3d, int f2d_1, int f2d_2, uint64_t seed);
  FeatureMatrix forward(const FeatureMatrix& feats) override;
  FeatureMatrix backward(const FeatureMatrix& grad_out) override;
  std::vector<Param*> parameters() override;

  int split1() const { return split1_; }
  int split2() const { return split2_; }

  Param w1, b1, ln_gamma, ln_beta, w2, b2;

 private:
  int split1_ = 0, split2_ = 0;
  // caches
  FeatureMatrix in_, z1_, ln_out_, relu_out_, z2_;
  Eigen::VectorXd ln_mean_, ln_istd_;
};

/// Linear probe kappa: batch norm followed by a linear classifier. Batch
/// statistics in training, running statistics in eval; the eval composition
/// is affine.
class HeadProbe : public Head {
 public:
  HeadProbe() = default;
  HeadProbe(int f3d, int num_classes, uint64_t seed);

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  FeatureMatrix forward(const FeatureMatrix& feats) override;
  FeatureMatrix backward(const FeatureMatrix& grad_out) override;
  std::vector<Param*> parameters() override;

  /// Folds running statistics + linear into y = x*A + c (eval-mode identity).
  void fold_affine(FeatureMatrix& a, Eigen::RowVectorXd& c) const;

  Param bn_gamma, bn_beta, linear_w, linear_b;
  Eigen::RowVectorXd running_mean, running_var;
  double momentum = kBnMomentum;

 private:
  bool training_ = true;
  // caches (training mode)
  FeatureMatrix in_, xhat_;
  Eigen::RowVectorXd batch_mean_, batch_istd_;
};

// ---------------------------------------------------------------------------
// Teachers: frozen synthetic feature generators standing in for pretrained
// vision backbones.
// ---------------------------------------------------------------------------

enum class TeacherKind { oracle_prototype, frozen_random };

struct Teacher {
  TeacherKind kind = TeacherKind::oracle_prototype;
  int f2d = 16;
  double noise_scale = 0.0;
  uint64_t seed = 0;
  FeatureMatrix prototypes;  // num_classes x F2D, unit rows (oracle kind)
  // frozen_random: fixed 2-layer map on (u, v, depth)
  FeatureMatrix mlp_w1, mlp_w2;
  Eigen::RowVectorXd mlp_b1, mlp_b2;

  /// FNV-1a over the parameter bytes; used to assert immutability across a
  /// training run.
  uint64_t checksum() const;
};

Teacher make_oracle_teacher(int num_classes, int f2d, double noise_scale, uint64_t seed);
Teacher make_frozen_random_teacher(int f2d, uint64_t seed);

/// Renders the teacher's feature map at the mapping's resolution.
/// oracle_prototype: each pixel hit by >= 1 point carries the prototype of
/// the nearest (smallest depth) point's label plus Gaussian noise; empty
/// pixels are in-painted from the nearest filled pixel. frozen_random: a
/// fixed random 2-layer map of (u, v, depth) per pixel. Deterministic given
/// the teacher seed and the sample identity.
FeatureMap2D teacher_features(const Teacher& teacher, const PointCloud& cloud,
                              const CameraModel& cam, const PixelMapping& mapping,
                              uint64_t sample_key);

}  // namespace scalr
