#include "scalr/nets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>

namespace scalr {

void init_uniform(Param& p, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int r = 0; r < p.value.rows(); ++r)
    for (int c = 0; c < p.value.cols(); ++c) p.value(r, c) = rng.uniform(-bound, bound);
}

FeatureMatrix l2_normalize_rows(const FeatureMatrix& feats) {
  FeatureMatrix out = feats;
  for (int i = 0; i < feats.rows(); ++i) {
    const double n = feats.row(i).norm();
    if (n < kNormEps)
      out.row(i).setZero();
    else
      out.row(i) /= n;
  }
  return out;
}

FeatureMatrix l2_normalize_rows_backward(const FeatureMatrix& raw,
                                         const FeatureMatrix& grad_normalized) {
  FeatureMatrix out = FeatureMatrix::Zero(raw.rows(), raw.cols());
  for (int i = 0; i < raw.rows(); ++i) {
    const double n = raw.row(i).norm();
    if (n < kNormEps) continue;
    const Eigen::RowVectorXd y = raw.row(i) / n;
    const double dot = grad_normalized.row(i).dot(y);
    out.row(i) = (grad_normalized.row(i) - dot * y) / n;
  }
  return out;
}

std::vector<std::vector<int>> knn_lists(const PointCloud& cloud, int k) {
  const int n = cloud.size();
  const int kk = std::min(k, n);
  std::vector<std::vector<int>> lists(n);
  std::vector<std::pair<double, int>> best;
  best.reserve(kk + 1);
  for (int i = 0; i < n; ++i) {
    best.clear();
    const Vec3 pi = cloud.positions.row(i).transpose();
    for (int j = 0; j < n; ++j) {
      const double d = (cloud.positions.row(j).transpose() - pi).squaredNorm();
      const std::pair<double, int> cand(d, j);
      if (static_cast<int>(best.size()) < kk) {
        best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
      } else if (cand < best.back()) {
        best.pop_back();
        best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
      }
    }
    lists[i].resize(kk);
    for (int m = 0; m < kk; ++m) lists[i][m] = best[m].second;
  }
  return lists;
}

namespace {

// m_i = mean over neighbors of x; adjoint scatters gm_i / |N(i)| back.
FeatureMatrix neighbor_mean(const FeatureMatrix& x,
                            const std::vector<std::vector<int>>& nb) {
  FeatureMatrix m = FeatureMatrix::Zero(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    for (int j : nb[i]) m.row(i) += x.row(j);
    m.row(i) /= static_cast<double>(nb[i].size());
  }
  return m;
}

FeatureMatrix neighbor_mean_adjoint(const FeatureMatrix& gm,
                                    const std::vector<std::vector<int>>& nb) {
  FeatureMatrix gx = FeatureMatrix::Zero(gm.rows(), gm.cols());
  for (int i = 0; i < gm.rows(); ++i) {
    const double w = 1.0 / static_cast<double>(nb[i].size());
    for (int j : nb[i]) gx.row(j) += w * gm.row(i);
  }
  return gx;
}

// Row-wise layer norm; returns normalized output, fills mean/istd.
FeatureMatrix layer_norm(const FeatureMatrix& z, const Param& gamma, const Param& beta,
                         Eigen::VectorXd& mean, Eigen::VectorXd& istd) {
  const int n = static_cast<int>(z.rows());
  const int d = static_cast<int>(z.cols());
  mean.resize(n);
  istd.resize(n);
  FeatureMatrix out(n, d);
  for (int i = 0; i < n; ++i) {
    const double mu = z.row(i).mean();
    const double var = (z.row(i).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + kBnEps);
    mean[i] = mu;
    istd[i] = is;
    out.row(i) = ((z.row(i).array() - mu) * is) * gamma.value.row(0).array() +
                 beta.value.row(0).array();
  }
  return out;
}

FeatureMatrix layer_norm_backward(const FeatureMatrix& z, const Param& gamma,
                                  const Eigen::VectorXd& mean, const Eigen::VectorXd& istd,
                                  const FeatureMatrix& gout, Param& ggamma, Param& gbeta) {
  const int n = static_cast<int>(z.rows());
  const int d = static_cast<int>(z.cols());
  FeatureMatrix gz(n, d);
  for (int i = 0; i < n; ++i) {
    const Eigen::ArrayXd xhat = (z.row(i).transpose().array() - mean[i]) * istd[i];
    const Eigen::ArrayXd gy = gout.row(i).transpose().array();
    ggamma.grad.row(0).array() += (gy * xhat).transpose();
    gbeta.grad.row(0).array() += gy.transpose();
    const Eigen::ArrayXd gxhat = gy * gamma.value.row(0).transpose().array();
    const double m1 = gxhat.mean();
    const double m2 = (gxhat * xhat).mean();
    gz.row(i) = (istd[i] * (gxhat - m1 - xhat * m2)).transpose();
  }
  (void)d;
  return gz;
}

}  // namespace

// ---------------------------------------------------------------------------
// StudentNet
// ---------------------------------------------------------------------------

StudentNet::StudentNet(const StudentConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.f3d < 1 || cfg.depth < 0 || cfg.k < 1)
    throw ConfigError("student: invalid dimensions");
  Rng rng(mix_seed(seed, {0x57u}));
  embed_w_.init("backbone.embed.w", 10, cfg.f3d);
  embed_b_.init("backbone.embed.b", 1, cfg.f3d, true);
  init_uniform(embed_w_, 10, rng);
  init_uniform(embed_b_, 10, rng);
  blocks_.resize(cfg.depth);
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string base = "backbone.block" + std::to_string(i) + ".";
    blocks_[i].w.init(base + "w", cfg.f3d, cfg.f3d);
    blocks_[i].b.init(base + "b", 1, cfg.f3d, true);
    init_uniform(blocks_[i].w, cfg.f3d, rng);
    init_uniform(blocks_[i].b, cfg.f3d, rng);
    if (cfg.trunk_layernorm) {
      blocks_[i].ln_gamma.init(base + "ln.gamma", 1, cfg.f3d, true);
      blocks_[i].ln_beta.init(base + "ln.beta", 1, cfg.f3d, true);
      blocks_[i].ln_gamma.value.setOnes();
    }
  }
}

FeatureMatrix StudentNet::forward(const PointCloud& cloud, StudentCache* cache,
                                  const std::vector<std::vector<int>>* neighbors,
                                  const std::vector<char>* drop_block) const {
  const int n = cloud.size();
  if (n < 1) throw DataError("student: empty point cloud");

  std::vector<std::vector<int>> local_nb;
  if (neighbors == nullptr) {
    local_nb = knn_lists(cloud, cfg_.k);
    neighbors = &local_nb;
  }

  FeatureMatrix feat5(n, 5);
  for (int i = 0; i < n; ++i) {
    const double x = cloud.positions(i, 0);
    const double y = cloud.positions(i, 1);
    const double z = cloud.positions(i, 2);
    feat5(i, 0) = cloud.intensity[i];
    feat5(i, 1) = x;
    feat5(i, 2) = y;
    feat5(i, 3) = z;
    feat5(i, 4) = std::sqrt(x * x + y * y + z * z);
  }
  FeatureMatrix tokens(n, 10);
  tokens.leftCols(5) = feat5;
  tokens.rightCols(5) = neighbor_mean(feat5, *neighbors);

  FeatureMatrix x = tokens * embed_w_.value;
  x.rowwise() += embed_b_.value.row(0);

  if (cache) {
    cache->neighbors = *neighbors;
    cache->feat5 = feat5;
    cache->tokens = tokens;
    cache->embed_out = x;
    cache->block_in.clear();
    cache->block_mix.clear();
    cache->block_pre.clear();
    cache->block_lin.clear();
    cache->ln_mean.clear();
    cache->ln_istd.clear();
    cache->block_active.assign(blocks_.size(), 1);
  }

  for (size_t bi = 0; bi < blocks_.size(); ++bi) {
    const bool active = (drop_block == nullptr) || !(*drop_block)[bi];
    if (cache) cache->block_active[bi] = active ? 1 : 0;
    if (!active) {
      if (cache) {
        cache->block_in.emplace_back();
        cache->block_mix.emplace_back();
        cache->block_pre.emplace_back();
        cache->block_lin.emplace_back();
        cache->ln_mean.emplace_back();
        cache->ln_istd.emplace_back();
      }
      continue;
    }
    FeatureMatrix m = neighbor_mean(x, *neighbors);
    FeatureMatrix lin = m * blocks_[bi].w.value;
    lin.rowwise() += blocks_[bi].b.value.row(0);
    FeatureMatrix pre;
    Eigen::VectorXd ln_mean, ln_istd;
    if (cfg_.trunk_layernorm)
      pre = layer_norm(lin, blocks_[bi].ln_gamma, blocks_[bi].ln_beta, ln_mean, ln_istd);
    else
      pre = lin;
    if (cache) {
      cache->block_in.push_back(x);
      cache->block_mix.push_back(std::move(m));
      cache->block_pre.push_back(pre);
      cache->block_lin.push_back(cfg_.trunk_layernorm ? lin : FeatureMatrix());
      cache->ln_mean.push_back(std::move(ln_mean));
      cache->ln_istd.push_back(std::move(ln_istd));
    }
    x += pre.cwiseMax(0.0);
  }
  return x;
}

void StudentNet::backward(const StudentCache& cache, const FeatureMatrix& grad_out,
                          StudentInputGrad* input_grad) {
  FeatureMatrix g = grad_out;
  for (int bi = static_cast<int>(blocks_.size()) - 1; bi >= 0; --bi) {
    if (!cache.block_active[bi]) continue;
    const FeatureMatrix& pre = cache.block_pre[bi];
    FeatureMatrix grelu = (pre.array() > 0.0).select(g, 0.0);
    FeatureMatrix glin;
    if (cfg_.trunk_layernorm) {
      glin = layer_norm_backward(cache.block_lin[bi], blocks_[bi].ln_gamma,
                                 cache.ln_mean[bi], cache.ln_istd[bi], grelu,
                                 blocks_[bi].ln_gamma, blocks_[bi].ln_beta);
    } else {
      glin = std::move(grelu);
    }
    blocks_[bi].w.grad.noalias() += cache.block_mix[bi].transpose() * glin;
    blocks_[bi].b.grad.row(0) += glin.colwise().sum();
    FeatureMatrix gm = glin * blocks_[bi].w.value.transpose();
    g += neighbor_mean_adjoint(gm, cache.neighbors);
  }
  embed_w_.grad.noalias() += cache.tokens.transpose() * g;
  embed_b_.grad.row(0) += g.colwise().sum();
  if (input_grad) {
    FeatureMatrix gtok = g * embed_w_.value.transpose();
    FeatureMatrix gfeat5 = gtok.leftCols(5);
    gfeat5 += neighbor_mean_adjoint(gtok.rightCols(5), cache.neighbors);
    const int n = static_cast<int>(gfeat5.rows());
    input_grad->d_positions.resize(n, 3);
    input_grad->d_intensity.resize(n);
    for (int i = 0; i < n; ++i) {
      input_grad->d_intensity[i] = gfeat5(i, 0);
      Vec3 dp(gfeat5(i, 1), gfeat5(i, 2), gfeat5(i, 3));
      const double r = cache.feat5(i, 4);
      if (r > 1e-12) {
        const Vec3 p(cache.feat5(i, 1), cache.feat5(i, 2), cache.feat5(i, 3));
        dp += gfeat5(i, 4) * p / r;
      }
      input_grad->d_positions.row(i) = dp.transpose();
    }
  }
}

std::vector<Param*> StudentNet::parameters() {
  std::vector<Param*> ps{&embed_w_, &embed_b_};
  for (auto& b : blocks_) {
    ps.push_back(&b.w);
    ps.push_back(&b.b);
    if (cfg_.trunk_layernorm) {
      ps.push_back(&b.ln_gamma);
      ps.push_back(&b.ln_beta);
    }
  }
  return ps;
}

std::vector<const Param*> StudentNet::parameters() const {
  std::vector<const Param*> ps{&embed_w_, &embed_b_};
  for (const auto& b : blocks_) {
    ps.push_back(&b.w);
    ps.push_back(&b.b);
    if (cfg_.trunk_layernorm) {
      ps.push_back(&b.ln_gamma);
      ps.push_back(&b.ln_beta);
    }
  }
  return ps;
}

void StudentNet::zero_grad() {
  for (Param* p : parameters()) p->zero_grad();
}

int StudentNet::depth_from_top(const Param& p) const {
  // classifier head is 0 by convention; topmost trunk block is 1
  for (int i = 0; i < static_cast<int>(blocks_.size()); ++i) {
    if (&p == &blocks_[i].w || &p == &blocks_[i].b || &p == &blocks_[i].ln_gamma ||
        &p == &blocks_[i].ln_beta)
      return static_cast<int>(blocks_.size()) - i;
  }
  return static_cast<int>(blocks_.size()) + 1;  // embedding
}

// ---------------------------------------------------------------------------
// HeadLinear
// ---------------------------------------------------------------------------

HeadLinear::HeadLinear(int in_dim, int out_dim, uint64_t seed) {
  Rng rng(mix_seed(seed, {0x11u}));
  weight.init("head.linear.w", in_dim, out_dim);
  bias.init("head.linear.b", 1, out_dim, true);
  init_uniform(weight, in_dim, rng);
  init_uniform(bias, in_dim, rng);
}

FeatureMatrix HeadLinear::forward(const FeatureMatrix& feats) {
  if (feats.cols() != weight.value.rows()) throw ConfigError("head.linear: dim mismatch");
  in_ = feats;
  FeatureMatrix out = feats * weight.value;
  out.rowwise() += bias.value.row(0);
  return out;
}

FeatureMatrix HeadLinear::backward(const FeatureMatrix& grad_out) {
  weight.grad.noalias() += in_.transpose() * grad_out;
  bias.grad.row(0) += grad_out.colwise().sum();
  return grad_out * weight.value.transpose();
}

std::vector<Param*> HeadLinear::parameters() { return {&weight, &bias}; }

// ---------------------------------------------------------------------------
// HeadMultiTeacher
// ---------------------------------------------------------------------------

HeadMultiTeacher::HeadMultiTeacher(int f3d, int f2d_1, int f2d_2, uint64_t seed)
    : split1_(f2d_1), split2_(f2d_2) {
  Rng rng(mix_seed(seed, {0x21u}));
  const int hidden = 2 * f3d;
  w1.init("head.mt.w1", f3d, hidden);
  b1.init("head.mt.b1", 1, hidden, true);
  ln_gamma.init("head.mt.ln.gamma", 1, hidden, true);
  ln_beta.init("head.mt.ln.beta", 1, hidden, true);
  w2.init("head.mt.w2", hidden, f2d_1 + f2d_2);
  b2.init("head.mt.b2", 1, f2d_1 + f2d_2, true);
  init_uniform(w1, f3d, rng);
  init_uniform(b1, f3d, rng);
  ln_gamma.value.setOnes();
  init_uniform(w2, hidden, rng);
  init_uniform(b2, hidden, rng);
}

FeatureMatrix HeadMultiTeacher::forward(const FeatureMatrix& feats) {
  if (feats.cols() != w1.value.rows()) throw ConfigError("head.mt: dim mismatch");
  in_ = feats;
  z1_ = feats * w1.value;
  z1_.rowwise() += b1.value.row(0);
  ln_out_ = layer_norm(z1_, ln_gamma, ln_beta, ln_mean_, ln_istd_);
  relu_out_ = ln_out_.cwiseMax(0.0);
  z2_ = relu_out_ * w2.value;
  z2_.rowwise() += b2.value.row(0);
  FeatureMatrix out(z2_.rows(), z2_.cols());
  out.leftCols(split1_) = l2_normalize_rows(z2_.leftCols(split1_));
  out.rightCols(split2_) = l2_normalize_rows(z2_.rightCols(split2_));
  return out;
}

FeatureMatrix HeadMultiTeacher::backward(const FeatureMatrix& grad_out) {
  FeatureMatrix gz2(z2_.rows(), z2_.cols());
  gz2.leftCols(split1_) =
      l2_normalize_rows_backward(z2_.leftCols(split1_), grad_out.leftCols(split1_));
  gz2.rightCols(split2_) =
      l2_normalize_rows_backward(z2_.rightCols(split2_), grad_out.rightCols(split2_));
  w2.grad.noalias() += relu_out_.transpose() * gz2;
  b2.grad.row(0) += gz2.colwise().sum();
  FeatureMatrix grelu = gz2 * w2.value.transpose();
  grelu = (ln_out_.array() > 0.0).select(grelu, 0.0);
  FeatureMatrix gz1 =
      layer_norm_backward(z1_, ln_gamma, ln_mean_, ln_istd_, grelu, ln_gamma, ln_beta);
  w1.grad.noalias() += in_.transpose() * gz1;
  b1.grad.row(0) += gz1.colwise().sum();
  return gz1 * w1.value.transpose();
}

std::vector<Param*> HeadMultiTeacher::parameters() {
  return {&w1, &b1, &ln_gamma, &ln_beta, &w2, &b2};
}

// ---------------------------------------------------------------------------
// HeadProbe
// ---------------------------------------------------------------------------

HeadProbe::HeadProbe(int f3d, int num_classes, uint64_t seed) {
  Rng rng(mix_seed(seed, {0x31u}));
  bn_gamma.init("probe.bn.gamma", 1, f3d, true);
  bn_beta.init("probe.bn.beta", 1, f3d, true);
  bn_gamma.value.setOnes();
  linear_w.init("probe.linear.w", f3d, num_classes);
  linear_b.init("probe.linear.b", 1, num_classes, true);
  init_uniform(linear_w, f3d, rng);
  init_uniform(linear_b, f3d, rng);
  running_mean = Eigen::RowVectorXd::Zero(f3d);
  running_var = Eigen::RowVectorXd::Ones(f3d);
}

FeatureMatrix HeadProbe::forward(const FeatureMatrix& feats) {
  if (feats.cols() != linear_w.value.rows()) throw ConfigError("head.probe: dim mismatch");
  in_ = feats;
  const int n = static_cast<int>(feats.rows());
  Eigen::RowVectorXd mean, istd;
  if (training_) {
    mean = feats.colwise().mean();
    Eigen::RowVectorXd var =
        (feats.rowwise() - mean).array().square().colwise().mean();
    istd = (var.array() + kBnEps).rsqrt();
    running_mean = momentum * running_mean + (1.0 - momentum) * mean;
    running_var = momentum * running_var + (1.0 - momentum) * var;
    batch_mean_ = mean;
    batch_istd_ = istd;
  } else {
    mean = running_mean;
    istd = (running_var.array() + kBnEps).rsqrt();
    batch_mean_ = mean;
    batch_istd_ = istd;
  }
  xhat_ = (feats.rowwise() - mean).array().rowwise() * istd.array();
  FeatureMatrix bn_out = xhat_.array().rowwise() * bn_gamma.value.row(0).array();
  bn_out.rowwise() += bn_beta.value.row(0);
  FeatureMatrix out = bn_out * linear_w.value;
  out.rowwise() += linear_b.value.row(0);
  (void)n;
  return out;
}

FeatureMatrix HeadProbe::backward(const FeatureMatrix& grad_out) {
  FeatureMatrix bn_out = xhat_.array().rowwise() * bn_gamma.value.row(0).array();
  bn_out.rowwise() += bn_beta.value.row(0);
  linear_w.grad.noalias() += bn_out.transpose() * grad_out;
  linear_b.grad.row(0) += grad_out.colwise().sum();
  FeatureMatrix gbn = grad_out * linear_w.value.transpose();
  bn_gamma.grad.row(0) += (gbn.array() * xhat_.array()).colwise().sum().matrix();
  bn_beta.grad.row(0) += gbn.colwise().sum();
  FeatureMatrix gxhat = gbn.array().rowwise() * bn_gamma.value.row(0).array();
  if (!training_) {
    return gxhat.array().rowwise() * batch_istd_.array();
  }
  const double n = static_cast<double>(xhat_.rows());
  const Eigen::RowVectorXd sum_g = gxhat.colwise().sum();
  const Eigen::RowVectorXd sum_gx = (gxhat.array() * xhat_.array()).colwise().sum();
  FeatureMatrix gin =
      (gxhat.array() * n - sum_g.replicate(xhat_.rows(), 1).array() -
       xhat_.array() * sum_gx.replicate(xhat_.rows(), 1).array()) /
      n;
  return gin.array().rowwise() * batch_istd_.array();
}

std::vector<Param*> HeadProbe::parameters() {
  return {&bn_gamma, &bn_beta, &linear_w, &linear_b};
}

void HeadProbe::fold_affine(FeatureMatrix& a, Eigen::RowVectorXd& c) const {
  const Eigen::RowVectorXd istd = (running_var.array() + kBnEps).rsqrt();
  const Eigen::RowVectorXd scale = bn_gamma.value.row(0).array() * istd.array();
  a = linear_w.value.array().colwise() * scale.transpose().array();
  const Eigen::RowVectorXd shift =
      bn_beta.value.row(0).array() - running_mean.array() * scale.array();
  c = shift * linear_w.value + linear_b.value.row(0);
}

// ---------------------------------------------------------------------------
// Teachers
// ---------------------------------------------------------------------------

namespace {

uint64_t fnv1a(uint64_t h, const void* data, size_t len) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a_matrix(uint64_t h, const FeatureMatrix& m) {
  for (int r = 0; r < m.rows(); ++r)
    h = fnv1a(h, m.row(r).data(), sizeof(double) * m.cols());
  return h;
}

}  // namespace

uint64_t Teacher::checksum() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  const int k = static_cast<int>(kind);
  h = fnv1a(h, &k, sizeof(k));
  h = fnv1a(h, &f2d, sizeof(f2d));
  h = fnv1a(h, &noise_scale, sizeof(noise_scale));
  h = fnv1a(h, &seed, sizeof(seed));
  h = fnv1a_matrix(h, prototypes);
  h = fnv1a_matrix(h, mlp_w1);
  h = fnv1a_matrix(h, mlp_w2);
  h = fnv1a(h, mlp_b1.data(), sizeof(double) * mlp_b1.size());
  h = fnv1a(h, mlp_b2.data(), sizeof(double) * mlp_b2.size());
  return h;
}

Teacher make_oracle_teacher(int num_classes, int f2d, double noise_scale, uint64_t seed) {
  if (num_classes < 1 || f2d < 1) throw ConfigError("teacher: invalid dimensions");
  Teacher t;
  t.kind = TeacherKind::oracle_prototype;
  t.f2d = f2d;
  t.noise_scale = noise_scale;
  t.seed = seed;
  Rng rng(mix_seed(seed, {0x7eacULL}));
  t.prototypes.resize(num_classes, f2d);
  for (int c = 0; c < num_classes; ++c) {
    for (int j = 0; j < f2d; ++j) t.prototypes(c, j) = rng.normal();
    const double n = t.prototypes.row(c).norm();
    t.prototypes.row(c) /= (n < kNormEps ? 1.0 : n);
  }
  return t;
}

Teacher make_frozen_random_teacher(int f2d, uint64_t seed) {
  if (f2d < 1) throw ConfigError("teacher: invalid dimensions");
  Teacher t;
  t.kind = TeacherKind::frozen_random;
  t.f2d = f2d;
  t.seed = seed;
  Rng rng(mix_seed(seed, {0xf307e4ULL}));
  const int hidden = 32;
  t.mlp_w1.resize(3, hidden);
  t.mlp_b1.resize(hidden);
  t.mlp_w2.resize(hidden, f2d);
  t.mlp_b2.resize(f2d);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < hidden; ++c) t.mlp_w1(r, c) = rng.normal(0.0, 1.5);
  for (int c = 0; c < hidden; ++c) t.mlp_b1[c] = rng.normal(0.0, 0.5);
  for (int r = 0; r < hidden; ++r)
    for (int c = 0; c < f2d; ++c) t.mlp_w2(r, c) = rng.normal(0.0, 1.0 / std::sqrt(32.0));
  for (int c = 0; c < f2d; ++c) t.mlp_b2[c] = rng.normal(0.0, 0.1);
  return t;
}

namespace {

// Multi-source BFS over the 4-neighborhood; every empty cell receives the
// value of the nearest filled cell (ties by queue order, row-major seeds).
void inpaint_nearest(std::vector<int>& source, int height, int width) {
  std::deque<int> queue;
  for (int idx = 0; idx < height * width; ++idx)
    if (source[idx] >= 0) queue.push_back(idx);
  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, -1, 1};
  while (!queue.empty()) {
    const int idx = queue.front();
    queue.pop_front();
    const int r = idx / width;
    const int c = idx % width;
    for (int d = 0; d < 4; ++d) {
      const int rr = r + dr[d];
      const int cc = c + dc[d];
      if (rr < 0 || rr >= height || cc < 0 || cc >= width) continue;
      const int nidx = rr * width + cc;
      if (source[nidx] >= 0) continue;
      source[nidx] = source[idx];
      queue.push_back(nidx);
    }
  }
}

}  // namespace

FeatureMap2D teacher_features(const Teacher& teacher, const PointCloud& cloud,
                              const CameraModel& cam, const PixelMapping& mapping,
                              uint64_t sample_key) {
  const int h = mapping.height;
  const int w = mapping.width;
  FeatureMap2D map;
  map.resize(h, w, teacher.f2d);

  // z-buffer: nearest point per pixel
  std::vector<double> depth(static_cast<size_t>(h) * w,
                            std::numeric_limits<double>::infinity());
  std::vector<int> owner(static_cast<size_t>(h) * w, -1);
  for (int i = 0; i < mapping.size(); ++i) {
    if (!mapping.visible(i)) continue;
    if (teacher.kind == TeacherKind::oracle_prototype && cloud.labels[i] == kIgnoreLabel)
      continue;
    const Vec3 p_cam = cam.rotation * cloud.positions.row(i).transpose() + cam.translation;
    const int idx = mapping.pixel_index[i];
    if (p_cam.z() < depth[idx]) {
      depth[idx] = p_cam.z();
      owner[idx] = i;
    }
  }

  if (teacher.kind == TeacherKind::oracle_prototype) {
    std::vector<int> source = owner;
    inpaint_nearest(source, h, w);
    for (int idx = 0; idx < h * w; ++idx) {
      double* out = map.data.data() + static_cast<size_t>(idx) * teacher.f2d;
      if (source[idx] < 0) continue;  // no visible point anywhere: zero map
      const int label = cloud.labels[source[idx]];
      Rng pix(mix_seed(teacher.seed, {0x90153ULL, sample_key, static_cast<uint64_t>(idx)}));
      for (int ch = 0; ch < teacher.f2d; ++ch) {
        out[ch] = teacher.prototypes(label, ch) +
                  (teacher.noise_scale > 0.0 ? teacher.noise_scale * pix.normal() : 0.0);
      }
    }
  } else {
    // depth needs in-painting too; reuse owner indices to fetch depths
    std::vector<int> source = owner;
    inpaint_nearest(source, h, w);
    for (int idx = 0; idx < h * w; ++idx) {
      double* out = map.data.data() + static_cast<size_t>(idx) * teacher.f2d;
      double dval = 0.0;
      if (source[idx] >= 0) {
        const Vec3 p_cam =
            cam.rotation * cloud.positions.row(source[idx]).transpose() + cam.translation;
        dval = p_cam.z();
      }
      const double u = (idx % w + 0.5) / w;
      const double v = (idx / w + 0.5) / h;
      Eigen::RowVector3d in(u, v, dval / 30.0);
      Eigen::RowVectorXd hidden = (in * teacher.mlp_w1 + teacher.mlp_b1).array().tanh();
      Eigen::RowVectorXd feat = hidden * teacher.mlp_w2 + teacher.mlp_b2;
      for (int ch = 0; ch < teacher.f2d; ++ch) out[ch] = feat[ch];
    }
  }
  return map;
}

}  // namespace scalr
