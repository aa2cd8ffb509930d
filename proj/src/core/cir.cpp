#include "cir/core/cir.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cir::core {

using ad::Shape;
using ad::Tensor;
using ad::Var;
using nn::halve;
using nn::Init;

ad::Tensor make_ccv(std::size_t j, std::size_t M) {
  if (M == 0 || j >= M) {
    throw CoreError("make_ccv: class index " + std::to_string(j) + " out of range for M = " + std::to_string(M));
  }
  Tensor l({M}, -1.0f);
  l[j] = 1.0f;
  return l;
}

ad::Tensor ccv_matrix(std::size_t M) {
  Tensor L({M, M}, -1.0f);
  for (std::size_t j = 0; j < M; ++j) L[j * M + j] = 1.0f;
  return L;
}

Encoder::Encoder(ad::ParamStore& store, const CoreConfig& cfg, Rng& rng) : height_(cfg.height), width_(cfg.width) {
  h3_ = halve(halve(halve(cfg.height)));
  w3_ = halve(halve(halve(cfg.width)));
  c1_ = nn::Conv2d(store, "encoder.conv1", 1, 16, 3, 2, 1, Init::kaiming_uniform, rng);
  c2_ = nn::Conv2d(store, "encoder.conv2", 16, 32, 3, 2, 1, Init::kaiming_uniform, rng);
  c3_ = nn::Conv2d(store, "encoder.conv3", 32, 64, 3, 2, 1, Init::kaiming_uniform, rng);
  fc_ = nn::Dense(store, "encoder.fc", 64 * h3_ * w3_, cfg.d_z, Init::xavier_uniform, rng);
}

Var Encoder::operator()(const Var& x) const {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != height_ || s[3] != width_) {
    throw ad::ShapeError("encoder: expected (N, 1, " + std::to_string(height_) + ", " + std::to_string(width_) +
                         "), got " + ad::shape_str(s));
  }
  const Var h = ad::relu(c3_(ad::relu(c2_(ad::relu(c1_(x))))));
  return fc_(ad::reshape(h, {x.shape()[0], 64 * h3_ * w3_}));
}

Decoder::Decoder(ad::ParamStore& store, const CoreConfig& cfg, Rng& rng) {
  const std::size_t h1 = halve(cfg.height), w1 = halve(cfg.width);
  const std::size_t h2 = halve(h1), w2 = halve(w1);
  h3_ = halve(h2);
  w3_ = halve(w2);
  fc_ = nn::Dense(store, "decoder.fc", cfg.d_z, 32 * h3_ * w3_, Init::kaiming_uniform, rng);
  t1_ = nn::ConvTranspose2d(store, "decoder.up1", 32, 16, 3, 2, 1, h2, w2, Init::kaiming_uniform, rng);
  t2_ = nn::ConvTranspose2d(store, "decoder.up2", 16, 8, 3, 2, 1, h1, w1, Init::kaiming_uniform, rng);
  t3_ = nn::ConvTranspose2d(store, "decoder.up3", 8, 1, 3, 2, 1, cfg.height, cfg.width, Init::xavier_uniform, rng);
}

Var Decoder::operator()(const Var& z) const {
  const Var h = ad::reshape(ad::relu(fc_(z)), {z.shape()[0], 32, h3_, w3_});
  return ad::sigmoid(t3_(ad::relu(t2_(ad::relu(t1_(h))))));
}

ConditionMaps::ConditionMaps(ad::ParamStore& store, const CoreConfig& cfg, Rng& rng) {
  scale_ = nn::Dense(store, "maps.alpha", cfg.classes, cfg.d_z, Init::xavier_uniform, rng);
  shift_ = nn::Dense(store, "maps.beta", cfg.classes, cfg.d_z, Init::xavier_uniform, rng);
  // Start near the identity modulation.
  Var b = scale_.bias();
  b.mutable_value().fill(1.0f);
}

Var condition(const Var& z, const Var& alpha, const Var& beta) {
  auto fit = [&](const Var& v) { return v.shape() == z.shape() ? v : ad::broadcast_to(v, z.shape()); };
  return ad::add(ad::mul(fit(alpha), z), fit(beta));
}

Critic::Critic(ad::ParamStore& store, std::size_t classes, std::size_t d_z, Rng& rng, std::size_t hidden) {
  l1_ = nn::Dense(store, "critic.fc1", classes + d_z, hidden, Init::kaiming_uniform, rng);
  l2_ = nn::Dense(store, "critic.fc2", hidden, hidden, Init::kaiming_uniform, rng);
  out_ = nn::Dense(store, "critic.out", hidden, 1, Init::xavier_uniform, rng);
}

Var Critic::operator()(const Var& onehot, const Var& z) const {
  const Var h = ad::relu(l2_(ad::relu(l1_(ad::concat_cols(onehot, z)))));
  return ad::reshape(out_(h), {z.shape()[0]});
}

Variational::Variational(ad::ParamStore& store, const CoreConfig& cfg, Rng& rng) {
  const std::size_t h1 = halve(cfg.height), w1 = halve(cfg.width);
  const std::size_t h2 = halve(h1), w2 = halve(w1);
  h3_ = halve(h2);
  w3_ = halve(w2);
  fc_ = nn::Dense(store, "q.fc", cfg.d_z, 8 * h3_ * w3_, Init::kaiming_uniform, rng);
  t1_ = nn::ConvTranspose2d(store, "q.up1", 8, 8, 3, 2, 1, h2, w2, Init::kaiming_uniform, rng);
  t2_ = nn::ConvTranspose2d(store, "q.up2", 8, 4, 3, 2, 1, h1, w1, Init::kaiming_uniform, rng);
  t3_ = nn::ConvTranspose2d(store, "q.up3", 4, 1, 3, 2, 1, cfg.height, cfg.width, Init::xavier_uniform, rng);
}

Var Variational::operator()(const Var& z) const {
  const Var h = ad::reshape(ad::relu(fc_(z)), {z.shape()[0], 8, h3_, w3_});
  return ad::sigmoid(t3_(ad::relu(t2_(ad::relu(t1_(h))))));
}

Var mse(const Var& a, const Var& b) { return ad::mean(ad::square(ad::sub(a, b))); }

Var mse_rows(const Var& a, const Var& b) { return ad::row_mean(ad::square(ad::sub(a, b))); }

Var reconstruction_loss(const Var& x_hat_m, const Var& x, const std::vector<Var>& x_hat_nm,
                        const std::vector<Var>& x_r) {
  if (x_hat_nm.empty() || x_hat_nm.size() != x_r.size()) {
    throw CoreError("reconstruction_loss: need M-1 >= 1 non-matched reconstructions with one target each (got " +
                    std::to_string(x_hat_nm.size()) + " and " + std::to_string(x_r.size()) + ")");
  }
  Var nm = mse(x_hat_nm[0], x_r[0]);
  for (std::size_t j = 1; j < x_hat_nm.size(); ++j) nm = ad::add(nm, mse(x_hat_nm[j], x_r[j]));
  return ad::add(mse(x_hat_m, x), ad::scale(nm, 1.0f / static_cast<float>(x_hat_nm.size())));
}

std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
  if (n < 2) throw CoreError("derangement: need n >= 2");
  std::vector<std::size_t> p(n);
  for (;;) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(p[i], p[std::uniform_int_distribution<std::size_t>(0, i)(rng)]);
    }
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) fixed = p[i] == i;
    if (!fixed) return p;
  }
}

ad::Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t M) {
  Tensor t({labels.size(), M}, 0.0f);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= M) throw CoreError("one_hot: label " + std::to_string(labels[i]) + " >= M");
    t[i * M + labels[i]] = 1.0f;
  }
  return t;
}

namespace {

void check_perm(const char* who, const std::vector<std::size_t>& perm, std::size_t B) {
  if (B < 2) throw CoreError(std::string(who) + ": batch size must be >= 2");
  if (perm.size() != B) throw CoreError(std::string(who) + ": permutation length differs from batch size");
  for (std::size_t p : perm)
    if (p >= B) throw CoreError(std::string(who) + ": permutation index out of range");
}

}  // namespace

Var club_upper(const Var& q_pred, const Var& x, const std::vector<std::size_t>& perm) {
  if (q_pred.shape() != x.shape()) {
    throw ad::ShapeError("club_upper: prediction " + ad::shape_str(q_pred.shape()) + " vs data " +
                         ad::shape_str(x.shape()));
  }
  check_perm("club_upper", perm, x.shape().at(0));
  const Var pos = ad::mean(mse_rows(q_pred, x));
  const Var neg = ad::mean(mse_rows(q_pred, ad::gather_rows(x, perm)));
  return ad::scale(ad::sub(neg, pos), 0.5f);
}

Var club_upper(const Var& z, const Var& x, const Variational& q, const std::vector<std::size_t>& perm) {
  return club_upper(q(z), x, perm);
}

Var dv_lower(const Var& f_pos, const Var& f_neg) {
  const std::size_t B = f_neg.value().size();
  if (B < 2) throw CoreError("dv_lower: batch size must be >= 2");
  return ad::sub(ad::mean(f_pos), ad::logmeanexp(f_neg));
}

Var dv_lower(const Var& z, const std::vector<std::size_t>& labels, std::size_t M, const Critic& critic,
             const std::vector<std::size_t>& perm) {
  if (labels.size() != z.shape().at(0)) throw CoreError("dv_lower: label count differs from batch size");
  check_perm("dv_lower", perm, labels.size());
  const Var y = ad::constant(one_hot(labels, M));
  return dv_lower(critic(y, z), critic(ad::gather_rows(y, perm), z));
}

Var q_nll(const Var& q_pred, const Var& x) { return ad::scale(mse(q_pred, x), 0.5f); }

Var mi_loss(const Var& ub, const Var& lb, float gamma) {
  if (!(gamma > 0.0f)) throw CoreError("mi_loss: gamma must be positive");
  return ad::sub(ub, ad::scale(lb, gamma));
}

Var total_loss(const Var& l_re, const Var& l_mi, float lambda_mi) {
  if (!(lambda_mi >= 0.0f)) throw CoreError("total_loss: lambda_mi must be >= 0");
  return ad::add(l_re, ad::scale(l_mi, lambda_mi));
}

}  // namespace cir::core
