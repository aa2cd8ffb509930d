#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cir/ad/param_store.hpp"
#include "cir/nn/layers.hpp"
#include "cir/rng.hpp"

namespace cir::core {

class CoreError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CoreConfig {
  std::size_t height = 80;
  std::size_t width = 80;
  std::size_t d_z = 64;
  std::size_t classes = 2;  // M
  float gamma = 1.0f;
  float lambda_mi = 0.1f;
  /// false decodes z directly (single shared reconstruction).
  bool use_ccv = true;
};

/// +1 at `j` (0-based), -1 elsewhere.
ad::Tensor make_ccv(std::size_t j, std::size_t M);
/// (M, M) matrix whose row j is make_ccv(j, M).
ad::Tensor ccv_matrix(std::size_t M);

/// x (N, 1, H, W) -> z (N, d_z): three stride-2 3x3 convs (16, 32, 64) then dense.
class Encoder {
 public:
  Encoder(ad::ParamStore& store, const CoreConfig& cfg, Rng& rng);
  ad::Var operator()(const ad::Var& x) const;

 private:
  nn::Conv2d c1_, c2_, c3_;
  nn::Dense fc_;
  std::size_t height_, width_;
  std::size_t h3_ = 0, w3_ = 0;
};

/// z (N, d_z) -> (N, 1, H, W) in [0, 1]: dense to 32 x H/8 x W/8, three
/// stride-2 transposed convs (16, 8, 1), sigmoid.
class Decoder {
 public:
  Decoder(ad::ParamStore& store, const CoreConfig& cfg, Rng& rng);
  ad::Var operator()(const ad::Var& z) const;

 private:
  nn::Dense fc_;
  nn::ConvTranspose2d t1_, t2_, t3_;
  std::size_t h3_ = 0, w3_ = 0;
};

/// Two affine maps from a CCV to per-feature scale and shift.
class ConditionMaps {
 public:
  ConditionMaps(ad::ParamStore& store, const CoreConfig& cfg, Rng& rng);
  ad::Var alpha(const ad::Var& ccv) const { return scale_(ccv); }
  ad::Var beta(const ad::Var& ccv) const { return shift_(ccv); }

 private:
  nn::Dense scale_, shift_;
};

/// z_j = alpha .* z + beta. alpha/beta are (d_z), (1, d_z) or shaped like z.
ad::Var condition(const ad::Var& z, const ad::Var& alpha, const ad::Var& beta);

/// Critic over (one-hot label, z): two relu layers of width 128, scalar out.
class Critic {
 public:
  Critic(ad::ParamStore& store, std::size_t classes, std::size_t d_z, Rng& rng, std::size_t hidden = 128);
  /// onehot (N, M), z (N, d_z) -> (N).
  ad::Var operator()(const ad::Var& onehot, const ad::Var& z) const;

 private:
  nn::Dense l1_, l2_, out_;
};

/// Variational head predicting the image mean from z.
class Variational {
 public:
  Variational(ad::ParamStore& store, const CoreConfig& cfg, Rng& rng);
  ad::Var operator()(const ad::Var& z) const;

 private:
  nn::Dense fc_;
  nn::ConvTranspose2d t1_, t2_, t3_;
  std::size_t h3_ = 0, w3_ = 0;
};

/// Per-pixel mean squared difference.
ad::Var mse(const ad::Var& a, const ad::Var& b);
/// Per-sample mean squared difference over all but the first axis: (N).
ad::Var mse_rows(const ad::Var& a, const ad::Var& b);

/// Matched term plus the mean of the M-1 non-matched terms.
ad::Var reconstruction_loss(const ad::Var& x_hat_m, const ad::Var& x, const std::vector<ad::Var>& x_hat_nm,
                            const std::vector<ad::Var>& x_r);

/// Uniform random permutation of 0..n-1 with no fixed point (n >= 2).
std::vector<std::size_t> derangement(std::size_t n, Rng& rng);

ad::Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t M);

/// Sampled upper bound on I(z; x) from the predicted means q(z_i):
/// mean_i log q(x_i|z_i) - mean_i log q(x_perm(i)|z_i) with
/// log q(x|z) = -mse(x, q(z)) / 2.
ad::Var club_upper(const ad::Var& q_pred, const ad::Var& x, const std::vector<std::size_t>& perm);
ad::Var club_upper(const ad::Var& z, const ad::Var& x, const Variational& q, const std::vector<std::size_t>& perm);

/// Donsker-Varadhan lower bound on I(z; y) from critic scores on positive
/// and shuffled pairs: mean(F_pos) - (logsumexp(F_neg) - log B).
ad::Var dv_lower(const ad::Var& f_pos, const ad::Var& f_neg);
ad::Var dv_lower(const ad::Var& z, const std::vector<std::size_t>& labels, std::size_t M, const Critic& critic,
                 const std::vector<std::size_t>& perm);

/// Likelihood objective for the variational head: mean_i mse(x_i, q(z_i)) / 2.
ad::Var q_nll(const ad::Var& q_pred, const ad::Var& x);

ad::Var mi_loss(const ad::Var& ub, const ad::Var& lb, float gamma);
ad::Var total_loss(const ad::Var& l_re, const ad::Var& l_mi, float lambda_mi);

}  // namespace cir::core
