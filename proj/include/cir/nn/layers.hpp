#pragma once

#include <cstddef>
#include <string>

#include "cir/ad/ops.hpp"
#include "cir/ad/param_store.hpp"
#include "cir/rng.hpp"

namespace cir::nn {

enum class Init {
  kaiming_uniform,  // layers followed by relu
  xavier_uniform,
  zeros,
};

class Dense {
 public:
  Dense() = default;
  Dense(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Init init, Rng& rng);

  ad::Var operator()(const ad::Var& x) const { return ad::affine(x, weight_, bias_); }

  const ad::Var& weight() const { return weight_; }
  const ad::Var& bias() const { return bias_; }

 private:
  ad::Var weight_;
  ad::Var bias_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ad::ParamStore& store, const std::string& name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
         std::size_t stride, std::size_t pad, Init init, Rng& rng);

  ad::Var operator()(const ad::Var& x) const { return ad::conv2d(x, weight_, bias_, stride_, pad_); }

  const ad::Var& weight() const { return weight_; }

 private:
  ad::Var weight_;
  ad::Var bias_;
  std::size_t stride_ = 1;
  std::size_t pad_ = 0;
};

/// Transposed convolution producing a fixed output extent.
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(ad::ParamStore& store, const std::string& name, std::size_t in_ch, std::size_t out_ch,
                  std::size_t kernel, std::size_t stride, std::size_t pad, std::size_t out_h, std::size_t out_w,
                  Init init, Rng& rng);

  ad::Var operator()(const ad::Var& x) const {
    return ad::conv_transpose2d(x, weight_, bias_, stride_, pad_, out_h_, out_w_);
  }

  const ad::Var& weight() const { return weight_; }

 private:
  ad::Var weight_;
  ad::Var bias_;
  std::size_t stride_ = 1;
  std::size_t pad_ = 0;
  std::size_t out_h_ = 0;
  std::size_t out_w_ = 0;
};

/// Fills `t` from U(-b, b) with the bound implied by `init`.
void initialise(ad::Tensor& t, Init init, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Spatial extent after a stride-2, pad-1, 3x3 convolution.
constexpr std::size_t halve(std::size_t n) { return (n + 2 - 3) / 2 + 1; }

}  // namespace cir::nn
