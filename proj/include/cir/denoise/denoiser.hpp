#pragma once

#include <cstdint>
#include <stdexcept>

#include "cir/ad/param_store.hpp"
#include "cir/nn/layers.hpp"
#include "cir/tfa/image.hpp"

namespace cir::denoise {

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Residual conv encoder-decoder: 1 -> 16 -> 32 down (stride 2 twice),
/// 32 -> 16 -> 1 up with a skip from the first stage. The last layer starts
/// at zero, so a fresh model is the identity.
class Denoiser {
 public:
  Denoiser(std::size_t height, std::size_t width, std::uint64_t seed);

  Denoiser(const Denoiser&) = delete;
  Denoiser& operator=(const Denoiser&) = delete;

  /// Residual R for a (N, 1, H, W) batch.
  ad::Var residual(const ad::Var& x_n) const;
  /// clamp(x_n + R(x_n), 0, 1).
  ad::Var operator()(const ad::Var& x_n) const;

  tfa::Image denoise(const tfa::Image& x_n) const;

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }

 private:
  std::size_t height_;
  std::size_t width_;
  ad::ParamStore store_;
  nn::Conv2d down1_, down2_;
  nn::ConvTranspose2d up1_, up2_;
};

/// Per-pixel mean squared difference.
ad::Var denoise_loss(const ad::Var& x_hat, const ad::Var& x_clean);

}  // namespace cir::denoise
