#include "cir/denoise/denoiser.hpp"

#include "cir/rng.hpp"

namespace cir::denoise {

using ad::Var;
using nn::halve;
using nn::Init;

Denoiser::Denoiser(std::size_t height, std::size_t width, std::uint64_t seed) : height_(height), width_(width) {
  if (height < 4 || width < 4) throw InputError("Denoiser: image must be at least 4x4");
  Rng rng = make_rng(seed, 0xde);
  const std::size_t h1 = halve(height), w1 = halve(width);
  down1_ = nn::Conv2d(store_, "denoiser.down1", 1, 16, 3, 2, 1, Init::kaiming_uniform, rng);
  down2_ = nn::Conv2d(store_, "denoiser.down2", 16, 32, 3, 2, 1, Init::kaiming_uniform, rng);
  up1_ = nn::ConvTranspose2d(store_, "denoiser.up1", 32, 16, 3, 2, 1, h1, w1, Init::kaiming_uniform, rng);
  up2_ = nn::ConvTranspose2d(store_, "denoiser.up2", 16, 1, 3, 2, 1, height, width, Init::zeros, rng);
}

Var Denoiser::residual(const Var& x_n) const {
  const auto& s = x_n.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != height_ || s[3] != width_) {
    throw InputError("Denoiser: expected (N, 1, " + std::to_string(height_) + ", " + std::to_string(width_) +
                     "), got " + ad::shape_str(s));
  }
  const Var d1 = ad::relu(down1_(x_n));
  const Var d2 = ad::relu(down2_(d1));
  const Var u1 = ad::relu(ad::add(up1_(d2), d1));
  return up2_(u1);
}

Var Denoiser::operator()(const Var& x_n) const { return ad::clamp(ad::add(x_n, residual(x_n)), 0.0f, 1.0f); }

tfa::Image Denoiser::denoise(const tfa::Image& x_n) const {
  if (x_n.height != height_ || x_n.width != width_) {
    throw InputError("Denoiser: image is " + std::to_string(x_n.height) + "x" + std::to_string(x_n.width) +
                     ", model expects " + std::to_string(height_) + "x" + std::to_string(width_));
  }
  ad::NoGradGuard guard;
  const Var out = (*this)(ad::constant(ad::Tensor({1, 1, height_, width_}, x_n.pixels)));
  tfa::Image img(height_, width_);
  std::copy(out.value().data().begin(), out.value().data().end(), img.pixels.begin());
  return img;
}

Var denoise_loss(const Var& x_hat, const Var& x_clean) {
  if (x_hat.shape() != x_clean.shape()) {
    throw ad::ShapeError("denoise_loss: shapes " + ad::shape_str(x_hat.shape()) + " and " +
                         ad::shape_str(x_clean.shape()) + " differ");
  }
  return ad::mean(ad::square(ad::sub(x_hat, x_clean)));
}

}  // namespace cir::denoise
