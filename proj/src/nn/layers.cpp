#include "cir/nn/layers.hpp"

#include <cmath>

namespace cir::nn {

void initialise(ad::Tensor& t, Init init, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (init == Init::zeros) {
    t.fill(0.0f);
    return;
  }
  const double bound = init == Init::kaiming_uniform ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                                     : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<float> dist(static_cast<float>(-bound), static_cast<float>(bound));
  for (float& v : t.data()) v = dist(rng);
}

Dense::Dense(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Init init, Rng& rng) {
  ad::Tensor w({out, in});
  initialise(w, init, in, out, rng);
  weight_ = store.add(name + ".weight", std::move(w));
  bias_ = store.add(name + ".bias", ad::Tensor({out}, 0.0f));
}

Conv2d::Conv2d(ad::ParamStore& store, const std::string& name, std::size_t in_ch, std::size_t out_ch,
               std::size_t kernel, std::size_t stride, std::size_t pad, Init init, Rng& rng)
    : stride_(stride), pad_(pad) {
  ad::Tensor w({out_ch, in_ch, kernel, kernel});
  initialise(w, init, in_ch * kernel * kernel, out_ch * kernel * kernel, rng);
  weight_ = store.add(name + ".weight", std::move(w));
  bias_ = store.add(name + ".bias", ad::Tensor({out_ch}, 0.0f));
}

ConvTranspose2d::ConvTranspose2d(ad::ParamStore& store, const std::string& name, std::size_t in_ch,
                                 std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad,
                                 std::size_t out_h, std::size_t out_w, Init init, Rng& rng)
    : stride_(stride), pad_(pad), out_h_(out_h), out_w_(out_w) {
  ad::Tensor w({in_ch, out_ch, kernel, kernel});
  initialise(w, init, in_ch * kernel * kernel, out_ch * kernel * kernel, rng);
  weight_ = store.add(name + ".weight", std::move(w));
  bias_ = store.add(name + ".bias", ad::Tensor({out_ch}, 0.0f));
}

}  // namespace cir::nn
