#include "cir/tfa/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unsupported/Eigen/FFT>

namespace cir::tfa {

std::vector<double> hann_window(std::size_t len) {
  std::vector<double> h(len);
  for (std::size_t i = 0; i < len; ++i) {
    h[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
  }
  return h;
}

std::size_t default_hop(std::size_t K, std::size_t window_len, std::size_t pre_frames) {
  if (K <= window_len || pre_frames < 2) return 1;
  return std::max<std::size_t>(1, (K - window_len) / (pre_frames - 1));
}

ComplexGrid stft(const sim::ComplexWaveform& w, std::size_t window_len, std::size_t hop, std::size_t nfft) {
  const std::size_t K = w.samples.size();
  if (K == 0) throw InputError("stft: empty waveform");
  if (window_len == 0 || window_len > K) throw InputError("stft: window_len must lie in [1, K]");
  if (hop == 0) throw InputError("stft: hop must be >= 1");
  if (nfft < window_len) throw InputError("stft: nfft must be >= window_len");

  const std::vector<double> h = hann_window(window_len);
  ComplexGrid g;
  g.bins = nfft;
  g.frames = (K - 1) / hop + 1;
  g.data.assign(g.bins * g.frames, {});

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> frame(nfft), spec(nfft);
  const auto half = static_cast<std::ptrdiff_t>(window_len / 2);
  for (std::size_t t = 0; t < g.frames; ++t) {
    std::fill(frame.begin(), frame.end(), std::complex<double>{});
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * hop) - half;
    for (std::size_t i = 0; i < window_len; ++i) {
      const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(i);
      if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(K)) frame[i] = w.samples[idx] * h[i];
    }
    fft.fwd(spec, frame);
    for (std::size_t f = 0; f < nfft; ++f) g.data[f * g.frames + t] = spec[f];
  }
  return g;
}

std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t h, std::size_t w, std::size_t out_h,
                                    std::size_t out_w) {
  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double pos = (static_cast<double>(o) + 0.5) * scale - 0.5;
      pos = std::clamp(pos, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(pos));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, pos - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ry = taps(h, out_h);
  const auto rx = taps(w, out_w);
  std::vector<double> out(out_h * out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const double* a = &src[ry[r].i0 * w];
    const double* b = &src[ry[r].i1 * w];
    const double fy = ry[r].frac;
    for (std::size_t c = 0; c < out_w; ++c) {
      const auto& x = rx[c];
      const double top = a[x.i0] + (a[x.i1] - a[x.i0]) * x.frac;
      const double bot = b[x.i0] + (b[x.i1] - b[x.i0]) * x.frac;
      out[r * out_w + c] = top + (bot - top) * fy;
    }
  }
  return out;
}

Image to_tfi(const ComplexGrid& grid, std::size_t out_h, std::size_t out_w, bool log_magnitude) {
  if (grid.bins == 0 || grid.frames == 0) throw InputError("to_tfi: empty grid");
  if (out_h == 0 || out_w == 0) throw InputError("to_tfi: output size must be positive");
  std::vector<double> mag(grid.data.size());
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::abs(grid.data[i]);
    if (log_magnitude) mag[i] = std::log1p(mag[i]);
  }
  const std::vector<double> r = resize_bilinear(mag, grid.bins, grid.frames, out_h, out_w);
  const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  const double range = *hi - *lo;
  Image img(out_h, out_w, 0.0f);
  if (!(range > 1e-12 * std::max(1.0, std::abs(*hi)))) return img;
  for (std::size_t i = 0; i < r.size(); ++i) {
    img.pixels[i] = std::clamp(static_cast<float>((r[i] - *lo) / range), 0.0f, 1.0f);
  }
  return img;
}

Image waveform_to_tfi(const sim::ComplexWaveform& w, const TfaConfig& cfg) {
  const std::size_t hop = default_hop(w.samples.size(), cfg.window_len, cfg.pre_frames);
  return to_tfi(stft(w, cfg.window_len, hop, cfg.nfft), cfg.height, cfg.width, cfg.log_magnitude);
}

}  // namespace cir::tfa
