#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cir/sim/waveform.hpp"
#include "cir/tfa/image.hpp"

namespace cir::tfa {

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// bins x frames, row-major. Bin f covers frequency f * fs / nfft.
struct ComplexGrid {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<std::complex<double>> data;

  std::complex<double> at(std::size_t f, std::size_t t) const { return data[f * frames + t]; }
};

std::vector<double> hann_window(std::size_t len);

/// Frame t is centred on sample t*hop and zero-padded past either edge;
/// frames = floor((K - 1) / hop) + 1.
ComplexGrid stft(const sim::ComplexWaveform& w, std::size_t window_len, std::size_t hop, std::size_t nfft);

/// Hop giving roughly `pre_frames` frames across K samples.
std::size_t default_hop(std::size_t K, std::size_t window_len, std::size_t pre_frames = 96);

/// Half-pixel-centre bilinear resize.
std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t h, std::size_t w, std::size_t out_h,
                                    std::size_t out_w);

/// Magnitude (optionally log1p), bilinear resize, then min-max to [0, 1].
/// Constant images become all zeros.
Image to_tfi(const ComplexGrid& grid, std::size_t out_h, std::size_t out_w, bool log_magnitude = false);

struct TfaConfig {
  std::size_t window_len = 64;
  std::size_t nfft = 64;
  std::size_t pre_frames = 96;
  std::size_t height = 80;
  std::size_t width = 80;
  bool log_magnitude = false;
};

Image waveform_to_tfi(const sim::ComplexWaveform& w, const TfaConfig& cfg = {});

}  // namespace cir::tfa
