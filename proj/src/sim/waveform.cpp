#include "cir/sim/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>

#include "cir/rng.hpp"

namespace cir::sim {

namespace {

constexpr std::array<std::string_view, 11> kNames = {"LFM", "Costas", "Frank", "P1", "P2", "P3",
                                                     "P4",  "T1",     "T2",    "T3", "T4"};

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t pos_mod(std::int64_t a, std::int64_t n) {
  const std::int64_t r = a % n;
  return r < 0 ? r + n : r;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

const std::vector<std::vector<int>>& cached_costas(int order) {
  static std::mutex mu;
  static std::map<int, std::vector<std::vector<int>>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, costas_sequences(order)).first;
  return it->second;
}

// Coded phase for one sample: returns (index, states).
struct CodedPhase {
  std::int64_t index;
  std::int64_t states;
};

std::int64_t chip_index(std::size_t k, const WaveformParams& p, int cycles) {
  return static_cast<std::int64_t>(std::floor(static_cast<double>(k) * p.fc / (p.fs * cycles)));
}

CodedPhase coded_phase(const WaveformParams& p, std::size_t k, std::size_t K) {
  const auto kk = static_cast<std::int64_t>(k);
  const auto KK = static_cast<std::int64_t>(K);
  switch (p.modulation) {
    case Modulation::Frank:
    case Modulation::P1:
    case Modulation::P2: {
      const auto& sp = std::get<SteppedParams>(p.type_params);
      const std::int64_t M = sp.steps;
      const std::int64_t c = pos_mod(chip_index(k, p, sp.cycles_per_chip), M * M);
      const std::int64_t outer = c / M, inner = c % M;
      if (p.modulation == Modulation::Frank) return {pos_mod(outer * inner, M), M};
      if (p.modulation == Modulation::P1) return {pos_mod(-(M - 2 * outer - 1) * (outer * M + inner), 2 * M), 2 * M};
      return {pos_mod(-(2 * inner + 1 - M) * (2 * outer + 1 - M), 4 * M), 4 * M};
    }
    case Modulation::P3:
    case Modulation::P4: {
      const auto& sp = std::get<SubcodeParams>(p.type_params);
      const std::int64_t N = sp.subcodes;
      const std::int64_t c = pos_mod(chip_index(k, p, sp.cycles_per_chip), N);
      const std::int64_t num = p.modulation == Modulation::P3 ? c * c : c * c - N * c;
      return {pos_mod(num, 2 * N), 2 * N};
    }
    case Modulation::T1:
    case Modulation::T2: {
      const auto& sp = std::get<SegmentParams>(p.type_params);
      const std::int64_t S = sp.segments, n = sp.states;
      const std::int64_t j = (S * kk) / KK;
      const std::int64_t offset = S * kk - j * KK;
      const std::int64_t m = p.modulation == Modulation::T1 ? floor_div(offset * j * n, KK)
                                                             : floor_div(offset * (2 * j - S + 1) * n, 2 * KK);
      return {pos_mod(m, n), n};
    }
    case Modulation::T3:
    case Modulation::T4: {
      const auto& sp = std::get<ChirpCodeParams>(p.type_params);
      const double kd = static_cast<double>(k), Kd = static_cast<double>(K);
      const double quad = p.modulation == Modulation::T3 ? kd * kd : kd * kd - kd * Kd;
      const auto m = static_cast<std::int64_t>(std::floor(sp.states * sp.bandwidth * quad / (2.0 * Kd * p.fs)));
      return {pos_mod(m, sp.states), sp.states};
    }
    default:
      throw ParamError("coded_phase: not a coded modulation");
  }
}

template <class T>
const T& expect(const WaveformParams& p) {
  const T* v = std::get_if<T>(&p.type_params);
  if (!v) throw ParamError("type_params do not match modulation " + std::string(name(p.modulation)));
  return *v;
}

}  // namespace

std::string_view name(Modulation m) { return kNames.at(static_cast<std::size_t>(m)); }

std::optional<Modulation> parse_modulation(std::string_view s) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == s) return kAllModulations[i];
  return std::nullopt;
}

WaveformParams sample_params(Modulation m, std::uint64_t seed, const SimConfig& cfg) {
  Rng rng(derive_seed(seed, 0x70617261ULL));
  WaveformParams p;
  p.modulation = m;
  p.fs = cfg.fs;
  p.pulse_width = cfg.pulse_width;
  p.amplitude = cfg.amplitude;
  p.fc = uniform_real(rng, cfg.fs / 6.0, cfg.fs / 4.0);
  switch (m) {
    case Modulation::LFM:
      p.type_params = LfmParams{uniform_real(rng, cfg.fs / 20.0, cfg.fs / 10.0)};
      break;
    case Modulation::Costas: {
      CostasParams c;
      c.order = uniform_int(rng, 3, 6);
      c.fundamental = uniform_real(rng, cfg.fs / 32.0, cfg.fs / 20.0);
      const auto& all = cached_costas(c.order);
      c.hops = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
      p.type_params = std::move(c);
      break;
    }
    case Modulation::Frank:
    case Modulation::P1:
    case Modulation::P2:
      p.type_params = SteppedParams{uniform_int(rng, 4, 6), uniform_int(rng, 4, 6)};
      break;
    case Modulation::P3:
    case Modulation::P4: {
      constexpr int kSubcodes[] = {16, 25, 36};
      const int cycles = uniform_int(rng, 4, 6);
      p.type_params = SubcodeParams{cycles, kSubcodes[uniform_int(rng, 0, 2)]};
      break;
    }
    case Modulation::T1:
    case Modulation::T2:
      p.type_params = SegmentParams{uniform_int(rng, 2, 3), uniform_int(rng, 4, 6)};
      break;
    case Modulation::T3:
    case Modulation::T4: {
      const int states = uniform_int(rng, 2, 3);
      p.type_params = ChirpCodeParams{states, uniform_real(rng, cfg.fs / 20.0, cfg.fs / 10.0)};
      break;
    }
  }
  return p;
}

void validate(const WaveformParams& p) {
  if (!(p.fs > 0.0)) throw ParamError("fs must be positive");
  if (!(p.fc > 0.0 && p.fc < p.fs / 2.0)) throw ParamError("fc must lie in (0, fs/2)");
  if (!(p.pulse_width > 0.0)) throw ParamError("pulse_width must be positive");
  if (!(p.amplitude > 0.0)) throw ParamError("amplitude must be positive");
  switch (p.modulation) {
    case Modulation::LFM:
      if (!(expect<LfmParams>(p).bandwidth > 0.0)) throw ParamError("LFM bandwidth must be positive");
      break;
    case Modulation::Costas: {
      const auto& c = expect<CostasParams>(p);
      if (c.order < 3 || c.order > 6) throw ParamError("Costas order must lie in 3..6");
      if (!(c.fundamental > 0.0)) throw ParamError("Costas fundamental must be positive");
      if (static_cast<int>(c.hops.size()) != c.order || !is_costas(c.hops)) {
        throw ParamError("Costas hops are not a Costas permutation");
      }
      break;
    }
    case Modulation::Frank:
    case Modulation::P1:
    case Modulation::P2: {
      const auto& s = expect<SteppedParams>(p);
      if (s.cycles_per_chip < 1 || s.steps < 2) throw ParamError("stepped code needs cycles >= 1, steps >= 2");
      break;
    }
    case Modulation::P3:
    case Modulation::P4: {
      const auto& s = expect<SubcodeParams>(p);
      if (s.cycles_per_chip < 1 || s.subcodes < 2) throw ParamError("P3/P4 needs cycles >= 1, subcodes >= 2");
      break;
    }
    case Modulation::T1:
    case Modulation::T2: {
      const auto& s = expect<SegmentParams>(p);
      if (s.states < 2 || s.segments < 1) throw ParamError("T1/T2 needs states >= 2, segments >= 1");
      break;
    }
    case Modulation::T3:
    case Modulation::T4: {
      const auto& s = expect<ChirpCodeParams>(p);
      if (s.states < 2 || !(s.bandwidth > 0.0)) throw ParamError("T3/T4 needs states >= 2, bandwidth > 0");
      break;
    }
  }
}

std::size_t sample_count(const WaveformParams& p) {
  return static_cast<std::size_t>(std::llround(p.pulse_width * p.fs));
}

ComplexWaveform generate_waveform(const WaveformParams& p, PhaseTrack* track) {
  validate(p);
  const std::size_t K = sample_count(p);
  if (K < 8) throw ParamError("pulse too short: K = " + std::to_string(K) + " < 8");
  const double ts = 1.0 / p.fs;

  ComplexWaveform w;
  w.fs = p.fs;
  w.samples.resize(K);
  if (track) {
    *track = PhaseTrack{};
    track->frequency.resize(K);
    track->phase.assign(K, 0.0);
  }
  for (std::size_t k = 0; k < K; ++k) {
    const double t = static_cast<double>(k) * ts;
    double theta = 0.0;
    double freq = p.fc;
    if (p.modulation == Modulation::LFM) {
      const double B = std::get<LfmParams>(p.type_params).bandwidth;
      theta = kTwoPi * (p.fc - B / 2.0) * t + std::numbers::pi * B * t * t / p.pulse_width;
      freq = p.fc - B / 2.0 + B * t / p.pulse_width;
    } else if (p.modulation == Modulation::Costas) {
      const auto& c = std::get<CostasParams>(p.type_params);
      const std::size_t hop = std::min<std::size_t>(c.order - 1, k * c.order / K);
      freq = c.hops[hop] * c.fundamental;
      theta = kTwoPi * freq * t;
    } else {
      const CodedPhase cp = coded_phase(p, k, K);
      const double phi = kTwoPi * static_cast<double>(cp.index) / static_cast<double>(cp.states);
      theta = kTwoPi * freq * t + phi;
      if (track) {
        track->phase[k] = phi;
        track->phase_index.push_back(cp.index);
        track->phase_states = cp.states;
      }
    }
    if (track) track->frequency[k] = freq;
    w.samples[k] = std::polar(p.amplitude, theta);
  }
  return w;
}

bool is_costas(const std::vector<int>& perm) {
  const int n = static_cast<int>(perm.size());
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < n; ++i)
    if (sorted[i] != i + 1) return false;
  for (int d = 1; d < n; ++d) {
    std::set<int> seen;
    for (int i = 0; i + d < n; ++i)
      if (!seen.insert(perm[i + d] - perm[i]).second) return false;
  }
  return true;
}

std::vector<std::vector<int>> costas_sequences(int order) {
  if (order < 3 || order > 6) throw ParamError("costas_sequences: order must lie in 3..6, got " + std::to_string(order));
  std::vector<int> perm(order);
  std::iota(perm.begin(), perm.end(), 1);
  std::vector<std::vector<int>> out;
  do {
    if (is_costas(perm)) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

ComplexWaveform add_awgn(const ComplexWaveform& w, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return w;
  if (w.samples.empty()) return w;
  double power = 0.0;
  for (const auto& s : w.samples) power += std::norm(s);
  power /= static_cast<double>(w.samples.size());
  const double sigma2 = power * std::pow(10.0, -snr_db / 10.0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2 / 2.0));
  Rng rng(derive_seed(seed, 0x6e6f697365ULL));
  ComplexWaveform out = w;
  for (auto& s : out.samples) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    s += std::complex<double>(re, im);
  }
  return out;
}

}  // namespace cir::sim
