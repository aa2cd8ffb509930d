#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cir::sim {

/// Raised for parameters outside the documented ranges.
class ParamError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Modulation { LFM, Costas, Frank, P1, P2, P3, P4, T1, T2, T3, T4 };

inline constexpr std::array<Modulation, 11> kAllModulations = {
    Modulation::LFM, Modulation::Costas, Modulation::Frank, Modulation::P1, Modulation::P2, Modulation::P3,
    Modulation::P4,  Modulation::T1,     Modulation::T2,    Modulation::T3, Modulation::T4};

std::string_view name(Modulation m);
/// Case-sensitive lookup; std::nullopt for unknown names.
std::optional<Modulation> parse_modulation(std::string_view s);

struct LfmParams {
  double bandwidth = 0.0;
};
struct CostasParams {
  int order = 0;
  double fundamental = 0.0;
  std::vector<int> hops;  // permutation of 1..order
};
/// Frank, P1 and P2.
struct SteppedParams {
  int cycles_per_chip = 0;
  int steps = 0;
};
/// P3 and P4.
struct SubcodeParams {
  int cycles_per_chip = 0;
  int subcodes = 0;
};
/// T1 and T2.
struct SegmentParams {
  int states = 0;
  int segments = 0;
};
/// T3 and T4.
struct ChirpCodeParams {
  int states = 0;
  double bandwidth = 0.0;
};

using TypeParams =
    std::variant<LfmParams, CostasParams, SteppedParams, SubcodeParams, SegmentParams, ChirpCodeParams>;

struct WaveformParams {
  Modulation modulation = Modulation::LFM;
  double fs = 50e6;
  double fc = 10e6;
  double pulse_width = 6e-6;
  double amplitude = 1.0;
  TypeParams type_params;
};

struct SimConfig {
  double fs = 50e6;
  double pulse_width = 6e-6;
  double amplitude = 1.0;
};

/// Draws carrier and per-type parameters from their uniform ranges.
WaveformParams sample_params(Modulation m, std::uint64_t seed, const SimConfig& cfg = {});

/// Throws ParamError unless `p` satisfies the structural invariants.
void validate(const WaveformParams& p);

std::size_t sample_count(const WaveformParams& p);

struct ComplexWaveform {
  std::vector<std::complex<double>> samples;
  double fs = 0.0;
};

/// Per-sample law behind a generated waveform. For coded types the
/// phase offset is exactly 2*pi*phase_index[k]/phase_states; for LFM and
/// Costas phase_states is 0 and phase_index is empty.
struct PhaseTrack {
  std::vector<double> frequency;  // Hz
  std::vector<double> phase;      // rad, in [0, 2*pi)
  std::vector<std::int64_t> phase_index;
  std::int64_t phase_states = 0;
};

ComplexWaveform generate_waveform(const WaveformParams& p, PhaseTrack* track = nullptr);

/// All Costas permutations of {1..order}, lexicographic.
std::vector<std::vector<int>> costas_sequences(int order);

/// True when every displacement-difference vector of `perm` is distinct.
bool is_costas(const std::vector<int>& perm);

inline constexpr double kCleanSnr = std::numeric_limits<double>::infinity();

/// Adds circular complex Gaussian noise at `snr_db` relative to the mean
/// signal power. +infinity returns the input unchanged.
ComplexWaveform add_awgn(const ComplexWaveform& w, double snr_db, std::uint64_t seed);

}  // namespace cir::sim
