#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cir/sim/waveform.hpp"
#include "cir/tfa/stft.hpp"

namespace cir::sim {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Test };
std::string_view split_name(Split s);

struct DatasetConfig {
  SimConfig sim;
  tfa::TfaConfig tfa;
  std::vector<Modulation> known;
  std::vector<Modulation> unknown;
  std::vector<double> snr_list;
  /// Per class per SNR, before the split. Unknown classes only produce
  /// their test share.
  std::size_t samples_per_class = 100;
  double train_fraction = 0.8;
};

/// Throws ConfigError naming the offending class or field.
void validate(const DatasetConfig& cfg);

/// Seven known, four unknown, SNR -10..10 dB in 2 dB steps without 0.
DatasetConfig preset_d1();
/// Openness sweep, step 1 (one unknown) to 10 (ten unknown); SNR {-8,-4,0,4}.
DatasetConfig preset_d2(int step);

std::size_t train_count(const DatasetConfig& cfg);
std::size_t test_count(const DatasetConfig& cfg);

struct Record {
  tfa::Image noisy;
  tfa::Image clean;
  Modulation label = Modulation::LFM;
  double snr = 0.0;
  Split split = Split::Train;
};

/// Pure function of (cfg, seed, index); the order of the returned vector is
/// class-major, then SNR, then sample.
std::vector<Record> generate_records(const DatasetConfig& cfg, std::uint64_t seed);

struct RecordEntry {
  std::string file;
  std::string clean_file;
  std::string label;
  double snr = 0.0;
  Split split = Split::Train;
};

struct Manifest {
  int version = 1;
  double fs = 0.0;
  std::vector<std::string> known;
  std::vector<std::string> unknown;
  std::vector<double> snr_list;
  std::map<std::string, std::map<std::string, std::size_t>> counts;  // split -> class -> n
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<RecordEntry> records;
};

/// Generates the dataset, writes TFI pairs under `dir` and `dir/manifest.json`.
Manifest build_dataset(const DatasetConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir);

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

Manifest load_manifest(const std::filesystem::path& dir);

struct LoadedRecord {
  tfa::Image noisy;
  tfa::Image clean;  // empty when the manifest has no clean pair
  std::string label;
  double snr = 0.0;
};

/// Reads the TFI files of one split. With `require_clean`, a record lacking
/// its clean pair raises ManifestError.
std::vector<LoadedRecord> load_split(const std::filesystem::path& dir, const Manifest& m, Split split,
                                     bool require_clean);

}  // namespace cir::sim
