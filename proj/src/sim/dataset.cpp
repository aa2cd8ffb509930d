#include "cir/sim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <set>

#include "cir/io.hpp"
#include "cir/rng.hpp"

namespace cir::sim {

using nlohmann::json;

namespace {

std::string snr_tag(double snr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(snr));
  return (snr < 0 ? "m" : "p") + std::string(buf);
}

std::string record_stem(Modulation m, double snr, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return std::string(name(m)) + "_" + snr_tag(snr) + "_" + buf;
}

std::uint64_t record_key(Modulation m, std::size_t snr_index, std::size_t i) {
  return (static_cast<std::uint64_t>(m) << 40) | (static_cast<std::uint64_t>(snr_index) << 24) |
         static_cast<std::uint64_t>(i);
}

struct Job {
  Modulation label;
  std::size_t snr_index;
  std::size_t index;
  Split split;
};

std::vector<Job> plan(const DatasetConfig& cfg) {
  const std::size_t n_train = train_count(cfg);
  const std::size_t n_total = cfg.samples_per_class;
  std::vector<Job> jobs;
  for (Modulation m : cfg.known)
    for (std::size_t s = 0; s < cfg.snr_list.size(); ++s)
      for (std::size_t i = 0; i < n_total; ++i) jobs.push_back({m, s, i, i < n_train ? Split::Train : Split::Test});
  for (Modulation m : cfg.unknown)
    for (std::size_t s = 0; s < cfg.snr_list.size(); ++s)
      for (std::size_t i = n_train; i < n_total; ++i) jobs.push_back({m, s, i, Split::Test});
  return jobs;
}

Record run(const DatasetConfig& cfg, std::uint64_t seed, const Job& job) {
  const std::uint64_t key = derive_seed(seed, record_key(job.label, job.snr_index, job.index));
  const WaveformParams p = sample_params(job.label, derive_seed(key, 1), cfg.sim);
  const ComplexWaveform clean = generate_waveform(p);
  const double snr = cfg.snr_list[job.snr_index];
  const ComplexWaveform noisy = add_awgn(clean, snr, derive_seed(key, 2));
  return {tfa::waveform_to_tfi(noisy, cfg.tfa), tfa::waveform_to_tfi(clean, cfg.tfa), job.label, snr, job.split};
}

std::vector<Modulation> complement(const std::vector<Modulation>& unknown) {
  std::vector<Modulation> known;
  for (Modulation m : kAllModulations)
    if (std::find(unknown.begin(), unknown.end(), m) == unknown.end()) known.push_back(m);
  return known;
}

}  // namespace

std::string_view split_name(Split s) { return s == Split::Train ? "train" : "test"; }

void validate(const DatasetConfig& cfg) {
  if (cfg.known.empty()) throw ConfigError("dataset config: known class set is empty");
  std::set<Modulation> seen;
  for (Modulation m : cfg.known)
    if (!seen.insert(m).second) throw ConfigError("dataset config: class " + std::string(name(m)) + " listed twice");
  for (Modulation m : cfg.unknown) {
    if (std::find(cfg.known.begin(), cfg.known.end(), m) != cfg.known.end()) {
      throw ConfigError("dataset config: class " + std::string(name(m)) + " is both known and unknown");
    }
    if (!seen.insert(m).second) throw ConfigError("dataset config: class " + std::string(name(m)) + " listed twice");
  }
  if (cfg.snr_list.empty()) throw ConfigError("dataset config: snr_list is empty");
  for (double s : cfg.snr_list)
    if (std::isnan(s)) throw ConfigError("dataset config: snr_list holds NaN");
  if (cfg.samples_per_class == 0) throw ConfigError("dataset config: samples_per_class must be positive");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ConfigError("dataset config: train_fraction must lie in (0, 1)");
  }
  if (!(cfg.sim.fs > 0.0) || !(cfg.sim.pulse_width > 0.0) || !(cfg.sim.amplitude > 0.0)) {
    throw ConfigError("dataset config: fs, pulse_width and amplitude must be positive");
  }
  if (cfg.tfa.height == 0 || cfg.tfa.width == 0) throw ConfigError("dataset config: image size must be positive");
}

DatasetConfig preset_d1() {
  DatasetConfig c;
  using M = Modulation;
  c.known = {M::LFM, M::P1, M::P2, M::P3, M::P4, M::T1, M::T3};
  c.unknown = {M::Frank, M::Costas, M::T2, M::T4};
  c.snr_list = {-10, -8, -6, -4, -2, 2, 4, 6, 8, 10};
  return c;
}

DatasetConfig preset_d2(int step) {
  using M = Modulation;
  static const std::vector<M> order = {M::P1, M::P2, M::T1, M::T3, M::Costas, M::Frank, M::P3, M::P4, M::T2, M::T4};
  if (step < 1 || step > 10) throw ConfigError("D2 step must lie in 1..10, got " + std::to_string(step));
  DatasetConfig c;
  std::vector<M> unknown(order.begin(), order.begin() + step);
  c.known = complement(unknown);
  for (M m : kAllModulations)
    if (std::find(unknown.begin(), unknown.end(), m) != unknown.end()) c.unknown.push_back(m);
  c.snr_list = {-8, -4, 0, 4};
  return c;
}

std::size_t train_count(const DatasetConfig& cfg) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(cfg.samples_per_class) * cfg.train_fraction));
}

std::size_t test_count(const DatasetConfig& cfg) { return cfg.samples_per_class - train_count(cfg); }

std::vector<Record> generate_records(const DatasetConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  std::vector<Record> out;
  for (const Job& job : plan(cfg)) out.push_back(run(cfg, seed, job));
  return out;
}

Manifest build_dataset(const DatasetConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir) {
  validate(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(dir / "noisy");
  fs::create_directories(dir / "clean");

  Manifest m;
  m.fs = cfg.sim.fs;
  for (Modulation k : cfg.known) m.known.emplace_back(name(k));
  for (Modulation u : cfg.unknown) m.unknown.emplace_back(name(u));
  m.snr_list = cfg.snr_list;
  m.train_fraction = cfg.train_fraction;
  m.seed = seed;
  m.height = cfg.tfa.height;
  m.width = cfg.tfa.width;
  for (const Job& job : plan(cfg)) {
    const Record r = run(cfg, seed, job);
    const std::string stem = record_stem(job.label, r.snr, job.index);
    RecordEntry e{"noisy/" + stem + ".tfi", "clean/" + stem + ".tfi", std::string(name(job.label)), r.snr, job.split};
    tfa::write_tfi(dir / e.file, r.noisy);
    tfa::write_tfi(dir / e.clean_file, r.clean);
    ++m.counts[std::string(split_name(job.split))][e.label];
    m.records.push_back(std::move(e));
  }
  atomic_write(dir / "manifest.json", manifest_to_json(m));
  return m;
}

std::string manifest_to_json(const Manifest& m) {
  json j;
  j["version"] = m.version;
  j["fs"] = m.fs;
  j["classes"] = {{"known", m.known}, {"unknown", m.unknown}};
  j["snr_list"] = m.snr_list;
  j["counts"] = m.counts;
  j["split"] = {{"train_fraction", m.train_fraction}};
  j["seed"] = m.seed;
  j["height"] = m.height;
  j["width"] = m.width;
  json recs = json::array();
  for (const auto& r : m.records) {
    json e = {{"file", r.file}, {"label", r.label}, {"snr", r.snr}, {"split", split_name(r.split)}};
    if (!r.clean_file.empty()) e["clean_file"] = r.clean_file;
    recs.push_back(std::move(e));
  }
  j["records"] = std::move(recs);
  return j.dump(1) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  Manifest m;
  try {
    const json j = json::parse(text);
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw ManifestError("manifest: unsupported version " + std::to_string(m.version));
    m.fs = j.at("fs").get<double>();
    m.known = j.at("classes").at("known").get<std::vector<std::string>>();
    m.unknown = j.at("classes").at("unknown").get<std::vector<std::string>>();
    m.snr_list = j.at("snr_list").get<std::vector<double>>();
    if (j.contains("counts")) m.counts = j.at("counts").get<decltype(m.counts)>();
    m.train_fraction = j.at("split").at("train_fraction").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.height = j.at("height").get<std::size_t>();
    m.width = j.at("width").get<std::size_t>();
    for (const auto& e : j.at("records")) {
      RecordEntry r;
      r.file = e.at("file").get<std::string>();
      r.label = e.at("label").get<std::string>();
      r.snr = e.at("snr").get<double>();
      const std::string split = e.at("split").get<std::string>();
      if (split != "train" && split != "test") throw ManifestError("manifest: bad split '" + split + "'");
      r.split = split == "train" ? Split::Train : Split::Test;
      if (e.contains("clean_file")) r.clean_file = e.at("clean_file").get<std::string>();
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ManifestError(std::string("manifest: ") + e.what());
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& dir) {
  try {
    return manifest_from_json(read_file(dir / "manifest.json"));
  } catch (const IoError& e) {
    throw ManifestError(e.what());
  }
}

std::vector<LoadedRecord> load_split(const std::filesystem::path& dir, const Manifest& m, Split split,
                                     bool require_clean) {
  std::vector<LoadedRecord> out;
  for (const auto& r : m.records) {
    if (r.split != split) continue;
    LoadedRecord l;
    l.label = r.label;
    l.snr = r.snr;
    try {
      l.noisy = tfa::read_tfi(dir / r.file);
      if (!r.clean_file.empty()) {
        l.clean = tfa::read_tfi(dir / r.clean_file);
      } else if (require_clean) {
        throw ManifestError("manifest: record " + r.file + " has no clean pair");
      }
    } catch (const tfa::TfiFormatError& e) {
      throw ManifestError(e.what());
    }
    if (l.noisy.height != m.height || l.noisy.width != m.width) {
      throw ManifestError("manifest: " + r.file + " does not match the declared image size");
    }
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace cir::sim
