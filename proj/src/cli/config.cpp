#include <cmath>
#include <json.hpp>
#include <set>

#include "cir/cli/cli.hpp"
#include "cir/io.hpp"

namespace cir::cli {

using json = nlohmann::json;
using sim::ConfigError;

namespace {

void allow_only(const json& obj, const std::string& where, const std::set<std::string>& keys) {
  if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!keys.count(k)) throw ConfigError("config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

template <class T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  const std::string path = where.empty() ? key : where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError("config: " + path + " must be true or false");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      throw ConfigError("config: " + path + " must be a non-negative integer");
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError("config: " + path + " must be a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError("config: " + path + " must be a string");
  }
  out = v.get<T>();
}

std::vector<sim::Modulation> read_classes(const json& obj, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(std::string("config: dataset.") + key + " must be a list of class names");
  std::vector<sim::Modulation> out;
  for (const json& e : v) {
    if (!e.is_string()) throw ConfigError(std::string("config: dataset.") + key + " must hold strings");
    const auto m = sim::parse_modulation(e.get<std::string>());
    if (!m) throw ConfigError("config: unknown modulation '" + e.get<std::string>() + "' in dataset." + key);
    out.push_back(*m);
  }
  return out;
}

sim::DatasetConfig from_preset(const std::string& preset) {
  if (preset == "D1" || preset == "custom") return sim::preset_d1();
  const std::string prefix = "D2-step-";
  if (preset.rfind(prefix, 0) == 0) {
    const std::string k = preset.substr(prefix.size());
    if (k.empty() || k.size() > 2 || k.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("config: bad preset '" + preset + "'");
    }
    return sim::preset_d2(std::stoi(k));
  }
  throw ConfigError("config: preset must be D1, D2-step-<k> or custom, got '" + preset + "'");
}

void check_model(const ExperimentConfig& c) {
  if (c.model.d_z == 0 || c.model.d_z > 4096) throw ConfigError("config: model.d_z must lie in 1..4096");
  if (!(c.model.gamma > 0.0f)) throw ConfigError("config: model.gamma must be positive");
  if (!(c.model.lambda_mi >= 0.0f) || !std::isfinite(c.model.lambda_mi)) {
    throw ConfigError("config: model.lambda_mi must be >= 0");
  }
  if (c.train.epochs == 0 || c.train.epochs > 100000) throw ConfigError("config: train.epochs must lie in 1..100000");
  if (c.train.batch < 2) throw ConfigError("config: train.batch must be at least 2");
  for (float lr : {c.train.lr_ae, c.train.lr_denoiser, c.train.lr_critic, c.train.lr_q}) {
    if (!(lr > 0.0f) || !std::isfinite(lr)) throw ConfigError("config: learning rates must be positive");
  }
  if (c.data.tfa.height < 8 || c.data.tfa.width < 8) throw ConfigError("config: image size must be at least 8x8");
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.data = sim::preset_d1();
  return c;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  allow_only(j, "", {"preset", "seed", "dataset", "model", "train", "paths"});
  ExperimentConfig c;
  read(j, "", "preset", c.preset);
  c.data = from_preset(c.preset);
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    read(j, "", "seed", s);
    c.seed = s;
  }

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    allow_only(d, "dataset",
               {"known", "unknown", "snr_list", "samples_per_class", "train_fraction", "fs", "pulse_width",
                "amplitude", "height", "width", "window_len", "nfft", "pre_frames", "log_magnitude"});
    if (d.contains("known")) c.data.known = read_classes(d, "known");
    if (d.contains("unknown")) c.data.unknown = read_classes(d, "unknown");
    if (d.contains("snr_list")) {
      if (!d.at("snr_list").is_array()) throw ConfigError("config: dataset.snr_list must be a list of numbers");
      c.data.snr_list.clear();
      for (const json& v : d.at("snr_list")) {
        if (!v.is_number()) throw ConfigError("config: dataset.snr_list must hold numbers");
        c.data.snr_list.push_back(v.get<double>());
      }
    }
    read(d, "dataset", "samples_per_class", c.data.samples_per_class);
    read(d, "dataset", "train_fraction", c.data.train_fraction);
    read(d, "dataset", "fs", c.data.sim.fs);
    read(d, "dataset", "pulse_width", c.data.sim.pulse_width);
    read(d, "dataset", "amplitude", c.data.sim.amplitude);
    read(d, "dataset", "height", c.data.tfa.height);
    read(d, "dataset", "width", c.data.tfa.width);
    read(d, "dataset", "window_len", c.data.tfa.window_len);
    read(d, "dataset", "nfft", c.data.tfa.nfft);
    read(d, "dataset", "pre_frames", c.data.tfa.pre_frames);
    read(d, "dataset", "log_magnitude", c.data.tfa.log_magnitude);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    allow_only(m, "model", {"d_z", "gamma", "lambda_mi", "use_ccv"});
    read(m, "model", "d_z", c.model.d_z);
    read(m, "model", "gamma", c.model.gamma);
    read(m, "model", "lambda_mi", c.model.lambda_mi);
    read(m, "model", "use_ccv", c.model.use_ccv);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    allow_only(t, "train", {"epochs", "batch", "lr", "lr_denoiser", "lr_critic", "lr_q"});
    read(t, "train", "epochs", c.train.epochs);
    read(t, "train", "batch", c.train.batch);
    read(t, "train", "lr", c.train.lr_ae);
    read(t, "train", "lr_denoiser", c.train.lr_denoiser);
    read(t, "train", "lr_critic", c.train.lr_critic);
    read(t, "train", "lr_q", c.train.lr_q);
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    allow_only(p, "paths", {"data", "checkpoint", "report"});
    auto path = [&](const char* key, std::filesystem::path& out) {
      std::string s = out.string();
      read(p, "paths", key, s);
      out = s;
    };
    path("data", c.data_dir);
    path("checkpoint", c.checkpoint);
    path("report", c.report);
  }
  if (c.preset == "custom" && !(j.contains("dataset") && j.at("dataset").contains("known"))) {
    throw ConfigError("config: preset custom needs dataset.known");
  }
  sim::validate(c.data);
  check_model(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(text);
}

}  // namespace cir::cli
