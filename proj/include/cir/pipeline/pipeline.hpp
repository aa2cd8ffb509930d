#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cir/core/cir.hpp"
#include "cir/denoise/denoiser.hpp"
#include "cir/tfa/image.hpp"

namespace cir::pipeline {

class PipelineError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite loss or gradient stopped training.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, version, truncated, corrupt, class_mismatch };
  CheckpointError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr int kUnknown = -1;

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch = 32;
  float lr_ae = 1e-3f;
  float lr_denoiser = 1e-3f;
  float lr_critic = 5e-4f;
  float lr_q = 5e-4f;
  std::uint64_t seed = 0;
};

/// Every learned part of the pipeline, with one parameter store per
/// optimiser group.
class Model {
 public:
  Model(const core::CoreConfig& cfg, std::vector<std::string> classes, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const core::CoreConfig& config() const { return cfg_; }
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t num_classes() const { return classes_.size(); }

  denoise::Denoiser& denoiser() { return denoiser_; }
  const denoise::Denoiser& denoiser() const { return denoiser_; }
  ad::ParamStore& ae_params() { return ae_store_; }
  ad::ParamStore& critic_params() { return critic_store_; }
  ad::ParamStore& q_params() { return q_store_; }

  const core::Encoder& encoder() const { return encoder_; }
  const core::Decoder& decoder() const { return decoder_; }
  const core::ConditionMaps& maps() const { return maps_; }
  const core::Critic& critic() const { return critic_; }
  const core::Variational& variational() const { return q_; }

  /// Stores in checkpoint order.
  std::vector<const ad::ParamStore*> stores() const;
  std::vector<ad::ParamStore*> stores();

  /// Reconstructions of z under every CCV, class-major: row j*B + i is
  /// sample i decoded with class j. Without CCVs this is decode(z), (B, ...).
  ad::Var reconstruct_all(const ad::Var& z) const;

 private:
  core::CoreConfig cfg_;
  std::vector<std::string> classes_;
  denoise::Denoiser denoiser_;
  ad::ParamStore ae_store_, critic_store_, q_store_;
  Rng init_rng_;
  core::Encoder encoder_;
  core::Decoder decoder_;
  core::ConditionMaps maps_;
  core::Critic critic_;
  core::Variational q_;
  ad::Tensor ccv_;
};

struct TrainingSet {
  std::vector<tfa::Image> noisy;
  std::vector<tfa::Image> clean;
  std::vector<std::size_t> labels;  // 0-based known-class index
};

struct EpochStats {
  std::size_t epoch = 0;
  double l_de = 0.0;
  double l_re = 0.0;
  double l_mi = 0.0;
  double ub = 0.0;
  double lb = 0.0;
};

struct Checkpoint {
  std::unique_ptr<Model> model;
  std::optional<double> tau;
  std::uint64_t seed = 0;
  TrainConfig train;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Alternating denoiser / reconstruction / critic / variational updates,
/// then threshold selection on the denoised training set.
Checkpoint train(const TrainingSet& data, const core::CoreConfig& cfg, const std::vector<std::string>& classes,
                 const TrainConfig& tc, const EpochCallback& on_epoch = {});

/// Sorts ascending and returns the g-th smallest loss, g = ceil(0.99 N).
double select_threshold(std::vector<double> losses);

struct Prediction {
  int label = kUnknown;     // class index or kUnknown
  std::vector<double> R;    // per-class reconstruction loss
  double r_min = 0.0;
  std::size_t argmin = 0;
};

/// argmin with ties to the smallest index; UNKNOWN when R_min >= tau.
Prediction decide(std::vector<double> R, double tau);

/// Per-class reconstruction losses of the denoised inputs, one row per image.
std::vector<std::vector<double>> class_losses(const Model& m, const std::vector<tfa::Image>& images,
                                              std::size_t batch = 64);

/// Matched-class losses of a labelled set.
std::vector<double> matched_losses(const Model& m, const std::vector<tfa::Image>& images,
                                   const std::vector<std::size_t>& labels);

std::vector<Prediction> infer(const Checkpoint& ckpt, const std::vector<tfa::Image>& images);
Prediction infer(const Checkpoint& ckpt, const tfa::Image& image);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError(class_mismatch) unless `classes` equals the
/// checkpoint's class list.
void check_classes(const Checkpoint& ckpt, const std::vector<std::string>& classes);

}  // namespace cir::pipeline
