#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cir/ad/var.hpp"

namespace cir::ad {

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Raised when an optimizer step sees a non-finite gradient.
class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(const std::string& param, const std::string& message)
      : std::runtime_error(message), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

/// Named trainable tensors plus adaptive-moment state.
class ParamStore {
 public:
  /// Registers a new trainable leaf. Names must be unique.
  Var add(const std::string& name, Tensor init);

  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;
  std::uint64_t step_count() const { return step_; }

  /// One bias-corrected adaptive-moment update. Throws NonFiniteGradient
  /// before touching any parameter if a gradient holds NaN or Inf.
  void adam_step(const Gradients& grads, float lr, const AdamConfig& cfg = {});

  struct Entry {
    std::string name;
    Var param;
    Tensor m;
    Tensor v;
  };
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

/// Thrown when a parameter blob cannot be decoded or does not fit the
/// destination stores.
class BlobError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter blob: u32 entry count, then per entry u32 name length, name
/// bytes, u32 rank, u32 extents[rank], float32 payload. Little-endian.
void write_param_blob(std::ostream& os, const std::vector<const ParamStore*>& stores);

/// Decodes a blob into a name -> tensor map without touching any store.
std::map<std::string, Tensor> read_param_blob(std::istream& is);

/// Copies decoded tensors into the stores. Every store parameter must be
/// present with an identical shape; nothing is written unless all match.
void assign_params(const std::map<std::string, Tensor>& blob, const std::vector<ParamStore*>& stores);

}  // namespace cir::ad
