#include "cir/ad/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

namespace cir::ad {

Var ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
  Shape shape = init.shape();
  Var param(std::move(init), true);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, param, Tensor(shape, 0.0f), Tensor(shape, 0.0f)});
  return param;
}

const Var& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return entries_[it->second].param;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.param.value().size();
  return n;
}

void ParamStore::adam_step(const Gradients& grads, float lr, const AdamConfig& cfg) {
  std::vector<Tensor> gs;
  gs.reserve(entries_.size());
  for (const auto& e : entries_) {
    gs.push_back(grads.of(e.param));
    if (!gs.back().all_finite()) {
      throw NonFiniteGradient(e.name, "adam_step: non-finite gradient for parameter '" + e.name + "'");
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(step_));
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    Entry& e = entries_[k];
    const Tensor& g = gs[k];
    Tensor& w = e.param.mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      e.m[i] = cfg.beta1 * e.m[i] + (1.0f - cfg.beta1) * g[i];
      e.v[i] = cfg.beta2 * e.v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
      const double m_hat = e.m[i] / bc1;
      const double v_hat = e.v[i] / bc2;
      w[i] -= static_cast<float>(lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw BlobError("parameter blob truncated");
  return v;
}

}  // namespace

void write_param_blob(std::ostream& os, const std::vector<const ParamStore*>& stores) {
  std::uint32_t count = 0;
  for (const auto* s : stores) count += static_cast<std::uint32_t>(s->size());
  put_u32(os, count);
  for (const auto* s : stores) {
    for (const auto& e : s->entries()) {
      put_u32(os, static_cast<std::uint32_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      const Tensor& t = e.param.value();
      put_u32(os, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
      os.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
  }
}

std::map<std::string, Tensor> read_param_blob(std::istream& is) {
  constexpr std::uint32_t kMaxName = 1 << 12;
  constexpr std::uint32_t kMaxRank = 8;
  std::map<std::string, Tensor> out;
  const std::uint32_t count = get_u32(is);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t len = get_u32(is);
    if (len == 0 || len > kMaxName) throw BlobError("parameter blob: bad name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw BlobError("parameter blob truncated");
    const std::uint32_t rank = get_u32(is);
    if (rank > kMaxRank) throw BlobError("parameter blob: bad rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = get_u32(is);
    std::vector<float> data(shape_size(shape));
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)))) {
      throw BlobError("parameter blob truncated inside '" + name + "'");
    }
    if (!out.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
      throw BlobError("parameter blob: duplicate entry '" + name + "'");
    }
  }
  return out;
}

void assign_params(const std::map<std::string, Tensor>& blob, const std::vector<ParamStore*>& stores) {
  std::size_t expected = 0;
  for (auto* s : stores) {
    for (const auto& e : s->entries()) {
      auto it = blob.find(e.name);
      if (it == blob.end()) throw BlobError("parameter blob: missing '" + e.name + "'");
      if (it->second.shape() != e.param.shape()) {
        throw BlobError("parameter blob: '" + e.name + "' has shape " + shape_str(it->second.shape()) +
                        ", expected " + shape_str(e.param.shape()));
      }
      ++expected;
    }
  }
  if (expected != blob.size()) throw BlobError("parameter blob: unexpected extra entries");
  for (auto* s : stores) {
    for (const auto& e : s->entries()) {
      Var p = e.param;
      p.mutable_value() = blob.at(e.name);
    }
  }
}

}  // namespace cir::ad
