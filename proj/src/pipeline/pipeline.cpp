#include "cir/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "cir/io.hpp"
#include "cir/rng.hpp"

namespace cir::pipeline {

using ad::Shape;
using ad::Tensor;
using ad::Var;
using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'I', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr int kFormatVersion = 1;

const core::CoreConfig& checked(const core::CoreConfig& cfg, const std::vector<std::string>& classes) {
  if (classes.size() < 2) throw PipelineError("model needs at least 2 known classes");
  if (cfg.classes != classes.size()) {
    throw PipelineError("config has M = " + std::to_string(cfg.classes) + " but " + std::to_string(classes.size()) +
                        " class names were given");
  }
  if (cfg.d_z == 0) throw PipelineError("d_z must be positive");
  if (cfg.height < 8 || cfg.width < 8) throw PipelineError("images must be at least 8x8");
  return cfg;
}

// Stacks the selected images into a (n, 1, H, W) tensor.
Tensor stack(const std::vector<float>& flat, std::size_t pixels, const std::vector<std::size_t>& idx,
             std::size_t h, std::size_t w) {
  Tensor t({idx.size(), 1, h, w});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(flat.data() + idx[r] * pixels, pixels, t.ptr() + r * pixels);
  }
  return t;
}

std::vector<float> flatten(const std::vector<tfa::Image>& images, std::size_t h, std::size_t w, const char* what) {
  std::vector<float> flat;
  flat.reserve(images.size() * h * w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& im = images[i];
    if (im.height != h || im.width != w || im.pixels.size() != h * w) {
      throw denoise::InputError(std::string(what) + " image " + std::to_string(i) + " is " +
                                std::to_string(im.height) + "x" + std::to_string(im.width) + ", model expects " +
                                std::to_string(h) + "x" + std::to_string(w));
    }
    flat.insert(flat.end(), im.pixels.begin(), im.pixels.end());
  }
  return flat;
}

// Denoised copies of every image, under no-grad, in batches.
std::vector<float> denoise_all(const denoise::Denoiser& d, const std::vector<float>& flat, std::size_t n,
                               std::size_t h, std::size_t w, std::size_t batch) {
  ad::NoGradGuard guard;
  const std::size_t px = h * w;
  std::vector<float> out(flat.size());
  for (std::size_t s = 0; s < n; s += batch) {
    std::vector<std::size_t> idx(std::min(batch, n - s));
    std::iota(idx.begin(), idx.end(), s);
    const Var y = d(ad::constant(stack(flat, px, idx, h, w)));
    std::copy(y.value().data().begin(), y.value().data().end(), out.begin() + static_cast<std::ptrdiff_t>(s * px));
  }
  return out;
}

void require_finite(float v, const char* what, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(v)) {
    throw TrainingDiverged(std::string(what) + " became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch));
  }
}

void step(ad::ParamStore& store, const Var& loss, float lr, std::size_t epoch, std::size_t batch) {
  try {
    store.adam_step(ad::backward(loss), lr);
  } catch (const ad::NonFiniteGradient& e) {
    throw TrainingDiverged("gradient of '" + e.param() + "' became non-finite at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch));
  }
}

// Row-wise reconstruction losses for the whole batch, as class-major (M*B).
std::vector<float> batch_losses(const Model& m, const Tensor& x_n) {
  const std::size_t B = x_n.dim(0), M = m.num_classes();
  const Var x = m.denoiser()(ad::constant(x_n));
  const Var z = m.encoder()(x);
  const Var rec = m.reconstruct_all(z);
  std::vector<float> out(M * B);
  if (!m.config().use_ccv) {
    const Var r = core::mse_rows(rec, x);
    for (std::size_t j = 0; j < M; ++j) std::copy_n(r.value().ptr(), B, out.begin() + static_cast<std::ptrdiff_t>(j * B));
    return out;
  }
  std::vector<std::size_t> rep(M * B);
  for (std::size_t k = 0; k < rep.size(); ++k) rep[k] = k % B;
  const Var r = core::mse_rows(rec, ad::gather_rows(x, rep));
  std::copy_n(r.value().ptr(), M * B, out.begin());
  return out;
}

json train_to_json(const TrainConfig& tc) {
  return json{{"epochs", tc.epochs},     {"batch", tc.batch}, {"lr_ae", tc.lr_ae}, {"lr_denoiser", tc.lr_denoiser},
              {"lr_critic", tc.lr_critic}, {"lr_q", tc.lr_q},   {"seed", tc.seed}};
}

}  // namespace

Model::Model(const core::CoreConfig& cfg, std::vector<std::string> classes, std::uint64_t seed)
    : cfg_(checked(cfg, classes)),
      classes_(std::move(classes)),
      denoiser_(cfg.height, cfg.width, seed),
      init_rng_(make_rng(seed, 0xc1)),
      encoder_(ae_store_, cfg_, init_rng_),
      decoder_(ae_store_, cfg_, init_rng_),
      maps_(ae_store_, cfg_, init_rng_),
      critic_(critic_store_, cfg_.classes, cfg_.d_z, init_rng_),
      q_(q_store_, cfg_, init_rng_),
      ccv_(core::ccv_matrix(cfg_.classes)) {}

std::vector<const ad::ParamStore*> Model::stores() const {
  return {&denoiser_.params(), &ae_store_, &critic_store_, &q_store_};
}

std::vector<ad::ParamStore*> Model::stores() { return {&denoiser_.params(), &ae_store_, &critic_store_, &q_store_}; }

Var Model::reconstruct_all(const Var& z) const {
  if (!cfg_.use_ccv) return decoder_(z);
  const std::size_t B = z.shape().at(0), M = cfg_.classes;
  std::vector<std::size_t> zrow(M * B), crow(M * B);
  for (std::size_t j = 0; j < M; ++j) {
    for (std::size_t i = 0; i < B; ++i) {
      zrow[j * B + i] = i;
      crow[j * B + i] = j;
    }
  }
  const Var L = ad::constant(ccv_);
  const Var alpha = ad::gather_rows(maps_.alpha(L), crow);
  const Var beta = ad::gather_rows(maps_.beta(L), crow);
  return decoder_(core::condition(ad::gather_rows(z, zrow), alpha, beta));
}

Checkpoint train(const TrainingSet& data, const core::CoreConfig& cfg, const std::vector<std::string>& classes,
                 const TrainConfig& tc, const EpochCallback& on_epoch) {
  const std::size_t N = data.noisy.size();
  if (data.clean.size() != N || data.labels.size() != N) {
    throw PipelineError("training set needs one clean image and one label per noisy image");
  }
  if (tc.batch < 2) throw PipelineError("batch size must be at least 2");
  if (!(tc.lr_ae > 0) || !(tc.lr_denoiser > 0) || !(tc.lr_critic > 0) || !(tc.lr_q > 0)) {
    throw PipelineError("learning rates must be positive");
  }
  auto ckpt = Checkpoint{std::make_unique<Model>(cfg, classes, tc.seed), std::nullopt, tc.seed, tc};
  Model& m = *ckpt.model;
  const std::size_t M = m.num_classes(), H = cfg.height, W = cfg.width, px = H * W;

  std::vector<std::size_t> per_class(M, 0);
  for (std::size_t y : data.labels) {
    if (y >= M) throw PipelineError("label " + std::to_string(y) + " out of range for M = " + std::to_string(M));
    ++per_class[y];
  }
  if (std::count_if(per_class.begin(), per_class.end(), [](std::size_t c) { return c > 0; }) < 2) {
    throw PipelineError("training set must contain at least 2 classes");
  }

  const std::vector<float> noisy = flatten(data.noisy, H, W, "noisy");
  const std::vector<float> clean = flatten(data.clean, H, W, "clean");
  Rng rng = make_rng(tc.seed, 0x7261696e);
  const bool with_mi = cfg.lambda_mi > 0.0f;

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const std::vector<float> cache = denoise_all(m.denoiser(), noisy, N, H, W, 64);
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats st;
    st.epoch = epoch;
    std::size_t batches = 0;

    for (std::size_t s = 0, b = 0; s < N; s += tc.batch, ++b) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(s),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(N, s + tc.batch)));
      const std::size_t B = idx.size();
      if (B < 2) continue;
      std::vector<std::size_t> y(B);
      for (std::size_t i = 0; i < B; ++i) y[i] = data.labels[idx[i]];

      // Denoiser update.
      const Var dn = m.denoiser()(ad::constant(stack(noisy, px, idx, H, W)));
      const Var l_de = denoise::denoise_loss(dn, ad::constant(stack(clean, px, idx, H, W)));
      require_finite(l_de.value().item(), "L_De", epoch, b);
      step(m.denoiser().params(), l_de, tc.lr_denoiser, epoch, b);

      // Reconstruction update.
      const Var x = ad::constant(dn.value());
      const Var z = m.encoder()(x);
      const Var rec = m.reconstruct_all(z);
      Var l_re;
      if (cfg.use_ccv) {
        Tensor target({M * B, 1, H, W});
        Tensor weight({M * B});
        for (std::size_t j = 0; j < M; ++j) {
          for (std::size_t i = 0; i < B; ++i) {
            float* dst = target.ptr() + (j * B + i) * px;
            if (j == y[i]) {
              std::copy_n(x.value().ptr() + i * px, px, dst);
              weight[j * B + i] = 1.0f / static_cast<float>(B);
            } else {
              std::uniform_int_distribution<std::size_t> pick(0, N - 1);
              std::size_t r = pick(rng);
              while (data.labels[r] == y[i]) r = pick(rng);
              std::copy_n(cache.data() + r * px, px, dst);
              weight[j * B + i] = 1.0f / static_cast<float>(B * (M - 1));
            }
          }
        }
        l_re = ad::sum(ad::mul(core::mse_rows(rec, ad::constant(std::move(target))), ad::constant(std::move(weight))));
      } else {
        l_re = core::mse(rec, x);
      }
      Var loss = l_re;
      std::vector<std::size_t> perm;
      if (with_mi) {
        perm = core::derangement(B, rng);
        const Var ub = core::club_upper(z, x, m.variational(), perm);
        const Var lb = core::dv_lower(z, y, M, m.critic(), perm);
        const Var l_mi = core::mi_loss(ub, lb, cfg.gamma);
        loss = core::total_loss(l_re, l_mi, cfg.lambda_mi);
        st.ub += ub.value().item();
        st.lb += lb.value().item();
        st.l_mi += l_mi.value().item();
      }
      require_finite(loss.value().item(), "total loss", epoch, b);
      step(m.ae_params(), loss, tc.lr_ae, epoch, b);

      // Critic and variational head on the detached code.
      if (with_mi) {
        const Var zd = ad::constant(z.value());
        const Var lb_c = core::dv_lower(zd, y, M, m.critic(), perm);
        require_finite(lb_c.value().item(), "critic bound", epoch, b);
        step(m.critic_params(), ad::scale(lb_c, -1.0f), tc.lr_critic, epoch, b);
        const Var nll = core::q_nll(m.variational()(zd), x);
        require_finite(nll.value().item(), "variational loss", epoch, b);
        step(m.q_params(), nll, tc.lr_q, epoch, b);
      }
      st.l_de += l_de.value().item();
      st.l_re += l_re.value().item();
      ++batches;
    }
    if (batches > 0) {
      const double k = static_cast<double>(batches);
      st.l_de /= k;
      st.l_re /= k;
      st.l_mi /= k;
      st.ub /= k;
      st.lb /= k;
    }
    if (on_epoch) on_epoch(st);
  }

  ckpt.tau = select_threshold(matched_losses(m, data.noisy, data.labels));
  return ckpt;
}

double select_threshold(std::vector<double> losses) {
  if (losses.empty()) throw PipelineError("select_threshold: no losses");
  std::sort(losses.begin(), losses.end());
  const std::size_t n = losses.size();
  const std::size_t g = (99 * n + 99) / 100;  // ceil(0.99 n)
  return losses[g - 1];
}

Prediction decide(std::vector<double> R, double tau) {
  if (R.empty()) throw PipelineError("decide: empty loss vector");
  Prediction p;
  p.argmin = 0;
  for (std::size_t j = 1; j < R.size(); ++j)
    if (R[j] < R[p.argmin]) p.argmin = j;
  p.r_min = R[p.argmin];
  p.label = p.r_min >= tau ? kUnknown : static_cast<int>(p.argmin);
  p.R = std::move(R);
  return p;
}

std::vector<std::vector<double>> class_losses(const Model& m, const std::vector<tfa::Image>& images,
                                              std::size_t batch) {
  if (batch == 0) throw PipelineError("class_losses: batch must be positive");
  const std::size_t H = m.config().height, W = m.config().width, M = m.num_classes(), n = images.size();
  const std::vector<float> flat = flatten(images, H, W, "input");
  ad::NoGradGuard guard;
  std::vector<std::vector<double>> out(n, std::vector<double>(M));
  for (std::size_t s = 0; s < n; s += batch) {
    std::vector<std::size_t> idx(std::min(batch, n - s));
    std::iota(idx.begin(), idx.end(), s);
    const std::size_t B = idx.size();
    const std::vector<float> r = batch_losses(m, stack(flat, H * W, idx, H, W));
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < M; ++j) out[s + i][j] = r[j * B + i];
  }
  return out;
}

std::vector<double> matched_losses(const Model& m, const std::vector<tfa::Image>& images,
                                   const std::vector<std::size_t>& labels) {
  if (images.size() != labels.size()) throw PipelineError("matched_losses: one label per image required");
  const auto R = class_losses(m, images);
  std::vector<double> out(R.size());
  for (std::size_t i = 0; i < R.size(); ++i) {
    if (labels[i] >= m.num_classes()) throw PipelineError("matched_losses: label out of range");
    out[i] = R[i][labels[i]];
  }
  return out;
}

std::vector<Prediction> infer(const Checkpoint& ckpt, const std::vector<tfa::Image>& images) {
  if (!ckpt.model) throw PipelineError("infer: checkpoint holds no model");
  if (!ckpt.tau) throw PipelineError("infer: checkpoint has no threshold (training did not complete)");
  auto R = class_losses(*ckpt.model, images);
  std::vector<Prediction> out;
  out.reserve(R.size());
  for (auto& r : R) out.push_back(decide(std::move(r), *ckpt.tau));
  return out;
}

Prediction infer(const Checkpoint& ckpt, const tfa::Image& image) { return infer(ckpt, std::vector{image}).front(); }

std::string encode_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.model) throw PipelineError("encode_checkpoint: no model");
  const Model& m = *ckpt.model;
  const auto& c = m.config();
  json h = {{"format_version", kFormatVersion},
            {"d_z", c.d_z},
            {"M", c.classes},
            {"classes", m.classes()},
            {"gamma", c.gamma},
            {"lambda_mi", c.lambda_mi},
            {"height", c.height},
            {"width", c.width},
            {"use_ccv", c.use_ccv},
            {"tau", nullptr},
            {"seed", ckpt.seed},
            {"train", train_to_json(ckpt.train)}};
  if (ckpt.tau) h["tau"] = *ckpt.tau;
  const std::string header = h.dump();
  std::ostringstream os;
  os.write(kMagic, sizeof kMagic);
  const auto len = static_cast<std::uint32_t>(header.size());
  const unsigned char lb[4] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8),
                               static_cast<unsigned char>(len >> 16), static_cast<unsigned char>(len >> 24)};
  os.write(reinterpret_cast<const char*>(lb), 4);
  os << header;
  ad::write_param_blob(os, m.stores());
  return os.str();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  using K = CheckpointError::Kind;
  if (bytes.size() < sizeof kMagic) throw CheckpointError(K::truncated, "checkpoint truncated: missing magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(K::bad_magic, "not a checkpoint file (bad magic)");
  }
  if (bytes.size() < sizeof kMagic + 4) throw CheckpointError(K::truncated, "checkpoint truncated: missing header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + sizeof kMagic;
  const std::size_t len = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::size_t>(p[3]) << 24);
  const std::size_t start = sizeof kMagic + 4;
  if (bytes.size() - start < len) throw CheckpointError(K::truncated, "checkpoint truncated inside header");

  json h;
  try {
    h = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                    bytes.begin() + static_cast<std::ptrdiff_t>(start + len));
  } catch (const json::exception& e) {
    throw CheckpointError(K::corrupt, std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    const int version = h.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw CheckpointError(K::version, "checkpoint format version " + std::to_string(version) + " unsupported (expected " +
                                            std::to_string(kFormatVersion) + ")");
    }
    core::CoreConfig c;
    c.d_z = h.at("d_z").get<std::size_t>();
    c.classes = h.at("M").get<std::size_t>();
    c.gamma = h.at("gamma").get<float>();
    c.lambda_mi = h.at("lambda_mi").get<float>();
    c.height = h.at("height").get<std::size_t>();
    c.width = h.at("width").get<std::size_t>();
    c.use_ccv = h.at("use_ccv").get<bool>();
    auto classes = h.at("classes").get<std::vector<std::string>>();
    if (classes.size() != c.classes) {
      throw CheckpointError(K::corrupt, "checkpoint lists " + std::to_string(classes.size()) + " classes but M = " +
                                            std::to_string(c.classes));
    }
    ckpt.seed = h.at("seed").get<std::uint64_t>();
    const json& t = h.at("train");
    ckpt.train.epochs = t.at("epochs").get<std::size_t>();
    ckpt.train.batch = t.at("batch").get<std::size_t>();
    ckpt.train.lr_ae = t.at("lr_ae").get<float>();
    ckpt.train.lr_denoiser = t.at("lr_denoiser").get<float>();
    ckpt.train.lr_critic = t.at("lr_critic").get<float>();
    ckpt.train.lr_q = t.at("lr_q").get<float>();
    ckpt.train.seed = t.at("seed").get<std::uint64_t>();
    if (!h.at("tau").is_null()) ckpt.tau = h.at("tau").get<double>();
    ckpt.model = std::make_unique<Model>(c, std::move(classes), ckpt.seed);
  } catch (const json::exception& e) {
    throw CheckpointError(K::corrupt, std::string("checkpoint header: ") + e.what());
  } catch (const PipelineError& e) {
    throw CheckpointError(K::corrupt, std::string("checkpoint header: ") + e.what());
  } catch (const core::CoreError& e) {
    throw CheckpointError(K::corrupt, std::string("checkpoint header: ") + e.what());
  } catch (const denoise::InputError& e) {
    throw CheckpointError(K::corrupt, std::string("checkpoint header: ") + e.what());
  }

  std::istringstream is(bytes.substr(start + len));
  try {
    const auto blob = ad::read_param_blob(is);
    if (is.peek() != std::char_traits<char>::eof()) {
      throw CheckpointError(K::corrupt, "checkpoint has trailing bytes after the parameter blob");
    }
    ad::assign_params(blob, ckpt.model->stores());
  } catch (const ad::BlobError& e) {
    const bool short_read = std::string(e.what()).find("truncated") != std::string::npos;
    throw CheckpointError(short_read ? K::truncated : K::corrupt, std::string("checkpoint ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  try {
    atomic_write(path, bytes);
  } catch (const IoError& e) {
    throw CheckpointError(CheckpointError::Kind::io, e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError& e) {
    throw CheckpointError(CheckpointError::Kind::io, e.what());
  }
  return decode_checkpoint(bytes);
}

void check_classes(const Checkpoint& ckpt, const std::vector<std::string>& classes) {
  if (!ckpt.model) throw PipelineError("check_classes: no model");
  const auto& own = ckpt.model->classes();
  if (own.size() != classes.size()) {
    throw CheckpointError(CheckpointError::Kind::class_mismatch,
                          "checkpoint was trained with M = " + std::to_string(own.size()) + " classes, data has M = " +
                              std::to_string(classes.size()));
  }
  for (std::size_t j = 0; j < own.size(); ++j) {
    if (own[j] != classes[j]) {
      throw CheckpointError(CheckpointError::Kind::class_mismatch, "class " + std::to_string(j) + " is '" + own[j] +
                                                                       "' in the checkpoint but '" + classes[j] +
                                                                       "' in the data");
    }
  }
}

}  // namespace cir::pipeline
