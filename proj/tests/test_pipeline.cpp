#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "cir/io.hpp"
#include "cir/pipeline/pipeline.hpp"

using namespace cir;
using namespace cir::pipeline;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kSide = 16;

core::CoreConfig tiny_cfg(std::size_t M = 2) {
  core::CoreConfig c;
  c.height = c.width = kSide;
  c.d_z = 8;
  c.classes = M;
  return c;
}

std::vector<std::string> names(std::size_t M) {
  std::vector<std::string> v;
  for (std::size_t j = 0; j < M; ++j) v.push_back("class" + std::to_string(j));
  return v;
}

// Class j is a bright horizontal band at row 3 + 5j plus noise.
TrainingSet toy_set(std::size_t M, std::size_t per_class, std::uint64_t seed) {
  TrainingSet t;
  Rng rng(seed);
  std::uniform_real_distribution<float> noise(0.0f, 0.2f);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t j = 0; j < M; ++j) {
      tfa::Image clean(kSide, kSide), noisy(kSide, kSide);
      for (std::size_t w = 0; w < kSide; ++w) clean.at(3 + 5 * j, w) = 1.0f;
      for (std::size_t p = 0; p < clean.pixels.size(); ++p) noisy.pixels[p] = std::min(1.0f, clean.pixels[p] + noise(rng));
      t.noisy.push_back(noisy);
      t.clean.push_back(clean);
      t.labels.push_back(j);
    }
  }
  return t;
}

std::vector<tfa::Image> random_images(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<tfa::Image> v(n, tfa::Image(kSide, kSide));
  for (auto& im : v)
    for (float& p : im.pixels) p = u(rng);
  return v;
}

TrainConfig quick(std::size_t epochs, std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch = 16;
  tc.seed = seed;
  return tc;
}

fs::path scratch(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / ("cir_test_pipeline_" + leaf);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("threshold selection") {
  std::vector<double> l(100);
  std::iota(l.begin(), l.end(), 1.0);
  std::shuffle(l.begin(), l.end(), Rng(3));
  CHECK(select_threshold(l) == 99.0);
  CHECK(select_threshold({0.5}) == 0.5);
  CHECK(select_threshold(std::vector<double>(37, 0.125)) == 0.125);
  CHECK_THROWS_AS((void)select_threshold({}), PipelineError);
}

TEST_CASE("decision rule") {
  Prediction p = decide({0.1, 0.5, 0.3}, 0.4);
  CHECK(p.label == 0);
  CHECK(p.r_min == 0.1);
  CHECK(p.argmin == 0);
  CHECK(decide({0.5, 0.6}, 0.4).label == kUnknown);
  CHECK(decide({0.7, 0.4}, 0.4).label == kUnknown);
  CHECK(decide({0.7, 0.4}, 0.4).argmin == 1);
  CHECK(decide({0.3, 0.2, 0.2}, 1.0).label == 1);
  CHECK_THROWS_AS((void)decide({}, 1.0), PipelineError);

  SUBCASE("only argmin and min matter") {
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> R(6);
      for (double& r : R) r = u(rng);
      const double tau = u(rng);
      const Prediction a = decide(R, tau);
      std::vector<double> others;
      for (std::size_t j = 0; j < R.size(); ++j)
        if (j != a.argmin) others.push_back(R[j]);
      std::shuffle(others.begin(), others.end(), rng);
      std::vector<double> S;
      for (std::size_t j = 0, k = 0; j < R.size(); ++j) S.push_back(j == a.argmin ? R[j] : others[k++]);
      const Prediction b = decide(S, tau);
      CHECK(b.label == a.label);
      CHECK(b.r_min == a.r_min);
    }
  }
}

TEST_CASE("threshold flags about one percent of the training losses") {
  Rng rng(44);
  std::lognormal_distribution<double> d(-3.0, 0.5);
  for (std::size_t n : {100u, 1000u, 5000u}) {
    std::vector<double> l(n);
    for (double& v : l) v = d(rng);
    const double tau = select_threshold(l);
    std::size_t flagged = 0;
    for (double v : l) flagged += decide({v, v + 1.0}, tau).label == kUnknown;
    CAPTURE(n);
    CHECK(flagged >= 1);
    CHECK(flagged <= (n + 99) / 100 + 1);
  }
}

TEST_CASE("model layout") {
  Model m(tiny_cfg(3), names(3), 1);
  CHECK(m.stores().size() == 4);
  const ad::Var z = ad::constant(ad::Tensor({2, 8}, 0.1f));
  CHECK(m.reconstruct_all(z).shape() == ad::Shape{6, 1, kSide, kSide});
  CHECK_THROWS_AS(Model(tiny_cfg(3), names(2), 1), PipelineError);
  CHECK_THROWS_AS(Model(tiny_cfg(1), names(1), 1), PipelineError);

  core::CoreConfig plain = tiny_cfg(3);
  plain.use_ccv = false;
  Model n(plain, names(3), 1);
  CHECK(n.reconstruct_all(z).shape() == ad::Shape{2, 1, kSide, kSide});
}

TEST_CASE("training completes and is deterministic") {
  const TrainingSet data = toy_set(2, 25, 1);
  std::vector<EpochStats> log;
  const Checkpoint a = train(data, tiny_cfg(), names(2), quick(3, 7), [&](const EpochStats& s) { log.push_back(s); });
  REQUIRE(a.tau.has_value());
  CHECK(*a.tau > 0.0);
  CHECK(a.model->num_classes() == 2);
  REQUIRE(log.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(log[e].epoch == e + 1);
    CHECK(std::isfinite(log[e].l_de));
    CHECK(std::isfinite(log[e].l_re));
    CHECK(std::isfinite(log[e].l_mi));
  }
  const Checkpoint b = train(data, tiny_cfg(), names(2), quick(3, 7));
  CHECK(encode_checkpoint(a) == encode_checkpoint(b));
  const Checkpoint c = train(data, tiny_cfg(), names(2), quick(3, 8));
  CHECK(encode_checkpoint(a) != encode_checkpoint(c));

  SUBCASE("threshold is the 99th percentile of matched training losses") {
    const auto losses = matched_losses(*a.model, data.noisy, data.labels);
    CHECK(*a.tau == select_threshold(losses));
  }
}

TEST_CASE("ablation variants train") {
  const TrainingSet data = toy_set(3, 8, 2);
  core::CoreConfig no_ccv = tiny_cfg(3);
  no_ccv.use_ccv = false;
  const Checkpoint a = train(data, no_ccv, names(3), quick(1, 1));
  CHECK(a.tau.has_value());
  const auto R = class_losses(*a.model, data.noisy);
  CHECK(R[0][0] == R[0][1]);
  CHECK(R[0][1] == R[0][2]);

  core::CoreConfig no_mi = tiny_cfg(3);
  no_mi.lambda_mi = 0.0f;
  std::vector<EpochStats> log;
  const Checkpoint b = train(data, no_mi, names(3), quick(1, 1), [&](const EpochStats& s) { log.push_back(s); });
  CHECK(b.tau.has_value());
  CHECK(log.at(0).l_mi == 0.0);
}

TEST_CASE("training preconditions") {
  TrainingSet one = toy_set(2, 5, 3);
  for (auto& y : one.labels) y = 1;
  CHECK_THROWS_AS((void)train(one, tiny_cfg(), names(2), quick(1, 1)), PipelineError);

  TrainingSet bad = toy_set(2, 5, 3);
  bad.labels[0] = 2;
  CHECK_THROWS_AS((void)train(bad, tiny_cfg(), names(2), quick(1, 1)), PipelineError);

  TrainingSet unpaired = toy_set(2, 5, 3);
  unpaired.clean.pop_back();
  CHECK_THROWS_AS((void)train(unpaired, tiny_cfg(), names(2), quick(1, 1)), PipelineError);

  TrainingSet nan = toy_set(2, 5, 3);
  for (auto& im : nan.noisy) im.pixels[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    (void)train(nan, tiny_cfg(), names(2), quick(1, 1));
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch 0") != std::string::npos);
  }
}

TEST_CASE("checkpoint persistence") {
  const TrainingSet data = toy_set(2, 10, 5);
  const Checkpoint a = train(data, tiny_cfg(), names(2), quick(1, 3));
  const auto inputs = random_images(100, 9);
  const auto ref = infer(a, inputs);
  const fs::path dir = scratch("ckpt");
  const fs::path file = dir / "model.ckpt";
  save_checkpoint(a, file);

  SUBCASE("roundtrip gives identical predictions") {
    const Checkpoint b = load_checkpoint(file);
    CHECK(b.tau == a.tau);
    CHECK(b.seed == a.seed);
    CHECK(b.model->classes() == a.model->classes());
    CHECK(encode_checkpoint(b) == encode_checkpoint(a));
    const auto got = infer(b, inputs);
    REQUIRE(got.size() == ref.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].label == ref[i].label);
      CHECK(got[i].R == ref[i].R);
    }
    CHECK(infer(b, inputs[4]).R == ref[4].R);
  }
  SUBCASE("truncation") {
    const std::string bytes = read_file(file);
    for (std::size_t cut : {std::size_t{4}, std::size_t{10}, std::size_t{40}, bytes.size() - 1}) {
      try {
        (void)decode_checkpoint(bytes.substr(0, cut));
        FAIL("expected CheckpointError");
      } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::truncated);
      }
    }
  }
  SUBCASE("bad magic and version") {
    std::string bytes = read_file(file);
    std::string bad = bytes;
    bad[0] = 'X';
    try {
      (void)decode_checkpoint(bad);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::bad_magic);
    }
    const std::size_t pos = bytes.find("\"format_version\":1");
    REQUIRE(pos != std::string::npos);
    bytes[pos + 17] = '7';
    try {
      (void)decode_checkpoint(bytes);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::version);
    }
  }
  SUBCASE("missing file") {
    try {
      (void)load_checkpoint(dir / "absent.ckpt");
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::io);
    }
  }
  SUBCASE("class list mismatch") {
    CHECK_NOTHROW(check_classes(a, names(2)));
    try {
      check_classes(a, names(3));
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::class_mismatch);
      CHECK(std::string(e.what()).find("M = 2") != std::string::npos);
    }
    CHECK_THROWS_AS(check_classes(a, {"class1", "class0"}), CheckpointError);
  }
  SUBCASE("untrained checkpoint cannot infer") {
    Checkpoint raw{std::make_unique<Model>(tiny_cfg(), names(2), 1), std::nullopt, 1, {}};
    CHECK_THROWS_AS((void)infer(raw, inputs), PipelineError);
    const Checkpoint back = decode_checkpoint(encode_checkpoint(raw));
    CHECK_FALSE(back.tau.has_value());
  }
  fs::remove_all(dir);
}
