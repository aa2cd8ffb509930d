#include <doctest.h>

#include <filesystem>

#include "cir/io.hpp"
#include "cir/sim/dataset.hpp"

using namespace cir;
using namespace cir::sim;
namespace fs = std::filesystem;

namespace {

DatasetConfig tiny() {
  DatasetConfig c;
  c.known = {Modulation::LFM, Modulation::P1};
  c.unknown = {Modulation::Costas};
  c.snr_list = {10.0, -4.0};
  c.samples_per_class = 5;
  c.tfa.height = c.tfa.width = 16;
  return c;
}

fs::path scratch(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / ("cir_test_dataset_" + leaf);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("split arithmetic") {
  DatasetConfig c;
  c.known = {Modulation::T1};
  c.snr_list = {0.0};
  c.samples_per_class = 100;
  c.tfa.height = c.tfa.width = 8;
  const auto recs = generate_records(c, 1);
  const auto train = std::count_if(recs.begin(), recs.end(), [](const Record& r) { return r.split == Split::Train; });
  CHECK(train == 80);
  CHECK(recs.size() - train == 20);
}

TEST_CASE("presets") {
  const DatasetConfig d1 = preset_d1();
  using M = Modulation;
  CHECK(d1.known == std::vector<M>{M::LFM, M::P1, M::P2, M::P3, M::P4, M::T1, M::T3});
  CHECK(d1.unknown == std::vector<M>{M::Frank, M::Costas, M::T2, M::T4});
  CHECK(d1.snr_list.size() == 10);
  CHECK_NOTHROW(validate(d1));
  for (int step = 1; step <= 10; ++step) {
    const DatasetConfig d2 = preset_d2(step);
    CHECK(d2.unknown.size() == static_cast<std::size_t>(step));
    CHECK(d2.known.size() + d2.unknown.size() == 11);
    CHECK_NOTHROW(validate(d2));
  }
  CHECK(preset_d2(3).unknown == std::vector<M>{M::P1, M::P2, M::T1});
  CHECK(preset_d2(10).known == std::vector<M>{M::LFM});
  CHECK_THROWS_AS(preset_d2(11), ConfigError);
}

TEST_CASE("config validation names the class") {
  DatasetConfig c = tiny();
  c.unknown.push_back(Modulation::P1);
  try {
    validate(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("P1") != std::string::npos);
  }
  c = tiny();
  c.snr_list.clear();
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = tiny();
  c.train_fraction = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("records: open-set split and determinism") {
  const DatasetConfig c = tiny();
  const auto a = generate_records(c, 9);
  const auto b = generate_records(c, 9);
  REQUIRE(a.size() == b.size());
  // 2 known x 2 SNR x 5 + 1 unknown x 2 SNR x 1 test share.
  CHECK(a.size() == 22);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].noisy == b[i].noisy);
    CHECK(a[i].clean == b[i].clean);
    if (a[i].label == Modulation::Costas) CHECK(a[i].split == Split::Test);
  }
  const auto other = generate_records(c, 10);
  CHECK_FALSE(other[0].noisy == a[0].noisy);
}

TEST_CASE("records are independent of generation order") {
  DatasetConfig c = tiny();
  const auto full = generate_records(c, 4);
  c.known = {Modulation::P1};
  const auto part = generate_records(c, 4);
  // P1 records come after the 10 LFM records in the full set.
  CHECK(part[0].noisy == full[10].noisy);
}

TEST_CASE("build_dataset writes a loadable manifest") {
  const fs::path d1 = scratch("a"), d2 = scratch("b");
  const DatasetConfig c = tiny();
  const Manifest m = build_dataset(c, 3, d1);
  build_dataset(c, 3, d2);
  CHECK(read_file(d1 / "manifest.json") == read_file(d2 / "manifest.json"));
  CHECK(m.records.size() == 22);
  CHECK(m.counts.at("train").at("LFM") == 8);
  CHECK(m.counts.at("test").at("Costas") == 2);
  CHECK(m.counts.at("train").count("Costas") == 0);

  const Manifest loaded = load_manifest(d1);
  CHECK(manifest_to_json(loaded) == manifest_to_json(m));
  const auto train = load_split(d1, loaded, Split::Train, true);
  CHECK(train.size() == 16);
  for (const auto& r : train) {
    CHECK(r.label != "Costas");
    CHECK(r.noisy.height == 16);
    CHECK(r.clean.width == 16);
  }
  const auto records = generate_records(c, 3);
  CHECK(tfa::read_tfi(d1 / m.records[0].file) == records[0].noisy);
  CHECK(tfa::read_tfi(d1 / m.records[0].clean_file) == records[0].clean);

  SUBCASE("missing clean pair") {
    Manifest broken = loaded;
    broken.records[0].clean_file.clear();
    CHECK_THROWS_AS(load_split(d1, broken, Split::Train, true), ManifestError);
    CHECK_NOTHROW(load_split(d1, broken, Split::Train, false));
  }
  SUBCASE("bad manifest text") {
    CHECK_THROWS_AS(manifest_from_json("{"), ManifestError);
    CHECK_THROWS_AS(manifest_from_json(R"({"version": 2})"), ManifestError);
    CHECK_THROWS_AS(load_manifest(scratch("none")), ManifestError);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}
