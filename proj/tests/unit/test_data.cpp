#include <doctest.h>

#include <filesystem>
#include <set>

#include "spf/common/bytes.hpp"
#include "spf/common/errors.hpp"
#include "spf/data/dataset.hpp"

using namespace spf;
using namespace spf::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::uint8_t> tree_bytes(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::uint8_t> all;
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, root).string();
    all.insert(all.end(), rel.begin(), rel.end());
    const auto bytes = read_file_bytes(f);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return all;
}

}  // namespace

TEST_CASE("synth corpus counts, layout and round trip") {
  TempDir dir("spf_test_synth");
  const auto manifest = synth_generate({100, 16, 7}, dir.path);
  CHECK(manifest.records.size() == 400);
  CHECK(manifest.count(model::Label::BonaFide) == 100);
  CHECK(manifest.count(model::Label::Attack) == 300);
  for (AttackType t : kAllAttackTypes) {
    CHECK(std::count_if(manifest.records.begin(), manifest.records.end(),
                        [&](const SampleRecord& r) { return r.attack_type == t; }) == 100);
  }
  for (const auto& r : manifest.records) CHECK((r.label == model::Label::BonaFide) == (r.attack_type == AttackType::None));
  CHECK(fs::exists(dir.path / "meta.json"));
  CHECK(fs::exists(dir.path / "manifest.jsonl"));

  const auto loaded = load_manifest(dir.path / "manifest.jsonl");
  CHECK(loaded.records == manifest.records);
  CHECK(loaded.patch_size == 16);
  CHECK(loaded.generator_digest == manifest.generator_digest);
  CHECK(load_manifest(dir.path).records.size() == 400);

  const Dataset ds = load_dataset(loaded);
  REQUIRE(ds.size() == 400);
  for (const auto& s : ds.samples) {
    REQUIRE(s.patches.size() == 3);
    for (const auto& p : s.patches) {
      CHECK(p.shape() == nn::Shape{1, 3, 16, 16});
      CHECK(p.all_finite());
      for (float v : p.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
    }
  }
}

TEST_CASE("synth is deterministic under a fixed seed") {
  TempDir a("spf_test_synth_a"), b("spf_test_synth_b"), c("spf_test_synth_c");
  synth_generate({5, 16, 42}, a.path);
  synth_generate({5, 16, 42}, b.path);
  synth_generate({5, 16, 43}, c.path);
  CHECK(tree_bytes(a.path) == tree_bytes(b.path));
  CHECK(tree_bytes(a.path) != tree_bytes(c.path));
}

TEST_CASE("moire carries more high-frequency energy than recapture blur") {
  int wins = 0;
  const int pairs = 300;
  for (int i = 0; i < pairs; ++i) {
    const auto moire = synthesize_sample(AttackType::ScreenMoire, 32, derive_seed(1, i));
    const auto blur = synthesize_sample(AttackType::RecaptureBlur, 32, derive_seed(2, i));
    wins += mean_abs_laplacian(moire[0]) > mean_abs_laplacian(blur[0]) ? 1 : 0;
  }
  CHECK(wins >= pairs * 95 / 100);
}

TEST_CASE("mean_abs_laplacian") {
  nn::Tensor flat(nn::Shape{1, 3, 5, 5}, 0.5f);
  CHECK(mean_abs_laplacian(flat) == 0.0);
  nn::Tensor spike(nn::Shape{1, 1, 3, 3});
  spike.at(0, 0, 1, 1) = 1.0f;
  CHECK(mean_abs_laplacian(spike) == 4.0);
}

TEST_CASE("manifest errors") {
  TempDir dir("spf_test_manifest_errors");
  synth_generate({2, 8, 1}, dir.path);
  SUBCASE("missing patch file names the record") {
    fs::remove(dir.path / "patches/000003.w32");
    try {
      load_manifest(dir.path);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("000003.w32") != std::string::npos);
    }
  }
  SUBCASE("label contradicting the attack type") {
    write_file_text(dir.path / "manifest.jsonl",
                    R"({"patchset":"patches/000000.w32","label":0,"attack_type":"None","seed":1})"
                    "\n");
    CHECK_THROWS_AS(load_manifest(dir.path), DataError);
  }
  SUBCASE("unwritable output") {
    write_file_text(dir.path / "blocker", "x");
    CHECK_THROWS_AS(synth_generate({1, 8, 1}, dir.path / "blocker" / "sub"), IoError);
  }
}

TEST_CASE("augment") {
  Rng rng(3);
  nn::Tensor patch(nn::Shape{1, 3, 6, 5});
  for (float& v : patch.data()) v = static_cast<float>(rng.uniform());

  CHECK(augment(patch, AugmentParams{}) == patch);
  CHECK(flip_horizontal(flip_horizontal(patch)) == patch);
  const nn::Tensor flipped = flip_horizontal(patch);
  CHECK(flipped.at(0, 1, 2, 0) == patch.at(0, 1, 2, 4));

  AugmentParams p;
  p.gain = {1.2f, 0.8f, 1.0f};
  p.offset = {0.1f, -0.1f, 0.0f};
  const nn::Tensor out = augment(patch, p);
  CHECK(out.at(0, 0, 1, 1) == std::clamp(1.2f * patch.at(0, 0, 1, 1) + 0.1f, 0.0f, 1.0f));
  CHECK(out.at(0, 1, 1, 1) == std::clamp(0.8f * patch.at(0, 1, 1, 1) - 0.1f, 0.0f, 1.0f));

  int flips = 0;
  for (int i = 0; i < 10000; ++i) {
    const AugmentParams d = draw_augment(rng);
    flips += d.flip ? 1 : 0;
    for (std::size_t c = 0; c < 3; ++c) {
      REQUIRE((d.gain[c] >= 0.8f && d.gain[c] <= 1.2f));
      REQUIRE((d.offset[c] >= -0.1f && d.offset[c] <= 0.1f));
    }
    const nn::Tensor out_d = augment(patch, d);
    for (float v : out_d.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
  }
  CHECK(flips > 4700);
  CHECK(flips < 5300);
}

TEST_CASE("iterate_batches") {
  Rng rng(1);
  const auto batches = iterate_batches(130, 64, rng);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 64);
  CHECK(batches[1].size() == 64);
  CHECK(batches[2].size() == 2);

  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& b : batches) {
    total += b.size();
    seen.insert(b.begin(), b.end());
  }
  CHECK(total == 130);
  CHECK(seen.size() == 130);
  CHECK(*seen.rbegin() == 129);

  Rng r1(9), r2(9);
  CHECK(iterate_batches(200, 64, r1) == iterate_batches(200, 64, r2));
  Rng r3(9);
  const auto first = iterate_batches(200, 64, r3);
  CHECK(first != iterate_batches(200, 64, r3));  // next epoch reshuffles
}

TEST_CASE("stratified split keeps both classes") {
  TempDir dir("spf_test_split");
  const Dataset ds = load_dataset(synth_generate({10, 8, 2}, dir.path));
  const auto [train, held] = split(ds, 0.2, 4);
  CHECK(train.size() == 32);
  CHECK(held.size() == 8);
  const auto bona = [](const Dataset& d) {
    return std::count_if(d.samples.begin(), d.samples.end(), [](const Sample& s) { return s.label == model::Label::BonaFide; });
  };
  CHECK(bona(held) == 2);
  CHECK(bona(train) == 8);
}
