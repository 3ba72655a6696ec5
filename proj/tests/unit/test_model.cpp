#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "oracles.hpp"
#include "spf/common/errors.hpp"
#include "spf/model/train.hpp"
#include "spf/pem/pem.hpp"

using namespace spf;
using namespace spf::model;
namespace fs = std::filesystem;

namespace {

std::size_t backbone_parameter_count(const ModelConfig& cfg) {
  std::size_t total = 0;
  std::size_t in = 3;
  for (const auto& b : cfg.backbone) {
    const auto out = static_cast<std::size_t>(b.channels);
    total += out * in * static_cast<std::size_t>(b.kernel * b.kernel) + out;
    in = out;
  }
  return total;
}

pem::PatchSet random_patches(int k, int size, Rng& rng) {
  pem::PatchSet set;
  for (int i = 0; i < k; ++i) {
    set.patches.push_back(spf::testing::random_tensor<float>(
        nn::Shape{1, 3, static_cast<std::size_t>(size), static_cast<std::size_t>(size)}, rng, 0.0, 1.0));
  }
  return set;
}

void zero_head(Model& m) {
  for (const char* name : {"head.weight", "head.bias"}) {
    auto values = m.parameter(name).value().data();
    std::fill(values.begin(), values.end(), 0.0f);
  }
}

// Balanced in-memory corpus: bona fide and attacks cycling through the
// attack types.
data::Dataset small_corpus(int per_class, int size, std::uint64_t seed) {
  data::Dataset ds;
  ds.patch_size = size;
  for (int i = 0; i < per_class; ++i) {
    ds.samples.push_back({data::synthesize_sample(data::AttackType::None, size, derive_seed(seed, 2 * i)),
                          Label::BonaFide, data::AttackType::None});
    const auto type = data::kAllAttackTypes[1 + i % 3];
    ds.samples.push_back({data::synthesize_sample(type, size, derive_seed(seed, 2 * i + 1)), Label::Attack, type});
  }
  return ds;
}

std::vector<std::uint8_t> weight_bytes(const Model& m) { return nn::encode_w32(export_weights(m)); }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("build: arity, sharing and head widths") {
  ModelConfig one;
  one.branches = 1;
  const Model m1(one);
  Rng rng(1);
  const Score s = predict(m1, random_patches(1, 64, rng));
  CHECK(std::isfinite(s.p_bona_fide));

  ModelConfig shared;
  shared.branches = 2;
  shared.share_branch_weights = true;
  const Model m2s(shared);
  const std::size_t head2 = 2 * (2 * 128) + 2;
  CHECK(m2s.parameter_count() == backbone_parameter_count(shared) + head2);

  ModelConfig two, three;
  two.branches = 2;
  three.branches = 3;
  const Model m2(two), m3(three);
  CHECK(m2.head_input_width() * 3 == m3.head_input_width() * 2);
  CHECK(m2.head_input_width() == 256);
  CHECK(m2.parameter_count() == 2 * backbone_parameter_count(two) + head2);

  ModelConfig bad;
  bad.branches = 4;
  CHECK_THROWS_AS(Model{bad}, ConfigError);
  ModelConfig tiny;
  tiny.patch_size = 8;  // four 2x pools cannot fit
  CHECK_THROWS_AS(Model{tiny}, ConfigError);
}

TEST_CASE("forward: zero head, normalization, permutation, arity") {
  Rng rng(2);
  ModelConfig cfg;
  cfg.patch_size = 32;
  Model m(cfg);
  for (int i = 0; i < 5; ++i) {
    const Score s = predict(m, random_patches(2, 32, rng));
    CHECK(std::abs(s.p_bona_fide + s.p_attack - 1.0) <= 1e-6);
    CHECK((s.p_bona_fide >= 0.0 && s.p_bona_fide <= 1.0));
  }
  zero_head(m);
  for (int i = 0; i < 3; ++i) {
    const Score s = predict(m, random_patches(2, 32, rng));
    CHECK(s.p_bona_fide == 0.5);
    CHECK(s.p_attack == 0.5);
  }
  CHECK_THROWS_AS(predict(m, random_patches(3, 32, rng)), ShapeError);
  CHECK_THROWS_AS(predict(m, random_patches(1, 32, rng)), ShapeError);

  // Distinct branches generally break symmetry ...
  const Model unshared(cfg);
  auto p = random_patches(2, 32, rng);
  const Score ab = predict(unshared, p);
  std::swap(p.patches[0], p.patches[1]);
  CHECK(predict(unshared, p).p_bona_fide != ab.p_bona_fide);

  // ... shared weights with identical patches cannot.
  cfg.share_branch_weights = true;
  cfg.branches = 3;
  const Model m_shared(cfg);
  auto same = random_patches(1, 32, rng);
  same.patches = {same.patches[0], same.patches[0], same.patches[0]};
  const Score s1 = predict(m_shared, same);
  std::rotate(same.patches.begin(), same.patches.begin() + 1, same.patches.end());
  CHECK(std::abs(predict(m_shared, same).p_bona_fide - s1.p_bona_fide) <= 1e-6);
}

TEST_CASE("decide") {
  CHECK(decide({0.7, 0.3}, {0.5}) == Label::BonaFide);
  CHECK(decide({0.3, 0.7}, {0.5}) == Label::Attack);
  CHECK(decide({0.5, 0.5}, {0.5}) == Label::Attack);
  // Monotone in the score and in the threshold.
  for (double h = 0.05; h < 1.0; h += 0.05) {
    for (double p = 0.0; p <= 0.95; p += 0.05) {
      const bool low = decide({p, 1 - p}, {h}) == Label::BonaFide;
      const bool high = decide({p + 0.05, 0.95 - p}, {h}) == Label::BonaFide;
      CHECK((!low || high));
      const bool stricter = decide({p, 1 - p}, {h + 0.05}) == Label::BonaFide;
      CHECK((!stricter || low));
    }
  }
}

TEST_CASE("full model gradients match central differences") {
  std::size_t skipped = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    ModelConfig cfg;
    cfg.branches = 2;
    cfg.backbone = {{3, 3, 1}, {4, 3, 1}};
    cfg.patch_size = 8;
    cfg.seed = seed;
    BasicModel<double> m = Model(cfg).cast<double>();
    Rng rng(700 + seed);
    for (auto* p : m.parameters()) {
      if (p->name().find("bias") != std::string::npos) {
        for (double& v : p->value().data()) v = rng.uniform(-0.1, 0.1);
      }
    }
    std::vector<nn::BasicTensor<double>> inputs;
    for (int b = 0; b < 2; ++b) {
      inputs.push_back(spf::testing::random_tensor<double>(nn::Shape{2, 3, 8, 8}, rng, 0.0, 1.0));
    }
    const std::vector<int> targets{0, 1};
    auto loss_of = [&](nn::Graph<double>& g) { return g.softmax_cross_entropy(m.forward(g, inputs), targets); };

    for (auto* p : m.parameters()) p->zero_grad();
    nn::Graph<double> g;
    g.backward(loss_of(g));
    auto probe = [&] {
      nn::Graph<double> pg;
      const double loss = pg.value(loss_of(pg))[0];
      return spf::testing::ProbeResult{loss, pg.region_signature()};
    };
    for (auto* p : m.parameters()) {
      CAPTURE(p->name());
      const auto analytic = spf::testing::to_double(p->grad().data());
      const auto numeric = spf::testing::numeric_gradient_on_piece(p->value(), probe, skipped, 1e-5);
      CHECK(spf::testing::max_relative_error(analytic, numeric) < 1e-3);
      total += p->value().size();
    }
  }
  CHECK(skipped * 10 <= total);
}

TEST_CASE("train: descent, null update, determinism, errors") {
  const data::Dataset train_set = small_corpus(64, 16, 11);
  const data::Dataset val_set = small_corpus(8, 16, 12);
  ModelConfig mc;
  mc.patch_size = 16;
  mc.seed = 5;
  TrainConfig tc;
  tc.epochs = 20;
  tc.seed = 9;

  SUBCASE("loss decreases") {
    Model m(mc);
    const TrainReport r = train(m, train_set, val_set, tc);
    REQUIRE(r.epochs.size() == 20);
    CHECK(r.epochs.back().train_loss < r.epochs.front().train_loss);
    CHECK((r.best_epoch >= 1 && r.best_epoch <= 20));
  }
  SUBCASE("zero learning rate leaves weights bit-identical") {
    Model m(mc);
    const auto before = weight_bytes(m);
    tc.learning_rate = 0.0f;
    tc.epochs = 2;
    train(m, train_set, val_set, tc);
    CHECK(weight_bytes(m) == before);
  }
  SUBCASE("same seed, same data, same weights") {
    tc.epochs = 3;
    tc.momentum = 0.9f;
    Model a(mc), b(mc);
    train(a, train_set, val_set, tc);
    train(b, train_set, val_set, tc);
    CHECK(weight_bytes(a) == weight_bytes(b));
    CHECK(model_digest(a) == model_digest(b));
  }
  SUBCASE("errors") {
    Model m(mc);
    CHECK_THROWS_AS(train(m, data::Dataset{}, val_set, tc), DataError);
    CHECK_THROWS_AS(train(m, train_set, data::Dataset{}, tc), DataError);
    tc.epochs = 3;
    tc.learning_rate = 1e30f;  // overflows the weights within a step or two
    try {
      train(m, train_set, val_set, tc);
      FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
      CHECK((e.epoch() >= 1 && e.epoch() <= 3));
    }
  }
}

TEST_CASE("evaluate: hardcoded scores and counting oracle") {
  ModelConfig mc;
  mc.patch_size = 16;
  Model m(mc);
  zero_head(m);
  m.parameter("head.bias").value()[1] = 50.0f;  // bona fide logit dominates
  const data::Dataset ds = small_corpus(6, 16, 3);
  data::Dataset bona, attacks;
  for (const auto& s : ds.samples) (s.label == Label::BonaFide ? bona : attacks).samples.push_back(s);
  bona.patch_size = attacks.patch_size = 16;

  const auto rb = evaluate(m, bona, {0.5});
  REQUIRE(rb.report.bpcer.has_value());
  CHECK(*rb.report.bpcer == 0.0);
  CHECK_FALSE(rb.report.apcer.has_value());
  const auto ra = evaluate(m, attacks, {0.5});
  REQUIRE(ra.report.apcer.has_value());
  CHECK(*ra.report.apcer == 1.0);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    mc.seed = seed;
    const Model r(mc);
    const double h = 0.3 + 0.1 * static_cast<double>(seed);
    const auto ev = evaluate(r, ds, {h}, 5);
    REQUIRE(ev.samples.size() == ds.size());
    metrics::ConfusionCounts oracle;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      pem::PatchSet set;
      set.patches = {ds.samples[i].patches[0], ds.samples[i].patches[1]};
      const Score s = predict(r, set);
      CHECK(std::abs(s.p_bona_fide - ev.samples[i].score.p_bona_fide) < 1e-6);
      const bool attack = ds.samples[i].label == Label::Attack;
      const bool accepted = s.p_bona_fide > h;
      if (attack && !accepted) ++oracle.tp;
      if (attack && accepted) ++oracle.fn;
      if (!attack && accepted) ++oracle.tn;
      if (!attack && !accepted) ++oracle.fp;
    }
    CHECK(ev.report.counts.tp == oracle.tp);
    CHECK(ev.report.counts.tn == oracle.tn);
    CHECK(ev.report.counts.fp == oracle.fp);
    CHECK(ev.report.counts.fn == oracle.fn);
  }
}

TEST_CASE("checkpoint round trip and digest") {
  TempDir dir("spf_test_checkpoint");
  ModelConfig mc;
  mc.branches = 3;
  mc.patch_size = 32;
  mc.seed = 77;
  Model m(mc);
  save_checkpoint(m, dir.path);
  CHECK(fs::exists(dir.path / "model.w32"));
  CHECK(fs::exists(dir.path / "model.json"));
  const Model loaded = load_checkpoint(dir.path);
  CHECK(loaded.config() == mc);
  CHECK(weight_bytes(loaded) == weight_bytes(m));
  CHECK(model_digest(loaded) == model_digest(m));

  Rng rng(4);
  const auto p = random_patches(3, 32, rng);
  CHECK(predict(loaded, p).p_bona_fide == predict(m, p).p_bona_fide);

  m.parameter("head.bias").value()[0] += 1.0f;
  CHECK(model_digest(m) != model_digest(loaded));

  CHECK(model_config_from_json(to_json(mc)) == mc);
  CHECK_THROWS_AS(model_config_from_json("{\"branches\": 9}"), ConfigError);
}
