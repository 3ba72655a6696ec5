#include "commands.hpp"

#include <signal.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <iostream>
#include <nlohmann/json.hpp>

#include "spf/bench/latency.hpp"
#include "spf/common/bytes.hpp"
#include "spf/data/dataset.hpp"
#include "spf/metrics/metrics.hpp"
#include "spf/model/train.hpp"
#include "spf/pem/image.hpp"
#include "spf/pem/synthetic_face.hpp"
#include "spf/service/client.hpp"
#include "spf/service/server.hpp"

namespace spf::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::string region_json(const pem::PatchSet& set) {
  ordered_json regions = ordered_json::array();
  for (const auto& r : set.regions) {
    regions.push_back({{"region", std::string(pem::to_string(r.region_id))},
                       {"center_x", r.center.x},
                       {"center_y", r.center.y},
                       {"half_extent", r.half_extent},
                       {"jitter_dx", r.jitter_offset.dx},
                       {"jitter_dy", r.jitter_offset.dy}});
  }
  return ordered_json{{"seed", set.seed}, {"regions", regions}}.dump(2) + "\n";
}

pem::FaceRecord read_face(const fs::path& image, const fs::path& keypoints) {
  pem::FaceRecord face;
  face.image = pem::read_ppm(image);
  face.keypoints = pem::keypoints_from_json(read_file_text(keypoints));
  face.source_id = image.stem().string();
  return face;
}

}  // namespace

int run_synth(const SynthOptions& o) {
  ensure_dir(o.out);
  const auto manifest = data::synth_generate({o.n, o.size, o.seed}, o.out);
  fmt::print("wrote {} samples ({} bona fide, {} attack) of {}x{} patches to {}\n", manifest.records.size(),
             manifest.count(model::Label::BonaFide), manifest.count(model::Label::Attack), o.size, o.size,
             o.out.string());
  return 0;
}

int run_faces(const FacesOptions& o) {
  ensure_dir(o.out);
  const pem::ImageSize size{o.size, o.size};
  const double aligned = pem::PemConfig{}.aligned_inter_ocular;
  for (int i = 0; i < o.n; ++i) {
    Rng rng(derive_seed(o.seed, static_cast<std::uint64_t>(i)));
    const auto kp = pem::random_keypoints(rng, size, std::min(aligned, 0.45 * o.size));
    const std::string stem = fmt::format("face_{:04d}", i);
    const auto face = pem::render_face(kp, size, rng, stem);
    pem::write_ppm(o.out / (stem + ".ppm"), face.image);
    write_file_text(o.out / (stem + ".json"), pem::keypoints_to_json(kp));
  }
  fmt::print("wrote {} synthetic faces to {}\n", o.n, o.out.string());
  return 0;
}

int run_extract(const ExtractOptions& o) {
  if (!fs::is_directory(o.in)) throw IoError("input directory not found: " + o.in.string());
  std::vector<fs::path> images;
  for (const auto& e : fs::directory_iterator(o.in)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") images.push_back(e.path());
  }
  std::sort(images.begin(), images.end());
  ensure_dir(o.out);
  ordered_json index = ordered_json::array();
  int written = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const fs::path& image = images[i];
    const fs::path keypoints = fs::path(image).replace_extension(".json");
    const std::string stem = image.stem().string();
    if (!fs::exists(keypoints)) {
      spdlog::warn("{}: no keypoint file, skipped", stem);
      index.push_back({{"source", stem}, {"status", "missing keypoints"}});
      continue;
    }
    try {
      const auto aligned = pem::align(read_face(image, keypoints));
      const auto set = pem::select_patches(aligned, o.k, o.size, derive_seed(o.seed, i));
      std::vector<nn::NamedTensor> entries;
      for (std::size_t p = 0; p < set.patches.size(); ++p) {
        entries.push_back({"patch" + std::to_string(p), set.patches[p]});
      }
      write_file_bytes(o.out / (stem + ".w32"), nn::encode_w32(entries));
      write_file_text(o.out / (stem + ".regions.json"), region_json(set));
      index.push_back({{"source", stem}, {"status", "ok"}, {"patchset", stem + ".w32"}});
      ++written;
    } catch (const GeometryError& e) {
      spdlog::warn("{}: {}", stem, e.what());
      index.push_back({{"source", stem}, {"status", e.what()}});
    }
  }
  write_file_text(o.out / "index.json", index.dump(2) + "\n");
  fmt::print("extracted {} of {} faces into {}\n", written, images.size(), o.out.string());
  return 0;
}

int run_train(const TrainOptions& o) {
  const auto train_all = data::load_dataset(data::load_manifest(o.data));
  data::Dataset train_set, val_set;
  if (!o.val.empty()) {
    train_set = train_all;
    val_set = data::load_dataset(data::load_manifest(o.val));
  } else {
    std::tie(train_set, val_set) = data::split(train_all, o.val_fraction, derive_seed(o.seed, 100));
  }
  model::ModelConfig mc;
  mc.branches = o.branches;
  mc.share_branch_weights = o.share_weights;
  mc.patch_size = train_all.patch_size;
  mc.seed = derive_seed(o.seed, 0);
  model::Model m(mc);
  model::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.learning_rate = static_cast<float>(o.lr);
  tc.momentum = static_cast<float>(o.momentum);
  tc.batch_size = static_cast<std::size_t>(std::max(1, o.batch));
  tc.augment = !o.no_augment;
  tc.random_patch = o.random_patch;
  tc.seed = o.seed;
  tc.val_threshold = o.threshold;
  ensure_dir(o.out);
  spdlog::info("training {}-branch model ({} parameters) on {} samples, validating on {}", mc.branches,
               m.parameter_count(), train_set.size(), val_set.size());
  const auto report = model::train(m, train_set, val_set, tc, [](const model::EpochStats& e) {
    spdlog::info("epoch {:3d}  train loss {:.4f}  val loss {:.4f}  val ACER {:.4f}  ({:.1f}s)", e.epoch, e.train_loss,
                 e.val_loss, e.val_acer, e.seconds);
  });
  model::save_checkpoint(m, o.out);
  // Wall-clock times stay in the log so the output tree is reproducible.
  ordered_json epochs = ordered_json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"val_acer", e.val_acer}});
  }
  write_file_text(o.out / "train_report.json",
                  ordered_json{{"best_epoch", report.best_epoch},
                               {"best_val_acer", report.best_val_acer},
                               {"train_samples", train_set.size()},
                               {"val_samples", val_set.size()},
                               {"epochs", epochs}}
                          .dump(2) +
                      "\n");
  fmt::print("best epoch {} with validation ACER {:.2f}%; checkpoint {} in {}\n", report.best_epoch,
             100.0 * report.best_val_acer, model::model_digest(m).substr(0, 16), o.out.string());
  return 0;
}

int run_eval(const EvalOptions& o) {
  const auto m = model::load_checkpoint(o.model);
  const auto ds = data::load_dataset(data::load_manifest(o.data));
  const auto ev = model::evaluate(m, ds, {o.threshold});
  const std::string json = metrics::to_json(ev.report);
  const auto pct = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}%", 100.0 * *v) : "undefined"; };
  fmt::print("n={} H={}  APCER {}  BPCER {}  ACER {}\n{}\n", ev.report.n_samples, o.threshold, pct(ev.report.apcer),
             pct(ev.report.bpcer), pct(ev.report.acer), json);
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_file_text(o.out / "metrics.json", json + "\n");
    std::string csv = "p_bona_fide,label\n";
    for (const auto& s : ev.samples) csv += fmt::format("{:.17g},{}\n", s.score.p_bona_fide, model::label_index(s.label));
    write_file_text(o.out / "scores.csv", csv);
  }
  return 0;
}

int run_sweep(const EvalOptions& o) {
  const auto m = model::load_checkpoint(o.model);
  const auto ds = data::load_dataset(data::load_manifest(o.data));
  const auto ev = model::evaluate(m, ds, {0.5});
  const auto curve = metrics::sweep(ev.samples, o.points);
  fmt::print("best threshold {:.4f} with ACER {:.2f}% over {} thresholds\n", curve.best_threshold,
             100.0 * curve.best_acer, curve.points.size());
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_file_text(o.out / "sweep.json", metrics::to_json(curve) + "\n");
    write_file_text(o.out / "sweep.csv", metrics::to_csv(curve));
  }
  return 0;
}

int run_serve(const ServeOptions& o) {
  // Block termination signals before any thread exists so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto m = std::make_shared<const model::Model>(model::load_checkpoint(o.model));
  service::ServerConfig cfg;
  cfg.host = o.host;
  cfg.port = static_cast<std::uint16_t>(o.port);
  cfg.max_connections = o.max_connections;
  cfg.io_timeout_ms = o.io_timeout_ms;
  cfg.decision.threshold = o.threshold;
  service::Server server(m, cfg);
  server.start();
  fmt::print("listening on {}:{} (model {}, H={})\n", o.host, server.port(), server.model_digest().substr(0, 16),
             o.threshold);
  std::fflush(stdout);
  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {} received, shutting down", sig);
  server.stop();
  const auto s = server.stats();
  fmt::print("served {} predictions, {} health checks, {} error frames over {} connections\n", s.predictions,
             s.health_checks, s.error_frames, s.connections);
  return 0;
}

int run_predict(const PredictOptions& o) {
  const auto face = read_face(o.image, o.keypoints);
  service::Client client({o.host, static_cast<std::uint16_t>(o.port), o.timeout_ms});
  service::RemoteOptions ro;
  ro.k = o.k;
  ro.patch_size = o.size;
  const auto r = service::predict_remote(client, face, o.seed, ro);
  fmt::print("{}\n", ordered_json{{"request_id", r.request_id},
                                  {"p_bona_fide", r.p_bona_fide},
                                  {"label", std::string(model::to_string(r.label))},
                                  {"inference_ms", r.inference_ms},
                                  {"model_digest", r.model_digest},
                                  {"request_bytes", client.last_request_bytes()}}
                         .dump());
  return 0;
}

int run_bench(const BenchOptions& o) {
  Rng rng(o.seed);
  const auto face = pem::render_face(pem::canonical_keypoints({{112, 60}, 96.0, 0.0}), {224, 224}, rng, "bench");
  model::Model m = [&] {
    if (!o.model.empty()) return model::load_checkpoint(o.model);
    model::ModelConfig mc;
    mc.branches = o.branches;
    mc.patch_size = o.size;
    mc.seed = o.seed;
    return model::Model(mc);
  }();
  bench::PipelineContext ctx;
  ctx.model = &m;
  ctx.channel = {o.rtt_ms, o.bandwidth};
  ctx.channel.validate();
  ctx.patch_seed = o.seed;

  std::string json;
  if (!o.fixture.empty()) {
    auto timing = bench::load_fixture(o.fixture);
    const auto trad = bench::run_pipeline(bench::Mode::Traditional, face, ctx, timing);
    const auto ours = bench::run_pipeline(bench::Mode::PatchPath, face, ctx, timing);
    const auto report = bench::compare(trad, ours);
    fmt::print("replayed from {}\n{}", o.fixture.string(), bench::render_table(report));
    json = bench::to_json(report);
  } else {
    const auto live = bench::run_live(o.trials, face, ctx);
    fmt::print("mean over {} trials (AES-256-GCM measured, transmission modeled: rtt {} ms, {} bytes/ms)\n{}"
               "patch path faster in {}/{} trials\n",
               live.trials, o.rtt_ms, o.bandwidth, bench::render_table(live.mean), live.patch_faster, live.trials);
    auto j = nlohmann::ordered_json::parse(bench::to_json(live.mean));
    j["trials"] = live.trials;
    j["patch_faster"] = live.patch_faster;
    json = j.dump(2);
  }
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_file_text(o.out / "bench.json", json + "\n");
  }
  return 0;
}

}  // namespace spf::cli
