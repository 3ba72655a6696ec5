#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <functional>
#include <iostream>

#include "commands.hpp"
#include "json_config.hpp"
#include "spf/common/errors.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("spf");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("SPF_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string_view(env) != "off") {
      spdlog::warn("SPF_LOG={} is not a log level; keeping info", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace spf::cli;
  setup_logging();

  CLI::App app{"Privacy-preserving face anti-spoofing on facial skin patches", "spf"};
  app.require_subcommand(1, 1);
  // Lets `spf <command> --config f.json` reach the top-level option.
  app.fallthrough(true);
  app.set_config("--config", "", "JSON file of option values for the command (command-line flags win)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::function<int()> action;
  std::vector<std::string> names;
  auto add = [&](const char* name, const char* help) {
    names.emplace_back(name);
    return app.add_subcommand(name, help);
  };

  SynthOptions synth;
  auto* c_synth = add("synth", "Generate a labeled synthetic patch corpus");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--n", synth.n, "Samples per class (bona fide and each attack type)")->capture_default_str()->check(CLI::PositiveNumber);
  c_synth->add_option("--size", synth.size, "Patch side S in pixels")->capture_default_str()->check(CLI::Range(8, 512));
  c_synth->add_option("--seed", synth.seed, "Master seed")->capture_default_str();
  c_synth->callback([&] { action = [&] { return run_synth(synth); }; });

  FacesOptions faces;
  auto* c_faces = add("faces", "Render synthetic faces with keypoint files (input for extract/predict)");
  c_faces->add_option("--out", faces.out, "Output directory")->required();
  c_faces->add_option("--n", faces.n, "Number of faces")->capture_default_str()->check(CLI::PositiveNumber);
  c_faces->add_option("--size", faces.size, "Image side in pixels")->capture_default_str()->check(CLI::Range(64, 2048));
  c_faces->add_option("--seed", faces.seed, "Seed")->capture_default_str();
  c_faces->callback([&] { action = [&] { return run_faces(faces); }; });

  ExtractOptions extract;
  auto* c_extract = add("extract", "Align faces and extract skin patches (image.ppm + image.json pairs)");
  c_extract->add_option("--in", extract.in, "Directory of .ppm images with keypoint .json files")->required();
  c_extract->add_option("--out", extract.out, "Output directory")->required();
  c_extract->add_option("--k", extract.k, "Patches per face")->capture_default_str()->check(CLI::Range(1, 3));
  c_extract->add_option("--size", extract.size, "Patch side S")->capture_default_str()->check(CLI::Range(8, 512));
  c_extract->add_option("--seed", extract.seed, "Seed for region choice and jitter")->capture_default_str();
  c_extract->callback([&] { action = [&] { return run_extract(extract); }; });

  TrainOptions train;
  auto* c_train = add("train", "Train an N-branch model on a corpus");
  c_train->add_option("--data", train.data, "Corpus directory or manifest")->required();
  c_train->add_option("--val", train.val, "Separate validation corpus (default: stratified split of --data)");
  c_train->add_option("--out", train.out, "Checkpoint directory")->required();
  c_train->add_option("--val-fraction", train.val_fraction, "Held-out fraction when --val is absent")->capture_default_str()->check(CLI::Range(0.01, 0.9));
  c_train->add_option("--branches", train.branches, "Number of branches / patches")->capture_default_str()->check(CLI::Range(1, 3));
  c_train->add_flag("--share-weights", train.share_weights, "One backbone shared by all branches");
  c_train->add_option("--epochs", train.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--lr", train.lr, "Learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_train->add_option("--momentum", train.momentum, "Heavy-ball momentum (0 = plain SGD)")->capture_default_str()->check(CLI::Range(0.0, 0.999));
  c_train->add_option("--batch", train.batch, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_flag("--no-augment", train.no_augment, "Disable flip and color-jitter augmentation");
  c_train->add_flag("--random-patch", train.random_patch, "Draw which stored patches feed the branches per batch");
  c_train->add_option("--threshold", train.threshold, "Decision threshold for validation ACER")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_train->add_option("--seed", train.seed, "Seed for init, split, order and augmentation")->capture_default_str();
  c_train->callback([&] { action = [&] { return run_train(train); }; });

  EvalOptions eval;
  auto* c_eval = add("eval", "Score a corpus and report APCER/BPCER/ACER at a threshold");
  c_eval->add_option("--model", eval.model, "Checkpoint directory")->required();
  c_eval->add_option("--data", eval.data, "Corpus directory or manifest")->required();
  c_eval->add_option("--threshold", eval.threshold, "Decision threshold H")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_eval->add_option("--out", eval.out, "Optional directory for metrics.json and scores.csv");
  c_eval->callback([&] { action = [&] { return run_eval(eval); }; });

  EvalOptions sweep;
  auto* c_sweep = add("sweep", "ACER over a threshold grid and the best threshold");
  c_sweep->add_option("--model", sweep.model, "Checkpoint directory")->required();
  c_sweep->add_option("--data", sweep.data, "Corpus directory or manifest")->required();
  c_sweep->add_option("--points", sweep.points, "Interior thresholds i/(points+1)")->capture_default_str()->check(CLI::Range(2, 100000));
  c_sweep->add_option("--out", sweep.out, "Optional directory for sweep.json and sweep.csv");
  c_sweep->callback([&] { action = [&] { return run_sweep(sweep); }; });

  ServeOptions serve;
  auto* c_serve = add("serve", "Serve a checkpoint over the patch protocol until SIGINT/SIGTERM");
  c_serve->add_option("--model", serve.model, "Checkpoint directory")->envname("SPF_MODEL")->required();
  c_serve->add_option("--host", serve.host, "Bind address")->envname("SPF_HOST")->capture_default_str();
  c_serve->add_option("--port", serve.port, "Port (0 = ephemeral)")->envname("SPF_PORT")->capture_default_str()->check(CLI::Range(0, 65535));
  c_serve->add_option("--threshold", serve.threshold, "Decision threshold H")->envname("SPF_THRESHOLD")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_serve->add_option("--max-connections", serve.max_connections, "Concurrent connection limit")->envname("SPF_MAX_CONNECTIONS")->capture_default_str()->check(CLI::PositiveNumber);
  c_serve->add_option("--io-timeout-ms", serve.io_timeout_ms, "Per-read/write timeout")->capture_default_str()->check(CLI::PositiveNumber);
  c_serve->callback([&] { action = [&] { return run_serve(serve); }; });

  PredictOptions predict;
  auto* c_predict = add("predict", "Extract patches locally and ask a server for a decision");
  c_predict->add_option("--image", predict.image, "Face image (.ppm)")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--keypoints", predict.keypoints, "Keypoint .json")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--host", predict.host, "Server address")->capture_default_str();
  c_predict->add_option("--port", predict.port, "Server port")->capture_default_str()->check(CLI::Range(1, 65535));
  c_predict->add_option("--k", predict.k, "Patches to send")->capture_default_str()->check(CLI::Range(1, 3));
  c_predict->add_option("--size", predict.size, "Patch side S")->capture_default_str()->check(CLI::Range(8, 512));
  c_predict->add_option("--timeout-ms", predict.timeout_ms, "Request timeout")->capture_default_str()->check(CLI::PositiveNumber);
  c_predict->add_option("--seed", predict.seed, "Seed for region choice and jitter")->capture_default_str();
  c_predict->callback([&] { action = [&] { return run_predict(predict); }; });

  BenchOptions bench;
  auto* c_bench = add("bench", "Latency of the encrypted full-image path vs the patch path");
  c_bench->add_option("--fixture", bench.fixture, "Replay stage times from a JSON table instead of measuring")->check(CLI::ExistingFile);
  c_bench->add_option("--model", bench.model, "Checkpoint (default: untrained model of --branches/--size)");
  c_bench->add_option("--trials", bench.trials, "Live trials")->capture_default_str()->check(CLI::PositiveNumber);
  c_bench->add_option("--branches", bench.branches, "Branches of the default model")->capture_default_str()->check(CLI::Range(1, 3));
  c_bench->add_option("--size", bench.size, "Patch side of the default model")->capture_default_str()->check(CLI::Range(16, 512));
  c_bench->add_option("--rtt-ms", bench.rtt_ms, "Modeled round-trip time")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_bench->add_option("--bandwidth", bench.bandwidth, "Modeled bandwidth in bytes per ms")->capture_default_str()->check(CLI::PositiveNumber);
  c_bench->add_option("--out", bench.out, "Optional directory for bench.json");
  c_bench->add_option("--seed", bench.seed, "Seed")->capture_default_str();
  c_bench->callback([&] { action = [&] { return run_bench(bench); }; });

  std::string section;
  for (int i = 1; i < argc && section.empty(); ++i) {
    if (std::find(names.begin(), names.end(), argv[i]) != names.end()) section = argv[i];
  }
  const auto formatter = std::make_shared<JsonConfig>(section);
  app.config_formatter(formatter);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  for (const CLI::App* sub : app.get_subcommands()) {
    spdlog::info("{} config: {}", sub->get_name(), formatter->to_config(sub, true, false, ""));
  }
  try {
    return action();
  } catch (const spf::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 2;
  }
}
