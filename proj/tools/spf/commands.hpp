#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace spf::cli {

namespace fs = std::filesystem;

struct SynthOptions {
  fs::path out;
  int n = 100;
  int size = 64;
  std::uint64_t seed = 0;
};

struct FacesOptions {
  fs::path out;
  int n = 10;
  int size = 224;
  std::uint64_t seed = 0;
};

struct ExtractOptions {
  fs::path in;
  fs::path out;
  int k = 3;
  int size = 64;
  std::uint64_t seed = 0;
};

struct TrainOptions {
  fs::path data;
  fs::path val;
  fs::path out;
  double val_fraction = 0.2;
  int branches = 2;
  bool share_weights = false;
  int epochs = 100;
  double lr = 0.01;
  double momentum = 0.0;
  int batch = 64;
  bool no_augment = false;
  bool random_patch = false;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

struct EvalOptions {
  fs::path model;
  fs::path data;
  fs::path out;
  double threshold = 0.5;
  int points = 99;  // sweep only
};

struct ServeOptions {
  fs::path model;
  std::string host = "127.0.0.1";
  int port = 7878;
  double threshold = 0.5;
  int max_connections = 64;
  int io_timeout_ms = 5000;
};

struct PredictOptions {
  fs::path image;
  fs::path keypoints;
  std::string host = "127.0.0.1";
  int port = 7878;
  int k = 2;
  int size = 64;
  int timeout_ms = 2000;
  std::uint64_t seed = 0;
};

struct BenchOptions {
  fs::path fixture;
  fs::path model;
  fs::path out;
  int trials = 100;
  int branches = 2;
  int size = 64;
  double rtt_ms = 3.0;
  double bandwidth = 1000.0;  // bytes per ms
  std::uint64_t seed = 0;
};

int run_synth(const SynthOptions& o);
int run_faces(const FacesOptions& o);
int run_extract(const ExtractOptions& o);
int run_train(const TrainOptions& o);
int run_eval(const EvalOptions& o);
int run_sweep(const EvalOptions& o);
int run_serve(const ServeOptions& o);
int run_predict(const PredictOptions& o);
int run_bench(const BenchOptions& o);

}  // namespace spf::cli
