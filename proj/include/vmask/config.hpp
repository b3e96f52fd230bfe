#pragma once

#include <string>

#include <json.hpp>

#include "vmask/corpus.hpp"
#include "vmask/models.hpp"
#include "vmask/trainer.hpp"

namespace vmask::config {

struct DataConfig {
  bool use_synth = true;
  corpus::SynthConfig synth;
  uint64_t synth_seed = 0;
  std::string train_path;
  std::string dev_path;   // optional; empty -> held out of train
  std::string test_path;  // optional; empty -> dev reused
  double dev_fraction = 0.1;
  uint64_t split_seed = 0;
  long min_freq = 1;
  int max_len = 50;
};

struct EvalConfig {
  std::string explainer = "lime";
  int n_samples = 1000;
  double kernel_width = 0.25;
  double ridge_alpha = 1.0;
  int shapley_permutations = 200;
  int aopc_n = 5;
  std::vector<int> posthoc_ks = {1, 2, 3};
  int slice_size = 100;
  uint64_t seed = 0;
};

struct RunConfig {
  DataConfig data;
  models::ClassifierSpec model;
  std::string pretrained_path;  // optional embedding file
  uint64_t init_seed = 0;
  trainer::TrainConfig train;
  EvalConfig eval;

  // All defaults materialized; serializing the result of parse() is stable.
  nlohmann::json echo() const;
  static RunConfig parse(const nlohmann::json& j);
  static RunConfig parse_file(const std::string& path);
};

// Assembles the dataset a config describes (synthetic or TSV-backed).
corpus::DatasetSplit load_dataset(const DataConfig& cfg);

std::string fingerprint_hex(uint64_t fp);

}  // namespace vmask::config
