#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vmask/corpus.hpp"
#include "vmask/models.hpp"
#include "vmask/tensor.hpp"

namespace vmask::trainer {

struct TrainConfig {
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  int epochs = 10;
  int batch_size = 32;
  double beta_target = 0.1;  // IB coefficient (vmask bonus / iba penalty)
  int anneal_steps = -1;     // -1: two epochs' worth of steps
  double tau = 0.5;
  double dropout = 0.2;
  uint64_t seed = 0;
  models::Strategy strategy = models::Strategy::base;
  double l2_weight = 1e-4;
  int early_stop_patience = 5;

  void validate() const;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Bias-corrected Adam over the model's trainable parameters; gradients are
// consumed as found in each tensor's grad buffer. Frozen tensors are skipped.
void adam_step(std::vector<models::NamedParam>& params, AdamState& state, const TrainConfig& cfg,
               int t);

// Linear warm-up of the IB coefficient; anneal_steps == 0 keeps it constant.
double kl_anneal(int step, double beta_target, int anneal_steps);

// Global-norm clipping across all gradient buffers, in place.
void clip_gradients(std::vector<std::vector<double>*>& grads, double max_norm);

struct EpochStats {
  int epoch = 0;
  int step = 0;  // global step count at epoch end
  double loss = 0.0;
  double ce = 0.0;
  double reg = 0.0;
  double beta_t = 0.0;
  double dev_acc = 0.0;
};

struct Checkpoint {
  std::vector<models::NamedParam> tensors;
  uint64_t vocab_fingerprint = 0;
  int epoch = 0;
  double dev_accuracy = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochStats> history;
};

double accuracy_percent(const models::Model& model, const std::vector<corpus::Example>& examples);

// Mini-batch training with per-strategy loss composition, gradient clipping,
// Adam, per-epoch dev evaluation, best-dev checkpointing and early stopping.
TrainResult train(models::Model& model, const corpus::DatasetSplit& data, const TrainConfig& cfg);

// Copies checkpoint tensors back into a freshly constructed model.
void restore(models::Model& model, const Checkpoint& ckpt);

}  // namespace vmask::trainer
