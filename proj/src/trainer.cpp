#include "vmask/trainer.hpp"

#include <cmath>
#include <stdexcept>

#include "vmask/baselines.hpp"
#include "vmask/mask.hpp"

namespace vmask::trainer {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw std::invalid_argument("train config: lr must be > 0");
  if (clip_norm <= 0.0) throw std::invalid_argument("train config: clip_norm must be > 0");
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (beta_target < 0.0) throw std::invalid_argument("train config: beta_target must be >= 0");
  if (tau <= 0.0) throw std::invalid_argument("train config: tau must be > 0");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("train config: dropout must be in [0,1)");
  }
  if (l2_weight < 0.0) throw std::invalid_argument("train config: l2_weight must be >= 0");
  if (early_stop_patience < 1) throw std::invalid_argument("train config: patience must be >= 1");
}

void adam_step(std::vector<models::NamedParam>& params, AdamState& state, const TrainConfig& cfg,
               int t) {
  if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
  if (state.m.empty()) {
    for (const models::NamedParam& p : params) {
      state.m.emplace_back(p.value.size(), 0.0);
      state.v.emplace_back(p.value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state size mismatch");
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    models::NamedParam& p = params[i];
    if (p.frozen) continue;
    if (!p.value.has_grad()) continue;
    if (state.m[i].size() != p.value.size()) {
      throw std::invalid_argument("adam_step: shape mismatch for " + p.name);
    }
    auto& g = p.value.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto& w = p.value.data();
    for (size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g[k];
      v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

double kl_anneal(int step, double beta_target, int anneal_steps) {
  if (step < 0) throw std::invalid_argument("kl_anneal: step must be >= 0");
  if (anneal_steps <= 0) return beta_target;
  const double frac = static_cast<double>(step) / anneal_steps;
  return beta_target * std::min(1.0, frac);
}

void clip_gradients(std::vector<std::vector<double>*>& grads, double max_norm) {
  if (max_norm <= 0.0) throw std::invalid_argument("clip_gradients: max_norm must be > 0");
  double sq = 0.0;
  for (const auto* g : grads) {
    for (double x : *g) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto* g : grads) {
    for (double& x : *g) x *= s;
  }
}

double accuracy_percent(const models::Model& model, const std::vector<corpus::Example>& examples) {
  if (examples.empty()) throw std::invalid_argument("accuracy: empty example set");
  long correct = 0;
  for (const corpus::Example& ex : examples) {
    if (model.predicted_class(ex) == ex.label) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(examples.size());
}

namespace {

Checkpoint snapshot(const models::Model& model, int epoch, double dev_acc) {
  Checkpoint ck;
  ck.epoch = epoch;
  ck.dev_accuracy = dev_acc;
  for (const models::NamedParam& p : model.params()) {
    ck.tensors.push_back({p.name, tg::Tensor(p.value.shape(), p.value.data()), p.frozen});
  }
  return ck;
}

}  // namespace

void restore(models::Model& model, const Checkpoint& ckpt) {
  for (models::NamedParam& p : model.params()) {
    bool found = false;
    for (const models::NamedParam& src : ckpt.tensors) {
      if (src.name != p.name) continue;
      if (src.value.shape() != p.value.shape()) {
        throw std::invalid_argument("restore: shape mismatch for tensor '" + p.name + "'");
      }
      p.value.data() = src.value.data();
      found = true;
      break;
    }
    if (!found) throw std::invalid_argument("restore: missing tensor '" + p.name + "'");
  }
}

TrainResult train(models::Model& model, const corpus::DatasetSplit& data, const TrainConfig& cfg) {
  cfg.validate();
  if (model.strategy() != cfg.strategy) {
    throw std::invalid_argument("train: model strategy does not match config");
  }
  if (data.train.empty() || data.dev.empty()) {
    throw std::invalid_argument("train: need non-empty train and dev splits");
  }

  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng noise_rng(cfg.seed ^ 0x7f4a7c159e3779b9ULL);

  const int steps_per_epoch =
      (static_cast<int>(data.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const int anneal_steps = cfg.anneal_steps < 0 ? 2 * steps_per_epoch : cfg.anneal_steps;

  // embedding excluded from the l2 penalty; frozen stats excluded as well
  std::vector<tg::Tensor> l2_params;
  for (const models::NamedParam& p : model.params()) {
    if (p.name != "embedding" && !p.frozen) l2_params.push_back(p.value);
  }

  for (models::NamedParam& p : model.params()) p.value.set_requires_grad(!p.frozen);

  TrainResult result;
  AdamState adam;
  int global_step = 0;
  int epochs_since_best = 0;
  double best_dev = -1.0;

  std::vector<size_t> order(data.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  models::ForwardOptions fwd_opts;
  fwd_opts.dropout = cfg.dropout;
  fwd_opts.tau = cfg.tau;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0, epoch_ce = 0.0, epoch_reg = 0.0;
    double beta_t = 0.0;
    int steps_this_epoch = 0;

    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      ++global_step;
      ++steps_this_epoch;
      beta_t = kl_anneal(global_step, cfg.beta_target, anneal_steps);

      std::vector<corpus::Example> batch;
      std::vector<int> labels;
      for (size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        batch.push_back(data.train[order[i]]);
        labels.push_back(batch.back().label);
      }

      double loss_value = 0.0, ce_value = 0.0, reg_value = 0.0;
      {
        tg::Tape tape;
        models::ForwardResult fwd = model.forward(batch, models::Mode::train, &noise_rng, fwd_opts);
        tg::Tensor ce = tg::cross_entropy(fwd.logits, labels);
        tg::Tensor loss;
        switch (cfg.strategy) {
          case models::Strategy::base:
            loss = ce;
            break;
          case models::Strategy::l2: {
            tg::Tensor pen = baselines::l2_penalty(l2_params, cfg.l2_weight);
            reg_value = pen.item();
            loss = tg::add(ce, pen);
            break;
          }
          case models::Strategy::vmask: {
            loss = mask::objective(ce, fwd.mask_probs, beta_t);
            reg_value = ce.item() - loss.item();
            break;
          }
          case models::Strategy::l2x:
            loss = ce;
            break;
          case models::Strategy::iba: {
            reg_value = fwd.reg.item();
            loss = tg::add(ce, tg::scale(fwd.reg, beta_t));
            break;
          }
        }
        if (!std::isfinite(loss.item())) {
          throw std::runtime_error("train: non-finite loss at step " + std::to_string(global_step) +
                                   " (beta_t " + std::to_string(beta_t) + ")");
        }
        tape.backward(loss);
        loss_value = loss.item();
        ce_value = ce.item();
      }

      // pad embedding row stays all-zero
      tg::Tensor emb = model.embedding();
      if (!model.spec().frozen_embedding && emb.has_grad()) {
        auto& g = emb.grad();
        for (int j = 0; j < model.spec().embed_dim; ++j) g[corpus::kPadId * model.spec().embed_dim + j] = 0.0;
      }

      std::vector<std::vector<double>*> grads;
      for (models::NamedParam& p : model.params()) {
        if (!p.frozen && p.value.has_grad()) grads.push_back(&p.value.grad());
      }
      clip_gradients(grads, cfg.clip_norm);
      adam_step(model.params(), adam, cfg, global_step);
      for (models::NamedParam& p : model.params()) p.value.zero_grad();

      epoch_loss += loss_value;
      epoch_ce += ce_value;
      epoch_reg += reg_value;
    }

    const double dev_acc = accuracy_percent(model, data.dev);
    EpochStats stats;
    stats.epoch = epoch;
    stats.step = global_step;
    stats.loss = epoch_loss / steps_this_epoch;
    stats.ce = epoch_ce / steps_this_epoch;
    stats.reg = epoch_reg / steps_this_epoch;
    stats.beta_t = beta_t;
    stats.dev_acc = dev_acc;
    result.history.push_back(stats);

    // ties keep the later epoch (same dev accuracy, more-trained masks);
    // the early-stop counter requires strict improvement
    if (dev_acc >= best_dev) {
      result.best = snapshot(model, epoch, dev_acc);
    }
    if (dev_acc > best_dev) {
      best_dev = dev_acc;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.early_stop_patience) break;
    }
  }

  for (models::NamedParam& p : model.params()) {
    p.value.set_requires_grad(false);
    p.value.zero_grad();
  }
  if (result.best.tensors.empty()) {
    result.best = snapshot(model, cfg.epochs, best_dev);
  }
  return result;
}

}  // namespace vmask::trainer
