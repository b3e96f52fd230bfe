#include "vmask/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vmask::models {

Strategy strategy_from_string(const std::string& s) {
  if (s == "base") return Strategy::base;
  if (s == "l2") return Strategy::l2;
  if (s == "vmask") return Strategy::vmask;
  if (s == "l2x") return Strategy::l2x;
  if (s == "iba") return Strategy::iba;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::base: return "base";
    case Strategy::l2: return "l2";
    case Strategy::vmask: return "vmask";
    case Strategy::l2x: return "l2x";
    case Strategy::iba: return "iba";
  }
  return "?";
}

HeadKind head_from_string(const std::string& s) {
  if (s == "boe") return HeadKind::boe;
  if (s == "cnn") return HeadKind::cnn;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

std::string to_string(HeadKind k) { return k == HeadKind::boe ? "boe" : "cnn"; }

namespace {

tg::Tensor xavier(int fan_in, int fan_out, std::vector<int> shape, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  return tg::Tensor::uniform(std::move(shape), -limit, limit, rng);
}

}  // namespace

Model::Model(ClassifierSpec spec, Strategy strategy, int vocab_size, uint64_t init_seed)
    : spec_(std::move(spec)), strategy_(strategy), vocab_size_(vocab_size) {
  if (spec_.num_classes < 2) throw std::invalid_argument("model: need at least 2 classes");
  if (vocab_size_ < 3) throw std::invalid_argument("model: vocabulary too small");
  Rng rng(init_seed);
  const int d = spec_.embed_dim;
  const int c = spec_.num_classes;

  tg::Tensor emb = tg::Tensor::uniform({vocab_size_, d}, -0.1, 0.1, rng);
  for (int j = 0; j < d; ++j) emb(corpus::kPadId, j) = 0.0;
  add_param("embedding", emb, spec_.frozen_embedding);

  if (spec_.kind == HeadKind::boe) {
    const int h = spec_.hidden;
    if (h < 1) throw std::invalid_argument("model: boe hidden width must be >= 1");
    add_param("boe.w1", xavier(d, h, {d, h}, rng));
    add_param("boe.b1", tg::Tensor({h}));
    add_param("boe.w2", xavier(h, c, {h, c}, rng));
    add_param("boe.b2", tg::Tensor({c}));
  } else {
    const int f = spec_.filters_per_width;
    if (f < 1 || spec_.filter_widths.empty()) {
      throw std::invalid_argument("model: cnn needs at least one filter");
    }
    for (int w : spec_.filter_widths) {
      add_param("cnn.conv" + std::to_string(w) + ".w", xavier(w * d, f, {f, w * d}, rng));
      add_param("cnn.conv" + std::to_string(w) + ".b", tg::Tensor({f}));
    }
    const int pooled = f * static_cast<int>(spec_.filter_widths.size());
    add_param("cnn.w_out", xavier(pooled, c, {pooled, c}, rng));
    add_param("cnn.b_out", tg::Tensor({c}));
  }

  switch (strategy_) {
    case Strategy::vmask:
      add_param("mask.w", xavier(d, 2, {d, 2}, rng));
      add_param("mask.b", tg::Tensor({2}));
      break;
    case Strategy::l2x:
      add_param("gate.w", xavier(d, 1, {d, 1}, rng));
      add_param("gate.b", tg::Tensor({1}));
      break;
    case Strategy::iba: {
      add_param("gate.w", xavier(d, 1, {d, 1}, rng));
      add_param("gate.b", tg::Tensor({1}));
      auto [mu, sigma] = baselines::embedding_stats(embedding());
      add_param("iba.mu", tg::Tensor({d}, mu), /*frozen=*/true);
      add_param("iba.sigma", tg::Tensor({d}, sigma), /*frozen=*/true);
      break;
    }
    default: break;
  }
}

void Model::add_param(const std::string& name, tg::Tensor t, bool frozen) {
  params_.push_back({name, std::move(t), frozen});
}

tg::Tensor Model::param(const std::string& name) const {
  for (const NamedParam& p : params_) {
    if (p.name == name) return p.value;
  }
  throw std::invalid_argument("model: no parameter named '" + name + "'");
}

bool Model::has_param(const std::string& name) const {
  for (const NamedParam& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

void Model::set_embedding(const tg::Tensor& table) {
  for (NamedParam& p : params_) {
    if (p.name == "embedding") {
      if (table.shape() != p.value.shape()) {
        throw std::invalid_argument("set_embedding: shape mismatch");
      }
      p.value.data() = table.data();
      return;
    }
  }
}

mask::MaskInferenceNet Model::mask_net() const { return {param("mask.w"), param("mask.b")}; }

baselines::GateLayer Model::gate() const { return {param("gate.w"), param("gate.b")}; }

std::vector<double> Model::iba_mu() const { return param("iba.mu").data(); }
std::vector<double> Model::iba_sigma() const { return param("iba.sigma").data(); }

ExampleForward Model::forward_one(const corpus::Example& ex, Mode mode, Rng* rng,
                                  const ForwardOptions& opts) const {
  const int l = static_cast<int>(ex.token_ids.size());
  const int n = ex.true_length;
  if (n < 1 || n > l) throw std::invalid_argument("forward: invalid true_length");
  if (opts.keep && static_cast<int>(opts.keep->size()) != n) {
    throw std::invalid_argument("forward: keep mask length mismatch");
  }
  const bool training = mode == Mode::train;
  if (training && rng == nullptr) throw std::invalid_argument("forward: train mode needs an rng");

  std::vector<int> ids(ex.token_ids.begin(), ex.token_ids.begin() + n);
  for (int id : ids) {
    if (id >= vocab_size_) {
      throw std::invalid_argument("forward: token id " + std::to_string(id) +
                                  " outside vocabulary of size " + std::to_string(vocab_size_));
    }
  }
  tg::Tensor emb = tg::embedding_lookup(embedding(), ids);  // [n x d]

  ExampleForward out;
  tg::Tensor z;  // transformed embeddings [n x d]
  switch (strategy_) {
    case Strategy::base:
    case Strategy::l2: {
      z = emb;
      break;
    }
    case Strategy::vmask: {
      tg::Tensor probs = mask::mask_probs(mask_net(), emb);
      out.mask_probs = probs;
      tg::Tensor vals = training ? mask::sample_mask_values(probs, opts.tau, *rng)
                                 : mask::infer_mask_values(probs);
      z = mask::apply_mask(emb, vals);
      break;
    }
    case Strategy::l2x: {
      auto res = baselines::l2x_transform(gate(), emb);
      out.mask_probs = res.scores;
      z = res.weighted;
      break;
    }
    case Strategy::iba: {
      auto res = baselines::iba_transform(gate(), emb, iba_mu(), iba_sigma(), rng, training);
      out.mask_probs = res.lambda;
      z = res.noised;
      if (training) out.info_loss = baselines::iba_info_loss(res.lambda, emb, iba_mu(), iba_sigma());
      break;
    }
  }
  if (opts.keep) {
    z = tg::row_scale(z, tg::Tensor({n}, *opts.keep));
  }

  tg::Tensor pooled_row;  // [1 x *]
  if (spec_.kind == HeadKind::boe) {
    tg::Tensor ones_row = tg::Tensor::full({1, n}, 1.0);
    pooled_row = tg::scale(tg::matmul(ones_row, z), 1.0 / n);
  } else {
    // re-pad so every example sees the same number of conv windows
    tg::Tensor full = l > n ? tg::concat_rows({z, tg::Tensor({l - n, spec_.embed_dim})}) : z;
    std::vector<tg::Tensor> pooled;
    for (int w : spec_.filter_widths) {
      pooled.push_back(tg::conv1d_maxpool(full, param("cnn.conv" + std::to_string(w) + ".w"),
                                          param("cnn.conv" + std::to_string(w) + ".b"), w));
    }
    pooled_row = tg::as_row(tg::concat_vec(pooled));
  }

  if (training && opts.dropout > 0.0) {
    pooled_row = tg::dropout(pooled_row, opts.dropout, *rng, true);
  }

  if (spec_.kind == HeadKind::boe) {
    tg::Tensor hidden = tg::tanh_(tg::add(tg::matmul(pooled_row, param("boe.w1")), param("boe.b1")));
    out.logits = tg::add(tg::matmul(hidden, param("boe.w2")), param("boe.b2"));
  } else {
    out.logits = tg::add(tg::matmul(pooled_row, param("cnn.w_out")), param("cnn.b_out"));
  }
  return out;
}

ForwardResult Model::forward(const std::vector<corpus::Example>& batch, Mode mode, Rng* rng,
                             const ForwardOptions& opts) const {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  ForwardResult res;
  std::vector<tg::Tensor> logit_rows;
  std::vector<tg::Tensor> info_losses;
  for (const corpus::Example& ex : batch) {
    ExampleForward one = forward_one(ex, mode, rng, opts);
    logit_rows.push_back(one.logits);
    if (one.mask_probs.defined()) res.mask_probs.push_back(one.mask_probs);
    if (one.info_loss.defined()) info_losses.push_back(one.info_loss);
  }
  res.logits = logit_rows.size() == 1 ? logit_rows[0] : tg::concat_rows(logit_rows);
  if (!info_losses.empty()) {
    res.reg = tg::mean(tg::concat_vec(info_losses));
  }
  return res;
}

std::vector<double> Model::predict_proba(const corpus::Example& ex) const {
  ExampleForward fwd = forward_one(ex, Mode::infer, nullptr);
  return softmax(fwd.logits.data());
}

int Model::predicted_class(const corpus::Example& ex) const {
  return argmax_lowest(predict_proba(ex));
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

PretrainedLoad load_pretrained_embeddings(const std::string& path, const corpus::Vocab& vocab,
                                          int embed_dim, uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_pretrained_embeddings: cannot open " + path);
  int file_vocab = 0, file_dim = 0;
  if (!(in >> file_vocab >> file_dim)) {
    throw std::runtime_error("load_pretrained_embeddings: bad header in " + path);
  }
  if (file_dim != embed_dim) {
    throw std::runtime_error("load_pretrained_embeddings: file dim " + std::to_string(file_dim) +
                             " does not match model dim " + std::to_string(embed_dim));
  }
  Rng rng(seed);
  PretrainedLoad out;
  out.table = tg::Tensor::uniform({vocab.size(), embed_dim}, -0.1, 0.1, rng);
  std::string token;
  for (int row = 0; row < file_vocab && (in >> token); ++row) {
    std::vector<double> vals(embed_dim);
    for (int j = 0; j < embed_dim; ++j) {
      if (!(in >> vals[j])) {
        throw std::runtime_error("load_pretrained_embeddings: truncated row for '" + token + "'");
      }
    }
    const int id = vocab.id_of(token);
    if (id >= 0) {
      for (int j = 0; j < embed_dim; ++j) out.table(id, j) = vals[j];
      ++out.coverage;
    }
  }
  for (int j = 0; j < embed_dim; ++j) out.table(corpus::kPadId, j) = 0.0;
  return out;
}

}  // namespace vmask::models
