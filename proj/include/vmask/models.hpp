#pragma once

#include <string>
#include <vector>

#include "vmask/baselines.hpp"
#include "vmask/corpus.hpp"
#include "vmask/mask.hpp"
#include "vmask/rng.hpp"
#include "vmask/tensor.hpp"

namespace vmask::models {

enum class Strategy { base, l2, vmask, l2x, iba };
enum class HeadKind { boe, cnn };
enum class Mode { train, infer };

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);
HeadKind head_from_string(const std::string& s);
std::string to_string(HeadKind k);

struct ClassifierSpec {
  HeadKind kind = HeadKind::cnn;
  int embed_dim = 50;
  int hidden = 64;  // boe only
  std::vector<int> filter_widths = {3, 4, 5};
  int filters_per_width = 20;
  int num_classes = 2;
  bool frozen_embedding = false;
};

struct NamedParam {
  std::string name;
  tg::Tensor value;
  bool frozen = false;
};

struct ForwardOptions {
  double dropout = 0.0;  // train mode only
  double tau = 0.5;      // Gumbel-softmax temperature (vmask train mode)
  // multiplies the mask of the first true_length positions; used by
  // explainers to zero out tokens (single-example forward only)
  const std::vector<double>* keep = nullptr;
};

struct ExampleForward {
  tg::Tensor logits;      // [1 x C]
  tg::Tensor mask_probs;  // [n], defined for vmask / l2x / iba
  tg::Tensor info_loss;   // scalar, defined for iba in train mode
};

struct ForwardResult {
  tg::Tensor logits;  // [m x C]
  std::vector<tg::Tensor> mask_probs;
  tg::Tensor reg;  // iba: mean info loss over the batch; otherwise undefined
};

// Classifier with an embedding table, a mask strategy applied to the looked-up
// embeddings, and a bag-of-embeddings or CNN head. Position t >= true_length
// contributes exactly zero under every strategy.
class Model {
 public:
  Model(ClassifierSpec spec, Strategy strategy, int vocab_size, uint64_t init_seed);

  const ClassifierSpec& spec() const { return spec_; }
  Strategy strategy() const { return strategy_; }
  int vocab_size() const { return vocab_size_; }

  std::vector<NamedParam>& params() { return params_; }
  const std::vector<NamedParam>& params() const { return params_; }
  tg::Tensor param(const std::string& name) const;
  bool has_param(const std::string& name) const;

  tg::Tensor embedding() const { return param("embedding"); }
  void set_embedding(const tg::Tensor& table);
  mask::MaskInferenceNet mask_net() const;
  baselines::GateLayer gate() const;
  std::vector<double> iba_mu() const;
  std::vector<double> iba_sigma() const;

  ExampleForward forward_one(const corpus::Example& ex, Mode mode, Rng* rng,
                             const ForwardOptions& opts = {}) const;
  ForwardResult forward(const std::vector<corpus::Example>& batch, Mode mode, Rng* rng,
                        const ForwardOptions& opts = {}) const;

  std::vector<double> predict_proba(const corpus::Example& ex) const;
  int predicted_class(const corpus::Example& ex) const;

 private:
  ClassifierSpec spec_;
  Strategy strategy_;
  int vocab_size_;
  std::vector<NamedParam> params_;

  void add_param(const std::string& name, tg::Tensor t, bool frozen = false);
};

struct PretrainedLoad {
  tg::Tensor table;
  int coverage = 0;  // vocab tokens found in the file
};

// Text format: first line "V d", then "token v1 ... vd" per line. Tokens
// missing from the file keep their U(-0.1, 0.1) initialization; the pad row is
// zeroed.
PretrainedLoad load_pretrained_embeddings(const std::string& path, const corpus::Vocab& vocab,
                                          int embed_dim, uint64_t seed);

std::vector<double> softmax(const std::vector<double>& logits);
int argmax_lowest(const std::vector<double>& v);

}  // namespace vmask::models
