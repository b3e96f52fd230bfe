#pragma once

// The variational word-mask layer: an amortized Bernoulli distribution over
// keeping each word type, sampled with the Gumbel-softmax relaxation during
// training and replaced by its expectation at inference.

#include <vector>

#include "vmask/corpus.hpp"
#include "vmask/importance.hpp"
#include "vmask/rng.hpp"
#include "vmask/tensor.hpp"

namespace vmask::mask {

// Single-layer inference network: embedding -> 2 logits over {drop, keep}.
struct MaskInferenceNet {
  tg::Tensor w;  // [d x 2]
  tg::Tensor b;  // [2]
};

// q(R=1 | x_t) per token: softmax over the two mask categories, column 1.
tg::Tensor mask_probs(const MaskInferenceNet& net, const tg::Tensor& embeddings);

struct GumbelSample {
  double rs0;
  double rs1;  // relaxed mask value
};

// Two-category Gumbel-softmax with explicit noise; rs0 + rs1 == 1.
GumbelSample gumbel_softmax_from_noise(double p, double tau, double s0, double s1);
GumbelSample gumbel_softmax_sample(double p, double tau, Rng& rng);

// Tape path: one relaxed sample per token; gradient flows to probs only
// (the Gumbel draws are constants).
tg::Tensor sample_mask_values(const tg::Tensor& probs, double tau, Rng& rng);

// Inference uses the Bernoulli mean, i.e. the probabilities themselves.
tg::Tensor infer_mask_values(const tg::Tensor& probs);

// Row t scaled by mask value t.
tg::Tensor apply_mask(const tg::Tensor& embeddings, const tg::Tensor& mask_values);

double bernoulli_entropy(double p);
double kl_to_uniform(double p);
// Elementwise entropy of Bernoulli(p) in nats; inputs clamped away from {0,1}.
tg::Tensor bernoulli_entropy(const tg::Tensor& probs);

// minimize ce - beta * mean entropy over all (non-pad) tokens in the batch.
// Returns ce itself when beta == 0.
tg::Tensor objective(const tg::Tensor& ce_loss, const std::vector<tg::Tensor>& probs_per_example,
                     double beta);

// E[q(R|x)] per non-reserved word type, computed from its embedding row.
GlobalImportance global_importance(const MaskInferenceNet& net, const tg::Tensor& embedding_table,
                                   const corpus::Vocab& vocab);

}  // namespace vmask::mask
