#pragma once

// Competitor training strategies: l2 regularization, a learned sigmoid gate
// per token (L2X-style), and a noise-injection readout bottleneck (IBA-style).

#include <utility>
#include <vector>

#include "vmask/corpus.hpp"
#include "vmask/importance.hpp"
#include "vmask/rng.hpp"
#include "vmask/tensor.hpp"

namespace vmask::baselines {

// weight * sum of squared entries over the given parameters.
tg::Tensor l2_penalty(const std::vector<tg::Tensor>& params, double weight);

// Shared shape for the L2X interpreter and the IBA readout: d -> 1 scores.
struct GateLayer {
  tg::Tensor w;  // [d x 1]
  tg::Tensor b;  // [1]
};

// sigmoid(x_t . w + b) per token.
tg::Tensor gate_scores(const GateLayer& layer, const tg::Tensor& embeddings);

struct L2XResult {
  tg::Tensor weighted;  // score_t * x_t
  tg::Tensor scores;
};
L2XResult l2x_transform(const GateLayer& layer, const tg::Tensor& embeddings);

// Per-dimension mean and (population) standard deviation over non-reserved
// vocabulary rows; sigma floored at 1e-6.
std::pair<std::vector<double>, std::vector<double>> embedding_stats(const tg::Tensor& table,
                                                                    int num_reserved = 2);

struct IBAResult {
  tg::Tensor noised;  // lambda_t * x_t + (1 - lambda_t) * eps_t
  tg::Tensor lambda;
};
// Train mode draws eps = mu + sigma * eta with eta ~ N(0,1) (reparameterized);
// inference replaces the noise with its mean.
IBAResult iba_transform(const GateLayer& readout, const tg::Tensor& embeddings,
                        const std::vector<double>& mu, const std::vector<double>& sigma, Rng* rng,
                        bool training);

// Mean over tokens of the closed-form Gaussian KL between the noised-token
// distribution and the per-dimension embedding prior, summed over dimensions.
tg::Tensor iba_info_loss(const tg::Tensor& lambda, const tg::Tensor& embeddings,
                         const std::vector<double>& mu, const std::vector<double>& sigma);

// Mean gate value over all training-set occurrences of each word; words never
// seen default to 0.5.
GlobalImportance iba_global_importance(const GateLayer& readout, const tg::Tensor& embedding_table,
                                       const std::vector<corpus::Example>& train,
                                       const corpus::Vocab& vocab);

}  // namespace vmask::baselines
