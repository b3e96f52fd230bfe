#pragma once

// Post-hoc attribution: LIME-style weighted ridge surrogates, Monte-Carlo
// permutation Shapley, a brute-force exact-Shapley oracle, and the summed
// per-word global aggregation used for post-hoc global importance.

#include <string>
#include <vector>

#include "vmask/corpus.hpp"
#include "vmask/models.hpp"
#include "vmask/rng.hpp"

namespace vmask::explainers {

struct Attribution {
  std::string method;
  int target_class = 0;
  std::vector<int> token_ids;   // the example's non-pad ids, in position order
  std::vector<double> scores;   // aligned to token_ids
  int n_samples = 0;
  uint64_t seed = 0;

  std::string to_json(const corpus::Vocab& vocab) const;
};

// Probability of the target class with the embeddings of tokens outside
// keep_set multiplied by zero. The target defaults to the model's own
// prediction on the full example.
double value_fn(const models::Model& model, const corpus::Example& ex,
                const std::vector<uint8_t>& keep_set, int target_class = -1);

struct LimeOptions {
  int n_samples = 1000;
  double kernel_width = 0.25;
  double ridge_alpha = 1.0;
};

// Binary keep-vector perturbations (each token kept with probability 0.5, the
// full input always included), exponential kernel over the dropped fraction,
// weighted ridge fit; coefficients are the scores.
Attribution lime_explain(const models::Model& model, const corpus::Example& ex,
                         const LimeOptions& opts, uint64_t seed);

// Mean marginal contribution over sampled token permutations.
Attribution sample_shapley(const models::Model& model, const corpus::Example& ex,
                           int n_permutations, uint64_t seed);

// Every permutation exactly once (true_length <= 8).
Attribution sample_shapley_exhaustive(const models::Model& model, const corpus::Example& ex);

// Full coalition enumeration (true_length <= 12).
Attribution exact_shapley(const models::Model& model, const corpus::Example& ex);

// Sum of local scores per word type across a set of attributions.
GlobalImportance sp_lime_global(const std::vector<Attribution>& attributions,
                                const corpus::Vocab& vocab);

}  // namespace vmask::explainers
