#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vmask/corpus.hpp"
#include "vmask/explainers.hpp"
#include "vmask/importance.hpp"
#include "vmask/models.hpp"

namespace vmask::metrics {

using Explainer =
    std::function<explainers::Attribution(const models::Model&, const corpus::Example&)>;

double accuracy(const models::Model& model, const std::vector<corpus::Example>& examples);

// Average drop of the predicted-class probability after deleting the top-n
// attributed tokens (sequence shrinks and is re-padded; ties broken toward the
// earlier position; deletions capped at true_length - 1).
double aopc(const models::Model& model, const std::vector<corpus::Example>& examples,
            const Explainer& explainer, int n);

// Agreement between the full-input prediction and the prediction from only
// the top-k globally important tokens (others zeroed).
double post_hoc_accuracy(const models::Model& model, const std::vector<corpus::Example>& examples,
                         const GlobalImportance& importance, int k);

// Pearson r between raw frequency and global importance over non-reserved
// word types.
double pearson_freq_importance(const corpus::Vocab& vocab, const GlobalImportance& importance);

// k highest-scoring non-reserved words, descending, ties lexicographic.
std::vector<std::string> top_k_words(const GlobalImportance& importance, int k);

struct MetricsReport {
  double accuracy = 0.0;
  std::map<std::string, double> aopc;         // explainer name -> percent
  std::map<int, double> posthoc_acc;          // k -> percent
  double pearson_r = 0.0;
  bool has_pearson = false;
  std::vector<std::string> top_words;
  std::string config_fingerprint;
  std::string vocab_fingerprint;
  uint64_t seed = 0;

  std::string to_json() const;  // report_version 1; rejects NaN
  std::string to_table() const;
};

// Deletes the top-n scored positions from an example and re-pads to L.
corpus::Example delete_top_tokens(const corpus::Example& ex, const std::vector<double>& scores,
                                  int n);

}  // namespace vmask::metrics
