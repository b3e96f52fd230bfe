#include "vmask/mask.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vmask::mask {

namespace {
constexpr double kProbEps = 1e-12;
}

tg::Tensor mask_probs(const MaskInferenceNet& net, const tg::Tensor& embeddings) {
  tg::Tensor logits = tg::add(tg::matmul(embeddings, net.w), net.b);  // [L x 2]
  return tg::column(tg::softmax_rows(logits), 1);
}

GumbelSample gumbel_softmax_from_noise(double p, double tau, double s0, double s1) {
  if (tau <= 0.0) throw std::invalid_argument("gumbel_softmax: tau must be > 0");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("gumbel_softmax: p must be in (0,1)");
  const double a0 = (std::log(1.0 - p) + s0) / tau;
  const double a1 = (std::log(p) + s1) / tau;
  const double m = std::max(a0, a1);
  const double e0 = std::exp(a0 - m);
  const double e1 = std::exp(a1 - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

GumbelSample gumbel_softmax_sample(double p, double tau, Rng& rng) {
  const double s0 = rng.gumbel();
  const double s1 = rng.gumbel();
  return gumbel_softmax_from_noise(p, tau, s0, s1);
}

tg::Tensor sample_mask_values(const tg::Tensor& probs, double tau, Rng& rng) {
  if (tau <= 0.0) throw std::invalid_argument("sample_mask_values: tau must be > 0");
  const int n = static_cast<int>(probs.size());
  tg::Tensor g0({n});
  tg::Tensor g1({n});
  for (int t = 0; t < n; ++t) {
    g0.at(t) = rng.gumbel();
    g1.at(t) = rng.gumbel();
  }
  tg::Tensor pc = tg::clamp(probs, kProbEps, 1.0 - kProbEps);
  tg::Tensor one = tg::Tensor::full({n}, 1.0);
  tg::Tensor keep_logit = tg::add(tg::log_(pc), g1);
  tg::Tensor drop_logit = tg::add(tg::log_(tg::sub(one, pc)), g0);
  // softmax over two categories == sigmoid of the logit difference
  return tg::sigmoid(tg::scale(tg::sub(keep_logit, drop_logit), 1.0 / tau));
}

tg::Tensor infer_mask_values(const tg::Tensor& probs) { return probs; }

tg::Tensor apply_mask(const tg::Tensor& embeddings, const tg::Tensor& mask_values) {
  return tg::row_scale(embeddings, mask_values);
}

double bernoulli_entropy(double p) {
  p = std::min(1.0 - kProbEps, std::max(kProbEps, p));
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

double kl_to_uniform(double p) { return std::log(2.0) - bernoulli_entropy(p); }

tg::Tensor bernoulli_entropy(const tg::Tensor& probs) {
  tg::Tensor pc = tg::clamp(probs, kProbEps, 1.0 - kProbEps);
  tg::Tensor one = tg::Tensor::full(pc.shape(), 1.0);
  tg::Tensor q = tg::sub(one, pc);
  return tg::neg(tg::add(tg::mul(pc, tg::log_(pc)), tg::mul(q, tg::log_(q))));
}

tg::Tensor objective(const tg::Tensor& ce_loss, const std::vector<tg::Tensor>& probs_per_example,
                     double beta) {
  if (beta < 0.0) throw std::invalid_argument("objective: beta must be >= 0");
  if (beta == 0.0) return ce_loss;
  tg::Tensor all = tg::concat_vec(probs_per_example);
  return tg::sub(ce_loss, tg::scale(tg::mean(bernoulli_entropy(all)), beta));
}

GlobalImportance global_importance(const MaskInferenceNet& net, const tg::Tensor& embedding_table,
                                   const corpus::Vocab& vocab) {
  std::vector<int> ids;
  for (int id = 2; id < vocab.size(); ++id) ids.push_back(id);
  std::vector<WordScore> entries;
  if (!ids.empty()) {
    tg::Tensor emb = tg::embedding_lookup(embedding_table, ids);
    tg::Tensor probs = mask_probs(net, emb);
    for (size_t i = 0; i < ids.size(); ++i) {
      entries.push_back({ids[i], vocab.token(ids[i]), probs[i], vocab.freq(ids[i])});
    }
  }
  return GlobalImportance(std::move(entries));
}

}  // namespace vmask::mask
