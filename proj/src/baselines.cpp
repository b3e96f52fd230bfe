#include "vmask/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace vmask::baselines {

namespace {
constexpr double kLambdaEps = 1e-6;
constexpr double kSigmaFloor = 1e-6;
}  // namespace

tg::Tensor l2_penalty(const std::vector<tg::Tensor>& params, double weight) {
  if (weight < 0.0) throw std::invalid_argument("l2_penalty: weight must be >= 0");
  tg::Tensor total = tg::Tensor::scalar(0.0);
  for (const tg::Tensor& p : params) total = tg::add(total, tg::sum(tg::mul(p, p)));
  return tg::scale(total, weight);
}

tg::Tensor gate_scores(const GateLayer& layer, const tg::Tensor& embeddings) {
  return tg::sigmoid(tg::column(tg::add(tg::matmul(embeddings, layer.w), layer.b), 0));
}

L2XResult l2x_transform(const GateLayer& layer, const tg::Tensor& embeddings) {
  tg::Tensor scores = gate_scores(layer, embeddings);
  return {tg::row_scale(embeddings, scores), scores};
}

std::pair<std::vector<double>, std::vector<double>> embedding_stats(const tg::Tensor& table,
                                                                    int num_reserved) {
  const int v = table.rows(), d = table.cols();
  const int n = v - num_reserved;
  if (n < 2) throw std::invalid_argument("embedding_stats: need at least 2 non-reserved rows");
  std::vector<double> mu(d, 0.0), sigma(d, 0.0);
  for (int r = num_reserved; r < v; ++r) {
    for (int j = 0; j < d; ++j) mu[j] += table(r, j);
  }
  for (int j = 0; j < d; ++j) mu[j] /= n;
  for (int r = num_reserved; r < v; ++r) {
    for (int j = 0; j < d; ++j) {
      const double diff = table(r, j) - mu[j];
      sigma[j] += diff * diff;
    }
  }
  for (int j = 0; j < d; ++j) sigma[j] = std::max(kSigmaFloor, std::sqrt(sigma[j] / n));
  return {mu, sigma};
}

IBAResult iba_transform(const GateLayer& readout, const tg::Tensor& embeddings,
                        const std::vector<double>& mu, const std::vector<double>& sigma, Rng* rng,
                        bool training) {
  const int n = embeddings.rows(), d = embeddings.cols();
  if (static_cast<int>(mu.size()) != d || static_cast<int>(sigma.size()) != d) {
    throw std::invalid_argument("iba_transform: stats dimension mismatch");
  }
  tg::Tensor lambda = gate_scores(readout, embeddings);
  tg::Tensor eps({n, d});
  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < d; ++j) {
      eps(t, j) = training ? mu[j] + sigma[j] * rng->normal() : mu[j];
    }
  }
  tg::Tensor one = tg::Tensor::full({n}, 1.0);
  tg::Tensor noised =
      tg::add(tg::row_scale(embeddings, lambda), tg::row_scale(eps, tg::sub(one, lambda)));
  return {noised, lambda};
}

tg::Tensor iba_info_loss(const tg::Tensor& lambda, const tg::Tensor& embeddings,
                         const std::vector<double>& mu, const std::vector<double>& sigma) {
  const int n = embeddings.rows(), d = embeddings.cols();
  tg::Tensor mu_row({d});
  tg::Tensor inv_sigma_row({d});
  for (int j = 0; j < d; ++j) {
    mu_row.at(j) = mu[j];
    inv_sigma_row.at(j) = 1.0 / sigma[j];
  }
  tg::Tensor lam = tg::clamp(lambda, kLambdaEps, 1.0 - kLambdaEps);
  tg::Tensor one = tg::Tensor::full({n}, 1.0);
  tg::Tensor oml = tg::sub(one, lam);
  tg::Tensor scaled = tg::mul(tg::sub(embeddings, mu_row), inv_sigma_row);
  tg::Tensor quad = tg::rows_dot(scaled, scaled);  // sum_i ((x_i - mu_i)/sigma_i)^2
  tg::Tensor t1 = tg::scale(tg::neg(tg::log_(oml)), static_cast<double>(d));
  tg::Tensor t2 = tg::scale(tg::mul(oml, oml), d * 0.5);
  tg::Tensor t3 = tg::scale(tg::mul(tg::mul(lam, lam), quad), 0.5);
  tg::Tensor per_token = tg::add_const(tg::add(tg::add(t1, t2), t3), -d * 0.5);
  return tg::mean(per_token);
}

GlobalImportance iba_global_importance(const GateLayer& readout, const tg::Tensor& embedding_table,
                                       const std::vector<corpus::Example>& train,
                                       const corpus::Vocab& vocab) {
  std::vector<double> sums(vocab.size(), 0.0);
  std::vector<long> counts(vocab.size(), 0);
  for (const corpus::Example& ex : train) {
    std::vector<int> ids(ex.token_ids.begin(), ex.token_ids.begin() + ex.true_length);
    tg::Tensor emb = tg::embedding_lookup(embedding_table, ids);
    tg::Tensor lambda = gate_scores(readout, emb);
    for (size_t t = 0; t < ids.size(); ++t) {
      sums[ids[t]] += lambda[t];
      ++counts[ids[t]];
    }
  }
  std::vector<WordScore> entries;
  for (int id = 2; id < vocab.size(); ++id) {
    const double score = counts[id] > 0 ? sums[id] / counts[id] : 0.5;
    entries.push_back({id, vocab.token(id), score, vocab.freq(id)});
  }
  return GlobalImportance(std::move(entries));
}

}  // namespace vmask::baselines
