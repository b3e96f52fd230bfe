#include "vmask/explainers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace vmask::explainers {

namespace {

std::vector<int> nonpad_ids(const corpus::Example& ex) {
  return {ex.token_ids.begin(), ex.token_ids.begin() + ex.true_length};
}

// Weighted ridge solve via normal equations and Gaussian elimination with
// partial pivoting. The intercept (last column) is not penalized. Bumps alpha
// when the system is singular.
std::vector<double> ridge_fit(const std::vector<std::vector<double>>& x,
                              const std::vector<double>& y, const std::vector<double>& w,
                              double alpha) {
  const size_t n = x.size();
  const size_t p = x[0].size();  // includes intercept column
  std::vector<std::vector<double>> a(p, std::vector<double>(p, 0.0));
  std::vector<double> rhs(p, 0.0);
  for (size_t s = 0; s < n; ++s) {
    for (size_t i = 0; i < p; ++i) {
      const double wx = w[s] * x[s][i];
      rhs[i] += wx * y[s];
      for (size_t j = i; j < p; ++j) a[i][j] += wx * x[s][j];
    }
  }
  for (size_t i = 0; i < p; ++i) {
    for (size_t j = 0; j < i; ++j) a[i][j] = a[j][i];
  }

  for (int attempt = 0; attempt < 8; ++attempt) {
    std::vector<std::vector<double>> m = a;
    for (size_t i = 0; i + 1 < p; ++i) m[i][i] += alpha;  // intercept unpenalized
    std::vector<double> b = rhs;

    bool singular = false;
    std::vector<size_t> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t col = 0; col < p && !singular; ++col) {
      size_t pivot = col;
      for (size_t r = col + 1; r < p; ++r) {
        if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
      }
      if (std::abs(m[pivot][col]) < 1e-12) {
        singular = true;
        break;
      }
      std::swap(m[col], m[pivot]);
      std::swap(b[col], b[pivot]);
      for (size_t r = col + 1; r < p; ++r) {
        const double f = m[r][col] / m[col][col];
        if (f == 0.0) continue;
        for (size_t c = col; c < p; ++c) m[r][c] -= f * m[col][c];
        b[r] -= f * b[col];
      }
    }
    if (singular) {
      alpha *= 10.0;
      std::cerr << "lime: singular normal equations, raising ridge alpha to " << alpha << "\n";
      continue;
    }
    std::vector<double> beta(p, 0.0);
    for (size_t i = p; i-- > 0;) {
      double s = b[i];
      for (size_t j = i + 1; j < p; ++j) s -= m[i][j] * beta[j];
      beta[i] = s / m[i][i];
    }
    return beta;
  }
  throw std::runtime_error("lime: ridge system stayed singular after raising alpha");
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

std::string Attribution::to_json(const corpus::Vocab& vocab) const {
  nlohmann::json j;
  j["method"] = method;
  j["target_class"] = target_class;
  nlohmann::json toks = nlohmann::json::array();
  for (int id : token_ids) toks.push_back(vocab.token(id));
  j["tokens"] = toks;
  j["scores"] = scores;
  j["n_samples"] = n_samples;
  j["seed"] = seed;
  return j.dump(2);
}

double value_fn(const models::Model& model, const corpus::Example& ex,
                const std::vector<uint8_t>& keep_set, int target_class) {
  const int n = ex.true_length;
  if (static_cast<int>(keep_set.size()) != n) {
    throw std::invalid_argument("value_fn: keep set length mismatch");
  }
  const int target = target_class >= 0 ? target_class : model.predicted_class(ex);
  std::vector<double> keep(n);
  for (int t = 0; t < n; ++t) keep[t] = keep_set[t] ? 1.0 : 0.0;
  models::ForwardOptions opts;
  opts.keep = &keep;
  auto fwd = model.forward_one(ex, models::Mode::infer, nullptr, opts);
  return models::softmax(fwd.logits.data())[target];
}

Attribution lime_explain(const models::Model& model, const corpus::Example& ex,
                         const LimeOptions& opts, uint64_t seed) {
  const int n = ex.true_length;
  if (opts.n_samples < n + 2) {
    throw std::invalid_argument("lime_explain: need at least true_length + 2 samples");
  }
  const int target = model.predicted_class(ex);
  Rng rng(seed);

  std::vector<std::vector<double>> x;
  std::vector<double> y, w;
  x.reserve(opts.n_samples);
  for (int s = 0; s < opts.n_samples; ++s) {
    std::vector<uint8_t> keep(n, 1);
    if (s > 0) {  // first sample is the full input
      for (int t = 0; t < n; ++t) keep[t] = rng.bernoulli(0.5) ? 1 : 0;
    }
    int dropped = 0;
    std::vector<double> row(n + 1, 0.0);
    for (int t = 0; t < n; ++t) {
      row[t] = keep[t];
      dropped += keep[t] ? 0 : 1;
    }
    row[n] = 1.0;  // intercept
    const double dist = static_cast<double>(dropped) / n;
    x.push_back(std::move(row));
    y.push_back(value_fn(model, ex, keep, target));
    w.push_back(std::exp(-dist * dist / (opts.kernel_width * opts.kernel_width)));
  }

  std::vector<double> beta = ridge_fit(x, y, w, opts.ridge_alpha);
  Attribution att;
  att.method = "lime";
  att.target_class = target;
  att.token_ids = nonpad_ids(ex);
  att.scores.assign(beta.begin(), beta.begin() + n);
  att.n_samples = opts.n_samples;
  att.seed = seed;
  return att;
}

namespace {

Attribution shapley_from_permutations(const models::Model& model, const corpus::Example& ex,
                                      const std::vector<std::vector<int>>& perms,
                                      const std::string& method, uint64_t seed) {
  const int n = ex.true_length;
  const int target = model.predicted_class(ex);
  std::vector<double> phi(n, 0.0);
  for (const std::vector<int>& perm : perms) {
    std::vector<uint8_t> keep(n, 0);
    double prev = value_fn(model, ex, keep, target);
    for (int t : perm) {
      keep[t] = 1;
      const double cur = value_fn(model, ex, keep, target);
      phi[t] += cur - prev;
      prev = cur;
    }
  }
  for (double& v : phi) v /= static_cast<double>(perms.size());
  Attribution att;
  att.method = method;
  att.target_class = target;
  att.token_ids = nonpad_ids(ex);
  att.scores = std::move(phi);
  att.n_samples = static_cast<int>(perms.size());
  att.seed = seed;
  return att;
}

}  // namespace

Attribution sample_shapley(const models::Model& model, const corpus::Example& ex,
                           int n_permutations, uint64_t seed) {
  if (n_permutations < 1) throw std::invalid_argument("sample_shapley: need >= 1 permutation");
  const int n = ex.true_length;
  Rng rng(seed);
  std::vector<std::vector<int>> perms;
  perms.reserve(n_permutations);
  std::vector<int> base(n);
  std::iota(base.begin(), base.end(), 0);
  for (int s = 0; s < n_permutations; ++s) {
    std::vector<int> p = base;
    rng.shuffle(p);
    perms.push_back(std::move(p));
  }
  return shapley_from_permutations(model, ex, perms, "shapley", seed);
}

Attribution sample_shapley_exhaustive(const models::Model& model, const corpus::Example& ex) {
  const int n = ex.true_length;
  if (n > 8) throw std::invalid_argument("sample_shapley_exhaustive: true_length > 8");
  std::vector<int> base(n);
  std::iota(base.begin(), base.end(), 0);
  std::vector<std::vector<int>> perms;
  do {
    perms.push_back(base);
  } while (std::next_permutation(base.begin(), base.end()));
  return shapley_from_permutations(model, ex, perms, "shapley-exhaustive", 0);
}

Attribution exact_shapley(const models::Model& model, const corpus::Example& ex) {
  const int n = ex.true_length;
  if (n > 12) {
    throw std::invalid_argument(
        "exact_shapley: true_length " + std::to_string(n) +
        " exceeds the cost guard of 12 tokens (2^T coalition evaluations)");
  }
  const int target = model.predicted_class(ex);
  const uint32_t full = n >= 32 ? 0u : (1u << n);

  std::vector<double> values(full, 0.0);
  for (uint32_t mask = 0; mask < full; ++mask) {
    std::vector<uint8_t> keep(n, 0);
    for (int t = 0; t < n; ++t) keep[t] = (mask >> t) & 1u;
    values[mask] = value_fn(model, ex, keep, target);
  }

  const double n_fact = factorial(n);
  std::vector<double> phi(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (uint32_t s = 0; s < full; ++s) {
      if ((s >> i) & 1u) continue;
      const int size = __builtin_popcount(s);
      const double weight = factorial(size) * factorial(n - size - 1) / n_fact;
      phi[i] += weight * (values[s | (1u << i)] - values[s]);
    }
  }

  Attribution att;
  att.method = "exact";
  att.target_class = target;
  att.token_ids = nonpad_ids(ex);
  att.scores = std::move(phi);
  att.n_samples = static_cast<int>(full);
  att.seed = 0;
  return att;
}

GlobalImportance sp_lime_global(const std::vector<Attribution>& attributions,
                                const corpus::Vocab& vocab) {
  std::vector<double> sums(vocab.size(), 0.0);
  std::vector<bool> seen(vocab.size(), false);
  for (const Attribution& att : attributions) {
    for (size_t t = 0; t < att.token_ids.size(); ++t) {
      sums[att.token_ids[t]] += att.scores[t];
      seen[att.token_ids[t]] = true;
    }
  }
  std::vector<WordScore> entries;
  for (int id = 2; id < vocab.size(); ++id) {
    if (seen[id]) entries.push_back({id, vocab.token(id), sums[id], vocab.freq(id)});
  }
  return GlobalImportance(std::move(entries));
}

}  // namespace vmask::explainers
