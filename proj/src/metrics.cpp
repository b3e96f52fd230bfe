#include "vmask/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace vmask::metrics {

double accuracy(const models::Model& model, const std::vector<corpus::Example>& examples) {
  if (examples.empty()) throw std::invalid_argument("accuracy: empty example set");
  long correct = 0;
  for (const corpus::Example& ex : examples) {
    if (model.predicted_class(ex) == ex.label) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(examples.size());
}

corpus::Example delete_top_tokens(const corpus::Example& ex, const std::vector<double>& scores,
                                  int n) {
  const int len = ex.true_length;
  if (static_cast<int>(scores.size()) != len) {
    throw std::invalid_argument("delete_top_tokens: score length mismatch");
  }
  // at least one real token must survive
  const int to_delete = std::min(n, len - 1);
  std::vector<int> order(len);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<bool> drop(len, false);
  for (int i = 0; i < to_delete; ++i) drop[order[i]] = true;

  corpus::Example out;
  out.label = ex.label;
  out.token_ids.assign(ex.token_ids.size(), corpus::kPadId);
  int w = 0;
  for (int t = 0; t < len; ++t) {
    if (!drop[t]) out.token_ids[w++] = ex.token_ids[t];
  }
  out.true_length = w;
  return out;
}

double aopc(const models::Model& model, const std::vector<corpus::Example>& examples,
            const Explainer& explainer, int n) {
  if (examples.empty()) throw std::invalid_argument("aopc: empty example set");
  if (n < 0) throw std::invalid_argument("aopc: n must be >= 0");
  if (n == 0) return 0.0;
  double total = 0.0;
  for (const corpus::Example& ex : examples) {
    const int target = model.predicted_class(ex);
    const double p_full = model.predict_proba(ex)[target];
    explainers::Attribution att = explainer(model, ex);
    corpus::Example reduced = delete_top_tokens(ex, att.scores, n);
    const double p_reduced = model.predict_proba(reduced)[target];
    total += p_full - p_reduced;
  }
  return 100.0 * total / static_cast<double>(examples.size());
}

double post_hoc_accuracy(const models::Model& model, const std::vector<corpus::Example>& examples,
                         const GlobalImportance& importance, int k) {
  if (examples.empty()) throw std::invalid_argument("post_hoc_accuracy: empty example set");
  if (k < 1) throw std::invalid_argument("post_hoc_accuracy: k must be >= 1");
  long agree = 0;
  for (const corpus::Example& ex : examples) {
    const int n = ex.true_length;
    const int y_full = model.predicted_class(ex);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return importance.score_for(ex.token_ids[a]) > importance.score_for(ex.token_ids[b]);
    });
    std::vector<uint8_t> keep(n, 0);
    for (int i = 0; i < std::min(k, n); ++i) keep[order[i]] = 1;
    std::vector<double> keepd(n);
    for (int t = 0; t < n; ++t) keepd[t] = keep[t];
    models::ForwardOptions opts;
    opts.keep = &keepd;
    auto fwd = model.forward_one(ex, models::Mode::infer, nullptr, opts);
    if (models::argmax_lowest(fwd.logits.data()) == y_full) ++agree;
  }
  return 100.0 * static_cast<double>(agree) / static_cast<double>(examples.size());
}

double pearson_freq_importance(const corpus::Vocab& vocab, const GlobalImportance& importance) {
  std::vector<double> xs, ys;
  for (const WordScore& w : importance.entries()) {
    xs.push_back(static_cast<double>(vocab.freq(w.id)));
    ys.push_back(w.score);
  }
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least 2 word types");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("pearson: frequency axis has zero variance");
  if (syy == 0.0) throw std::invalid_argument("pearson: importance axis has zero variance");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<std::string> top_k_words(const GlobalImportance& importance, int k) {
  std::vector<std::string> out;
  for (const WordScore& w : importance.entries()) {
    if (static_cast<int>(out.size()) >= k) break;
    out.push_back(w.token);
  }
  return out;
}

std::string MetricsReport::to_json() const {
  auto guard = [](double v, const char* what) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("report: non-finite value for ") + what);
    }
    return v;
  };
  nlohmann::json j;
  j["report_version"] = 1;
  j["accuracy"] = guard(accuracy, "accuracy");
  nlohmann::json ja = nlohmann::json::object();
  for (const auto& [name, v] : aopc) ja[name] = guard(v, "aopc");
  j["aopc"] = ja;
  nlohmann::json jp = nlohmann::json::object();
  for (const auto& [k, v] : posthoc_acc) jp[std::to_string(k)] = guard(v, "posthoc_acc");
  j["posthoc_acc"] = jp;
  if (has_pearson) j["pearson_r"] = guard(pearson_r, "pearson_r");
  j["top_words"] = top_words;
  j["config_fingerprint"] = config_fingerprint;
  j["vocab_fingerprint"] = vocab_fingerprint;
  j["seed"] = seed;
  return j.dump(2);
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  char buf[64];
  auto line = [&](const std::string& name, double v) {
    std::snprintf(buf, sizeof(buf), "%-28s %10.4f", name.c_str(), v);
    os << buf << "\n";
  };
  line("accuracy (%)", accuracy);
  for (const auto& [name, v] : aopc) line("aopc[" + name + "] (%)", v);
  for (const auto& [k, v] : posthoc_acc) line("posthoc_acc[k=" + std::to_string(k) + "] (%)", v);
  if (has_pearson) line("pearson_r", pearson_r);
  if (!top_words.empty()) {
    os << "top words:";
    for (const std::string& w : top_words) os << " " << w;
    os << "\n";
  }
  return os.str();
}

}  // namespace vmask::metrics
