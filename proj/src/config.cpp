#include "vmask/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace vmask::config {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& section, const std::string& key) {
  throw std::invalid_argument("config: unknown key '" + key + "' in section '" + section + "'");
}

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) bad_key(section, it.key());
  }
}

template <class T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

std::string fingerprint_hex(uint64_t fp) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: " + path + " is not valid JSON: " + e.what());
  }
  return parse(j);
}

RunConfig RunConfig::parse(const json& j) {
  check_keys(j, "<root>", {"data", "model", "train", "eval"});
  RunConfig cfg;

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data",
               {"synth", "train", "dev", "test", "dev_fraction", "split_seed", "min_freq",
                "max_len"});
    if (d.contains("synth") && d.contains("train")) {
      throw std::invalid_argument("config: data has both 'synth' and 'train'");
    }
    if (d.contains("synth")) {
      cfg.data.use_synth = true;
      const json& s = d.at("synth");
      check_keys(s, "data.synth",
                 {"num_classes", "keywords_per_class", "filler_vocab_size", "doc_len",
                  "docs_per_class", "keyword_rate", "seed"});
      get_to(s, "num_classes", cfg.data.synth.num_classes);
      get_to(s, "keywords_per_class", cfg.data.synth.keywords_per_class);
      get_to(s, "filler_vocab_size", cfg.data.synth.filler_vocab_size);
      get_to(s, "doc_len", cfg.data.synth.doc_len);
      get_to(s, "docs_per_class", cfg.data.synth.docs_per_class);
      get_to(s, "keyword_rate", cfg.data.synth.keyword_rate);
      get_to(s, "seed", cfg.data.synth_seed);
    } else if (d.contains("train")) {
      cfg.data.use_synth = false;
      d.at("train").get_to(cfg.data.train_path);
      get_to(d, "dev", cfg.data.dev_path);
      get_to(d, "test", cfg.data.test_path);
    } else {
      throw std::invalid_argument("config: data needs either 'synth' or 'train'");
    }
    get_to(d, "dev_fraction", cfg.data.dev_fraction);
    get_to(d, "split_seed", cfg.data.split_seed);
    get_to(d, "min_freq", cfg.data.min_freq);
    get_to(d, "max_len", cfg.data.max_len);
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model",
               {"kind", "embed_dim", "hidden", "filter_widths", "filters_per_width",
                "frozen_embedding", "pretrained", "init_seed"});
    std::string kind = to_string(cfg.model.kind);
    get_to(m, "kind", kind);
    cfg.model.kind = models::head_from_string(kind);
    get_to(m, "embed_dim", cfg.model.embed_dim);
    get_to(m, "hidden", cfg.model.hidden);
    get_to(m, "filter_widths", cfg.model.filter_widths);
    get_to(m, "filters_per_width", cfg.model.filters_per_width);
    get_to(m, "frozen_embedding", cfg.model.frozen_embedding);
    get_to(m, "pretrained", cfg.pretrained_path);
    get_to(m, "init_seed", cfg.init_seed);
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"strategy", "lr", "epochs", "batch_size", "clip_norm", "beta_target",
                "anneal_steps", "tau", "dropout", "l2_weight", "early_stop_patience", "seed",
                "adam_beta1", "adam_beta2", "adam_eps"});
    std::string strat = to_string(cfg.train.strategy);
    get_to(t, "strategy", strat);
    cfg.train.strategy = models::strategy_from_string(strat);
    get_to(t, "lr", cfg.train.lr);
    get_to(t, "epochs", cfg.train.epochs);
    get_to(t, "batch_size", cfg.train.batch_size);
    get_to(t, "clip_norm", cfg.train.clip_norm);
    get_to(t, "beta_target", cfg.train.beta_target);
    get_to(t, "anneal_steps", cfg.train.anneal_steps);
    get_to(t, "tau", cfg.train.tau);
    get_to(t, "dropout", cfg.train.dropout);
    get_to(t, "l2_weight", cfg.train.l2_weight);
    get_to(t, "early_stop_patience", cfg.train.early_stop_patience);
    get_to(t, "seed", cfg.train.seed);
    get_to(t, "adam_beta1", cfg.train.adam_beta1);
    get_to(t, "adam_beta2", cfg.train.adam_beta2);
    get_to(t, "adam_eps", cfg.train.adam_eps);
    cfg.train.validate();
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval",
               {"explainer", "n_samples", "kernel_width", "ridge_alpha", "shapley_permutations",
                "aopc_n", "posthoc_ks", "slice_size", "seed"});
    get_to(e, "explainer", cfg.eval.explainer);
    if (cfg.eval.explainer != "lime" && cfg.eval.explainer != "shapley" &&
        cfg.eval.explainer != "exact") {
      throw std::invalid_argument("config: eval.explainer must be lime, shapley or exact");
    }
    get_to(e, "n_samples", cfg.eval.n_samples);
    get_to(e, "kernel_width", cfg.eval.kernel_width);
    get_to(e, "ridge_alpha", cfg.eval.ridge_alpha);
    get_to(e, "shapley_permutations", cfg.eval.shapley_permutations);
    get_to(e, "aopc_n", cfg.eval.aopc_n);
    get_to(e, "posthoc_ks", cfg.eval.posthoc_ks);
    get_to(e, "slice_size", cfg.eval.slice_size);
    get_to(e, "seed", cfg.eval.seed);
  }
  return cfg;
}

nlohmann::json RunConfig::echo() const {
  json j;
  json d;
  if (data.use_synth) {
    d["synth"] = {{"num_classes", data.synth.num_classes},
                  {"keywords_per_class", data.synth.keywords_per_class},
                  {"filler_vocab_size", data.synth.filler_vocab_size},
                  {"doc_len", data.synth.doc_len},
                  {"docs_per_class", data.synth.docs_per_class},
                  {"keyword_rate", data.synth.keyword_rate},
                  {"seed", data.synth_seed}};
  } else {
    d["train"] = data.train_path;
    d["dev"] = data.dev_path;
    d["test"] = data.test_path;
  }
  d["dev_fraction"] = data.dev_fraction;
  d["split_seed"] = data.split_seed;
  d["min_freq"] = data.min_freq;
  d["max_len"] = data.max_len;
  j["data"] = d;

  j["model"] = {{"kind", to_string(model.kind)},
                {"embed_dim", model.embed_dim},
                {"hidden", model.hidden},
                {"filter_widths", model.filter_widths},
                {"filters_per_width", model.filters_per_width},
                {"frozen_embedding", model.frozen_embedding},
                {"pretrained", pretrained_path},
                {"init_seed", init_seed}};

  j["train"] = {{"strategy", to_string(train.strategy)},
                {"lr", train.lr},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"clip_norm", train.clip_norm},
                {"beta_target", train.beta_target},
                {"anneal_steps", train.anneal_steps},
                {"tau", train.tau},
                {"dropout", train.dropout},
                {"l2_weight", train.l2_weight},
                {"early_stop_patience", train.early_stop_patience},
                {"seed", train.seed},
                {"adam_beta1", train.adam_beta1},
                {"adam_beta2", train.adam_beta2},
                {"adam_eps", train.adam_eps}};

  j["eval"] = {{"explainer", eval.explainer},
               {"n_samples", eval.n_samples},
               {"kernel_width", eval.kernel_width},
               {"ridge_alpha", eval.ridge_alpha},
               {"shapley_permutations", eval.shapley_permutations},
               {"aopc_n", eval.aopc_n},
               {"posthoc_ks", eval.posthoc_ks},
               {"slice_size", eval.slice_size},
               {"seed", eval.seed}};
  return j;
}

corpus::DatasetSplit load_dataset(const DataConfig& cfg) {
  if (cfg.use_synth) return corpus::synth_gen(cfg.synth, cfg.synth_seed);

  std::vector<corpus::LabeledText> train_raw = corpus::load_tsv(cfg.train_path);
  std::vector<corpus::LabeledText> dev_raw, test_raw;
  if (!cfg.dev_path.empty()) {
    dev_raw = corpus::load_tsv(cfg.dev_path);
  } else {
    std::vector<corpus::LabeledText> held;
    corpus::split_train_dev(train_raw, cfg.dev_fraction, cfg.split_seed, held, dev_raw);
    train_raw = std::move(held);
  }
  test_raw = cfg.test_path.empty() ? dev_raw : corpus::load_tsv(cfg.test_path);
  return corpus::make_split(train_raw, dev_raw, test_raw, cfg.min_freq, cfg.max_len);
}

}  // namespace vmask::config
