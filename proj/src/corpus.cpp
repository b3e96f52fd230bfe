#include "vmask/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vmask/rng.hpp"

namespace vmask::corpus {

uint64_t fnv1a64(const void* bytes, size_t len) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  uint64_t h = 14695981039346656037ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

Vocab::Vocab() {
  add("<pad>", 0);
  add("<unk>", 0);
}

int Vocab::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

void Vocab::add(const std::string& token, long freq) {
  if (index_.count(token)) throw std::invalid_argument("vocab: duplicate token '" + token + "'");
  index_[token] = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  freqs_.push_back(freq);
}

std::string Vocab::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (size_t i = 0; i < tokens_.size(); ++i) {
    arr.push_back(nlohmann::json::array({tokens_[i], freqs_[i]}));
  }
  return arr.dump();
}

Vocab Vocab::from_json(const std::string& text) {
  nlohmann::json arr = nlohmann::json::parse(text);
  Vocab v;
  for (size_t i = 0; i < arr.size(); ++i) {
    const std::string tok = arr[i][0].get<std::string>();
    const long freq = arr[i][1].get<long>();
    if (i == 0 || i == 1) {
      if (tok != v.token(static_cast<int>(i))) {
        throw std::invalid_argument("vocab json: reserved token mismatch at id " + std::to_string(i));
      }
      continue;
    }
    v.add(tok, freq);
  }
  return v;
}

uint64_t Vocab::fingerprint() const { return fnv1a64(to_json()); }

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c) || c >= 0x80) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      // punctuation becomes its own token
      flush();
      out.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  flush();
  return out;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& docs, long min_freq) {
  if (min_freq < 0) throw std::invalid_argument("build_vocab: min_freq must be >= 0");
  std::map<std::string, long> counts;
  for (const auto& doc : docs) {
    for (const auto& tok : doc) ++counts[tok];
  }
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_freq) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& [tok, n] : kept) v.add(tok, n);
  return v;
}

Example encode(const std::vector<std::string>& tokens, const Vocab& vocab, int max_len) {
  if (max_len < 1) throw std::invalid_argument("encode: max_len must be >= 1");
  if (tokens.empty()) throw std::invalid_argument("encode: empty token list (true_length 0)");
  Example ex;
  ex.true_length = std::min<int>(static_cast<int>(tokens.size()), max_len);
  ex.token_ids.assign(max_len, kPadId);
  for (int t = 0; t < ex.true_length; ++t) {
    const int id = vocab.id_of(tokens[t]);
    ex.token_ids[t] = id >= 0 ? id : kUnkId;
  }
  return ex;
}

std::vector<std::string> decode(const Example& ex, const Vocab& vocab) {
  std::vector<std::string> out;
  for (int t = 0; t < ex.true_length; ++t) out.push_back(vocab.token(ex.token_ids[t]));
  return out;
}

std::vector<LabeledText> load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_tsv: cannot open " + path);
  std::vector<LabeledText> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("load_tsv: " + path + " line " + std::to_string(lineno) +
                               ": missing tab separator");
    }
    const std::string label_str = line.substr(0, tab);
    size_t used = 0;
    int label = 0;
    try {
      label = std::stoi(label_str, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != label_str.size() || label < 0) {
      throw std::runtime_error("load_tsv: " + path + " line " + std::to_string(lineno) +
                               ": bad label '" + label_str + "'");
    }
    out.push_back({label, line.substr(tab + 1)});
  }
  return out;
}

void split_train_dev(const std::vector<LabeledText>& all, double dev_fraction, uint64_t seed,
                     std::vector<LabeledText>& train, std::vector<LabeledText>& dev) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw std::invalid_argument("split_train_dev: dev_fraction must be in (0,1)");
  }
  std::vector<size_t> order(all.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const size_t dev_n =
      static_cast<size_t>(std::ceil(static_cast<double>(all.size()) * dev_fraction));
  train.clear();
  dev.clear();
  for (size_t i = 0; i < order.size(); ++i) {
    (i < dev_n ? dev : train).push_back(all[order[i]]);
  }
}

namespace {

Example synth_doc(const SynthConfig& cfg, int cls, const Vocab& vocab,
                  const std::vector<std::vector<int>>& kw_ids, const std::vector<int>& filler_ids,
                  Rng& rng) {
  Example ex;
  ex.label = cls;
  ex.true_length = cfg.doc_len;
  ex.token_ids.assign(cfg.doc_len, kPadId);
  for (int t = 0; t < cfg.doc_len; ++t) {
    if (rng.bernoulli(cfg.keyword_rate)) {
      ex.token_ids[t] = kw_ids[cls][rng.uniform_int(cfg.keywords_per_class)];
      ex.keyword_positions.push_back(t);
    } else {
      ex.token_ids[t] = filler_ids[rng.uniform_int(cfg.filler_vocab_size)];
    }
  }
  if (ex.keyword_positions.empty()) {
    const int t = rng.uniform_int(cfg.doc_len);
    ex.token_ids[t] = kw_ids[cls][rng.uniform_int(cfg.keywords_per_class)];
    ex.keyword_positions.push_back(t);
  }
  (void)vocab;
  return ex;
}

}  // namespace

DatasetSplit synth_gen(const SynthConfig& cfg, uint64_t seed) {
  if (cfg.num_classes < 2 || cfg.keywords_per_class < 1 || cfg.filler_vocab_size < 1 ||
      cfg.doc_len < 1 || cfg.docs_per_class < 1) {
    throw std::invalid_argument("synth_gen: invalid config");
  }
  if (!(cfg.keyword_rate > 0.0 && cfg.keyword_rate <= 1.0)) {
    throw std::invalid_argument("synth_gen: keyword_rate must be in (0,1]");
  }

  // keyword sets are disjoint by naming; guard anyway
  std::set<std::string> seen;
  std::vector<std::vector<std::string>> keywords(cfg.num_classes);
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int j = 0; j < cfg.keywords_per_class; ++j) {
      const std::string name = "kw" + std::to_string(c) + "x" + std::to_string(j);
      if (!seen.insert(name).second) {
        throw std::invalid_argument("synth_gen: overlapping keyword sets");
      }
      keywords[c].push_back(name);
    }
  }

  DatasetSplit ds;
  ds.num_classes = cfg.num_classes;
  ds.max_len = cfg.doc_len;

  // deterministic vocab: keywords then fillers, all with synthetic counts from
  // the train split filled in after generation
  Vocab& vocab = ds.vocab;
  std::vector<std::vector<int>> kw_ids(cfg.num_classes);
  std::vector<int> filler_ids;
  {
    // build with zero freq first; ids fixed by insertion order
    for (int c = 0; c < cfg.num_classes; ++c) {
      for (const auto& k : keywords[c]) {
        vocab.add(k, 0);
        kw_ids[c].push_back(vocab.id_of(k));
      }
    }
    for (int i = 0; i < cfg.filler_vocab_size; ++i) {
      vocab.add("w" + std::to_string(i), 0);
      filler_ids.push_back(vocab.size() - 1);
    }
  }

  Rng rng(seed);
  const int dev_per_class = std::max(1, cfg.docs_per_class / 5);
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int i = 0; i < cfg.docs_per_class; ++i) {
      ds.train.push_back(synth_doc(cfg, c, vocab, kw_ids, filler_ids, rng));
    }
  }
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int i = 0; i < dev_per_class; ++i) {
      ds.dev.push_back(synth_doc(cfg, c, vocab, kw_ids, filler_ids, rng));
    }
  }
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int i = 0; i < dev_per_class; ++i) {
      ds.test.push_back(synth_doc(cfg, c, vocab, kw_ids, filler_ids, rng));
    }
  }

  // train-split frequencies, rebuilt into a fresh vocab with identical ids
  std::vector<long> counts(vocab.size(), 0);
  for (const Example& ex : ds.train) {
    for (int t = 0; t < ex.true_length; ++t) ++counts[ex.token_ids[t]];
  }
  Vocab withfreq;
  for (int id = 2; id < vocab.size(); ++id) withfreq.add(vocab.token(id), counts[id]);
  ds.vocab = withfreq;
  return ds;
}

DatasetSplit make_split(const std::vector<LabeledText>& train, const std::vector<LabeledText>& dev,
                        const std::vector<LabeledText>& test, long min_freq, int max_len) {
  DatasetSplit ds;
  ds.max_len = max_len;
  std::vector<std::vector<std::string>> train_docs;
  train_docs.reserve(train.size());
  for (const auto& lt : train) train_docs.push_back(tokenize(lt.text));
  ds.vocab = build_vocab(train_docs, min_freq);

  int num_classes = 0;
  auto encode_all = [&](const std::vector<LabeledText>& src, std::vector<Example>& dst) {
    for (size_t i = 0; i < src.size(); ++i) {
      Example ex = encode(tokenize(src[i].text), ds.vocab, max_len);
      ex.label = src[i].label;
      num_classes = std::max(num_classes, src[i].label + 1);
      dst.push_back(std::move(ex));
    }
  };
  encode_all(train, ds.train);
  encode_all(dev, ds.dev);
  encode_all(test, ds.test);
  ds.num_classes = num_classes;
  return ds;
}

}  // namespace vmask::corpus
