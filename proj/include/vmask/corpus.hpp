#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace vmask::corpus {

constexpr int kPadId = 0;
constexpr int kUnkId = 1;

// Token <-> id map with training-split frequencies. Ids are contiguous,
// pad=0 and unk=1 reserved, remaining tokens ordered by descending frequency
// then lexicographically so the layout is stable across runs.
class Vocab {
 public:
  Vocab();

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(id); }
  long freq(int id) const { return freqs_.at(id); }
  // -1 when absent
  int id_of(const std::string& token) const;
  bool contains(const std::string& token) const { return id_of(token) >= 0; }

  void add(const std::string& token, long freq);

  // JSON array of [token, freq] pairs in id order.
  std::string to_json() const;
  static Vocab from_json(const std::string& text);
  uint64_t fingerprint() const;

 private:
  std::vector<std::string> tokens_;
  std::vector<long> freqs_;
  std::unordered_map<std::string, int> index_;
};

struct Example {
  std::vector<int> token_ids;  // fixed length L, pad-filled
  int true_length = 0;
  int label = 0;
  // synthetic corpora only: positions holding a class keyword
  std::vector<int> keyword_positions;
};

struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
  Vocab vocab;
  int num_classes = 0;
  int max_len = 0;
};

struct LabeledText {
  int label;
  std::string text;
};

struct SynthConfig {
  int num_classes = 2;
  int keywords_per_class = 5;
  int filler_vocab_size = 200;
  int doc_len = 20;
  int docs_per_class = 1000;
  double keyword_rate = 0.1;
};

// Lowercases, collapses whitespace, and splits punctuation into single-char
// tokens. Deterministic; empty text gives an empty list.
std::vector<std::string> tokenize(const std::string& text);

// Tokens with count < min_freq are dropped. Counting runs over the full token
// lists as given.
Vocab build_vocab(const std::vector<std::vector<std::string>>& docs, long min_freq);

// Truncates at the tail, right-pads with pad, maps unknown tokens to unk.
// Empty token lists are rejected (an all-pad example is never produced).
Example encode(const std::vector<std::string>& tokens, const Vocab& vocab, int max_len);

std::vector<std::string> decode(const Example& ex, const Vocab& vocab);

// One "label<TAB>text" record per line.
std::vector<LabeledText> load_tsv(const std::string& path);

void split_train_dev(const std::vector<LabeledText>& all, double dev_fraction, uint64_t seed,
                     std::vector<LabeledText>& train, std::vector<LabeledText>& dev);

// Planted-keyword corpus: every class-c document contains at least one class-c
// keyword, never a keyword of another class, and uniform filler elsewhere.
// Keywords are named "kw<c>x<j>", fillers "w<i>" (both survive tokenize
// unchanged). Dev/test each get 1/5 of the train volume per class.
DatasetSplit synth_gen(const SynthConfig& cfg, uint64_t seed);

// Assembles a DatasetSplit from raw texts: vocab from the training split only.
DatasetSplit make_split(const std::vector<LabeledText>& train, const std::vector<LabeledText>& dev,
                        const std::vector<LabeledText>& test, long min_freq, int max_len);

uint64_t fnv1a64(const void* bytes, size_t len);
uint64_t fnv1a64(const std::string& s);

}  // namespace vmask::corpus
