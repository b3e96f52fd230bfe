#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace vmask {

struct WordScore {
  int id = 0;
  std::string token;
  double score = 0.0;
  long freq = 0;
};

// Per-word-type global importance, sorted by descending score (ties broken
// lexicographically). Words absent from the table score 0.5.
class GlobalImportance {
 public:
  GlobalImportance() = default;
  explicit GlobalImportance(std::vector<WordScore> entries);

  const std::vector<WordScore>& entries() const { return entries_; }
  double score_for(int id) const;
  bool empty() const { return entries_.empty(); }

  // "token<TAB>score<TAB>freq" per line, descending score.
  std::string to_tsv() const;

 private:
  std::vector<WordScore> entries_;
  std::unordered_map<int, double> by_id_;
};

}  // namespace vmask
