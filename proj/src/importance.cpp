#include "vmask/importance.hpp"

#include <algorithm>
#include <cstdio>

namespace vmask {

GlobalImportance::GlobalImportance(std::vector<WordScore> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const WordScore& a, const WordScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  });
  for (const WordScore& w : entries_) by_id_[w.id] = w.score;
}

double GlobalImportance::score_for(int id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? 0.5 : it->second;
}

std::string GlobalImportance::to_tsv() const {
  std::string out;
  char buf[64];
  for (const WordScore& w : entries_) {
    std::snprintf(buf, sizeof(buf), "%.17g", w.score);
    out += w.token;
    out += '\t';
    out += buf;
    out += '\t';
    out += std::to_string(w.freq);
    out += '\n';
  }
  return out;
}

}  // namespace vmask
