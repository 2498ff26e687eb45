#pragma once

#include "emlab/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace emlab {

using Token = int32_t;
using Utterance = std::vector<Token>;

// A corpus is a sequence of utterances of non-negative integer tokens. This
// is the unit every module exchanges.
struct Corpus {
  std::vector<Utterance> utterances;

  int64_t n_tokens() const {
    int64_t n = 0;
    for (const Utterance& u : utterances) n += static_cast<int64_t>(u.size());
    return n;
  }

  bool empty() const { return utterances.empty(); }

  /// Throws if any token id falls outside [0, bound).
  void validate_bound(Token bound) const {
    for (const Utterance& u : utterances)
      for (Token t : u)
        if (t < 0 || t >= bound)
          throw std::invalid_argument("corpus: token " + std::to_string(t) +
                                      " outside declared bound " + std::to_string(bound));
  }

  /// All tokens flattened in order (the stream a language model trains on).
  std::vector<Token> flatten() const {
    std::vector<Token> out;
    out.reserve(static_cast<size_t>(n_tokens()));
    for (const Utterance& u : utterances) out.insert(out.end(), u.begin(), u.end());
    return out;
  }
};

struct UnigramStats {
  std::vector<int64_t> counts;  // indexed by token id
  int64_t total = 0;
  int64_t unique = 0;
  double entropy_bits = 0.0;
};

inline UnigramStats unigram_stats(const Corpus& corpus) {
  UnigramStats s;
  Token max_id = -1;
  for (const Utterance& u : corpus.utterances)
    for (Token t : u) max_id = std::max(max_id, t);
  if (max_id < 0) throw std::invalid_argument("unigram_stats: empty corpus");
  s.counts.assign(static_cast<size_t>(max_id) + 1, 0);
  for (const Utterance& u : corpus.utterances)
    for (Token t : u) {
      if (t < 0) throw std::invalid_argument("unigram_stats: negative token id");
      ++s.counts[static_cast<size_t>(t)];
      ++s.total;
    }
  double h = 0.0;
  for (int64_t c : s.counts) {
    if (c == 0) continue;
    ++s.unique;
    const double p = static_cast<double>(c) / static_cast<double>(s.total);
    h -= p * std::log2(p);
  }
  s.entropy_bits = h;
  return s;
}

/// Shannon entropy (bits) of the empirical unigram distribution.
inline double unigram_entropy(const Corpus& corpus) { return unigram_stats(corpus).entropy_bits; }

/// (rank, frequency) pairs, frequencies non-increasing, ranks from 1.
/// Ties are broken by ascending token id so output is deterministic.
inline std::vector<std::pair<int64_t, int64_t>> rank_frequency(const Corpus& corpus) {
  UnigramStats s = unigram_stats(corpus);
  std::vector<std::pair<Token, int64_t>> by_token;
  for (size_t t = 0; t < s.counts.size(); ++t)
    if (s.counts[t] > 0) by_token.emplace_back(static_cast<Token>(t), s.counts[t]);
  std::sort(by_token.begin(), by_token.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::pair<int64_t, int64_t>> out;
  out.reserve(by_token.size());
  for (size_t i = 0; i < by_token.size(); ++i)
    out.emplace_back(static_cast<int64_t>(i) + 1, by_token[i].second);
  return out;
}

// File format (bit-exact): UTF-8 text, one utterance per line, tokens as
// base-10 non-negative integers separated by single spaces, LF newlines, no
// trailing whitespace. Lines starting with '#' are ignored on read.

inline void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_corpus: cannot open " + path);
  std::string line;
  for (const Utterance& u : corpus.utterances) {
    line.clear();
    for (size_t i = 0; i < u.size(); ++i) {
      if (i) line.push_back(' ');
      line += std::to_string(u[i]);
    }
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  if (!out) throw std::runtime_error("write_corpus: write failed for " + path);
}

inline Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_corpus: cannot open " + path);
  Corpus corpus;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;
    if (line.empty()) throw ParseError("read_corpus: empty utterance", line_no);
    Utterance u;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      if (*p == ' ') throw ParseError("read_corpus: stray whitespace", line_no);
      int64_t value = 0;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc() || (next < end && *next != ' '))
        throw ParseError("read_corpus: token is not a non-negative integer", line_no);
      if (value < 0 || value > INT32_MAX) throw ParseError("read_corpus: token out of range", line_no);
      u.push_back(static_cast<Token>(value));
      p = next < end ? next + 1 : next;
      if (next < end && next + 1 == end)
        throw ParseError("read_corpus: trailing whitespace", line_no);
    }
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

}  // namespace emlab
