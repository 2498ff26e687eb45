#pragma once

#include "emlab/corpus.hpp"
#include "emlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace emlab {

enum class SynthKind { BagOfWords, Regular, Dyck, ShuffleDyck };

inline const char* to_string(SynthKind k) {
  switch (k) {
    case SynthKind::BagOfWords: return "bag_of_words";
    case SynthKind::Regular: return "regular";
    case SynthKind::Dyck: return "dyck";
    case SynthKind::ShuffleDyck: return "shuffle_dyck";
  }
  return "?";
}

inline SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "bag_of_words") return SynthKind::BagOfWords;
  if (s == "regular") return SynthKind::Regular;
  if (s == "dyck") return SynthKind::Dyck;
  if (s == "shuffle_dyck") return SynthKind::ShuffleDyck;
  throw std::invalid_argument("unknown synthetic language kind: " + s);
}

// Zipf-Mandelbrot over a vocabulary: weight of 1-based rank i is
// 1/(i+beta)^alpha, normalized.
struct ZipfMandelbrot {
  int vocab_size = 0;
  double alpha = 1.0;
  double beta = 2.7;
  std::vector<double> weights;  // normalized, index 0 = rank 1
  std::vector<double> cdf;

  static ZipfMandelbrot make(int vocab_size, double alpha, double beta) {
    if (vocab_size < 1) throw std::invalid_argument("zm_weights: vocab_size must be >= 1");
    if (alpha < 0.0) throw std::invalid_argument("zm_weights: alpha must be >= 0");
    if (!(beta > -1.0)) throw std::invalid_argument("zm_weights: beta must be > -1");
    ZipfMandelbrot zm;
    zm.vocab_size = vocab_size;
    zm.alpha = alpha;
    zm.beta = beta;
    zm.weights.resize(static_cast<size_t>(vocab_size));
    double sum = 0.0;
    for (int i = 1; i <= vocab_size; ++i) {
      const double w = 1.0 / std::pow(static_cast<double>(i) + beta, alpha);
      zm.weights[static_cast<size_t>(i - 1)] = w;
      sum += w;
    }
    double acc = 0.0;
    zm.cdf.resize(zm.weights.size());
    for (size_t i = 0; i < zm.weights.size(); ++i) {
      zm.weights[i] /= sum;
      acc += zm.weights[i];
      zm.cdf[i] = acc;
    }
    zm.cdf.back() = 1.0;
    return zm;
  }

  Token sample(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<Token>(std::min<size_t>(static_cast<size_t>(it - cdf.begin()), cdf.size() - 1));
  }
};

/// Normalized Zipf-Mandelbrot probability vector.
inline std::vector<double> zm_weights(int vocab_size, double alpha, double beta) {
  return ZipfMandelbrot::make(vocab_size, alpha, beta).weights;
}

struct SynthConfig {
  SynthKind kind = SynthKind::BagOfWords;
  int64_t n_tokens = 15'000'000;  // target content tokens per corpus
  int vocab_size = 30'000;
  double alpha = 1.0;
  double beta = 2.7;
  double stop_prob = 0.1;    // bag_of_words
  int n_classes = 10;        // regular
  double repeat_prob = 0.4;  // regular: probability of advancing to the next class
  double open_prob = 0.5;    // dyck / shuffle_dyck
  uint64_t seed = 0;

  Token bos() const { return static_cast<Token>(vocab_size); }
  Token eos() const { return static_cast<Token>(vocab_size) + 1; }

  void validate() const {
    if (n_tokens < 1) throw std::invalid_argument("synth: n_tokens must be >= 1");
    if (vocab_size < 1) throw std::invalid_argument("synth: vocab_size must be >= 1");
    if (alpha < 0.0) throw std::invalid_argument("synth: alpha must be >= 0");
    if (!(beta > -1.0)) throw std::invalid_argument("synth: beta must be > -1");
    switch (kind) {
      case SynthKind::BagOfWords:
        if (!(stop_prob > 0.0 && stop_prob < 1.0))
          throw std::invalid_argument("synth: stop_prob must lie in (0,1)");
        break;
      case SynthKind::Regular:
        if (n_classes < 2) throw std::invalid_argument("synth: regular needs n_classes >= 2");
        if (vocab_size < n_classes)
          throw std::invalid_argument("synth: regular needs vocab_size >= n_classes");
        if (!(repeat_prob > 0.0 && repeat_prob < 1.0))
          throw std::invalid_argument("synth: repeat_prob must lie in (0,1)");
        break;
      case SynthKind::Dyck:
        if (!(open_prob > 0.0 && open_prob < 1.0))
          throw std::invalid_argument("synth: open_prob must lie in (0,1)");
        break;
      case SynthKind::ShuffleDyck:
        if (!(open_prob > 0.0 && open_prob < 0.6))
          throw std::invalid_argument("synth: shuffle_dyck needs open_prob in (0,0.6)");
        break;
    }
  }
};

namespace detail {

// Dyck sentence lengths are heavy-tailed near open_prob 0.5; beyond this many
// content tokens further opens are suppressed so the walk must close.
constexpr int kDyckLengthCap = 512;

inline Utterance dyck_sentence(const ZipfMandelbrot& zm, double open_prob, Rng& rng) {
  Utterance s;
  std::vector<Token> stack;
  // A sentence always begins with an open.
  Token first = zm.sample(rng);
  s.push_back(first);
  stack.push_back(first);
  while (!stack.empty()) {
    const bool force_close = static_cast<int>(s.size()) >= kDyckLengthCap;
    if (!force_close && rng.uniform() < open_prob) {
      Token t = zm.sample(rng);
      // An open equal to the current top would make the greedy matcher pop
      // here; resample so the matcher stays a sound validity oracle.
      while (zm.vocab_size > 1 && t == stack.back()) t = zm.sample(rng);
      s.push_back(t);
      stack.push_back(t);
    } else {
      s.push_back(stack.back());
      stack.pop_back();
    }
  }
  return s;
}

}  // namespace detail

/// Tokens i.i.d. Zipf-Mandelbrot; sentence ends after each token with
/// probability stop_prob.
inline Corpus gen_bag_of_words(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const ZipfMandelbrot zm = ZipfMandelbrot::make(cfg.vocab_size, cfg.alpha, cfg.beta);
  Corpus corpus;
  int64_t content = 0;
  while (content < cfg.n_tokens) {
    Utterance u{cfg.bos()};
    for (;;) {
      u.push_back(zm.sample(rng));
      ++content;
      if (rng.uniform() < cfg.stop_prob) break;
    }
    u.push_back(cfg.eos());
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

/// Uniform random partition of [0, vocab_size) into k non-empty classes
/// (resampled until none is empty). Drawn first by gen_regular, so a test can
/// reproduce the class map by replaying the same rng.
inline std::vector<int> regular_partition(int vocab_size, int k, Rng& rng) {
  std::vector<int> class_of(static_cast<size_t>(vocab_size));
  for (;;) {
    std::vector<int> count(static_cast<size_t>(k), 0);
    for (int t = 0; t < vocab_size; ++t) {
      const int c = static_cast<int>(rng.uniform_int(k));
      class_of[static_cast<size_t>(t)] = c;
      ++count[static_cast<size_t>(c)];
    }
    bool ok = true;
    for (int c : count)
      if (c == 0) ok = false;
    if (ok) return class_of;
  }
}

/// Sentences of the form s1+ s2+ ... sk+ over a random partition of the
/// vocabulary into k classes; within a class tokens keep their renormalized
/// Zipf-Mandelbrot weights. Each step advances to the next class with
/// probability repeat_prob, else stays.
inline Corpus gen_regular(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const ZipfMandelbrot zm = ZipfMandelbrot::make(cfg.vocab_size, cfg.alpha, cfg.beta);
  const int k = cfg.n_classes;

  const std::vector<int> class_of = regular_partition(cfg.vocab_size, k, rng);
  std::vector<std::vector<Token>> members(static_cast<size_t>(k));
  for (int t = 0; t < cfg.vocab_size; ++t)
    members[static_cast<size_t>(class_of[static_cast<size_t>(t)])].push_back(static_cast<Token>(t));

  // Per-class cumulative weights for renormalized sampling.
  std::vector<std::vector<double>> class_cdf(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) {
    double sum = 0.0;
    for (Token t : members[static_cast<size_t>(c)]) sum += zm.weights[static_cast<size_t>(t)];
    double acc = 0.0;
    for (Token t : members[static_cast<size_t>(c)]) {
      acc += zm.weights[static_cast<size_t>(t)] / sum;
      class_cdf[static_cast<size_t>(c)].push_back(acc);
    }
    class_cdf[static_cast<size_t>(c)].back() = 1.0;
  }
  auto sample_class = [&](int c) {
    const auto& cdf = class_cdf[static_cast<size_t>(c)];
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const size_t idx = std::min<size_t>(static_cast<size_t>(it - cdf.begin()), cdf.size() - 1);
    return members[static_cast<size_t>(c)][idx];
  };

  Corpus corpus;
  int64_t content = 0;
  while (content < cfg.n_tokens) {
    Utterance u{cfg.bos()};
    int c = 0;
    u.push_back(sample_class(c));
    ++content;
    for (;;) {
      if (rng.uniform() < cfg.repeat_prob) {
        ++c;
        if (c >= k) break;
      }
      u.push_back(sample_class(c));
      ++content;
    }
    u.push_back(cfg.eos());
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

/// Balanced nested delimiters where open and close share a token: with
/// probability open_prob sample-and-push a fresh token, else pop-and-emit the
/// stack top; the sentence ends when the stack empties.
inline Corpus gen_dyck(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const ZipfMandelbrot zm = ZipfMandelbrot::make(cfg.vocab_size, cfg.alpha, cfg.beta);
  Corpus corpus;
  int64_t content = 0;
  while (content < cfg.n_tokens) {
    Utterance s = detail::dyck_sentence(zm, cfg.open_prob, rng);
    content += static_cast<int64_t>(s.size());
    Utterance u{cfg.bos()};
    u.insert(u.end(), s.begin(), s.end());
    u.push_back(cfg.eos());
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

/// One string per token type, in first-appearance order, preserving each
/// type's occurrence order.
inline std::vector<Utterance> separate_by_type(const Utterance& sentence) {
  std::vector<Utterance> streams;
  std::map<Token, size_t> index_of;
  for (Token t : sentence) {
    auto [it, inserted] = index_of.try_emplace(t, streams.size());
    if (inserted) streams.emplace_back();
    streams[it->second].push_back(t);
  }
  return streams;
}

/// Appends uniformly at random from the non-empty streams until all are empty.
inline Utterance interleave_streams(const std::vector<Utterance>& streams, Rng& rng) {
  Utterance s;
  std::vector<size_t> pos(streams.size(), 0);
  std::vector<size_t> live;
  for (size_t i = 0; i < streams.size(); ++i)
    if (!streams[i].empty()) live.push_back(i);
  while (!live.empty()) {
    const size_t pick = live.size() == 1
                            ? 0
                            : static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(live.size())));
    const size_t si = live[pick];
    s.push_back(streams[si][pos[si]++]);
    if (pos[si] == streams[si].size()) live.erase(live.begin() + static_cast<ptrdiff_t>(pick));
  }
  return s;
}

/// Shuffle of distinct Dyck-1 streams: generate a Dyck sentence, separate it
/// into one string per token type, then interleave by drawing uniformly among
/// the non-empty streams.
inline Corpus gen_shuffle_dyck(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const ZipfMandelbrot zm = ZipfMandelbrot::make(cfg.vocab_size, cfg.alpha, cfg.beta);
  Corpus corpus;
  int64_t content = 0;
  while (content < cfg.n_tokens) {
    const Utterance base = detail::dyck_sentence(zm, cfg.open_prob, rng);
    Utterance s = interleave_streams(separate_by_type(base), rng);
    content += static_cast<int64_t>(s.size());
    Utterance u{cfg.bos()};
    u.insert(u.end(), s.begin(), s.end());
    u.push_back(cfg.eos());
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

inline Corpus gen_synth(const SynthConfig& cfg, Rng& rng) {
  switch (cfg.kind) {
    case SynthKind::BagOfWords: return gen_bag_of_words(cfg, rng);
    case SynthKind::Regular: return gen_regular(cfg, rng);
    case SynthKind::Dyck: return gen_dyck(cfg, rng);
    case SynthKind::ShuffleDyck: return gen_shuffle_dyck(cfg, rng);
  }
  throw std::invalid_argument("gen_synth: bad kind");
}

/// Sidecar metadata (key = value lines) recording the full generator config.
inline void write_synth_metadata(const SynthConfig& cfg, const Corpus& corpus,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_synth_metadata: cannot open " + path);
  out << "lang = " << to_string(cfg.kind) << "\n";
  out << "vocab_size = " << cfg.vocab_size << "\n";
  out << "alpha = " << cfg.alpha << "\n";
  out << "beta = " << cfg.beta << "\n";
  out << "n_tokens = " << cfg.n_tokens << "\n";
  switch (cfg.kind) {
    case SynthKind::BagOfWords: out << "stop_prob = " << cfg.stop_prob << "\n"; break;
    case SynthKind::Regular:
      out << "n_classes = " << cfg.n_classes << "\n";
      out << "repeat_prob = " << cfg.repeat_prob << "\n";
      break;
    case SynthKind::Dyck:
    case SynthKind::ShuffleDyck: out << "open_prob = " << cfg.open_prob << "\n"; break;
  }
  out << "seed = " << cfg.seed << "\n";
  out << "bos_id = " << cfg.bos() << "\n";
  out << "eos_id = " << cfg.eos() << "\n";
  out << "generated_tokens = " << corpus.n_tokens() << "\n";
  out << "generated_utterances = " << corpus.utterances.size() << "\n";
}

/// One config per swept value, each varying a single hyperparameter away from
/// the defaults. Combinations the generators cannot produce are skipped.
inline std::vector<SynthConfig> sweep_configs(SynthKind kind, uint64_t base_seed) {
  std::vector<SynthConfig> out;
  SynthConfig base;
  base.kind = kind;
  auto push = [&](SynthConfig c) {
    c.seed = mix_seed(base_seed, out.size());
    out.push_back(c);
  };
  for (int v : {10, 100, 1'000, 5'000, 10'000, 30'000}) {
    if (kind == SynthKind::Regular && v < base.n_classes) continue;
    SynthConfig c = base;
    c.vocab_size = v;
    push(c);
  }
  for (double a : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) {
    SynthConfig c = base;
    c.alpha = a;
    push(c);
  }
  if (kind != SynthKind::BagOfWords)
    for (int64_t n : {1'000LL, 10'000LL, 100'000LL, 1'000'000LL, 5'000'000LL, 15'000'000LL}) {
      SynthConfig c = base;
      c.n_tokens = n;
      push(c);
    }
  switch (kind) {
    case SynthKind::BagOfWords:
      for (double p : {0.05, 0.1, 0.2}) {
        SynthConfig c = base;
        c.stop_prob = p;
        push(c);
      }
      break;
    case SynthKind::Regular:
      for (double p : {0.2, 0.4, 0.5, 0.6}) {
        SynthConfig c = base;
        c.repeat_prob = p;
        push(c);
      }
      for (int k : {5, 10, 20, 40}) {
        SynthConfig c = base;
        c.n_classes = k;
        push(c);
      }
      break;
    case SynthKind::Dyck:
    case SynthKind::ShuffleDyck:
      for (double p : {0.2, 0.3, 0.4, 0.5, 0.6}) {
        if (kind == SynthKind::ShuffleDyck && p >= 0.6) continue;
        SynthConfig c = base;
        c.open_prob = p;
        push(c);
      }
      break;
  }
  return out;
}

}  // namespace emlab
