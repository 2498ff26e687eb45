#include "emlab/synthlang.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

using namespace emlab;

namespace {

// Greedy Dyck matcher: pop when the token equals the stack top, else push.
// A sentence is valid iff the stack empties exactly at the end.
bool greedy_dyck_valid(const Utterance& s) {
  std::vector<Token> stack;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!stack.empty() && stack.back() == s[i])
      stack.pop_back();
    else
      stack.push_back(s[i]);
    if (stack.empty() && i + 1 != s.size()) return false;
  }
  return stack.empty();
}

// Balanced Dyck-1 word over one delimiter type: the stack may empty between
// groups (e.g. "[][]"), it just has to be empty at the end.
bool greedy_dyck_balanced(const Utterance& s) {
  std::vector<Token> stack;
  for (Token t : s) {
    if (!stack.empty() && stack.back() == t)
      stack.pop_back();
    else
      stack.push_back(t);
  }
  return stack.empty();
}

Utterance strip_specials(const Utterance& line, const SynthConfig& cfg) {
  REQUIRE(line.size() >= 2);
  REQUIRE(line.front() == cfg.bos());
  REQUIRE(line.back() == cfg.eos());
  return Utterance(line.begin() + 1, line.end() - 1);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("zm_weights: alpha=0 gives the uniform distribution") {
  const auto w = zm_weights(7, 0.0, 2.7);
  for (double p : w) REQUIRE(p == Catch::Approx(1.0 / 7).margin(1e-12));
}

TEST_CASE("zm_weights: vocab 3, alpha=1, beta=0 normalizes [1, 1/2, 1/3]") {
  const auto w = zm_weights(3, 1.0, 0.0);
  REQUIRE(w[0] == Catch::Approx(6.0 / 11).margin(1e-12));
  REQUIRE(w[1] == Catch::Approx(3.0 / 11).margin(1e-12));
  REQUIRE(w[2] == Catch::Approx(2.0 / 11).margin(1e-12));
}

TEST_CASE("zm_weights: default parameters give w1/w2 = 4.7/3.7") {
  const auto w = zm_weights(100, 1.0, 2.7);
  REQUIRE(w[0] / w[1] == Catch::Approx(4.7 / 3.7).margin(1e-12));
}

TEST_CASE("zm_weights sum to one and strictly decrease for alpha > 0") {
  for (double alpha : {0.25, 1.0, 2.0}) {
    const auto w = zm_weights(500, alpha, 2.7);
    double sum = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      sum += w[i];
      if (i) REQUIRE(w[i] < w[i - 1]);
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("zm_weights rejects invalid parameters") {
  REQUIRE_THROWS_AS(zm_weights(0, 1.0, 2.7), std::invalid_argument);
  REQUIRE_THROWS_AS(zm_weights(5, -0.1, 2.7), std::invalid_argument);
  REQUIRE_THROWS_AS(zm_weights(5, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("bag of words: mean content length approaches 1/stop_prob") {
  SynthConfig cfg;
  cfg.kind = SynthKind::BagOfWords;
  cfg.vocab_size = 50;
  cfg.stop_prob = 0.1;
  cfg.n_tokens = 1'000'000;  // ~100k sentences
  cfg.seed = 42;
  Rng rng(cfg.seed);
  const Corpus c = gen_bag_of_words(cfg, rng);
  const double mean = static_cast<double>(c.n_tokens() - 2 * static_cast<int64_t>(c.utterances.size())) /
                      static_cast<double>(c.utterances.size());
  REQUIRE(mean == Catch::Approx(10.0).epsilon(0.05));
}

TEST_CASE("bag of words with a singleton vocabulary emits one content token type") {
  SynthConfig cfg;
  cfg.kind = SynthKind::BagOfWords;
  cfg.vocab_size = 1;
  cfg.n_tokens = 500;
  Rng rng(1);
  const Corpus c = gen_bag_of_words(cfg, rng);
  for (const Utterance& line : c.utterances)
    for (Token t : strip_specials(line, cfg)) REQUIRE(t == 0);
}

TEST_CASE("bag of words empirical distribution converges to zm_weights") {
  SynthConfig cfg;
  cfg.kind = SynthKind::BagOfWords;
  cfg.vocab_size = 100;
  cfg.n_tokens = 1'000'000;
  cfg.seed = 7;
  Rng rng(cfg.seed);
  const Corpus c = gen_bag_of_words(cfg, rng);
  std::vector<int64_t> counts(static_cast<size_t>(cfg.vocab_size), 0);
  int64_t total = 0;
  for (const Utterance& line : c.utterances)
    for (Token t : strip_specials(line, cfg)) {
      ++counts[static_cast<size_t>(t)];
      ++total;
    }
  const auto w = zm_weights(cfg.vocab_size, cfg.alpha, cfg.beta);
  double max_dev = 0.0;
  for (int t = 0; t < cfg.vocab_size; ++t)
    max_dev = std::max(max_dev, std::abs(static_cast<double>(counts[static_cast<size_t>(t)]) / total -
                                         w[static_cast<size_t>(t)]));
  REQUIRE(max_dev < 0.01);
}

TEST_CASE("generators are deterministic: same config and seed give identical files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "emlab_synth_det";
  fs::create_directories(dir);
  for (SynthKind kind :
       {SynthKind::BagOfWords, SynthKind::Regular, SynthKind::Dyck, SynthKind::ShuffleDyck}) {
    SynthConfig cfg;
    cfg.kind = kind;
    cfg.vocab_size = 60;
    cfg.n_tokens = 20'000;
    cfg.seed = 99;
    if (kind == SynthKind::ShuffleDyck) cfg.open_prob = 0.45;
    Rng r1(cfg.seed), r2(cfg.seed);
    const std::string a = (dir / "a.txt").string(), b = (dir / "b.txt").string();
    write_corpus(gen_synth(cfg, r1), a);
    write_corpus(gen_synth(cfg, r2), b);
    REQUIRE(slurp(a) == slurp(b));
  }
  fs::remove_all(dir);
}

TEST_CASE("all generators wrap sentences in BoS/EoS and respect the token budget") {
  for (SynthKind kind :
       {SynthKind::BagOfWords, SynthKind::Regular, SynthKind::Dyck, SynthKind::ShuffleDyck}) {
    SynthConfig cfg;
    cfg.kind = kind;
    cfg.vocab_size = 40;
    cfg.n_tokens = 5'000;
    cfg.seed = 3;
    if (kind == SynthKind::ShuffleDyck) cfg.open_prob = 0.5 - 1e-9;
    Rng rng(cfg.seed);
    const Corpus c = gen_synth(cfg, rng);
    int64_t content = 0;
    int64_t last_len = 0;
    for (const Utterance& line : c.utterances) {
      const Utterance body = strip_specials(line, cfg);
      REQUIRE(!body.empty());
      for (Token t : body) {
        REQUIRE(t >= 0);
        REQUIRE(t < cfg.vocab_size);
      }
      last_len = static_cast<int64_t>(body.size());
      content += last_len;
    }
    REQUIRE(content >= cfg.n_tokens);
    REQUIRE(content - last_len < cfg.n_tokens);
  }
}

TEST_CASE("regular sentences match s1+ s2+ ... sk+ against the brute-force checker") {
  SynthConfig cfg;
  cfg.kind = SynthKind::Regular;
  cfg.vocab_size = 80;
  cfg.n_classes = 6;
  cfg.repeat_prob = 0.4;
  cfg.n_tokens = 200'000;
  cfg.seed = 11;

  // Reproduce the language's class map, then validate sentences independently.
  Rng part_rng(cfg.seed);
  const std::vector<int> class_of = regular_partition(cfg.vocab_size, cfg.n_classes, part_rng);
  Rng rng(cfg.seed);
  const Corpus c = gen_regular(cfg, rng);
  REQUIRE(c.utterances.size() >= 10'000);

  size_t checked = 0;
  for (const Utterance& line : c.utterances) {
    if (checked++ >= 10'000) break;
    const Utterance body = strip_specials(line, cfg);
    int prev = 0;
    std::set<int> seen;
    bool ok = true;
    for (Token t : body) {
      const int cls = class_of[static_cast<size_t>(t)];
      if (cls < prev || cls > prev + 1) ok = false;
      prev = cls;
      seen.insert(cls);
    }
    REQUIRE(ok);
    REQUIRE(class_of[static_cast<size_t>(body.front())] == 0);
    REQUIRE(class_of[static_cast<size_t>(body.back())] == cfg.n_classes - 1);
    REQUIRE(static_cast<int>(seen.size()) == cfg.n_classes);  // covers 1..k, non-decreasing
  }
}

TEST_CASE("regular mean content length approaches n_classes / advance_prob") {
  SynthConfig cfg;
  cfg.kind = SynthKind::Regular;
  cfg.vocab_size = 100;
  cfg.n_classes = 10;
  cfg.repeat_prob = 0.5;
  cfg.n_tokens = 2'000'000;  // ~100k sentences of expected length 20
  cfg.seed = 5;
  Rng rng(cfg.seed);
  const Corpus c = gen_regular(cfg, rng);
  const double mean = static_cast<double>(c.n_tokens() - 2 * static_cast<int64_t>(c.utterances.size())) /
                      static_cast<double>(c.utterances.size());
  REQUIRE(mean == Catch::Approx(20.0).epsilon(0.05));
}

TEST_CASE("dyck sentences all pass the greedy matcher") {
  SynthConfig cfg;
  cfg.kind = SynthKind::Dyck;
  cfg.vocab_size = 50;
  cfg.open_prob = 0.5;
  cfg.n_tokens = 700'000;
  cfg.seed = 13;
  Rng rng(cfg.seed);
  const Corpus c = gen_dyck(cfg, rng);
  size_t checked = 0;
  for (const Utterance& line : c.utterances) {
    if (checked++ >= 10'000) break;
    REQUIRE(greedy_dyck_valid(strip_specials(line, cfg)));
  }
  REQUIRE(checked >= 10'000);
}

TEST_CASE("the nested-delimiter example sentence is greedy-valid") {
  REQUIRE(greedy_dyck_valid({3, 1, 1, 2, 1, 1, 2, 3}));
}

TEST_CASE("dyck in the small open_prob limit produces (t, t) pairs") {
  SynthConfig cfg;
  cfg.kind = SynthKind::Dyck;
  cfg.vocab_size = 20;
  cfg.open_prob = 1e-6;
  cfg.n_tokens = 2'000;
  cfg.seed = 17;
  Rng rng(cfg.seed);
  const Corpus c = gen_dyck(cfg, rng);
  for (const Utterance& line : c.utterances) {
    const Utterance body = strip_specials(line, cfg);
    REQUIRE(body.size() == 2);
    REQUIRE(body[0] == body[1]);
  }
}

TEST_CASE("dyck respects the length cap under high open probability") {
  SynthConfig cfg;
  cfg.kind = SynthKind::Dyck;
  cfg.vocab_size = 30;
  cfg.open_prob = 0.95;
  cfg.n_tokens = 100'000;
  cfg.seed = 23;
  Rng rng(cfg.seed);
  const Corpus c = gen_dyck(cfg, rng);
  for (const Utterance& line : c.utterances) {
    const Utterance body = strip_specials(line, cfg);
    REQUIRE(greedy_dyck_valid(body));
    REQUIRE(body.size() <= 2 * 512 + 2);
  }
}

TEST_CASE("separate_by_type splits the worked interleaving example") {
  // "{([()])[]}" with { = 0, ( = 1, [ = 2
  const Utterance sentence{0, 1, 2, 1, 1, 2, 1, 2, 2, 0};
  const auto streams = separate_by_type(sentence);
  REQUIRE(streams.size() == 3);
  REQUIRE(streams[0] == Utterance{0, 0});           // "{}"
  REQUIRE(streams[1] == Utterance{1, 1, 1, 1});     // "(())"
  REQUIRE(streams[2] == Utterance{2, 2, 2, 2});     // "[][]"
}

TEST_CASE("interleaving a single stream is the identity") {
  Rng rng(1);
  const Utterance in{4, 4, 4, 4, 4, 4};
  REQUIRE(interleave_streams({in}, rng) == in);
}

TEST_CASE("shuffle dyck per-type subsequences are balanced Dyck-1 words") {
  SynthConfig cfg;
  cfg.kind = SynthKind::ShuffleDyck;
  cfg.vocab_size = 40;
  cfg.open_prob = 0.5 - 1e-12;
  cfg.n_tokens = 700'000;
  cfg.seed = 29;
  Rng rng(cfg.seed);
  const Corpus c = gen_shuffle_dyck(cfg, rng);
  size_t checked = 0;
  for (const Utterance& line : c.utterances) {
    if (checked++ >= 10'000) break;
    for (const Utterance& stream : separate_by_type(strip_specials(line, cfg)))
      REQUIRE(greedy_dyck_balanced(stream));
  }
  REQUIRE(checked >= 10'000);
}

TEST_CASE("config validation rejects out-of-range settings") {
  SynthConfig cfg;
  cfg.kind = SynthKind::ShuffleDyck;
  cfg.open_prob = 0.6;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.kind = SynthKind::Dyck;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.kind = SynthKind::Regular;
  cfg.n_classes = 1;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.n_classes = 10;
  cfg.vocab_size = 5;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.stop_prob = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("metadata sidecar records the full config") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "emlab_synth_meta";
  fs::create_directories(dir);
  SynthConfig cfg;
  cfg.kind = SynthKind::Regular;
  cfg.vocab_size = 50;
  cfg.n_tokens = 1'000;
  cfg.seed = 12345;
  Rng rng(cfg.seed);
  const Corpus c = gen_synth(cfg, rng);
  const std::string meta = (dir / "c.meta").string();
  write_synth_metadata(cfg, c, meta);
  const std::string body = slurp(meta);
  REQUIRE(body.find("lang = regular") != std::string::npos);
  REQUIRE(body.find("vocab_size = 50") != std::string::npos);
  REQUIRE(body.find("seed = 12345") != std::string::npos);
  REQUIRE(body.find("repeat_prob = 0.4") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweep presets skip combinations the generators cannot produce") {
  const auto shuffle = sweep_configs(SynthKind::ShuffleDyck, 1);
  for (const SynthConfig& c : shuffle) REQUIRE(c.open_prob < 0.6);
  const auto regular = sweep_configs(SynthKind::Regular, 1);
  for (const SynthConfig& c : regular) REQUIRE(c.vocab_size >= c.n_classes);
  for (const SynthConfig& c : regular) REQUIRE_NOTHROW(c.validate());
  const auto bow = sweep_configs(SynthKind::BagOfWords, 1);
  // n_tokens is not swept for the bag-of-words language
  for (const SynthConfig& c : bow) REQUIRE(c.n_tokens == 15'000'000);
}
