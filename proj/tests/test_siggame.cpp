#include "emlab/siggame.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace emlab;

namespace {

GameConfig tiny_config() {
  GameConfig cfg;
  cfg.n_attributes = 3;
  cfg.n_values = 3;
  cfg.n_distractors = 2;
  cfg.vocab_size = 32;
  cfg.message_length = 3;
  cfg.embed_size = 24;
  cfg.hidden_size = 48;
  cfg.learning_rate = 2e-3;
  cfg.n_epochs = 40;
  cfg.seed = 7;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("sample_dataset: singleton value space collapses to a single observation") {
  GameConfig cfg;
  cfg.n_attributes = 2;
  cfg.n_values = 1;
  Rng rng(1);
  for (const Observation& o : sample_dataset(cfg, rng)) REQUIRE(o == Observation{0, 0});
}

TEST_CASE("sample_dataset: values are uniform") {
  GameConfig cfg;
  cfg.n_attributes = 1;
  cfg.n_values = 4;
  Rng rng(2);
  std::vector<int64_t> counts(4, 0);
  int64_t total = 0;
  for (int rep = 0; rep < 100; ++rep)
    for (const Observation& o : sample_dataset(cfg, rng)) {
      ++counts[static_cast<size_t>(o[0])];
      ++total;
    }
  for (int64_t c : counts)
    REQUIRE(static_cast<double>(c) / static_cast<double>(total) == Catch::Approx(0.25).epsilon(0.05));
}

TEST_CASE("sample_dataset: same seed gives identical datasets of 1024") {
  GameConfig cfg;
  Rng r1(42), r2(42);
  const auto a = sample_dataset(cfg, r1);
  const auto b = sample_dataset(cfg, r2);
  REQUIRE(a.size() == 1024);
  REQUIRE(a == b);
}

TEST_CASE("game config validation") {
  GameConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.vocab_size = 1;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = GameConfig{};
  cfg.temperature = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = GameConfig{};
  cfg.learning_rate = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = GameConfig{};
  cfg.n_distractors = 0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("the large search-optimum style config is accepted and runs") {
  GameConfig cfg;
  cfg.n_attributes = 11;
  cfg.n_values = 6;
  cfg.n_distractors = 23;
  cfg.temperature = 2.0;
  cfg.embed_size = 128;
  cfg.hidden_size = 256;
  cfg.learning_rate = 1.79e-3;
  cfg.vocab_size = 9721;
  cfg.message_length = 16;
  cfg.n_epochs = 1715;
  cfg.seed = 4;
  REQUIRE_NOTHROW(cfg.validate());
  TrainedGame game = init_game(cfg);

  // forward both agents
  std::vector<Observation> obs{{0, 1, 2, 3, 4, 5, 0, 1, 2, 3, 4}, {5, 4, 3, 2, 1, 0, 5, 4, 3, 2, 1}};
  const auto msgs = sender_messages(game, obs);
  REQUIRE(msgs.size() == 2);
  for (const Utterance& m : msgs) {
    REQUIRE(m.size() == 16);
    for (Token t : m) REQUIRE(t < cfg.vocab_size);
  }
  std::vector<Observation> cands;
  for (const Observation& o : obs) {
    cands.push_back(o);
    cands.push_back(obs[0]);
  }
  const Tensor scores = receiver_scores(game, msgs, cands, 2);
  REQUIRE(scores.all_finite());

  // one training step: compose the training graph and take a gradient step
  Graph g(&game.params);
  const int obs_node = g.constant(detail::obs_tensor(obs));
  Rng noise(1);
  const auto relaxed = detail::sender_rollout_train(g, game, obs_node, 2, &noise);
  const int enc = detail::receiver_encode_train(g, game, relaxed, 2);
  const int cand_enc = mlp(g, game.arch.recv_cand, g.constant(detail::obs_tensor(cands)));
  const int loss = g.cross_entropy_rows(g.grouped_dot(enc, cand_enc, 2), {0, 0});
  REQUIRE(std::isfinite(g.val(loss).item()));
  auto grads = g.backward(loss);
  AdamState adam;
  REQUIRE_NOTHROW(adam_step(game.params, grads, adam, cfg.learning_rate));
}

TEST_CASE("eval-mode sender is a deterministic function of the observation") {
  TrainedGame game = init_game(tiny_config());
  const std::vector<Observation> obs{{0, 1, 2}, {2, 1, 0}, {0, 1, 2}};
  const auto a = sender_messages(game, obs);
  const auto b = sender_messages(game, obs);
  REQUIRE(a == b);
  REQUIRE(a[0] == a[2]);  // identical observations, identical messages
  for (const Utterance& m : a)
    for (Token t : m) {
      REQUIRE(t >= 0);
      REQUIRE(t < game.config.vocab_size);
    }
}

TEST_CASE("zero-noise training rollout at low temperature matches eval messages") {
  GameConfig cfg = tiny_config();
  cfg.temperature = 0.01;
  TrainedGame game = init_game(cfg);
  std::vector<Observation> obs;
  Rng rng(5);
  for (int i = 0; i < 16; ++i) {
    Observation o(static_cast<size_t>(cfg.n_attributes));
    for (int& v : o) v = static_cast<int>(rng.uniform_int(cfg.n_values));
    obs.push_back(o);
  }
  const auto eval_msgs = sender_messages(game, obs);

  Graph g(&game.params, /*grads=*/false);
  const int obs_node = g.constant(detail::obs_tensor(obs));
  const auto relaxed = detail::sender_rollout_train(g, game, obs_node, 16, nullptr);
  for (size_t t = 0; t < relaxed.size(); ++t) {
    const auto ids = argmax_rows(g.val(relaxed[t]));
    for (size_t b = 0; b < obs.size(); ++b)
      REQUIRE(ids[b] == eval_msgs[b][t]);
  }
}

TEST_CASE("receiver with a single candidate scores probability one and zero loss") {
  TrainedGame game = init_game(tiny_config());
  const std::vector<Observation> obs{{1, 1, 1}};
  const auto msgs = sender_messages(game, obs);
  const Tensor scores = receiver_scores(game, msgs, obs, 1);
  REQUIRE(scores.numel() == 1);
  // softmax over one candidate is exactly 1, so cross-entropy is exactly 0
  Graph g(nullptr, false);
  const int s = g.constant(scores);
  const int loss = g.cross_entropy_rows(s, {0});
  REQUIRE(g.val(loss).item() == 0.0f);
}

TEST_CASE("duplicated candidates produce tied scores") {
  TrainedGame game = init_game(tiny_config());
  const std::vector<Observation> obs{{0, 2, 1}};
  const auto msgs = sender_messages(game, obs);
  const std::vector<Observation> cands{{1, 0, 2}, {1, 0, 2}, {2, 2, 2}};
  const Tensor scores = receiver_scores(game, msgs, cands, 3);
  REQUIRE(scores.at(0, 0) == scores.at(0, 1));
}

TEST_CASE("receiver_scores validates its inputs") {
  TrainedGame game = init_game(tiny_config());
  const auto msgs = sender_messages(game, {{0, 0, 0}});
  REQUIRE_THROWS_AS(receiver_scores(game, msgs, {}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(receiver_scores(game, msgs, {{0, 0, 0}}, 2), std::invalid_argument);
}

TEST_CASE("untrained accuracy sits at chance for 24 candidates") {
  TrainedGame game = init_game(tiny_config());
  Rng rng(11);
  const int rounds = 10'000;
  const double acc = eval_accuracy(game, rounds, 24, rng);
  const double p = 1.0 / 24;
  const double sigma = std::sqrt(p * (1 - p) / rounds);
  REQUIRE(std::abs(acc - p) <= 3 * sigma);
}

TEST_CASE("eval_accuracy with pool size 1 is always 1") {
  TrainedGame game = init_game(tiny_config());
  Rng rng(3);
  REQUIRE(eval_accuracy(game, 50, 1, rng) == 1.0);
}

TEST_CASE("top-percentile criterion reduces to rank 1 for pools up to 100") {
  // chance for pool 100 is 1/100 under the rank-1 rule
  TrainedGame game = init_game(tiny_config());
  Rng rng(13);
  const int rounds = 20'000;
  const double acc = eval_accuracy(game, rounds, 100, rng);
  const double p = 0.01;
  const double sigma = std::sqrt(p * (1 - p) / rounds);
  REQUIRE(std::abs(acc - p) <= 3 * sigma);
}

TEST_CASE("lr = 0 leaves parameters untouched and accuracy at chance") {
  GameConfig cfg = tiny_config();
  cfg.n_epochs = 3;
  const TrainedGame before = init_game(cfg);
  TrainOptions opts;
  opts.lr_override = 0.0;
  TrainedGame game = train(cfg, opts);
  REQUIRE(game.params.size() == before.params.size());
  for (int i = 0; i < game.params.size(); ++i)
    REQUIRE(game.params.value(i).v == before.params.value(i).v);

  Rng rng(17);
  const int rounds = 10'000;
  const double acc = eval_accuracy(game, rounds, cfg.n_distractors + 1, rng);
  const double p = 1.0 / (cfg.n_distractors + 1);
  const double sigma = std::sqrt(p * (1 - p) / rounds);
  REQUIRE(std::abs(acc - p) <= 3 * sigma);
}

TEST_CASE("training reduces the loss: last-decile median below first-decile median") {
  GameConfig cfg = tiny_config();
  TrainedGame game = train(cfg);
  REQUIRE(game.metrics.size() == static_cast<size_t>(cfg.n_epochs));
  auto median_of = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const size_t decile = std::max<size_t>(1, game.metrics.size() / 10);
  std::vector<double> first, last;
  for (size_t i = 0; i < decile; ++i) first.push_back(game.metrics[i].loss);
  for (size_t i = game.metrics.size() - decile; i < game.metrics.size(); ++i)
    last.push_back(game.metrics[i].loss);
  REQUIRE(median_of(last) < median_of(first));
  // learning also shows up as above-chance accuracy
  REQUIRE(game.metrics.back().accuracy > 2.0 / (cfg.n_distractors + 1));
}

TEST_CASE("training is deterministic given the seed") {
  GameConfig cfg = tiny_config();
  cfg.n_epochs = 5;
  TrainedGame a = train(cfg);
  TrainedGame b = train(cfg);
  REQUIRE(a.params.size() == b.params.size());
  for (int i = 0; i < a.params.size(); ++i) REQUIRE(a.params.value(i).v == b.params.value(i).v);
  for (size_t e = 0; e < a.metrics.size(); ++e) {
    REQUIRE(a.metrics[e].loss == b.metrics[e].loss);
    REQUIRE(a.metrics[e].accuracy == b.metrics[e].accuracy);
  }
}

TEST_CASE("per-epoch metrics stream through the hook") {
  GameConfig cfg = tiny_config();
  cfg.n_epochs = 4;
  int calls = 0;
  TrainOptions opts;
  opts.on_epoch = [&](const EpochMetrics& m) {
    REQUIRE(m.epoch == calls);
    ++calls;
  };
  train(cfg, opts);
  REQUIRE(calls == 4);
}

TEST_CASE("emit_corpus: exact utterance arithmetic and determinism") {
  GameConfig cfg = tiny_config();
  cfg.message_length = 16;
  TrainedGame game = init_game(cfg);
  Rng r1(21), r2(21);
  const Corpus a = emit_corpus(game, 32, r1);
  REQUIRE(a.utterances.size() == 2);
  REQUIRE(a.n_tokens() == 32);
  for (const Utterance& u : a.utterances) {
    REQUIRE(u.size() == 16);
    for (Token t : u) REQUIRE(t < cfg.vocab_size);
  }
  const Corpus b = emit_corpus(game, 32, r2);
  REQUIRE(a.utterances == b.utterances);
}

TEST_CASE("checkpoint round-trips parameters and behaviour") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "emlab_game_ckpt";
  fs::create_directories(dir);
  GameConfig cfg = tiny_config();
  cfg.n_epochs = 3;
  TrainedGame game = train(cfg);
  const std::string path = (dir / "game.bin").string();
  save_game(game, path);
  TrainedGame back = load_game(path);
  REQUIRE(back.params.size() == game.params.size());
  for (int i = 0; i < game.params.size(); ++i)
    REQUIRE(back.params.value(i).v == game.params.value(i).v);
  Rng r1(5), r2(5);
  const Corpus c1 = emit_corpus(game, 64, r1);
  const Corpus c2 = emit_corpus(back, 64, r2);
  REQUIRE(c1.utterances == c2.utterances);
  fs::remove_all(dir);
}
