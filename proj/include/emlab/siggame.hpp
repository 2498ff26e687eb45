#pragma once

#include "emlab/corpus.hpp"
#include "emlab/nn.hpp"
#include "emlab/optim.hpp"
#include "emlab/rng.hpp"

#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace emlab {

// One point in the game hyperparameter space; together with the seed it fully
// determines a training run.
struct GameConfig {
  int n_attributes = 4;
  int n_values = 4;
  int n_distractors = 5;
  double temperature = 1.0;
  int embed_size = 64;
  int hidden_size = 128;
  double learning_rate = 1e-3;
  int vocab_size = 64;
  int message_length = 6;
  int n_epochs = 300;
  int batch_size = 32;
  CellKind cell_kind = CellKind::Gru;
  int rnn_layers = 1;
  int fc_layers = 1;
  uint64_t seed = 0;
  bool cosine_anneal = false;

  void validate() const {
    auto positive = [](int v, const char* what) {
      if (v < 1) throw std::invalid_argument(std::string("game config: ") + what + " must be >= 1");
    };
    positive(n_attributes, "n_attributes");
    positive(n_values, "n_values");
    positive(n_distractors, "n_distractors");
    positive(embed_size, "embed_size");
    positive(hidden_size, "hidden_size");
    positive(message_length, "message_length");
    positive(n_epochs, "n_epochs");
    positive(batch_size, "batch_size");
    positive(rnn_layers, "rnn_layers");
    positive(fc_layers, "fc_layers");
    if (!(temperature > 0.0)) throw std::invalid_argument("game config: temperature must be > 0");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("game config: learning_rate must be > 0");
    if (vocab_size < 2) throw std::invalid_argument("game config: vocab_size must be >= 2");
  }
};

/// Raw integer attribute values, length n_attributes, entries in [0, n_values).
using Observation = std::vector<int>;

/// Fresh dataset for one epoch.
constexpr int kObservationsPerEpoch = 1024;

inline std::vector<Observation> sample_dataset(const GameConfig& cfg, Rng& rng) {
  std::vector<Observation> out(kObservationsPerEpoch);
  for (Observation& obs : out) {
    obs.resize(static_cast<size_t>(cfg.n_attributes));
    for (int& v : obs) v = static_cast<int>(rng.uniform_int(cfg.n_values));
  }
  return out;
}

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // fraction of training rounds won (argmax over candidates)
};

namespace detail {

struct GameArch {
  MlpParams sender_obs;     // observation -> initial hidden of the message RNN
  int sender_embed = -1;    // [V, E], embeds the previous emitted token
  RnnParams sender_rnn;     // E -> H
  LinearParams sender_out;  // H -> V logits
  int recv_embed = -1;      // [V, E]
  RnnParams recv_rnn;       // E -> H
  MlpParams recv_msg_fc;    // message hidden -> encoding
  MlpParams recv_cand;      // observation -> encoding
};

inline GameArch build_arch(const GameConfig& cfg, ParamStore& ps, Rng& rng) {
  GameArch a;
  const int A = cfg.n_attributes, E = cfg.embed_size, H = cfg.hidden_size, V = cfg.vocab_size;
  a.sender_obs = add_mlp(ps, "sender.obs", A, H, cfg.fc_layers, rng);
  // Embeddings are row lookups; scale by the row width so feature magnitude
  // does not shrink with vocabulary size.
  a.sender_embed = ps.add("sender.embed", uniform_init({V, E}, E, rng));
  a.sender_rnn = add_rnn(ps, "sender.rnn", cfg.cell_kind, E, H, cfg.rnn_layers, rng);
  a.sender_out = add_linear(ps, "sender.out", H, V, rng);
  a.recv_embed = ps.add("recv.embed", uniform_init({V, E}, E, rng));
  a.recv_rnn = add_rnn(ps, "recv.rnn", cfg.cell_kind, E, H, cfg.rnn_layers, rng);
  a.recv_msg_fc = add_mlp(ps, "recv.msg", H, H, cfg.fc_layers, rng);
  a.recv_cand = add_mlp(ps, "recv.cand", A, H, cfg.fc_layers, rng);
  return a;
}

/// Observations as a [n, A] float tensor (raw integer values, no scaling).
inline Tensor obs_tensor(const std::vector<Observation>& obs) {
  if (obs.empty()) throw std::invalid_argument("obs_tensor: empty observation list");
  const int A = static_cast<int>(obs[0].size());
  Tensor t = Tensor::zeros({static_cast<int>(obs.size()), A});
  for (size_t i = 0; i < obs.size(); ++i) {
    if (static_cast<int>(obs[i].size()) != A)
      throw std::invalid_argument("obs_tensor: ragged observations");
    for (int a = 0; a < A; ++a) t.at(static_cast<int>(i), a) = static_cast<float>(obs[i][static_cast<size_t>(a)]);
  }
  return t;
}

}  // namespace detail

struct TrainedGame {
  GameConfig config;
  ParamStore params;
  detail::GameArch arch;
  std::vector<EpochMetrics> metrics;
};

namespace detail {

/// Train-mode sender rollout. Returns the relaxed one-hot node per step.
/// noise_rng == nullptr replaces Gumbel noise with zeros (deterministic test
/// mode).
inline std::vector<int> sender_rollout_train(Graph& g, const TrainedGame& game, int obs_node,
                                             int batch, Rng* noise_rng) {
  const GameConfig& cfg = game.config;
  const GameArch& a = game.arch;
  std::vector<int> relaxed;
  const int h0 = mlp(g, a.sender_obs, obs_node);
  RnnState st = rnn_initial_state(g, a.sender_rnn, batch, h0);
  int x = g.constant(Tensor::zeros({batch, cfg.embed_size}));
  for (int t = 0; t < cfg.message_length; ++t) {
    const int h = rnn_step(g, a.sender_rnn, x, st);
    const int logits = linear(g, a.sender_out, h);
    Tensor noise = Tensor::zeros({batch, cfg.vocab_size});
    if (noise_rng)
      for (float& v : noise.v) v = static_cast<float>(noise_rng->gumbel());
    const int y = g.gumbel_softmax_rows(logits, cfg.temperature, noise);
    relaxed.push_back(y);
    x = g.matmul(y, g.param(a.sender_embed));
  }
  return relaxed;
}

/// Eval-mode sender rollout: argmax tokens, no noise, hard embeddings.
inline std::vector<Utterance> sender_rollout_eval(const TrainedGame& game,
                                                  const std::vector<Observation>& obs) {
  const GameConfig& cfg = game.config;
  const GameArch& a = game.arch;
  const int batch = static_cast<int>(obs.size());
  Graph g(const_cast<ParamStore*>(&game.params), /*grads=*/false);
  const int obs_node = g.constant(obs_tensor(obs));
  const int h0 = mlp(g, a.sender_obs, obs_node);
  RnnState st = rnn_initial_state(g, a.sender_rnn, batch, h0);
  int x = g.constant(Tensor::zeros({batch, cfg.embed_size}));
  std::vector<Utterance> msgs(static_cast<size_t>(batch),
                              Utterance(static_cast<size_t>(cfg.message_length)));
  for (int t = 0; t < cfg.message_length; ++t) {
    const int h = rnn_step(g, a.sender_rnn, x, st);
    const int logits = linear(g, a.sender_out, h);
    const std::vector<int> ids = argmax_rows(g.val(logits));
    for (int b = 0; b < batch; ++b) msgs[static_cast<size_t>(b)][static_cast<size_t>(t)] = ids[static_cast<size_t>(b)];
    x = g.gather_rows(g.param(a.sender_embed), ids);
  }
  return msgs;
}

/// Receiver message encoding from relaxed one-hots (training path).
inline int receiver_encode_train(Graph& g, const TrainedGame& game, const std::vector<int>& relaxed,
                                 int batch) {
  const GameArch& a = game.arch;
  RnnState st = rnn_initial_state(g, a.recv_rnn, batch);
  int h = -1;
  for (int y : relaxed) h = rnn_step(g, a.recv_rnn, g.matmul(y, g.param(a.recv_embed)), st);
  return mlp(g, a.recv_msg_fc, h);
}

/// Receiver message encoding from hard token ids (evaluation path).
inline int receiver_encode_eval(Graph& g, const TrainedGame& game,
                                const std::vector<Utterance>& msgs) {
  const GameArch& a = game.arch;
  const int batch = static_cast<int>(msgs.size());
  const int L = static_cast<int>(msgs[0].size());
  RnnState st = rnn_initial_state(g, a.recv_rnn, batch);
  int h = -1;
  for (int t = 0; t < L; ++t) {
    std::vector<int> ids(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) ids[static_cast<size_t>(b)] = msgs[static_cast<size_t>(b)][static_cast<size_t>(t)];
    h = rnn_step(g, a.recv_rnn, g.gather_rows(g.param(a.recv_embed), ids), st);
  }
  return mlp(g, a.recv_msg_fc, h);
}

}  // namespace detail

/// Receiver scores for `batch` messages against candidate groups of size
/// `group` (candidates listed round-major). Higher score = better match.
inline Tensor receiver_scores(const TrainedGame& game, const std::vector<Utterance>& messages,
                              const std::vector<Observation>& candidates, int group) {
  if (candidates.empty() || group < 1) throw std::invalid_argument("receiver_scores: empty candidates");
  if (candidates.size() != messages.size() * static_cast<size_t>(group))
    throw std::invalid_argument("receiver_scores: candidate count mismatch");
  Graph g(const_cast<ParamStore*>(&game.params), /*grads=*/false);
  const int enc = detail::receiver_encode_eval(g, game, messages);
  const int cand = mlp(g, game.arch.recv_cand, g.constant(detail::obs_tensor(candidates)));
  return g.val(g.grouped_dot(enc, cand, group));
}

struct TrainOptions {
  /// Replace Gumbel noise with zeros (deterministic relaxation for tests).
  bool zero_noise = false;
  /// Overrides the config learning rate; unlike the config field this may be
  /// zero, which makes the whole loop a no-op on the parameters.
  std::optional<double> lr_override;
  /// Called after every epoch (metrics streaming).
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Freshly initialized (untrained) game for the given config.
inline TrainedGame init_game(const GameConfig& cfg) {
  cfg.validate();
  TrainedGame game;
  game.config = cfg;
  Rng init_rng(mix_seed(cfg.seed, 0xA11CE));
  game.arch = detail::build_arch(cfg, game.params, init_rng);
  return game;
}

/// Runs the full training loop. Throws NumericError on divergence (NaN loss);
/// callers that manage trials catch it and record a failed trial.
inline TrainedGame train(const GameConfig& cfg, const TrainOptions& opts = {}) {
  TrainedGame game = init_game(cfg);

  Rng data_rng(mix_seed(cfg.seed, 0xDA7A));
  Rng noise_rng(mix_seed(cfg.seed, 0x6B55));
  AdamState adam;
  std::vector<Tensor> grads = game.params.zeros_like();
  const int group = cfg.n_distractors + 1;
  const int batches_per_epoch = (kObservationsPerEpoch + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = static_cast<int64_t>(batches_per_epoch) * cfg.n_epochs;
  int64_t step = 0;

  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    const std::vector<Observation> dataset = sample_dataset(cfg, data_rng);
    double loss_sum = 0.0;
    int64_t correct = 0, rounds = 0;
    for (int b0 = 0; b0 < kObservationsPerEpoch; b0 += cfg.batch_size) {
      const int batch = std::min(cfg.batch_size, kObservationsPerEpoch - b0);
      std::vector<Observation> obs(dataset.begin() + b0, dataset.begin() + b0 + batch);
      // Candidate 0 is the correct observation; distractors are fresh uniform
      // draws (collisions with the correct one are allowed).
      std::vector<Observation> cands;
      cands.reserve(static_cast<size_t>(batch) * static_cast<size_t>(group));
      for (int i = 0; i < batch; ++i) {
        cands.push_back(obs[static_cast<size_t>(i)]);
        for (int d = 1; d < group; ++d) {
          Observation o(static_cast<size_t>(cfg.n_attributes));
          for (int& v : o) v = static_cast<int>(data_rng.uniform_int(cfg.n_values));
          cands.push_back(std::move(o));
        }
      }

      Graph g(&game.params);
      const int obs_node = g.constant(detail::obs_tensor(obs));
      const auto relaxed = detail::sender_rollout_train(g, game, obs_node, batch,
                                                        opts.zero_noise ? nullptr : &noise_rng);
      const int msg_enc = detail::receiver_encode_train(g, game, relaxed, batch);
      const int cand_enc = mlp(g, game.arch.recv_cand, g.constant(detail::obs_tensor(cands)));
      const int scores = g.grouped_dot(msg_enc, cand_enc, group);
      const int loss = g.cross_entropy_rows(scores, std::vector<int>(static_cast<size_t>(batch), 0));

      loss_sum += static_cast<double>(g.val(loss).item()) * batch;
      const std::vector<int> picks = argmax_rows(g.val(scores));
      for (int pick : picks) correct += pick == 0;
      rounds += batch;

      for (Tensor& t : grads) std::fill(t.v.begin(), t.v.end(), 0.0f);
      g.backward_accumulate(loss, grads);
      const double base_lr = opts.lr_override.value_or(cfg.learning_rate);
      const double lr =
          cfg.cosine_anneal ? cosine_lr(base_lr, 0.0, step, total_steps) : base_lr;
      adam_step(game.params, grads, adam, lr);
      ++step;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(rounds);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(rounds);
    game.metrics.push_back(m);
    if (opts.on_epoch) opts.on_epoch(m);
  }
  return game;
}

/// Eval-mode messages for a batch of observations (deterministic).
inline std::vector<Utterance> sender_messages(const TrainedGame& game,
                                              const std::vector<Observation>& obs) {
  return detail::sender_rollout_eval(game, obs);
}

/// Top-percentile discrimination accuracy: the correct candidate must rank
/// within the top max(1, ceil(pool_size/100)) of a pool with pool_size-1
/// fresh distractors. Score ties are broken uniformly at random so chance
/// calibration is exact.
inline double eval_accuracy(const TrainedGame& game, int n_rounds, int pool_size, Rng& rng) {
  if (pool_size < 1) throw std::invalid_argument("eval_accuracy: pool_size must be >= 1");
  if (n_rounds < 1) throw std::invalid_argument("eval_accuracy: n_rounds must be >= 1");
  const GameConfig& cfg = game.config;
  const int top = std::max(1, static_cast<int>((pool_size + 99) / 100));
  const int block = std::max(1, 8192 / pool_size);
  int64_t hits = 0;
  for (int done = 0; done < n_rounds;) {
    const int rounds = std::min(block, n_rounds - done);
    std::vector<Observation> obs(static_cast<size_t>(rounds));
    for (Observation& o : obs) {
      o.resize(static_cast<size_t>(cfg.n_attributes));
      for (int& v : o) v = static_cast<int>(rng.uniform_int(cfg.n_values));
    }
    std::vector<Observation> cands;
    cands.reserve(obs.size() * static_cast<size_t>(pool_size));
    for (const Observation& o : obs) {
      cands.push_back(o);
      for (int d = 1; d < pool_size; ++d) {
        Observation x(static_cast<size_t>(cfg.n_attributes));
        for (int& v : x) v = static_cast<int>(rng.uniform_int(cfg.n_values));
        cands.push_back(std::move(x));
      }
    }
    const Tensor scores = receiver_scores(game, sender_messages(game, obs), cands, pool_size);
    for (int r = 0; r < rounds; ++r) {
      const float correct_score = scores.at(r, 0);
      int greater = 0, ties = 0;
      for (int c = 1; c < pool_size; ++c) {
        if (scores.at(r, c) > correct_score) ++greater;
        else if (scores.at(r, c) == correct_score) ++ties;
      }
      const int rank = 1 + greater + (ties > 0 ? static_cast<int>(rng.uniform_int(ties + 1)) : 0);
      hits += rank <= top;
    }
    done += rounds;
  }
  return static_cast<double>(hits) / static_cast<double>(n_rounds);
}

/// Sample observations, run the sender in eval mode, and collect messages as
/// utterances until at least n_tokens tokens exist (truncating at an
/// utterance boundary).
inline Corpus emit_corpus(const TrainedGame& game, int64_t n_tokens, Rng& rng) {
  if (n_tokens < 1) throw std::invalid_argument("emit_corpus: n_tokens must be >= 1");
  const GameConfig& cfg = game.config;
  Corpus corpus;
  int64_t total = 0;
  const int block = 256;
  while (total < n_tokens) {
    std::vector<Observation> obs(static_cast<size_t>(block));
    for (Observation& o : obs) {
      o.resize(static_cast<size_t>(cfg.n_attributes));
      for (int& v : o) v = static_cast<int>(rng.uniform_int(cfg.n_values));
    }
    for (Utterance& u : sender_messages(game, obs)) {
      total += static_cast<int64_t>(u.size());
      corpus.utterances.push_back(std::move(u));
      if (total >= n_tokens) break;
    }
  }
  return corpus;
}

// -- checkpoint io -----------------------------------------------------------
// Little-endian binary: header, config fields in fixed order, then each
// parameter tensor (name, shape, float32 data).

namespace detail {

inline void write_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
template <typename T>
void write_pod(std::ofstream& out, T v) {
  write_bytes(out, &v, sizeof(T));
}
inline void write_str(std::ofstream& out, const std::string& s) {
  write_pod<uint64_t>(out, s.size());
  write_bytes(out, s.data(), s.size());
}
template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}
inline std::string read_str(std::ifstream& in) {
  const uint64_t n = read_pod<uint64_t>(in);
  if (n > (1ull << 32)) throw std::runtime_error("checkpoint: corrupt string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace detail

inline void save_game(const TrainedGame& game, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_game: cannot open " + path);
  using namespace detail;
  out.write("EMGAME01", 8);
  const GameConfig& c = game.config;
  write_pod<int32_t>(out, c.n_attributes);
  write_pod<int32_t>(out, c.n_values);
  write_pod<int32_t>(out, c.n_distractors);
  write_pod<double>(out, c.temperature);
  write_pod<int32_t>(out, c.embed_size);
  write_pod<int32_t>(out, c.hidden_size);
  write_pod<double>(out, c.learning_rate);
  write_pod<int32_t>(out, c.vocab_size);
  write_pod<int32_t>(out, c.message_length);
  write_pod<int32_t>(out, c.n_epochs);
  write_pod<int32_t>(out, c.batch_size);
  write_str(out, to_string(c.cell_kind));
  write_pod<int32_t>(out, c.rnn_layers);
  write_pod<int32_t>(out, c.fc_layers);
  write_pod<uint64_t>(out, c.seed);
  write_pod<uint8_t>(out, c.cosine_anneal ? 1 : 0);
  write_pod<int32_t>(out, game.params.size());
  for (int i = 0; i < game.params.size(); ++i) {
    const Tensor& t = game.params.value(i);
    write_str(out, game.params.name(i));
    write_pod<int32_t>(out, static_cast<int32_t>(t.shape.size()));
    for (int d : t.shape) write_pod<int32_t>(out, d);
    write_bytes(out, t.v.data(), t.v.size() * sizeof(float));
  }
  if (!out) throw std::runtime_error("save_game: write failed for " + path);
}

inline TrainedGame load_game(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_game: cannot open " + path);
  using namespace detail;
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "EMGAME01", 8) != 0)
    throw std::runtime_error("load_game: bad magic in " + path);
  GameConfig c;
  c.n_attributes = read_pod<int32_t>(in);
  c.n_values = read_pod<int32_t>(in);
  c.n_distractors = read_pod<int32_t>(in);
  c.temperature = read_pod<double>(in);
  c.embed_size = read_pod<int32_t>(in);
  c.hidden_size = read_pod<int32_t>(in);
  c.learning_rate = read_pod<double>(in);
  c.vocab_size = read_pod<int32_t>(in);
  c.message_length = read_pod<int32_t>(in);
  c.n_epochs = read_pod<int32_t>(in);
  c.batch_size = read_pod<int32_t>(in);
  c.cell_kind = cell_kind_from_string(read_str(in));
  c.rnn_layers = read_pod<int32_t>(in);
  c.fc_layers = read_pod<int32_t>(in);
  c.seed = read_pod<uint64_t>(in);
  c.cosine_anneal = read_pod<uint8_t>(in) != 0;

  TrainedGame game;
  game.config = c;
  Rng dummy(0);
  game.arch = detail::build_arch(c, game.params, dummy);
  const int n = read_pod<int32_t>(in);
  if (n != game.params.size()) throw std::runtime_error("load_game: parameter count mismatch");
  for (int i = 0; i < n; ++i) {
    const std::string name = read_str(in);
    if (name != game.params.name(i)) throw std::runtime_error("load_game: parameter order mismatch");
    const int ndim = read_pod<int32_t>(in);
    std::vector<int> shape;
    for (int d = 0; d < ndim; ++d) shape.push_back(read_pod<int32_t>(in));
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    if (!in) throw std::runtime_error("load_game: truncated tensor data");
    game.params.value(i) = std::move(t);
  }
  return game;
}

}  // namespace emlab
