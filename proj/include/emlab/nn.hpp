#pragma once

#include "emlab/graph.hpp"
#include "emlab/rng.hpp"

#include <string>
#include <vector>

namespace emlab {

enum class CellKind { Gru, Lstm, Elman };

inline const char* to_string(CellKind k) {
  switch (k) {
    case CellKind::Gru: return "GRU";
    case CellKind::Lstm: return "LSTM";
    case CellKind::Elman: return "Elman";
  }
  return "?";
}

inline CellKind cell_kind_from_string(const std::string& s) {
  if (s == "GRU" || s == "gru") return CellKind::Gru;
  if (s == "LSTM" || s == "lstm") return CellKind::Lstm;
  if (s == "Elman" || s == "elman" || s == "RNN" || s == "rnn") return CellKind::Elman;
  throw std::invalid_argument("unknown cell kind: " + s);
}

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
inline Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (float& x : t.v) x = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

struct LinearParams {
  int w = -1;  // [in, out]
  int b = -1;  // [out]
};

inline LinearParams add_linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng) {
  LinearParams p;
  p.w = ps.add(name + ".w", uniform_init({in, out}, in, rng));
  p.b = ps.add(name + ".b", Tensor::zeros({out}));
  return p;
}

inline int linear(Graph& g, const LinearParams& p, int x) {
  return g.add_rowvec(g.matmul(x, g.param(p.w)), g.param(p.b));
}

// Stacked recurrent cells. Gate blocks are packed in the column dimension:
// GRU (r, z, n), LSTM (i, f, g, o), Elman a single block.
struct RnnLayerParams {
  int w_ih = -1;  // [in, G*H]
  int w_hh = -1;  // [H, G*H]
  int b_ih = -1;  // [G*H]
  int b_hh = -1;  // [G*H]
};

struct RnnParams {
  CellKind kind = CellKind::Gru;
  int input_size = 0;
  int hidden_size = 0;
  std::vector<RnnLayerParams> layers;
};

inline int gate_blocks(CellKind k) {
  switch (k) {
    case CellKind::Gru: return 3;
    case CellKind::Lstm: return 4;
    case CellKind::Elman: return 1;
  }
  return 0;
}

inline RnnParams add_rnn(ParamStore& ps, const std::string& name, CellKind kind, int input_size,
                         int hidden_size, int n_layers, Rng& rng) {
  if (n_layers < 1) throw std::invalid_argument("add_rnn: need at least one layer");
  RnnParams p;
  p.kind = kind;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  const int g = gate_blocks(kind);
  for (int l = 0; l < n_layers; ++l) {
    const int in = l == 0 ? input_size : hidden_size;
    RnnLayerParams lp;
    const std::string base = name + ".l" + std::to_string(l);
    lp.w_ih = ps.add(base + ".w_ih", uniform_init({in, g * hidden_size}, in, rng));
    lp.w_hh = ps.add(base + ".w_hh", uniform_init({hidden_size, g * hidden_size}, hidden_size, rng));
    lp.b_ih = ps.add(base + ".b_ih", Tensor::zeros({g * hidden_size}));
    lp.b_hh = ps.add(base + ".b_hh", Tensor::zeros({g * hidden_size}));
    p.layers.push_back(lp);
  }
  return p;
}

/// Per-layer hidden node ids; `c` used by LSTM only.
struct RnnState {
  std::vector<int> h;
  std::vector<int> c;
};

/// Fresh state: zeros everywhere, except layer 0's hidden which may be seeded
/// from an existing node (the sender conditions on the observation this way).
inline RnnState rnn_initial_state(Graph& g, const RnnParams& p, int batch, int h0_layer0 = -1) {
  RnnState s;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    int h = (l == 0 && h0_layer0 >= 0) ? h0_layer0
                                       : g.constant(Tensor::zeros({batch, p.hidden_size}));
    s.h.push_back(h);
    if (p.kind == CellKind::Lstm) s.c.push_back(g.constant(Tensor::zeros({batch, p.hidden_size})));
  }
  return s;
}

/// One recurrence step through the whole stack. Returns the top layer's new
/// hidden node; `state` is updated in place.
inline int rnn_step(Graph& g, const RnnParams& p, int x, RnnState& state) {
  const int H = p.hidden_size;
  int input = x;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const RnnLayerParams& lp = p.layers[l];
    const int h = state.h[l];
    const int gi = g.add_rowvec(g.matmul(input, g.param(lp.w_ih)), g.param(lp.b_ih));
    const int gh = g.add_rowvec(g.matmul(h, g.param(lp.w_hh)), g.param(lp.b_hh));
    int h_new = -1;
    switch (p.kind) {
      case CellKind::Elman: {
        h_new = g.tanh_op(g.add(gi, gh));
        break;
      }
      case CellKind::Gru: {
        const int r = g.sigmoid_op(g.add(g.slice_cols(gi, 0, H), g.slice_cols(gh, 0, H)));
        const int z = g.sigmoid_op(g.add(g.slice_cols(gi, H, H), g.slice_cols(gh, H, H)));
        const int n = g.tanh_op(g.add(g.slice_cols(gi, 2 * H, H), g.mul(r, g.slice_cols(gh, 2 * H, H))));
        // h' = (1 - z) * n + z * h = n + z * (h - n)
        h_new = g.add(n, g.mul(z, g.sub(h, n)));
        break;
      }
      case CellKind::Lstm: {
        const int i = g.sigmoid_op(g.add(g.slice_cols(gi, 0, H), g.slice_cols(gh, 0, H)));
        const int f = g.sigmoid_op(g.add(g.slice_cols(gi, H, H), g.slice_cols(gh, H, H)));
        const int cand = g.tanh_op(g.add(g.slice_cols(gi, 2 * H, H), g.slice_cols(gh, 2 * H, H)));
        const int o = g.sigmoid_op(g.add(g.slice_cols(gi, 3 * H, H), g.slice_cols(gh, 3 * H, H)));
        const int c_new = g.add(g.mul(f, state.c[l]), g.mul(i, cand));
        h_new = g.mul(o, g.tanh_op(c_new));
        state.c[l] = c_new;
        break;
      }
    }
    state.h[l] = h_new;
    input = h_new;
  }
  return input;
}

/// Stack of `n_layers` tanh layers (first maps `in` -> `hidden`, the rest
/// keep `hidden`).
struct MlpParams {
  std::vector<LinearParams> layers;
};

inline MlpParams add_mlp(ParamStore& ps, const std::string& name, int in, int hidden, int n_layers,
                         Rng& rng) {
  if (n_layers < 1) throw std::invalid_argument("add_mlp: need at least one layer");
  MlpParams p;
  for (int l = 0; l < n_layers; ++l)
    p.layers.push_back(add_linear(ps, name + ".fc" + std::to_string(l), l == 0 ? in : hidden, hidden, rng));
  return p;
}

inline int mlp(Graph& g, const MlpParams& p, int x) {
  int h = x;
  for (const LinearParams& lp : p.layers) h = g.tanh_op(linear(g, lp, h));
  return h;
}

}  // namespace emlab
