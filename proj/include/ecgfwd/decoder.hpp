#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ecgfwd/autodiff.hpp"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/nn.hpp"

namespace ecgfwd {

/// Decoder widths. d_z must match the encoder's latent width.
struct DecoderDims {
  int d_z = 64;
  int d_e = 32;    // sinusoidal embedding width (even)
  int d_a = 32;    // attention projection width
  int d_hid = 64;  // recurrent hidden width
  int d_head = 32; // output-head hidden width
};

enum class DecodeMode { teacher_forced, free_running };

/// Sinusoidal step embedding on the 10000-base frequency ladder:
/// e[2i] = sin(t / 10000^(2i/d_e)), e[2i+1] = cos(same).
inline Eigen::RowVectorXd time_embedding(int t, int d_e) {
  if (d_e % 2 != 0) throw ValidationError("time_embedding: d_e must be even");
  if (d_e < 2) throw ValidationError("time_embedding: d_e must be >= 2");
  Eigen::RowVectorXd e(d_e);
  for (int i = 0; 2 * i < d_e; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / d_e);
    e(2 * i) = std::sin(t * freq);
    e(2 * i + 1) = std::cos(t * freq);
  }
  return e;
}

/// Embeddings for steps 1..T stacked as rows.
inline Eigen::MatrixXd time_embedding_matrix(int T, int d_e) {
  Eigen::MatrixXd E(T, d_e);
  for (int t = 1; t <= T; ++t) E.row(t - 1) = time_embedding(t, d_e);
  return E;
}

template <typename S>
void register_decoder_params(ParamStore<S>& store, const DecoderDims& dims, uint64_t seed) {
  const int d_in = 3 * dims.d_z + dims.d_e;  // concat(c_t, z_t, dz_t, e_t)
  store.add_uniform("dec.attn.Wa", dims.d_hid, dims.d_a, dims.d_hid, seed);
  store.add_uniform("dec.attn.Ua", dims.d_z + dims.d_e, dims.d_a, dims.d_z + dims.d_e, seed);
  store.add_uniform("dec.attn.va", dims.d_a, 1, dims.d_a, seed);
  for (const char* gate : {"i", "f", "g", "o"}) {
    const std::string g(gate);
    store.add_uniform("dec.lstm.W" + g, d_in, dims.d_hid, d_in, seed);
    store.add_uniform("dec.lstm.R" + g, dims.d_hid, dims.d_hid, dims.d_hid, seed);
    store.add_zeros("dec.lstm.b" + g, 1, dims.d_hid);
  }
  store.add_uniform("dec.head.W1", dims.d_hid + 1, dims.d_head, dims.d_hid + 1, seed);
  store.add_zeros("dec.head.b1", 1, dims.d_head);
  store.add_uniform("dec.head.W2", dims.d_head, 1, dims.d_head, seed);
  store.add_zeros("dec.head.b2", 1, 1);
}

namespace dec {

/// Softmax over per-frame scores and the induced context vector. Split out
/// so score-level properties (shift invariance) are testable directly.
template <typename S>
std::pair<Var<S>, Var<S>> attention_from_scores(Tape<S>& tape, Var<S> scores, Var<S> Z) {
  if (scores.cols() != 1 || scores.rows() != Z.rows())
    throw ValidationError("attention: need one score per latent row");
  const auto weights = ad::softmax_vec(scores);       // T x 1 simplex
  const auto context = ad::matmul_tn(weights, Z);     // 1 x d_z
  return {weights, context};
}

/// Additive attention over the latent sequence: score_tau =
/// v_a^T tanh(W_a h + U_a [z_tau || e_tau]) with the pre-update hidden state.
template <typename S>
std::pair<Var<S>, Var<S>> attention(Tape<S>& tape, Var<S> h_prev, Var<S> Z, const Mat<S>& E,
                                    ParamStore<S>& params) {
  if (h_prev.rows() != 1) throw ValidationError("attention: hidden state must be a row");
  if (E.rows() != Z.val().rows()) throw ValidationError("attention: Z/E row mismatch");
  const auto ze = ad::concat_cols<S>({Z, ad::constant(tape, E)});          // T x (d_z + d_e)
  const auto proj = ad::add_rowvec(ad::matmul(ze, params.use(tape, "dec.attn.Ua")),
                                   ad::matmul(h_prev, params.use(tape, "dec.attn.Wa")));
  const auto scores = ad::matmul(ad::tanh_v(proj), params.use(tape, "dec.attn.va"));  // T x 1
  return attention_from_scores(tape, scores, Z);
}

/// Delta(z)_t = z_t - z_{t-1} with a zero first row.
template <typename S>
Var<S> latent_difference(Tape<S>& tape, Var<S> Z) {
  const int T = Z.rows();
  if (T < 1) throw ValidationError("latent_difference: empty latent sequence");
  const auto zero = ad::constant(tape, Mat<S>(Mat<S>::Zero(1, Z.cols())));
  if (T == 1) return zero;
  const auto diff = ad::sub(ad::rows(Z, 1, T - 1), ad::rows(Z, 0, T - 1));
  return ad::concat_rows<S>({zero, diff});
}

/// Recurrent state as tape handles (hidden row, cell row).
template <typename S>
struct LstmState {
  Var<S> h;
  Var<S> c;
};

template <typename S>
LstmState<S> lstm_zero_state(Tape<S>& tape, int d_hid) {
  const auto z = ad::constant(tape, Mat<S>(Mat<S>::Zero(1, d_hid)));
  return {z, z};
}

/// Standard four-gate LSTM step.
template <typename S>
LstmState<S> recurrent_step(Tape<S>& tape, Var<S> x, const LstmState<S>& state,
                            ParamStore<S>& params) {
  const auto gate = [&](const std::string& g) {
    return ad::add_rowvec(
        ad::add(ad::matmul(x, params.use(tape, "dec.lstm.W" + g)),
                ad::matmul(state.h, params.use(tape, "dec.lstm.R" + g))),
        params.use(tape, "dec.lstm.b" + g));
  };
  const auto i = ad::sigmoid(gate("i"));
  const auto f = ad::sigmoid(gate("f"));
  const auto g = ad::tanh_v(gate("g"));
  const auto o = ad::sigmoid(gate("o"));
  const auto c_next = ad::add(ad::mul(f, state.c), ad::mul(i, g));
  const auto h_next = ad::mul(o, ad::tanh_v(c_next));
  return {h_next, c_next};
}

/// Full decoder state: recurrent pair plus the previous output value.
template <typename S>
struct DecoderState {
  LstmState<S> lstm;
  Var<S> prev;  // 1 x 1, y-hat or teacher value from step t-1; zero at t=1
  int t = 1;
};

template <typename S>
DecoderState<S> decoder_start(Tape<S>& tape, const DecoderDims& dims) {
  DecoderState<S> s{lstm_zero_state(tape, dims.d_hid),
                    ad::constant(tape, Mat<S>(Mat<S>::Zero(1, 1))), 1};
  return s;
}

/// One decode step: attention context, input assembly, recurrence, output
/// head on [hidden || prev]. `use_attention = false` replaces the attention
/// weights with the uniform distribution (context = mean latent row).
template <typename S>
std::pair<Var<S>, DecoderState<S>> decode_step(Tape<S>& tape, const DecoderState<S>& state,
                                               Var<S> Z, const Mat<S>& E, ParamStore<S>& params,
                                               bool use_attention = true) {
  const int T = Z.rows();
  if (state.t < 1 || state.t > T) throw ValidationError("decode_step: step index out of range");
  const int ti = state.t - 1;

  Var<S> context{nullptr, -1};
  if (use_attention) {
    context = attention(tape, state.lstm.h, Z, E, params).second;
  } else {
    const auto uniform =
        ad::constant(tape, Mat<S>(Mat<S>::Constant(T, 1, S(1) / static_cast<S>(T))));
    context = ad::matmul_tn(uniform, Z);
  }

  const auto z_t = ad::rows(Z, ti, 1);
  const auto dz_t = state.t == 1
                        ? ad::constant(tape, Mat<S>(Mat<S>::Zero(1, Z.cols())))
                        : ad::sub(z_t, ad::rows(Z, ti - 1, 1));
  const auto e_t = ad::constant(tape, Mat<S>(E.row(ti)));
  const auto x = ad::concat_cols<S>({context, z_t, dz_t, e_t});

  const LstmState<S> next = recurrent_step(tape, x, state.lstm, params);
  const auto head_in = ad::concat_cols<S>({next.h, state.prev});
  const auto hidden = ad::tanh_v(ad::add_rowvec(ad::matmul(head_in, params.use(tape, "dec.head.W1")),
                                                params.use(tape, "dec.head.b1")));
  const auto y = ad::add_rowvec(ad::matmul(hidden, params.use(tape, "dec.head.W2")),
                                params.use(tape, "dec.head.b2"));  // 1 x 1

  DecoderState<S> out{next, y, state.t + 1};
  return {y, out};
}

/// Decodes the whole latent sequence into a T x 1 normalized trace.
/// Teacher-forced mode threads y_true_{t-1} as the previous value;
/// free-running mode threads the model's own prediction.
template <typename S>
Var<S> decode_sequence(Tape<S>& tape, Var<S> Z, const Mat<S>& E, ParamStore<S>& params,
                       const DecoderDims& dims, DecodeMode mode,
                       const Mat<S>* y_true = nullptr, bool use_attention = true) {
  const int T = Z.rows();
  if (E.rows() != T) throw ValidationError("decode_sequence: Z/E row mismatch");
  if (mode == DecodeMode::teacher_forced) {
    if (y_true == nullptr) throw ValidationError("decode_sequence: teacher forcing needs y_true");
    if (y_true->rows() != T || y_true->cols() != 1)
      throw ValidationError("decode_sequence: y_true must be T x 1");
  }

  std::vector<Var<S>> outputs;
  outputs.reserve(static_cast<size_t>(T));
  DecoderState<S> state = decoder_start(tape, dims);
  for (int t = 1; t <= T; ++t) {
    auto [y, next] = decode_step(tape, state, Z, E, params, use_attention);
    outputs.push_back(y);
    if (mode == DecodeMode::teacher_forced)
      next.prev = ad::constant(tape, Mat<S>(y_true->row(t - 1)));
    state = next;
  }
  return ad::concat_rows<S>(outputs);
}

}  // namespace dec

}  // namespace ecgfwd
