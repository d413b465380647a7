#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ecgfwd/autodiff.hpp"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/mesh.hpp"
#include "ecgfwd/nn.hpp"
#include "ecgfwd/operators.hpp"

namespace ecgfwd {

/// Model widths shared by the encoder stages.
struct EncoderDims {
  int d_h = 32;    // per-node feature width
  int d_z = 64;    // latent width
  int L_f = 4;     // Fourier levels on the surface coordinates
  int blocks = 2;  // diffusion blocks
};

/// Which encoder ingredients are active. Disabling a gated stream fixes its
/// fusion gate to exactly zero and renormalizes the remaining gates;
/// disabling the statistics zeroes the summary half of the projection input.
struct StreamFlags {
  bool local = true;
  bool spectral = true;
  bool voltage = true;
  bool stats = true;

  void require_some_stream() const {
    if (!local && !spectral && !voltage)
      throw ValidationError("encoder: at least one feature stream must be enabled");
  }
};

/// Per-vertex Fourier features of the surface coordinates: for each level k,
/// [sin(2^k pi a), cos(2^k pi a), sin(2^k pi b), cos(2^k pi b)].
inline Eigen::MatrixXd uac_fourier(const Eigen::MatrixX2d& uac, int L_f) {
  if (uac.rows() == 0) throw ValidationError("uac_fourier: missing uac coordinates");
  if (L_f < 1) throw ValidationError("uac_fourier: L_f must be >= 1");
  Eigen::MatrixXd gamma(uac.rows(), 4 * L_f);
  for (int i = 0; i < uac.rows(); ++i) {
    for (int k = 0; k < L_f; ++k) {
      const double f = std::pow(2.0, k) * M_PI;
      gamma(i, 4 * k + 0) = std::sin(f * uac(i, 0));
      gamma(i, 4 * k + 1) = std::cos(f * uac(i, 0));
      gamma(i, 4 * k + 2) = std::sin(f * uac(i, 1));
      gamma(i, 4 * k + 3) = std::cos(f * uac(i, 1));
    }
  }
  return gamma;
}

/// Scalar summary of one voltage frame:
/// [median, median absolute deviation, mass-weighted mean, mass-weighted std].
inline Eigen::Vector4d voltage_stats(const Eigen::VectorXd& v, const Eigen::VectorXd& mass) {
  if (v.size() == 0 || v.size() != mass.size())
    throw ValidationError("voltage_stats: voltage/mass length mismatch");
  const auto median_of = [](Eigen::VectorXd x) {
    std::sort(x.data(), x.data() + x.size());
    const Eigen::Index n = x.size();
    return n % 2 == 1 ? x(n / 2) : 0.5 * (x(n / 2 - 1) + x(n / 2));
  };
  const double med = median_of(v);
  const double mad = median_of((v.array() - med).abs().matrix());
  const double msum = mass.sum();
  const double mean = mass.dot(v) / msum;
  const double var = mass.dot((v.array() - mean).square().matrix()) / msum;
  return {med, mad, mean, std::sqrt(var)};
}

/// Constant per-mesh quantities the encoder consumes, cast once to the
/// working precision. Owned outside any tape; tapes hold references into it.
template <typename S>
struct EncoderContext {
  Mat<S> psi;                            // N x K eigenfunctions
  Mat<S> psi_t_m;                        // K x N, Psi^T M
  Mat<S> lambda;                         // K x 1 eigenvalues
  Eigen::SparseMatrix<S> grad;           // 3F x N per-face gradients
  Eigen::SparseMatrix<S> face_to_node;   // N x F area-weighted averaging
  Mat<S> gamma;                          // N x 4 L_f surface Fourier features
  Mat<S> coords;                         // N x 3, zero-mean unit-RMS
  Mat<S> log_mass;                       // N x 1
  Eigen::VectorXd mass;                  // N, double, for frame statistics

  int n_vertices() const { return static_cast<int>(mass.size()); }
};

template <typename S>
EncoderContext<S> build_encoder_context(const SurfaceMesh& mesh, const GeometricOperators& ops,
                                        int L_f) {
  if (ops.n_vertices() != mesh.n_vertices())
    throw ValidationError("encoder context: operators built for a different mesh");
  if (!mesh.has_uac()) throw ValidationError("encoder context: mesh has no uac coordinates");
  EncoderContext<S> ctx;
  const int n = mesh.n_vertices();
  ctx.psi = ops.eigenfunctions.cast<S>();
  const Eigen::MatrixXd psi_t_m = ops.eigenfunctions.transpose() * ops.mass.asDiagonal();
  ctx.psi_t_m = psi_t_m.cast<S>();
  ctx.lambda = ops.eigenvalues.cast<S>();
  ctx.grad = ops.grad.cast<S>();
  ctx.gamma = uac_fourier(mesh.uac, L_f).cast<S>();
  ctx.mass = ops.mass;
  ctx.log_mass = ops.mass.array().log().matrix().cast<S>();

  // Area-weighted face-to-node averaging: node i collects its incident faces
  // weighted by face area.
  Eigen::VectorXd incident(n);
  incident.setZero();
  for (int f = 0; f < mesh.n_faces(); ++f)
    for (int k = 0; k < 3; ++k) incident(mesh.faces(f, k)) += ops.face_area(f);
  std::vector<Eigen::Triplet<S>> trips;
  trips.reserve(static_cast<size_t>(mesh.n_faces()) * 3);
  for (int f = 0; f < mesh.n_faces(); ++f)
    for (int k = 0; k < 3; ++k) {
      const int i = mesh.faces(f, k);
      trips.emplace_back(i, f, static_cast<S>(ops.face_area(f) / incident(i)));
    }
  ctx.face_to_node.resize(n, mesh.n_faces());
  ctx.face_to_node.setFromTriplets(trips.begin(), trips.end());
  ctx.face_to_node.makeCompressed();

  // Coordinates standardized per mesh: subtract the vertex mean, divide by
  // the RMS of the centered entries, so the latent is scale-stable.
  Eigen::MatrixX3d c = mesh.vertices;
  c.rowwise() -= c.colwise().mean();
  const double rms = std::sqrt(c.squaredNorm() / static_cast<double>(c.size()));
  ctx.coords = (c / rms).cast<S>();
  return ctx;
}

/// Registers every encoder parameter group. Weight matrices draw from the
/// uniform fan-in scheme; biases start at zero; diffusion times start at 0.1
/// (stored as logs); s and b start at the trained values 0.1 and 1.
template <typename S>
void register_encoder_params(ParamStore<S>& store, const EncoderDims& dims, uint64_t seed,
                             double s_init = 0.1, double b_init = 1.0) {
  const int d = dims.d_h;
  store.add_uniform("enc.input.W", 4, d, 4, seed);
  store.add_zeros("enc.input.b", 1, d);
  for (int i = 0; i < dims.blocks; ++i) {
    const std::string p = "enc.block" + std::to_string(i);
    store.add_const(p + ".log_t", 1, d, static_cast<S>(std::log(0.1)));
    store.add_uniform(p + ".W_grad", d, d, d, seed);
    store.add_uniform(p + ".W1", 2 * d, d, 2 * d, seed);
    store.add_zeros(p + ".b1", 1, d);
    store.add_uniform(p + ".W2", d, d, d, seed);
    store.add_zeros(p + ".b2", 1, d);
  }
  store.add_const("enc.spectral.s", 1, 1, static_cast<S>(s_init));
  store.add_const("enc.spectral.b", 1, 1, static_cast<S>(b_init));
  store.add_uniform("enc.voltage.W1", 1, d, 1, seed);
  store.add_zeros("enc.voltage.b1", 1, d);
  store.add_uniform("enc.voltage.W2", d, d, d, seed);
  store.add_zeros("enc.voltage.b2", 1, d);
  store.add_uniform("enc.gate.W1", 3 * d, d, 3 * d, seed);
  store.add_zeros("enc.gate.b1", 1, d);
  store.add_uniform("enc.gate.W2", d, 3, d, seed);
  store.add_zeros("enc.gate.b2", 1, 3);
  store.add_uniform("enc.pool.W1", 4 * dims.L_f, d, 4 * dims.L_f, seed);
  store.add_zeros("enc.pool.b1", 1, d);
  store.add_uniform("enc.pool.W2", d, 1, d, seed);
  store.add_zeros("enc.pool.b2", 1, 1);
  store.add_uniform("enc.out.W", d + 4, dims.d_z, d + 4, seed);
  store.add_zeros("enc.out.b", 1, dims.d_z);
}

namespace enc {

/// Heat-kernel smoothing, one diffusion time per channel:
/// column c -> Psi diag(exp(-lambda t_c)) Psi^T M H[:,c], t_c = exp(log_t_c).
template <typename S>
Var<S> heat_diffuse(Tape<S>& tape, Var<S> H, const EncoderContext<S>& ctx, Var<S> log_t) {
  if (H.rows() != ctx.n_vertices()) throw ValidationError("heat_diffuse: node count mismatch");
  if (log_t.rows() != 1 || log_t.cols() != H.cols())
    throw ValidationError("heat_diffuse: one diffusion time per channel required");
  const auto coeff = ad::matmul_const(tape, ctx.psi_t_m, H);              // K x d
  const auto t_row = ad::exp_v(log_t);                                    // 1 x d, all > 0
  const auto lt = ad::matmul(ad::constant(tape, ctx.lambda), t_row);      // K x d outer product
  const auto decay = ad::exp_v(ad::scale(lt, S(-1)));
  return ad::matmul_const(tape, ctx.psi, ad::mul(decay, coeff));
}

/// One diffusion block: heat smoothing, tangent-gradient magnitude features
/// mixed back in, then a shared per-node MLP with a residual connection.
template <typename S>
Var<S> diffusion_block(Tape<S>& tape, Var<S> H, const EncoderContext<S>& ctx,
                       ParamStore<S>& params, int block) {
  const std::string p = "enc.block" + std::to_string(block);
  const auto h_diff = heat_diffuse(tape, H, ctx, params.use(tape, p + ".log_t"));
  const auto face_grads = ad::spmatmul_const(tape, ctx.grad, h_diff);     // 3F x d
  // Small floor keeps the norm differentiable where a gradient vanishes.
  const auto magnitudes = ad::rows3_norm(face_grads, static_cast<S>(1e-12));
  const auto node_mags = ad::spmatmul_const(tape, ctx.face_to_node, magnitudes);
  const auto mixed = ad::matmul(node_mags, params.use(tape, p + ".W_grad"));
  const auto cat = ad::concat_cols<S>({h_diff, mixed});                   // N x 2d
  const auto hidden = ad::tanh_v(
      ad::add_rowvec(ad::matmul(cat, params.use(tape, p + ".W1")), params.use(tape, p + ".b1")));
  const auto out = ad::add_rowvec(ad::matmul(hidden, params.use(tape, p + ".W2")),
                                  params.use(tape, p + ".b2"));
  return ad::add(H, out);
}

/// Global spectral propagation: H -> Psi g(Lambda) Psi^T M H with
/// g(lambda) = exp(-s lambda) + b.
template <typename S>
Var<S> spectral_propagate(Tape<S>& tape, Var<S> H, const EncoderContext<S>& ctx, Var<S> s,
                          Var<S> b) {
  if (H.rows() != ctx.n_vertices())
    throw ValidationError("spectral_propagate: node count mismatch");
  const auto coeff = ad::matmul_const(tape, ctx.psi_t_m, H);              // K x d
  const auto neg_lambda = ad::constant(tape, Mat<S>(-ctx.lambda));
  const auto g = ad::add_scalar(ad::exp_v(ad::mul_scalar(neg_lambda, s)), b);  // K x 1
  return ad::matmul_const(tape, ctx.psi, ad::mul_colvec(coeff, g));
}

/// Shared per-node MLP on the raw (normalized) voltage value.
template <typename S>
Var<S> voltage_stream(Tape<S>& tape, Var<S> V, ParamStore<S>& params) {
  if (V.cols() != 1) throw ValidationError("voltage_stream: V must be a column");
  const auto hidden = ad::tanh_v(ad::add_rowvec(ad::matmul(V, params.use(tape, "enc.voltage.W1")),
                                                params.use(tape, "enc.voltage.b1")));
  return ad::add_rowvec(ad::matmul(hidden, params.use(tape, "enc.voltage.W2")),
                        params.use(tape, "enc.voltage.b2"));
}

/// Per-node gating: 3 softmax-normalized coefficients on the concatenated
/// stream features; fused row = g_local h_local + g_spec h_spec + g_V h_V.
template <typename S>
Var<S> gate_fuse(Tape<S>& tape, Var<S> h_local, Var<S> h_spec, Var<S> h_volt,
                 ParamStore<S>& params, const StreamFlags& flags = {}) {
  ad::same_shape(h_local, h_spec, "gate_fuse");
  ad::same_shape(h_local, h_volt, "gate_fuse");
  flags.require_some_stream();
  const auto cat = ad::concat_cols<S>({h_local, h_spec, h_volt});
  const auto hidden = ad::tanh_v(ad::add_rowvec(ad::matmul(cat, params.use(tape, "enc.gate.W1")),
                                                params.use(tape, "enc.gate.b1")));
  const auto logits = ad::add_rowvec(ad::matmul(hidden, params.use(tape, "enc.gate.W2")),
                                     params.use(tape, "enc.gate.b2"));
  const auto gates =
      ad::softmax_rows(logits, {flags.local, flags.spectral, flags.voltage});  // N x 3
  const auto part_local = ad::mul_colvec(h_local, ad::col(gates, 0));
  const auto part_spec = ad::mul_colvec(h_spec, ad::col(gates, 1));
  const auto part_volt = ad::mul_colvec(h_volt, ad::col(gates, 2));
  return ad::add(ad::add(part_local, part_spec), part_volt);
}

/// Mass-weighted attention pooling: a score net on the surface-coordinate
/// features gives s_i; w_i = exp(s_i) m_i / sum_j exp(s_j) m_j.
template <typename S>
Var<S> quadrature_pool(Tape<S>& tape, Var<S> H, const EncoderContext<S>& ctx,
                       ParamStore<S>& params) {
  if (H.rows() != ctx.n_vertices()) throw ValidationError("quadrature_pool: node count mismatch");
  const auto hidden = ad::tanh_v(
      ad::add_rowvec(ad::matmul(ad::constant(tape, ctx.gamma), params.use(tape, "enc.pool.W1")),
                     params.use(tape, "enc.pool.b1")));
  const auto score = ad::add_rowvec(ad::matmul(hidden, params.use(tape, "enc.pool.W2")),
                                    params.use(tape, "enc.pool.b2"));  // N x 1
  // softmax(score + log m) realizes exp(score) * m / normalization exactly.
  const auto weights = ad::softmax_vec(ad::add(score, ad::constant(tape, ctx.log_mass)));
  return ad::matmul_tn(weights, H);  // 1 x d
}

/// Full frame encoder: input lift, diffusion blocks, spectral and voltage
/// streams, gated fusion, quadrature pooling, projection with the frame
/// statistics appended.
template <typename S>
Var<S> encode_frame(Tape<S>& tape, const Mat<S>& frame, const EncoderContext<S>& ctx,
                    ParamStore<S>& params, const EncoderDims& dims,
                    const StreamFlags& flags = {}) {
  if (frame.rows() != ctx.n_vertices() || frame.cols() != 1)
    throw ValidationError("encode_frame: frame must be N x 1 for this mesh");
  flags.require_some_stream();

  Mat<S> features(frame.rows(), 4);
  features.col(0) = frame;
  features.rightCols(3) = ctx.coords;
  const auto x = ad::constant(tape, std::move(features));
  auto h = ad::add_rowvec(ad::matmul(x, params.use(tape, "enc.input.W")),
                          params.use(tape, "enc.input.b"));
  for (int i = 0; i < dims.blocks; ++i) h = diffusion_block(tape, h, ctx, params, i);

  // A disabled stream is ablated completely: it is never computed and enters
  // the fusion (both the gate input and the weighted sum) as exact zeros, so
  // its parameters cannot influence the latent.
  const auto zeros = [&]() {
    return ad::constant(tape, Mat<S>(Mat<S>::Zero(frame.rows(), dims.d_h)));
  };
  const auto h_local = flags.local ? h : zeros();
  const auto h_spec = flags.spectral
                          ? spectral_propagate(tape, h, ctx, params.use(tape, "enc.spectral.s"),
                                               params.use(tape, "enc.spectral.b"))
                          : zeros();
  const auto h_volt = flags.voltage ? voltage_stream(tape, ad::constant(tape, frame), params)
                                    : zeros();
  const auto fused = gate_fuse(tape, h_local, h_spec, h_volt, params, flags);
  const auto pooled = quadrature_pool(tape, fused, ctx, params);

  Eigen::Vector4d stats = Eigen::Vector4d::Zero();
  if (flags.stats) stats = voltage_stats(frame.template cast<double>(), ctx.mass);
  const auto stats_row = ad::constant(tape, Mat<S>(stats.transpose().cast<S>()));
  const auto cat = ad::concat_cols<S>({pooled, stats_row});
  return ad::add_rowvec(ad::matmul(cat, params.use(tape, "enc.out.W")),
                        params.use(tape, "enc.out.b"));
}

/// Values-only sequence encoding (each frame on a scratch tape). Rows are
/// latents; the frame clock is carried alongside by callers.
template <typename S>
Mat<S> encode_sequence_values(const Mat<S>& frames, const EncoderContext<S>& ctx,
                              ParamStore<S>& params, const EncoderDims& dims,
                              const StreamFlags& flags = {}) {
  if (frames.rows() < 2) throw ValidationError("encode_sequence: need at least 2 frames");
  Mat<S> z(frames.rows(), dims.d_z);
  for (int t = 0; t < frames.rows(); ++t) {
    Tape<S> tape;
    const auto zt = encode_frame(tape, Mat<S>(frames.row(t).transpose()), ctx, params, dims, flags);
    z.row(t) = zt.val().row(0);
  }
  return z;
}

}  // namespace enc

}  // namespace ecgfwd
