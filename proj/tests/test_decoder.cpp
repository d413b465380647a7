#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ecgfwd/decoder.hpp"
#include "ecgfwd/rng.hpp"

using namespace ecgfwd;
using M = Mat<double>;

namespace {

M random_mat(uint64_t seed, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  M m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

/// Tiny decoder configuration shared by most cases.
struct DecoderFixture {
  DecoderDims dims;
  ParamStore<double> params;
  M Z;
  M E;

  DecoderFixture(int T = 7) {
    dims.d_z = 4;
    dims.d_e = 6;
    dims.d_a = 5;
    dims.d_hid = 8;
    dims.d_head = 5;
    register_decoder_params(params, dims, 11);
    Z = random_mat(23, T, dims.d_z);
    E = time_embedding_matrix(T, dims.d_e);
  }
};

}  // namespace

TEST_CASE("time_embedding: zero phase, bounds, leading component") {
  const Eigen::RowVectorXd e0 = time_embedding(0, 8);
  for (int i = 0; i < 4; ++i) {
    CHECK(e0(2 * i) == 0.0);
    CHECK(e0(2 * i + 1) == 1.0);
  }

  for (int t : {1, 3, 400}) {
    const Eigen::RowVectorXd e = time_embedding(t, 10);
    CHECK(e.maxCoeff() <= 1.0);
    CHECK(e.minCoeff() >= -1.0);
    // i = 0 gives frequency 10000^0 = 1.
    CHECK(e(0) == std::sin(static_cast<double>(t)));
    CHECK(e(1) == std::cos(static_cast<double>(t)));
  }

  CHECK_THROWS_WITH_AS(time_embedding(1, 7), doctest::Contains("even"), ValidationError);

  const Eigen::MatrixXd E = time_embedding_matrix(5, 6);
  CHECK(E.rows() == 5);
  CHECK((E.row(2).array() == time_embedding(3, 6).array()).all());
}

TEST_CASE("attention: uniform collapse, shift invariance, simplex, convex hull") {
  DecoderFixture fx;
  Tape<double> tape;
  const auto Z = ad::constant(tape, fx.Z);
  const auto h0 = ad::constant(tape, M(M::Zero(1, fx.dims.d_hid)));

  SUBCASE("zero v_a gives uniform weights and the mean latent") {
    fx.params.value("dec.attn.va").setZero();
    const auto [a, c] = dec::attention(tape, h0, Z, fx.E, fx.params);
    const double T = static_cast<double>(fx.Z.rows());
    CHECK((a.val().array() == 1.0 / T).all());
    CHECK((c.val().row(0) - fx.Z.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("adding a constant to every score changes nothing") {
    const M scores = random_mat(31, fx.Z.rows(), 1, -2.0, 2.0);
    const auto [a1, c1] = dec::attention_from_scores(tape, ad::constant(tape, scores), Z);
    const auto [a2, c2] = dec::attention_from_scores(
        tape, ad::constant(tape, M(scores.array() + 7.25)), Z);
    CHECK((a1.val() - a2.val()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((c1.val() - c2.val()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("weights form a simplex and the context stays in the hull") {
    const auto h = ad::constant(tape, random_mat(37, 1, fx.dims.d_hid));
    const auto [a, c] = dec::attention(tape, h, Z, fx.E, fx.params);
    CHECK(std::abs(a.val().sum() - 1.0) < 1e-12);
    CHECK(a.val().minCoeff() > 0.0);
    for (int j = 0; j < fx.dims.d_z; ++j) {
      CHECK(c.val()(0, j) >= fx.Z.col(j).minCoeff() - 1e-12);
      CHECK(c.val()(0, j) <= fx.Z.col(j).maxCoeff() + 1e-12);
    }
  }

  SUBCASE("shape errors are reported") {
    CHECK_THROWS_WITH_AS(dec::attention(tape, h0, Z, M(fx.E.topRows(3)), fx.params),
                         doctest::Contains("row mismatch"), ValidationError);
  }
}

TEST_CASE("latent_difference: boundary row, stationarity, telescoping") {
  Tape<double> tape;

  const M constant = M::Ones(5, 3) * 2.5;
  const auto d0 = dec::latent_difference(tape, ad::constant(tape, constant));
  CHECK((d0.val().array() == 0.0).all());

  const M Z = random_mat(41, 6, 4);
  const auto d = dec::latent_difference(tape, ad::constant(tape, Z));
  CHECK((d.val().row(0).array() == 0.0).all());
  for (int t = 1; t < 6; ++t)
    CHECK((d.val().row(t) - (Z.row(t) - Z.row(t - 1))).cwiseAbs().maxCoeff() == 0.0);

  // Values in [0.5, 1) subtract exactly (Sterbenz), so the cumulative sum
  // rebuilds Z bit for bit.
  const M W = random_mat(43, 6, 4, 0.5, 1.0);
  const auto dw = dec::latent_difference(tape, ad::constant(tape, W));
  M rebuilt(6, 4);
  rebuilt.row(0) = W.row(0);
  for (int t = 1; t < 6; ++t) rebuilt.row(t) = rebuilt.row(t - 1) + dw.val().row(t);
  CHECK((rebuilt.array() == W.array()).all());

  // Single-row sequence: just the zero row.
  const auto d1 = dec::latent_difference(tape, ad::constant(tape, M(M::Ones(1, 4))));
  CHECK(d1.rows() == 1);
  CHECK((d1.val().array() == 0.0).all());
}

TEST_CASE("recurrent_step: fixpoints, forget-gate retention, output bounds") {
  DecoderFixture fx;
  const int d_in = 3 * fx.dims.d_z + fx.dims.d_e;

  SUBCASE("all-zero parameters keep the zero state") {
    ParamStore<double> zero;
    DecoderDims d = fx.dims;
    register_decoder_params(zero, d, 1);
    for (const char* g : {"i", "f", "g", "o"}) {
      zero.value(std::string("dec.lstm.W") + g).setZero();
      zero.value(std::string("dec.lstm.R") + g).setZero();
      zero.value(std::string("dec.lstm.b") + g).setZero();
    }
    Tape<double> tape;
    auto state = dec::lstm_zero_state(tape, d.d_hid);
    for (int step = 0; step < 3; ++step) {
      state = dec::recurrent_step(tape, ad::constant(tape, random_mat(50 + step, 1, d_in)), state,
                                  zero);
      CHECK((state.h.val().array() == 0.0).all());
      CHECK((state.c.val().array() == 0.0).all());
    }
  }

  SUBCASE("saturated forget gate preserves the cell") {
    ParamStore<double> p;
    register_decoder_params(p, fx.dims, 1);
    for (const char* g : {"i", "f", "g", "o"}) {
      p.value(std::string("dec.lstm.W") + g).setZero();
      p.value(std::string("dec.lstm.R") + g).setZero();
      p.value(std::string("dec.lstm.b") + g).setZero();
    }
    p.value("dec.lstm.bf").setConstant(40.0);

    Tape<double> tape;
    const M c0 = random_mat(61, 1, fx.dims.d_hid);
    dec::LstmState<double> state{ad::constant(tape, M(M::Zero(1, fx.dims.d_hid))),
                                 ad::constant(tape, c0)};
    for (int step = 0; step < 4; ++step)
      state = dec::recurrent_step(tape, ad::constant(tape, random_mat(70 + step, 1, d_in)), state,
                                  p);
    // i * g adds nothing (g = tanh(0) = 0); f = sigmoid(40) = 1 - 4e-18.
    CHECK((state.c.val() - c0).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("hidden values stay inside (-1, 1)") {
    Tape<double> tape;
    auto state = dec::lstm_zero_state(tape, fx.dims.d_hid);
    for (int step = 0; step < 10; ++step) {
      state = dec::recurrent_step(
          tape, ad::constant(tape, random_mat(80 + step, 1, d_in, -3.0, 3.0)), state, fx.params);
      CHECK(state.h.val().cwiseAbs().maxCoeff() < 1.0);
    }
  }
}

TEST_CASE("decode_step: first-step agreement, determinism, scalar output") {
  DecoderFixture fx;
  Tape<double> tape;
  const auto Z = ad::constant(tape, fx.Z);

  const auto start = dec::decoder_start<double>(tape, fx.dims);
  const auto [y1, s1] = dec::decode_step(tape, start, Z, fx.E, fx.params);
  CHECK(y1.rows() == 1);
  CHECK(y1.cols() == 1);

  // Teacher-forced and free-running only differ in what they thread as
  // `prev` after the step, so step 1 itself is identical by construction.
  const M y_true = random_mat(91, fx.Z.rows(), 1);
  const auto teacher =
      dec::decode_sequence(tape, Z, fx.E, fx.params, fx.dims, DecodeMode::teacher_forced, &y_true);
  const auto free =
      dec::decode_sequence(tape, Z, fx.E, fx.params, fx.dims, DecodeMode::free_running);
  CHECK(teacher.val()(0, 0) == free.val()(0, 0));
  CHECK(teacher.rows() == fx.Z.rows());
  CHECK(free.rows() == fx.Z.rows());

  // Pure function: identical inputs give identical outputs.
  const auto [y1b, s1b] = dec::decode_step(tape, start, Z, fx.E, fx.params);
  CHECK(y1.val()(0, 0) == y1b.val()(0, 0));
  (void)s1;
  (void)s1b;

  CHECK_THROWS_WITH_AS(
      dec::decode_sequence(tape, Z, fx.E, fx.params, fx.dims, DecodeMode::teacher_forced, static_cast<const M*>(nullptr)),
      doctest::Contains("needs y_true"), ValidationError);
}

TEST_CASE("decode_sequence: base case, mode contract, uniform-attention fallback") {
  DecoderFixture fx(1);
  Tape<double> tape;

  // T = 1: single step, no recursion.
  const auto Z1 = ad::constant(tape, M(fx.Z.topRows(1)));
  const auto y = dec::decode_sequence(tape, Z1, M(fx.E.topRows(1)), fx.params, fx.dims,
                                      DecodeMode::free_running);
  CHECK(y.rows() == 1);

  // Free-running consumes no ground truth: reruns are bitwise identical.
  DecoderFixture fb(6);
  Tape<double> tape2;
  const auto Z = ad::constant(tape2, fb.Z);
  const auto a = dec::decode_sequence(tape2, Z, fb.E, fb.params, fb.dims, DecodeMode::free_running);
  const auto b = dec::decode_sequence(tape2, Z, fb.E, fb.params, fb.dims, DecodeMode::free_running);
  CHECK((a.val().array() == b.val().array()).all());

  // Teacher forcing with different targets changes later outputs only
  // through `prev`, so outputs differ from free-running generically.
  const M y_true = random_mat(97, 6, 1, 0.5, 1.5);
  const auto teach = dec::decode_sequence(tape2, Z, fb.E, fb.params, fb.dims,
                                          DecodeMode::teacher_forced, &y_true);
  CHECK((teach.val().bottomRows(5).array() != a.val().bottomRows(5).array()).any());

  // Attention disabled: context is the plain latent mean; still T outputs.
  const auto u = dec::decode_sequence(tape2, Z, fb.E, fb.params, fb.dims, DecodeMode::free_running,
                                      static_cast<const M*>(nullptr), /*use_attention=*/false);
  CHECK(u.rows() == 6);
  CHECK((u.val().array() != a.val().array()).any());
}

TEST_CASE("decoder gradients match central finite differences per group") {
  DecoderFixture fx(6);
  fx.dims.d_z = 4;
  const M y_true = random_mat(101, 6, 1);

  const auto loss_value = [&]() {
    Tape<double> tape;
    const auto Z = ad::constant(tape, fx.Z);
    const auto pred = dec::decode_sequence(tape, Z, fx.E, fx.params, fx.dims,
                                           DecodeMode::teacher_forced, &y_true);
    return ad::huber_mean(pred, y_true, 1.0).val()(0, 0);
  };

  fx.params.zero_grads();
  {
    Tape<double> tape;
    const auto Z = ad::constant(tape, fx.Z);
    const auto pred = dec::decode_sequence(tape, Z, fx.E, fx.params, fx.dims,
                                           DecodeMode::teacher_forced, &y_true);
    const auto loss = ad::huber_mean(pred, y_true, 1.0);
    tape.backward(loss.id);
  }

  const double h = 1e-5;
  for (int gi = 0; gi < fx.params.count(); ++gi) {
    auto& group = fx.params.group(gi);
    CAPTURE(group.name);
    for (int e = 0; e < group.value.size(); ++e) {
      const double keep = group.value(e);
      group.value(e) = keep + h;
      const double fp = loss_value();
      group.value(e) = keep - h;
      const double fm = loss_value();
      group.value(e) = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double ag = group.grad(e);
      CAPTURE(e);
      if (std::abs(fd) < 1e-12) {
        CHECK(std::abs(ag) < 1e-10);
      } else {
        CHECK(std::abs(ag - fd) <= 1e-4 * std::abs(fd));
      }
    }
  }
}
