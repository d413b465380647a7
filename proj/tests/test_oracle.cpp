#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/oracle.hpp"
#include "ecgfwd/rng.hpp"
#include "ecgfwd/synth.hpp"

using namespace ecgfwd;

namespace {

// Analytic magnitude of the analog second-order Bessel prototypes (unit
// midband gain, -3 dB at fc), derived from 3/(s^2+3s+3) independently of the
// library's design path.
double analog_lp_gain(double f, double fc) {
  const double wn = std::sqrt(1.5 * (std::sqrt(5.0) - 1.0));
  const double x = wn * f / fc;
  return std::sqrt(9.0 / (std::pow(3.0 - x * x, 2) + 9.0 * x * x));
}

double analog_hp_gain(double f, double fc) {
  const double wn = std::sqrt(1.5 * (std::sqrt(5.0) - 1.0));
  const double u = f / fc;
  const double u2 = u * u;
  return std::sqrt(u2 * u2 / (std::pow(wn * wn / 3.0 - u2, 2) + wn * wn * u2));
}

struct OracleFixture {
  SurfaceMesh mesh = gen_synthetic_atrium(AtriumParams{}, 21);
  GeometricOperators ops = build_operators(mesh, 8);
  OracleConfig cfg = default_oracle_config(mesh);
};

Eigen::VectorXd random_frame(int n, uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(-81.0, 20.0);
  return v;
}

}  // namespace

TEST_CASE("conductivity tensor forms") {
  const Eigen::Vector3d ex(1, 0, 0);
  CHECK(conductivity_tensor(ex, 0.3, 0.3).isApprox(0.3 * Eigen::Matrix3d::Identity(), 1e-15));

  const Eigen::Matrix3d axis = conductivity_tensor(ex, 0.4, 0.025);
  CHECK(axis(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(axis(1, 1) == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(axis(2, 2) == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(std::abs(axis(0, 1)) + std::abs(axis(0, 2)) + std::abs(axis(1, 2)) < 1e-15);

  const Eigen::Vector3d skew = Eigen::Vector3d(0.3, -0.8, 0.52).normalized();
  const Eigen::Matrix3d sigma = conductivity_tensor(skew, 0.4, 0.025);
  CHECK(sigma.isApprox(sigma.transpose(), 1e-15));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(sigma);
  CHECK(eig.eigenvalues()(0) == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(eig.eigenvalues()(1) == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(eig.eigenvalues()(2) == doctest::Approx(0.4).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(conductivity_tensor(Eigen::Vector3d(1, 1, 0), 0.4, 0.025),
                       doctest::Contains("not unit"), ValidationError);
}

TEST_CASE("potential kernel: exact zero on constants, linear, guarded") {
  OracleFixture fx;
  const int n = fx.mesh.n_vertices();

  const Eigen::VectorXd constant = Eigen::VectorXd::Constant(n, -81.0);
  CHECK(ecg_potential(fx.mesh, fx.ops, constant, fx.cfg, fx.cfg.electrode_ra) == 0.0);

  const Eigen::VectorXd v = random_frame(n, 1);
  const Eigen::VectorXd w = random_frame(n, 2);
  const double pv = ecg_potential(fx.mesh, fx.ops, v, fx.cfg, fx.cfg.electrode_ll);
  const double pw = ecg_potential(fx.mesh, fx.ops, w, fx.cfg, fx.cfg.electrode_ll);
  const double pc =
      ecg_potential(fx.mesh, fx.ops, (2.5 * v - 1.25 * w).eval(), fx.cfg, fx.cfg.electrode_ll);
  CHECK(pc == doctest::Approx(2.5 * pv - 1.25 * pw).epsilon(1e-10));

  // Shift invariance comes with the zero-on-constants property.
  const double shifted =
      ecg_potential(fx.mesh, fx.ops, (v.array() + 100.0).matrix().eval(), fx.cfg,
                    fx.cfg.electrode_ll);
  CHECK(shifted == doctest::Approx(pv).epsilon(1e-6));

  const Eigen::Vector3d grazing =
      fx.ops.face_centroid.row(0).transpose() + Eigen::Vector3d(0.2, 0.0, 0.0);
  CHECK_THROWS_WITH_AS(ecg_potential(fx.mesh, fx.ops, v, fx.cfg, grazing),
                       doctest::Contains("1 mm"), ValidationError);
  CHECK_THROWS_AS(ecg_potential(fx.mesh, fx.ops, Eigen::VectorXd::Zero(3), fx.cfg,
                                fx.cfg.electrode_ra),
                  ValidationError);
}

TEST_CASE("far field decays like a point dipole") {
  OracleFixture fx;
  const Eigen::VectorXd v = random_frame(fx.mesh.n_vertices(), 3);
  const Eigen::Vector3d centroid = fx.mesh.vertices.colwise().mean();
  const double diameter = (fx.mesh.vertices.rowwise() - centroid.transpose())
                              .rowwise()
                              .norm()
                              .maxCoeff() *
                          2.0;
  const double r = 50.0 * diameter;
  const Eigen::Vector3d dir(1, 0, 0);
  const double near = ecg_potential(fx.mesh, fx.ops, v, fx.cfg, centroid + r * dir);
  const double far = ecg_potential(fx.mesh, fx.ops, v, fx.cfg, centroid + 2.0 * r * dir);
  CHECK(far / near == doctest::Approx(0.25).epsilon(0.03));
}

TEST_CASE("lead ii definition") {
  CHECK(lead_ii(0.1, 0.3) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(lead_ii(0.7, 0.7) == 0.0);
  CHECK(lead_ii(0.3, 0.1) == -lead_ii(0.1, 0.3));
}

TEST_CASE("bessel sections: stability, DC behavior, corner placement") {
  const double fs = 1000.0;
  for (const Biquad& q : {bessel_highpass(0.05, fs), bessel_lowpass(60.0, fs)}) {
    // Second-order Jury conditions: poles strictly inside the unit circle.
    CHECK(std::abs(q.a2) < 1.0);
    CHECK(std::abs(q.a1) < 1.0 + q.a2);
  }

  // High-pass kills DC identically: the numerator coefficients cancel in
  // exact arithmetic and, by construction, in floating point too.
  const Biquad hp = bessel_highpass(0.05, fs);
  CHECK(hp.b0 + hp.b1 + hp.b2 == 0.0);
  CHECK(hp.gain_at(0.0, fs) == 0.0);

  const Biquad lp = bessel_lowpass(60.0, fs);
  CHECK(lp.gain_at(0.0, fs) == doctest::Approx(1.0).epsilon(1e-12));

  // Prewarping pins the digital -3 dB point on the analog corner.
  CHECK(lp.gain_at(60.0, fs) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  // The high-pass corner sits at z ~ 1 where the numerator cancels to
  // (omega T)^2 of its terms, so a few digits are lost to rounding.
  CHECK(hp.gain_at(0.05, fs) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));

  CHECK_THROWS_WITH_AS(bessel_lowpass(500.0, fs), doctest::Contains("Nyquist"),
                       ValidationError);
  CHECK_THROWS_AS(bessel_lowpass(0.0, fs), ValidationError);
}

TEST_CASE("band-pass magnitude tracks the analytic analog cascade") {
  OracleConfig cfg;
  cfg.fs = 1000.0;
  const Biquad hp = bessel_highpass(cfg.f_lo, cfg.fs);
  const Biquad lp = bessel_lowpass(cfg.f_hi, cfg.fs);

  // In-band and at both corners the bilinear design matches the analog
  // prototypes to well under 2 percent relative.
  for (double f : {0.1, 1.0, 10.0, 60.0}) {
    const double analog = analog_hp_gain(f, cfg.f_lo) * analog_lp_gain(f, cfg.f_hi);
    const double digital = hp.gain_at(f, cfg.fs) * lp.gain_at(f, cfg.fs);
    CHECK(digital == doctest::Approx(analog).epsilon(0.02));
  }

  // Above the pass band frequency warping bends the response downward. At
  // 100 Hz the deviation stays within 2 percent of the unit mid-band gain;
  // beyond that the design only promises at-least-analog attenuation.
  {
    const double analog = analog_hp_gain(100.0, cfg.f_lo) * analog_lp_gain(100.0, cfg.f_hi);
    const double digital = hp.gain_at(100.0, cfg.fs) * lp.gain_at(100.0, cfg.fs);
    CHECK(std::abs(digital - analog) < 0.02);
  }
  {
    const double analog = analog_hp_gain(200.0, cfg.f_lo) * analog_lp_gain(200.0, cfg.f_hi);
    const double digital = hp.gain_at(200.0, cfg.fs) * lp.gain_at(200.0, cfg.fs);
    CHECK(digital < analog + 0.02);
  }
  // 200 Hz lands far below a third of the mid-band gain.
  CHECK(hp.gain_at(200.0, cfg.fs) * lp.gain_at(200.0, cfg.fs) < 1.0 / 3.0);
}

TEST_CASE("time-domain filtering agrees with the frequency response") {
  OracleConfig cfg;
  cfg.fs = 1000.0;
  const double f = 10.0;
  const int n = 60 * 1000;  // one minute: the 0.05 Hz transient dies out

  EcgTrace sine;
  sine.fs = cfg.fs;
  sine.samples.resize(n);
  for (int i = 0; i < n; ++i)
    sine.samples(i) = std::sin(2.0 * std::numbers::pi * f * i / cfg.fs);
  const EcgTrace out = bessel_bandpass(sine, cfg);
  CHECK(out.filtered);

  // Quadrature correlation over the last 10 seconds (an integer number of
  // cycles) recovers the steady-state amplitude.
  double a = 0.0, b = 0.0;
  const int tail = 10 * 1000;
  for (int i = n - tail; i < n; ++i) {
    a += out.samples(i) * std::sin(2.0 * std::numbers::pi * f * i / cfg.fs);
    b += out.samples(i) * std::cos(2.0 * std::numbers::pi * f * i / cfg.fs);
  }
  const double amp = 2.0 * std::hypot(a, b) / tail;
  const Biquad hp = bessel_highpass(cfg.f_lo, cfg.fs);
  const Biquad lp = bessel_lowpass(cfg.f_hi, cfg.fs);
  CHECK(amp == doctest::Approx(hp.gain_at(f, cfg.fs) * lp.gain_at(f, cfg.fs)).epsilon(1e-4));

  // Analytic cascade within 2 percent, per the design contract.
  CHECK(amp ==
        doctest::Approx(analog_hp_gain(f, cfg.f_lo) * analog_lp_gain(f, cfg.f_hi)).epsilon(0.02));
}

TEST_CASE("a held DC level is rejected once the slow transient settles") {
  OracleConfig cfg;
  cfg.fs = 1000.0;
  EcgTrace dc;
  dc.fs = cfg.fs;
  dc.samples = Eigen::VectorXd::Constant(45 * 1000, 1.0);  // 1 mV for 45 s
  const EcgTrace out = bessel_bandpass(dc, cfg);
  // The 0.05 Hz high-pass transient decays like exp(-0.21 t): still 0.15 mV
  // at 10 s and only below 0.01 mV from about 25 s onward.
  CHECK(std::abs(out.samples(10 * 1000 - 1)) > 0.1);
  for (int i = 40 * 1000; i < out.size(); ++i) CHECK(std::abs(out.samples(i)) < 0.01);

  EcgTrace relabeled = out;
  CHECK_THROWS_WITH_AS(bessel_bandpass(relabeled, cfg), doctest::Contains("already filtered"),
                       ValidationError);
}

TEST_CASE("forward ecg: zeros, exact doubling, relabeling symmetry") {
  OracleFixture fx;
  const ActivationField act = activation_times(fx.mesh, 0, 0.7, 4.0);
  const ApParams ap;
  VoltageSequence seq = gen_voltage_sequence(fx.mesh, act, ap, 7.5,
                                             act.times.maxCoeff() + ap.apd_ms + 20.0);
  OracleConfig cfg = fx.cfg;
  cfg.fs = 1000.0 / seq.frame_dt;  // keep the trace on the frame clock

  // All-resting sequence: raw trace identically zero, filtered too.
  VoltageSequence rest = seq;
  rest.frames.setConstant(ap.v_rest);
  const EcgTrace quiet = forward_ecg(fx.mesh, fx.ops, rest, cfg);
  CHECK(quiet.samples.cwiseAbs().maxCoeff() == 0.0);

  const EcgTrace raw = lead_ii_series(fx.mesh, fx.ops, seq, cfg);
  CHECK(!raw.filtered);
  CHECK(raw.size() == seq.n_frames());
  CHECK(raw.samples.cwiseAbs().maxCoeff() > 0.0);

  VoltageSequence twice = seq;
  twice.frames *= 2.0;
  const EcgTrace raw2 = lead_ii_series(fx.mesh, fx.ops, twice, cfg);
  CHECK((raw2.samples.array() == 2.0 * raw.samples.array()).all());

  // Consistent node relabeling leaves the trace unchanged.
  const int n = fx.mesh.n_vertices();
  SurfaceMesh rev = fx.mesh;
  for (int i = 0; i < n; ++i) rev.vertices.row(i) = fx.mesh.vertices.row(n - 1 - i);
  for (int f = 0; f < fx.mesh.n_faces(); ++f)
    for (int k = 0; k < 3; ++k) rev.faces(f, k) = n - 1 - fx.mesh.faces(f, k);
  rev.uac.resize(0, 2);
  const GeometricOperators rops = build_operators(rev, 8);
  VoltageSequence rseq = seq;
  for (int i = 0; i < n; ++i) rseq.frames.col(n - 1 - i) = seq.frames.col(i);
  const EcgTrace rtrace = lead_ii_series(rev, rops, rseq, cfg);
  const double scale = raw.samples.cwiseAbs().maxCoeff();
  CHECK((rtrace.samples - raw.samples).cwiseAbs().maxCoeff() < 1e-10 * scale);

  // Determinism: same inputs, identical bytes.
  const EcgTrace again = forward_ecg(fx.mesh, fx.ops, seq, cfg);
  const EcgTrace once = forward_ecg(fx.mesh, fx.ops, seq, cfg);
  CHECK((again.samples.array() == once.samples.array()).all());
}

TEST_CASE("forward ecg resamples the frame clock onto the config rate") {
  OracleFixture fx;
  const ActivationField act = activation_times(fx.mesh, 5, 0.7, 4.0);
  const ApParams ap;
  const double duration = act.times.maxCoeff() + ap.apd_ms + 20.0;
  VoltageSequence seq = gen_voltage_sequence(fx.mesh, act, ap, 7.5, duration);

  OracleConfig cfg = fx.cfg;  // fs = 1000 Hz vs 133.3 Hz frame clock
  const EcgTrace trace = forward_ecg(fx.mesh, fx.ops, seq, cfg);
  CHECK(trace.fs == 1000.0);
  const double t_end = (seq.n_frames() - 1) * seq.frame_dt;
  CHECK(trace.size() == static_cast<int>(std::floor(t_end / 1.0 + 1e-9)) + 1);
  CHECK(trace.filtered);
  CHECK(trace.samples.allFinite());
}
