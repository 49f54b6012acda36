#include <cmath>

#include "doctest.h"
#include "nlz/dynamics.hpp"
#include "nlz/errors.hpp"

using namespace nlz;

namespace {

TwoLevelState state2(cplx a, cplx b, double s = 0.0) {
    TwoLevelState st{s, CVec(1), CVec(1)};
    st.u1(0) = a;
    st.u2(0) = b;
    return st;
}

}  // namespace

TEST_CASE("rhs examples") {
    CVec d1, d2;
    rhs(state2(1, 0, 3.0), make_model(CouplingOperator::scalar(0.0)), d1, d2);
    CHECK(std::abs(d1(0) - cplx(0, 3)) < 1e-15);
    CHECK(std::abs(d2(0)) < 1e-15);
    rhs(state2(0, 1, 0.0), make_model(CouplingOperator::scalar(1.0)), d1, d2);
    CHECK(std::abs(d1(0) - cplx(0, 1)) < 1e-15);
    CHECK(std::abs(d2(0)) < 1e-15);
}

TEST_CASE("balanced populations switch off the population-difference nonlinearity") {
    const ModelConfig m = preset_physics(1.0, 1.0, 0.7);
    const TwoLevelState st = state2(1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 1.5);
    CVec d1, d2;
    rhs(st, m, d1, d2);
    const CVec expect = cplx(0, 1) * v_operator(1.5, m.g) * st.stacked();
    CHECK(std::abs(d1(0) - expect(0)) < 1e-14);
    CHECK(std::abs(d2(0) - expect(1)) < 1e-14);
}

TEST_CASE("decoupled linear solution") {
    IntegrateOptions o;
    o.samples = {1.0, 2.5, 5.0};
    const Trajectory tr = integrate(state2(1, 0), 5.0, make_model(CouplingOperator::scalar(0.0)), o);
    CHECK(std::abs(tr.back().u1(0) - std::polar(1.0, 12.5)) < 1e-9);
    CHECK(std::abs(tr.back().u2(0)) == 0.0);
}

TEST_CASE("decoupled nonlinear solution has an exact population drift") {
    NonlinearitySpec nl;
    nl.delta = 1.0;
    nl.f1 = Nonlinearity::affine(0, 0, 1);
    nl.f2 = Nonlinearity::affine(0, 1, 0);
    const ModelConfig m = make_model(CouplingOperator::scalar(0.0), nl);
    const cplx a(0.6, 0.0), b(0.0, 0.8);
    IntegrateOptions o;
    o.samples = {2.0, 5.0, 10.0};
    const Trajectory tr = integrate(state2(a, b), 10.0, m, o);
    for (const auto& smp : tr.samples) {
        const double s = smp.s;
        CHECK(std::abs(smp.u1(0) - std::polar(1.0, s * s / 2 + std::norm(b) * s) * a) < 1e-8);
        CHECK(std::abs(smp.u2(0) - std::polar(1.0, -s * s / 2 + std::norm(a) * s) * b) < 1e-8);
    }
}

TEST_CASE("linear transition over a finite window") {
    // |u1|^2 still oscillates with amplitude ~1/s at s = 150, so compare its mean over one local period.
    IntegrateOptions o;
    const double period = kPi / 150.0;
    for (int k = 0; k < 64; ++k) o.samples.push_back(150.0 - period + period * k / 63.0);
    const Trajectory tr = integrate(state2(1, 0, -150.0), 150.0, make_model(CouplingOperator::scalar(1.0)), o);
    double mean = 0;
    for (std::size_t k = 0; k + 1 < tr.samples.size(); ++k) mean += tr.samples[k].u1.squaredNorm() / 63.0;
    CHECK(std::abs(mean - std::exp(-kPi)) < 2e-3);
    CHECK(std::abs(tr.back().u1.squaredNorm() - std::exp(-kPi)) < 1.0 / 150.0);
}

TEST_CASE("gauge terms") {
    const ModelConfig lin = make_model(CouplingOperator::scalar(1.0));
    const GaugeTerms g0 = compute_gauge_terms(CVec::Constant(1, 0.5), CVec::Constant(1, std::sqrt(0.75)), lin);
    CHECK(g0.big_m == 0.0);
    CHECK(g0.small_m == 0.0);

    NonlinearitySpec nl;
    nl.delta = 2.0;
    nl.f1 = Nonlinearity::affine(0, 0, 1);
    nl.f2 = Nonlinearity::affine(0, 1, 0);
    const GaugeTerms g1 =
        compute_gauge_terms(CVec::Constant(1, 0.5), CVec::Constant(1, std::sqrt(0.75)), make_model(CouplingOperator::scalar(1.0), nl));
    CHECK(g1.big_m == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g1.small_m == doctest::Approx(0.5).epsilon(1e-14));

    nl.delta = 3.3;
    nl.f1 = nl.f2 = Nonlinearity::affine(0.4, 0, 0);
    const GaugeTerms g2 = compute_gauge_terms(CVec::Constant(1, 0.5), CVec::Constant(1, std::sqrt(0.75)),
                                              make_model(CouplingOperator::scalar(1.0), nl));
    CHECK(g2.small_m == 0.0);
}

TEST_CASE("gauge transform special cases") {
    const Trajectory lin = integrate(state2(1, 0, 0.0), 4.0, make_model(CouplingOperator::scalar(0.8)));
    const Trajectory v0 = gauge_to_v(lin);
    for (std::size_t i = 0; i < lin.samples.size(); ++i) {
        CHECK((v0.samples[i].u1 - lin.samples[i].u1).norm() == 0.0);
        CHECK((v0.samples[i].u2 - lin.samples[i].u2).norm() == 0.0);
    }

    NonlinearitySpec nl;
    nl.delta = 0.7;
    nl.f1 = nl.f2 = Nonlinearity::affine(1.5, 0, 0);
    const Trajectory tr = integrate(state2(0.6, 0.8, 0.0), 4.0, make_model(CouplingOperator::scalar(0.8), nl));
    const Trajectory v = gauge_to_v(tr);
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
        const cplx ph = std::polar(1.0, -0.7 * 1.5 * tr.samples[i].s);
        CHECK((v.samples[i].u1 - tr.samples[i].u1 * ph).norm() < 1e-10);
        CHECK(std::abs(v.samples[i].u1.norm() - tr.samples[i].u1.norm()) <= 1e-12);
        CHECK(std::abs(v.samples[i].u2.norm() - tr.samples[i].u2.norm()) <= 1e-12);
    }
}

TEST_CASE("gauge-transformed solution solves the shifted linear equation") {
    const ModelConfig m = preset_physics(1.0, 0.8, 0.5);
    const double h = 1e-3;
    std::vector<double> centers = {-3.0, -1.0, 0.5, 2.0, 4.0};
    IntegrateOptions o;
    for (double c : centers)
        for (int k = -2; k <= 2; ++k) o.samples.push_back(c + k * h);
    const Trajectory v = gauge_to_v(integrate(state2(0.6, cplx(0, 0.8), -5.0), 5.0, m, o));
    for (std::size_t c = 0; c < centers.size(); ++c) {
        auto w = [&](int k) { return TwoLevelState{0, v.samples[5 * c + 2 + k].u1, v.samples[5 * c + 2 + k].u2}.stacked(); };
        const CVec dv = (w(-2) - 8.0 * w(-1) + 8.0 * w(1) - w(2)) / (12 * h);
        const CVec mid = w(0);
        const TwoLevelState st{centers[c], v.samples[5 * c + 2].u1, v.samples[5 * c + 2].u2};
        const double m_val = compute_gauge_terms(st.u1, st.u2, m).small_m;
        const CVec res = cplx(0, -1) * dv - v_operator(centers[c] + m_val, m.g) * mid;
        CHECK(res.norm() <= 1e-6);
    }
}

TEST_CASE("presets") {
    const ModelConfig p1 = preset_physics(1, 1, 0);
    CHECK(std::abs(p1.g.matrix()(0, 0) - 1.0) < 1e-15);
    CHECK(p1.nonlinearity.delta == 0.0);
    CHECK(std::abs(preset_physics(4, 2, 0).g.matrix()(0, 0) - 1.0) < 1e-15);
    const ModelConfig p3 = preset_physics(1, 1, 0.3);
    for (double p : {0.1, 0.5, 0.9}) {
        const double q = 1 - p;
        CHECK(p3.nonlinearity.delta * p3.nonlinearity.f1(p, q) == doctest::Approx(-0.3 * (q - p)));
        CHECK(p3.nonlinearity.delta * p3.nonlinearity.f2(p, q) == doctest::Approx(0.3 * (q - p)));
    }

    const ModelConfig b1 = preset_bloch(0.5, 1, 1);
    CHECK(std::abs(b1.g.matrix()(0, 0) - 1.0) < 1e-15);
    CHECK(b1.nonlinearity.delta == doctest::Approx(1.0));
    const ModelConfig b2 = preset_bloch(2, 2, -1);
    CHECK(std::abs(b2.g.matrix()(0, 0) - 1.0) < 1e-15);
    CHECK(b2.nonlinearity.delta == doctest::Approx(-0.5));
    CHECK(b1.provenance.predicted_lz == doctest::Approx(std::exp(-kPi)));

    const ModelConfig d1 = preset_doublewell(1, 1, 0);
    CHECK(std::abs(d1.g.matrix()(0, 0) + 1.0) < 1e-15);
    CHECK(std::abs(preset_doublewell(2, 4, 0).g.matrix()(0, 0) + 1.0) < 1e-15);
    CHECK(d1.provenance.predicted_lz == doctest::Approx(std::exp(-kPi)));

    CHECK_THROWS_AS(preset_physics(0, 1, 0), ConfigError);
    CHECK_THROWS_AS(preset_bloch(-1, 1, 0), ConfigError);
}

TEST_CASE("conservation and cutoff persistence") {
    const ModelConfig m = preset_physics(1.0, 1.0, 0.3);
    const Trajectory tr = integrate(state2(0.6, cplx(0, 0.8), -60.0), 60.0, m);
    CHECK(tr.max_norm_drift <= 1e-9);
    for (std::size_t i = 0; i < tr.samples.size(); i += 7) CHECK(cutoff_defect(tr.state(i), m) <= 1e-10);
}

TEST_CASE("time reversal returns the initial state") {
    const ModelConfig m = preset_bloch(0.5, 0.7, 1.0);
    const double s_max = 30.0, tol = 1e-11;
    IntegrateOptions o;
    o.tol = tol;
    const TwoLevelState u0 = state2(0.8, cplx(0, 0.6));
    const Trajectory fwd = integrate(u0, s_max, m, o);
    const Trajectory back = integrate(fwd.state(fwd.samples.size() - 1), 0.0, m, o);
    CHECK((back.state(back.samples.size() - 1).stacked() - u0.stacked()).norm() <= 50 * tol * s_max);
}

TEST_CASE("integrate argument checks") {
    const ModelConfig m = make_model(CouplingOperator::scalar(1.0));
    IntegrateOptions o;
    o.samples = {2.0, 1.0};
    CHECK_THROWS_AS(integrate(state2(1, 0), 3.0, m, o), ConfigError);
    o.samples = {4.0};
    CHECK_THROWS_AS(integrate(state2(1, 0), 3.0, m, o), ConfigError);
    TwoLevelState bad{0, CVec::Zero(2), CVec::Zero(2)};
    CHECK_THROWS_AS(integrate(bad, 1.0, m), ConfigError);
}
