#include <cmath>

#include "doctest.h"
#include "nlz/errors.hpp"
#include "nlz/linear_scattering.hpp"
#include "nlz/perturbation.hpp"

using namespace nlz;

namespace {

TwoLevelState state2(cplx a, cplx b) {
    TwoLevelState st{0.0, CVec(1), CVec(1)};
    st.u1(0) = a;
    st.u2(0) = b;
    return st;
}

ModelConfig identical(double g, Nonlinearity f, double delta = 0.0) {
    NonlinearitySpec nl;
    nl.delta = delta;
    nl.f1 = nl.f2 = f;
    return make_model(CouplingOperator::scalar(g), nl);
}

}  // namespace

TEST_CASE("vanishing integrands give zero phases") {
    const LambdaPm c = lambda_pm(state2(1, 0), identical(1.0, Nonlinearity::affine(0.7, 0, 0)));
    CHECK(std::abs(c.minus) < 1e-12);
    CHECK(std::abs(c.plus) < 1e-12);
    const LambdaPm g0 = lambda_pm(state2(0.6, cplx(0, 0.8)), identical(0.0, Nonlinearity::affine(0, 0, 1)));
    CHECK(std::abs(g0.minus) < 1e-9);
    CHECK(std::abs(g0.plus) < 1e-9);
}

TEST_CASE("lambda plus self-converges") {
    const ModelConfig m = identical(1.0, Nonlinearity::affine(0, 0, 1));
    const LambdaPm a = lambda_pm(state2(1, 0), m);
    LambdaOptions fine;
    fine.s_max = 400;
    fine.tol = 5e-12;
    const LambdaPm b = lambda_pm(state2(1, 0), m, fine);
    CHECK(std::abs(a.plus - b.plus) <= 2e-3);
    CHECK(std::abs(a.minus - b.minus) <= 2e-3);
    CHECK(std::abs(a.plus) > 1e-3);
    CHECK(std::isfinite(a.tail_plus.limit));
}

TEST_CASE("lambda requires identical nonlinearities") {
    CHECK_THROWS_AS(lambda_pm(state2(1, 0), preset_physics(1, 1, 0.1)), ConfigError);
}

TEST_CASE("exact formula reduces to the linear map") {
    const TwoLevelState alpha = state2(0.8, cplx(0, 0.6));
    const ModelConfig lin = make_model(CouplingOperator::scalar(1.0));
    const CVec s_alpha = slin_matrix(lin.g) * alpha.stacked();
    const ModelConfig q = identical(1.0, Nonlinearity::affine(0, 0, 1));
    CHECK((exact_scatter_f1f2(alpha, 0.0, q) - s_alpha).norm() < 1e-12);
    const ModelConfig c = identical(1.0, Nonlinearity::affine(0.4, 0, 0));
    for (double d : {0.1, 0.5, 2.0}) CHECK((exact_scatter_f1f2(alpha, d, c) - s_alpha).norm() < 1e-10);
    const ModelConfig pq = identical(1.0, Nonlinearity::affine(0, 1, 1));
    CHECK((exact_scatter_f1f2(alpha, 0.3, pq) - s_alpha).norm() < 1e-8);
}

TEST_CASE("deviation study on flat nonlinearities stays at the floor") {
    DevOptions o;
    o.require_resolved = false;
    const std::vector<double> deltas = {0.05, 0.1};
    for (const auto& f : {Nonlinearity::affine(0.9, 0, 0), Nonlinearity::affine(0, 1, 1)}) {
        const DevSlopeResult r = dev_slope_study(identical(1.0, f), state2(0.8, cplx(0, 0.6)), deltas, o);
        for (std::size_t i = 0; i < deltas.size(); ++i) CHECK(r.e1[i] <= 1e-5);
    }
}

TEST_CASE("first-order deviation for the Bloch-type nonlinearity") {
    NonlinearitySpec nl;
    nl.f1 = Nonlinearity::affine(0, 0, 1);
    nl.f2 = Nonlinearity::affine(0, 1, 0);
    const ModelConfig m = make_model(CouplingOperator::scalar(1.0), nl);
    const DevSlopeResult r = dev_slope_study(m, state2(1, 0), {0.02, 0.04, 0.08, 0.16});
    CHECK(r.slope_e1.slope == doctest::Approx(1.0).epsilon(0.15));
    CHECK_FALSE(r.identical);
}

TEST_CASE("exact formula for a non-affine identical nonlinearity") {
    const ModelConfig m = identical(1.0, Nonlinearity::general([](double, double q) { return q * q; }, "q^2"));
    const TwoLevelState alpha = state2(0.8, cplx(0, 0.6));
    const LambdaPm lam = lambda_pm(alpha, m);
    CHECK(std::abs(lam.plus + lam.minus) > 1e-3);
    const CVec lin = slin_matrix(m.g) * alpha.stacked();
    ScatteringOptions so;
    so.measure_phi = false;
    for (double d : {0.05, 0.1}) {
        const CVec num = scattering_map(alpha, m.with_delta(d), so).omega.stacked();
        const CVec ex = exact_scatter_f1f2(alpha, d, m, lam);
        CHECK((std::polar(1.0, align_phase(num, ex)) * num - ex).norm() <= 2e-3);
        for (int j = 0; j < 2; ++j) CHECK(std::abs(std::abs(num(j)) - std::abs(lin(j))) <= 1e-3);
    }
}
