#include <random>

#include "doctest.h"
#include "nlz/errors.hpp"
#include "nlz/fitting.hpp"
#include "nlz/operator_core.hpp"

using namespace nlz;

namespace {

CMat random_matrix(std::mt19937& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    CMat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = cplx(nd(rng), nd(rng));
    return m;
}

CMat e1_block(int n) {
    CMat e = CMat::Zero(2 * n, 2 * n);
    e.topLeftCorner(n, n).setIdentity();
    return e;
}

// Direct evaluation of a polynomial with matrix argument, no eigendecomposition involved.
CMat poly(const std::vector<double>& c, const CMat& a) {
    CMat out = CMat::Zero(a.rows(), a.cols());
    for (auto it = c.rbegin(); it != c.rend(); ++it) out = out * a + *it * CMat::Identity(a.rows(), a.cols());
    return out;
}

}  // namespace

TEST_CASE("funcalc on trivial and scalar inputs") {
    CMat zero = CMat::Zero(1, 1);
    CHECK(std::abs(hermitian_funcalc(zero, [](double x) { return cplx(std::exp(x)); })(0, 0) - 1.0) < 1e-14);
    CMat four = CMat::Identity(1, 1) * 4.0;
    CHECK(std::abs(hermitian_funcalc(four, [](double x) { return cplx(std::sqrt(x)); })(0, 0) - 2.0) < 1e-14);
}

TEST_CASE("funcalc squares agree with the matrix product") {
    CMat a(2, 2);
    a << 2, 1, 1, 2;
    const CMat sq = hermitian_funcalc(a, [](double x) { return cplx(x * x); });
    CHECK((sq - a * a).norm() < 1e-12);
}

TEST_CASE("funcalc rejects non-Hermitian and clearly negative input") {
    CMat a(2, 2);
    a << 1, 2, 0, 1;
    CHECK_THROWS(hermitian_funcalc(a, [](double x) { return cplx(x); }));
    CMat neg = -CMat::Identity(2, 2);
    CHECK_THROWS(hermitian_funcalc(neg, [](double x) { return cplx(x); }));
    CMat tiny = CMat::Identity(2, 2);
    tiny(1, 1) = -1e-14;
    CHECK_NOTHROW(hermitian_funcalc(tiny, [](double x) { return cplx(std::sqrt(x)); }));
}

TEST_CASE("phase unitary values") {
    const CMat p0 = phase_unitary(2.0, CMat::Zero(1, 1), +1);
    CHECK(std::abs(p0(0, 0) - std::polar(1.0, 2.0)) < 1e-14);
    const CMat p1 = phase_unitary(2.0, CMat::Identity(1, 1), +1);
    CHECK(std::abs(p1(0, 0) - std::polar(1.0, 2.0 + 0.5 * std::log(2.0))) < 1e-14);
    CMat a = CMat::Zero(2, 2);
    a(0, 0) = 1;
    a(1, 1) = 4;
    const double e = std::exp(1.0);
    const CMat p2 = phase_unitary(e, a, -1);
    CHECK(std::abs(p2(0, 0) - std::polar(1.0, -(e * e / 2 + 0.5))) < 1e-13);
    CHECK(std::abs(p2(1, 1) - std::polar(1.0, -(e * e / 2 + 2.0))) < 1e-13);
    CHECK(std::abs(p2(0, 1)) < 1e-15);
    CHECK_THROWS_AS(phase_unitary(0.0, a, 1), ConfigError);
}

TEST_CASE("phase unitary is unitary and commutes with its argument") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const CMat g = random_matrix(rng, 3);
        const CMat a = g * g.adjoint();
        const CMat u = phase_unitary(-3.7 + trial, a, trial % 2 ? 1 : -1);
        CHECK((u.adjoint() * u - CMat::Identity(3, 3)).norm() < 1e-10);
        CHECK((u * a - a * u).norm() < 1e-10 * (1 + a.norm()));
    }
}

TEST_CASE("theta profile shape") {
    CHECK(theta_profile(0.0) == 1.0);
    CHECK(theta_profile(0.5) == 1.0);
    CHECK(theta_profile(-0.5) == 1.0);
    CHECK(theta_profile(1.0) == 0.0);
    CHECK(theta_profile(2.0) == 0.0);
    double prev = 1.0;
    for (double u = 0.5; u <= 1.0; u += 0.01) {
        const double t = theta_profile(u);
        CHECK(t <= prev + 1e-15);
        CHECK(t >= 0.0);
        prev = t;
    }
}

TEST_CASE("cutoff examples") {
    CHECK((theta_cutoff(2.0, CouplingOperator::scalar(1.0)) - CMat::Identity(2, 2)).norm() < 1e-14);
    CHECK(theta_cutoff(1.0, CouplingOperator::scalar(2.0)).norm() < 1e-14);
    const auto q = CouplingOperator::quaternion(0.6, 0.0, 0.8, 0.0);
    CHECK((theta_cutoff(2.0, q) - CMat::Identity(4, 4)).norm() < 1e-14);
}

TEST_CASE("cutoff is identity above the threshold radius and commutes with V") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = CouplingOperator::general(random_matrix(rng, 2));
        const double r = std::sqrt(2.0) * g.max_singular_value();
        CHECK((theta_cutoff(r, g) - CMat::Identity(4, 4)).norm() < 1e-12);
        const CMat th = theta_cutoff(0.7 * r, g);
        const CMat v = v_operator(1.3 + trial, g);
        CHECK((th * v - v * th).norm() < 1e-10);
        Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (th + th.adjoint()));
        CHECK(es.eigenvalues().minCoeff() > -1e-12);
        CHECK(es.eigenvalues().maxCoeff() < 1 + 1e-12);
    }
}

TEST_CASE("block operators") {
    std::mt19937 rng(3);
    const auto g = CouplingOperator::general(random_matrix(rng, 3));
    const CMat j = j_operator(3), k = k_operator(g);
    CHECK((j * j - CMat::Identity(6, 6)).norm() < 1e-15);
    CHECK((k - k.adjoint()).norm() < 1e-15);
    const CMat v = v_operator(2.5, g);
    CHECK((v - v.adjoint()).norm() < 1e-14);
    CHECK((v - (2.5 * j + k)).norm() < 1e-14);
}

TEST_CASE("coupling operator kinds") {
    const auto q = CouplingOperator::quaternion(0.3, 0.4, 0.5, 0.1);
    CHECK(q.kind() == CouplingKind::Quaternion);
    const double r2 = 0.09 + 0.16 + 0.25 + 0.01;
    CHECK((q.gg_star() - r2 * CMat::Identity(2, 2)).norm() < 1e-14);
    CHECK((q.g_star_g() - r2 * CMat::Identity(2, 2)).norm() < 1e-14);
    CHECK(CouplingOperator::scalar(cplx(0.0, 2.0)).kind() == CouplingKind::ScalarComplex);
    CHECK(CouplingOperator::scalar(2.0).kind() == CouplingKind::ScalarReal);
}

TEST_CASE("commutation certificate with random polynomials") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ud(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const CMat g = random_matrix(rng, 1 + trial % 4);
        std::vector<double> c(7);
        for (auto& x : c) x = ud(rng);
        const CMat lhs = poly(c, g * g.adjoint()) * g;
        const CMat rhs = g * poly(c, g.adjoint() * g);
        CHECK((lhs - rhs).norm() <= 1e-10 * std::pow(1 + g.norm(), 7));
        const CouplingOperator op = CouplingOperator::general(g);
        const CMat ggs = op.gg_star();
        CHECK((ggs - ggs.adjoint()).norm() < 1e-12);
        const CMat fl = hermitian_funcalc(op.gg_star(), [&](double x) {
            double v = 0;
            for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
            return cplx(v);
        });
        CHECK((fl - poly(c, ggs)).norm() < 1e-9 * std::pow(1 + g.norm(), 7));
    }
}

TEST_CASE("projector examples") {
    const auto z0 = CouplingOperator::scalar(0.0);
    const ProjectorPair p0 = projectors(3.0, 0.0, z0);
    CHECK((p0.plus - e1_block(1)).norm() < 1e-14);
    CHECK((p0.minus - (CMat::Identity(2, 2) - e1_block(1))).norm() < 1e-14);

    const auto g1 = CouplingOperator::scalar(1.0);
    const ProjectorPair p1 = projectors(0.0, 0.0, g1);
    const CMat k = k_operator(g1);
    CHECK((p1.plus - 0.5 * (CMat::Identity(2, 2) + k)).norm() < 1e-14);
    CHECK((p1.minus - 0.5 * (CMat::Identity(2, 2) - k)).norm() < 1e-14);

    const ProjectorPair p100 = projectors(100.0, 0.0, g1);
    CHECK((p100.plus - e1_block(1) - 0.5 * p100.lambda.inverse() * k).norm() <= 1e-3);

    CHECK_THROWS(projectors(0.0, 0.0, z0));
}

TEST_CASE("projector invariants on random samples") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> us(-50, 50);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 3;
        const auto g = CouplingOperator::general(random_matrix(rng, n));
        const double s = us(rng);
        const ProjectorPair p = projectors(s, 0.0, g);
        const CMat id = CMat::Identity(2 * n, 2 * n);
        CHECK((p.plus + p.minus - id).norm() < 1e-10);
        CHECK((p.plus * p.plus - p.plus).norm() < 1e-10);
        CHECK((p.minus * p.minus - p.minus).norm() < 1e-10);
        CHECK((p.plus - p.plus.adjoint()).norm() < 1e-10);
        CHECK((p.plus * p.minus).norm() < 1e-10);
        CHECK((p.plus * p.lambda - p.lambda * p.plus).norm() < 1e-10 * (1 + std::abs(s)));
        const CMat v = v_operator(s, g);
        CHECK((v * v - p.lambda * p.lambda).norm() < 1e-10 * (1 + s * s));
        CHECK((p.plus * v - p.lambda * p.plus).norm() < 1e-10 * (1 + std::abs(s)));
        CHECK((p.minus * v + p.lambda * p.minus).norm() < 1e-10 * (1 + std::abs(s)));
    }
}

TEST_CASE("projector expansion residual decays like 1/s^2") {
    const auto g = CouplingOperator::quaternion(0.5, 0.3, 0.2, 0.4);
    const CMat th = theta_cutoff(1.0, g);
    const CMat k = k_operator(g);
    std::vector<double> s, r;
    for (double x = 20; x <= 200; x *= 1.25) {
        const ProjectorPair p = projectors(x, 0.0, g);
        s.push_back(x);
        r.push_back((p.plus * th - e1_block(2) * th - 0.5 * p.lambda.inverse() * k * th).norm());
    }
    CHECK(fit_loglog(s, r).slope == doctest::Approx(-2.0).epsilon(0.05));
}
