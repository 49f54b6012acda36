#include <cmath>

#include "doctest.h"
#include "nlz/double_well.hpp"
#include "nlz/errors.hpp"
#include "nlz/fitting.hpp"
#include "nlz/mode_reduction.hpp"
#include "nlz/split_step.hpp"

using namespace nlz;

namespace {

NlsProblem free_problem(double half, int n, double hbar) {
    NlsProblem p;
    p.x_min = -half;
    p.x_max = half;
    p.hbar = hbar;
    p.base = Eigen::VectorXd::Zero(n);
    return p;
}

// Free Gaussian exp(-x^2/(2a) + i k x) evolved by i hbar psi_t = -(hbar^2/2) psi_xx.
cplx free_gaussian(double x, double t, double a, double k, double hbar) {
    const cplx at = a + cplx(0, hbar * t);
    const double xc = x - hbar * k * t;
    return std::sqrt(a / at) * std::exp(-xc * xc / (2.0 * at) + cplx(0, k * x - 0.5 * hbar * k * k * t));
}

}  // namespace

TEST_CASE("harmonic spectrum on the grid") {
    const SpectralPair p = solve_eigenpair(harmonic_well(0.1));
    CHECK(std::abs(p.lambda_plus - 0.05) <= 1e-4);
    CHECK(std::abs(p.lambda_minus - 0.15) <= 1e-4);
}

TEST_CASE("default double well ordering and splitting trend") {
    const DoubleWellSetup s2 = default_double_well(0.2);
    const SpectralPair p2 = solve_eigenpair(s2);
    const double vmin = find_minima(s2.vs, s2.x_min, s2.x_max).v_min;
    CHECK(p2.lambda_plus < p2.lambda_minus);
    CHECK(p2.lambda_plus > vmin);
    CHECK(p2.lambda_minus < p2.lambda_third);
    const SpectralPair p1 = solve_eigenpair(default_double_well(0.1));
    CHECK(p2.omega_h / p1.omega_h > 5.0);
    CHECK(std::abs(p2.phi_plus.dot(p2.phi_minus) * p2.dx) <= 1e-10);
    CHECK(std::abs(p2.phi_plus.squaredNorm() * p2.dx - 1.0) <= 1e-10);
}

TEST_CASE("single-well states") {
    std::vector<double> inv, logo;
    for (double h : {0.2, 0.15, 0.1}) {
        const SpectralPair p = solve_eigenpair(default_double_well(h));
        const WellStates w = single_well_states(p);
        CHECK(w.mirror_defect <= 1e-8);
        CHECK(std::abs(w.inner) <= 1e-10);
        CHECK(std::abs(w.phi_l.squaredNorm() * p.dx - 1.0) <= 1e-10);
        CHECK(std::abs(w.phi_r.squaredNorm() * p.dx - 1.0) <= 1e-10);
        inv.push_back(1.0 / h);
        logo.push_back(std::log(w.overlap_sup));
        if (h == 0.1) {
            CHECK(w.overlap_sup <= 10 * std::exp(-0.5 / h));
            CHECK(w.mass_right > 1 - 1e-3);
        }
    }
    CHECK(fit_line(inv, logo).slope < 0);
}

TEST_CASE("grid validation") {
    DoubleWellSetup s = default_double_well(0.2);
    s.n = 40;
    CHECK_THROWS_AS(solve_eigenpair(s), ConfigError);
    DoubleWellSetup lop = default_double_well(0.2);
    lop.vs = [](double x) { return 0.5 * x * x + 0.1 * x; };
    CHECK_THROWS_AS(lop.validate(), ConfigError);
}

TEST_CASE("agmon distance") {
    auto flat = [](double x) {
        const double e = std::max(std::abs(x) - 1.0, 0.0);
        return e * e;
    };
    CHECK(agmon_distance(flat, -3, 3) == 0.0);
    const DoubleWellSetup q = quartic_well(0.2);
    CHECK_FALSE(q.hypotheses_hold);
    CHECK(agmon_distance(q) == doctest::Approx(4.0 / 3.0).epsilon(1e-7));
    const WellMinima w = find_minima(q.vs, q.x_min, q.x_max);
    CHECK(w.x_right == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(find_minima([](double x) { return (x * x - 1) * (x * x - 1) + 0.3 * x; }, -3, 3), NumericError);
}

TEST_CASE("free Gaussian evolution is exact") {
    const int n = 512;
    const double hbar = 1.0, a = 1.0, k = 1.5;
    NlsProblem p = free_problem(20.0, n, hbar);
    CVec psi0(n);
    for (int j = 0; j < n; ++j) psi0(j) = free_gaussian(p.x_min + j * p.dx(), 0.0, a, k, hbar);
    const NlsResult r = nls_split_step(p, psi0, 0.0, {1.0}, 0.05);
    double err = 0;
    for (int j = 0; j < n; ++j) err = std::max(err, std::abs(r.psi(j) - free_gaussian(p.x_min + j * p.dx(), 1.0, a, k, hbar)));
    CHECK(err <= 1e-8);
    CHECK(r.mass_drift <= 1e-10);
}

TEST_CASE("constant potential only rotates the phase") {
    const int n = 128;
    NlsProblem p = free_problem(10.0, n, 0.5);
    p.base = Eigen::VectorXd::Constant(n, 0.3);
    CVec psi0(n);
    for (int j = 0; j < n; ++j) psi0(j) = free_gaussian(p.x_min + j * p.dx(), 0.0, 1.0, 0.0, 0.5);
    const NlsResult free = nls_split_step(free_problem(10.0, n, 0.5), psi0, 0.0, {2.0}, 0.01);
    const NlsResult r = nls_split_step(p, psi0, 0.0, {2.0}, 0.01);
    CHECK((r.psi - std::polar(1.0, -0.3 * 2.0 / 0.5) * free.psi).norm() <= 1e-10 * std::sqrt(n));
}

TEST_CASE("split step is second order and conserves mass") {
    const int n = 128;
    NlsProblem p = free_problem(8.0, n, 1.0);
    for (int j = 0; j < n; ++j) {
        const double x = p.x_min + j * p.dx();
        p.base(j) = 0.5 * x * x;
    }
    p.eps = 0.5;
    p.cfl = 1.0;
    CVec psi0(n);
    for (int j = 0; j < n; ++j) psi0(j) = free_gaussian(p.x_min + j * p.dx(), 0.0, 0.7, 0.8, 1.0);
    const NlsResult ref = nls_split_step(p, psi0, 0.0, {1.0}, 1e-4);
    const NlsResult c = nls_split_step(p, psi0, 0.0, {1.0}, 0.02);
    const NlsResult f = nls_split_step(p, psi0, 0.0, {1.0}, 0.01);
    const double ec = (c.psi - ref.psi).norm(), ef = (f.psi - ref.psi).norm();
    CHECK(ec / ef == doctest::Approx(4.0).epsilon(0.15));
    CHECK(c.mass_drift <= 1e-10);
    p.order = 4;
    const NlsResult c4 = nls_split_step(p, psi0, 0.0, {1.0}, 0.02);
    CHECK((c4.psi - ref.psi).norm() < ec / 50);
}

TEST_CASE("split step guards") {
    const int n = 64;
    NlsProblem p = free_problem(8.0, n, 0.1);
    p.base = Eigen::VectorXd::Constant(n, 10.0);
    CVec psi0 = CVec::Constant(n, 0.1);
    CHECK_THROWS_AS(nls_split_step(p, psi0, 0.0, {1.0}, 0.01), ConfigError);
    NlsProblem q = free_problem(8.0, n, 1.0);
    q.boundary_limit = 1e-10;
    CHECK_THROWS_AS(nls_split_step(q, psi0, 0.0, {0.1}, 0.01), NumericError);
}

TEST_CASE("ground state of the double well is stationary") {
    const DoubleWellSetup s = default_double_well(0.2);
    const SpectralPair pr = solve_eigenpair(s);
    NlsProblem p;
    p.x_min = s.x_min;
    p.x_max = s.x_max;
    p.hbar = s.hbar;
    p.base = s.vs_samples();
    p.shift = pr.lambda_plus;
    p.symbol = KineticSymbol::ThreePoint;
    p.order = 4;
    const CVec phi = pr.phi_plus.cast<cplx>();
    double worst = 0;
    std::vector<double> obs;
    for (int k = 1; k <= 10; ++k) obs.push_back(0.1 * k);
    nls_split_step(p, phi, 0.0, obs, 0.1 * s.hbar / 8.0, [&](double, const CVec& psi) {
        worst = std::max(worst, std::abs(std::abs(phi.dot(psi) * pr.dx) - 1.0));
    });
    CHECK(worst <= 1e-6);
}

TEST_CASE("envelope equations") {
    std::vector<double> taus;
    for (int k = 1; k <= 20; ++k) taus.push_back(0.5 * k);
    const EnvelopeTrajectory rabi = envelope_integrate(1.0, 0.0, 0.0, 0.0, 0.0, taus);
    for (std::size_t i = 0; i < taus.size(); ++i) CHECK(std::abs(std::norm(rabi.a_l[i]) - std::pow(std::cos(taus[i]), 2)) <= 1e-9);

    std::vector<double> t2;
    for (int k = 0; k <= 20; ++k) t2.push_back(-5.0 + 0.5 * k);
    const cplx al(0.6, 0.0), ar(0.0, 0.8);
    const EnvelopeTrajectory a = envelope_integrate(al, ar, 1.3, 0.4, -6.0, t2);
    const EnvelopeTrajectory b = envelope_via_model(al, ar, 1.3, 0.4, -6.0, t2);
    for (std::size_t i = 0; i < t2.size(); ++i) {
        CHECK(std::abs(a.a_l[i] - b.a_l[i]) <= 1e-9);
        CHECK(std::abs(a.a_r[i] - b.a_r[i]) <= 1e-9);
    }
    CHECK_THROWS_AS(envelope_via_model(al, ar, 0.0, 0.0, -1.0, {0.0}), ConfigError);
    CHECK_THROWS_AS(envelope_integrate(1.0, 1.0, 0.0, 0.0, 0.0, {1.0}), ConfigError);
}

TEST_CASE("envelope transition coefficient") {
    const EnvelopeTransition t = envelope_transition(1.0, 0.0, 200.0);
    CHECK(t.predicted == doctest::Approx(std::exp(-kPi)));
    CHECK(std::abs(t.ratio - t.predicted) <= 5e-3);
    CHECK(std::abs(t.ratio_doubled - t.predicted) <= 5e-3);
}

TEST_CASE("two-mode reduction of the stationary state") {
    const DoubleWellSetup s = default_double_well(0.25);
    const TwoModeResult r = two_mode_error(s, 1 / std::sqrt(2.0), 1 / std::sqrt(2.0));
    CHECK(r.sup_error <= 1e-6);
    CHECK(r.t_window == doctest::Approx(0.5 * std::sqrt(0.25) / r.omega_h));
}

TEST_CASE("two-mode reduction of a tunnelling state") {
    const DoubleWellSetup s = default_double_well(0.25);
    TwoModeOptions o;
    o.cfl = 0.4;
    const TwoModeResult r = two_mode_error(s, 1.0, 0.0, o);
    CHECK(r.sup_error <= 5e-3);
    CHECK(r.mass_drift <= 1e-10 * std::max(1.0, r.t_window));
}

TEST_CASE("lattice reduction") {
    const LatticeResult r0 = lattice_two_mode_check(0.02, 0.0, 0.0, -10.0, 10.0);
    CHECK(r0.discrepancy <= 1e-8);
    const LatticeResult r = lattice_two_mode_check(0.02, 0.2, 0.0, -10.0, 10.0);
    CHECK(r.discrepancy <= r.max_leaked + 1e-6);
    for (double eps : {-1.0, 1.0}) {
        const LatticeResult rn = lattice_two_mode_check(0.02, 0.2, eps, -10.0, 10.0);
        CHECK(std::isfinite(rn.discrepancy));
        CHECK(rn.max_leaked > 0);
    }
}
