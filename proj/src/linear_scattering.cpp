#include "nlz/linear_scattering.hpp"

#include <cmath>

#include "nlz/errors.hpp"
#include "nlz/nonlinear_scattering.hpp"

namespace nlz {

cplx complex_gamma(cplx z) {
    static constexpr double g = 7.0;
    static constexpr double p[] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                   771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                   -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (z.imag() == 0.0 && z.real() <= 0.0 && z.real() == std::floor(z.real()))
        throw ConfigError("complex_gamma: pole at a non-positive integer");
    if (z.real() < 0.5) return kPi / (std::sin(kPi * z) * complex_gamma(1.0 - z));
    z -= 1.0;
    cplx x = p[0];
    for (int i = 1; i < 9; ++i) x += p[i] / (z + static_cast<double>(i));
    const cplx t = z + g + 0.5;
    return std::sqrt(2.0 * kPi) * std::pow(t, z + 0.5) * std::exp(-t) * x;
}

SlinCoefficients slin_coefficients(double lambda) {
    if (lambda < 0) throw ConfigError("slin_coefficients: lambda must be nonnegative");
    const cplx i(0.0, 1.0);
    SlinCoefficients c;
    c.a = std::exp(-kPi * lambda / 2);
    // sinh(pi l/2)/l, series below 1e-4
    const double x = kPi * lambda / 2;
    const double sinh_over_l = lambda < 1e-4 ? (kPi / 2) * (1.0 + x * x / 6.0 + x * x * x * x / 120.0)
                                             : std::sinh(x) / lambda;
    c.b = 2.0 * i * std::exp(i * (kPi / 4)) / std::sqrt(kPi) * std::exp(-i * (lambda / 2) * std::log(2.0)) *
          std::exp(-kPi * lambda / 4) * complex_gamma(1.0 + i * (lambda / 2)) * sinh_over_l;
    return c;
}

CMat slin_matrix(const CouplingOperator& g) {
    const int n = g.dim();
    auto fa = [](double l) { return cplx(slin_coefficients(l).a, 0.0); };
    auto fb = [](double l) { return slin_coefficients(l).b; };
    auto fbc = [](double l) { return std::conj(slin_coefficients(l).b); };
    const CMat ggs = g.gg_star(), gsg = g.g_star_g();
    CMat s(2 * n, 2 * n);
    s.topLeftCorner(n, n) = hermitian_funcalc(ggs, fa);
    s.topRightCorner(n, n) = -hermitian_funcalc(ggs, fbc) * g.matrix();
    s.bottomLeftCorner(n, n) = hermitian_funcalc(gsg, fb) * g.adjoint();
    s.bottomRightCorner(n, n) = hermitian_funcalc(gsg, fa);
    return s;
}

double lz_transition(double z) { return std::exp(-kPi * z * z); }

double align_phase(const CMat& a, const CMat& b) {
    const cplx overlap = (a.adjoint() * b).trace();
    return std::abs(overlap) > 0 ? std::arg(overlap) : 0.0;
}

SlinCheck verify_slin_numeric(const CouplingOperator& g, const ScatteringOptions& opts) {
    const ModelConfig model = make_model(g);
    const int n = g.dim();
    SlinCheck out;
    out.numeric.resize(2 * n, 2 * n);
    for (int k = 0; k < 2 * n; ++k) {
        const ScatteringResult r = scattering_map(basis_state(n, k), model, opts);
        out.numeric.col(k) = r.omega.stacked();
    }
    out.closed_form = slin_matrix(g);
    out.phase = align_phase(out.numeric, out.closed_form);
    out.max_deviation = (std::polar(1.0, out.phase) * out.numeric - out.closed_form).cwiseAbs().maxCoeff();
    return out;
}

}  // namespace nlz
