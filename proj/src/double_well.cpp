#include "nlz/double_well.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <lapacke.h>

#include "nlz/errors.hpp"

namespace nlz {

namespace {

constexpr const char* kModule = "mode-reduction-lab";

int auto_points(double hbar, double half_width, int n) {
    if (n > 0) return n;
    int m = static_cast<int>(std::ceil(2.0 * half_width / (hbar / 4.0)));
    m += m % 2;
    auto smooth = [](int v) {
        for (int p : {2, 3, 5})
            while (v % p == 0) v /= p;
        return v == 1;
    };
    while (!smooth(m)) m += 2;
    return m;
}

struct Sector {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  // columns, in sector coordinates
};

// Lowest `count` eigenpairs of a symmetric tridiagonal matrix.
Sector tridiagonal_lowest(std::vector<double> d, std::vector<double> e, int count, bool vectors) {
    const lapack_int n = static_cast<lapack_int>(d.size());
    lapack_int m = 0;
    std::vector<double> w(n);
    std::vector<double> z(vectors ? static_cast<std::size_t>(n) * count : 1);
    std::vector<lapack_int> isuppz(2 * count);
    e.push_back(0.0);
    const lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'I', n, d.data(), e.data(), 0.0, 0.0,
                                           1, count, 0.0, &m, w.data(), z.data(), n, isuppz.data());
    if (info != 0 || m != count) throw NumericError(kModule, "tridiagonal eigensolver failed");
    Sector out;
    out.values = Eigen::Map<Eigen::VectorXd>(w.data(), count);
    if (vectors) out.vectors = Eigen::Map<Eigen::MatrixXd>(z.data(), n, count);
    return out;
}

// Even and odd sectors of the Dirichlet 3-point operator on interior points 1..n-1 (x_{n/2} = 0).
struct ParitySpectrum {
    Sector even, odd;
};

ParitySpectrum parity_spectrum(const Eigen::VectorXd& v, double hbar, double dx, bool vectors) {
    const int n = static_cast<int>(v.size());
    const int h = n / 2;
    const double off = -hbar * hbar / (2 * dx * dx);
    const double dia = hbar * hbar / (dx * dx);
    std::vector<double> de, ee, dodd, eodd;
    for (int j = 1; j <= h; ++j) de.push_back(dia + v(j));
    for (int j = 1; j < h; ++j) ee.push_back(off);
    ee.back() = off * std::sqrt(2.0);
    for (int j = 1; j < h; ++j) dodd.push_back(dia + v(j));
    for (int j = 1; j < h - 1; ++j) eodd.push_back(off);
    ParitySpectrum out;
    out.even = tridiagonal_lowest(de, ee, 2, vectors);
    out.odd = tridiagonal_lowest(dodd, eodd, 2, vectors);
    return out;
}

Eigen::VectorXd unfold(const Eigen::VectorXd& y, int n, bool even, double dx) {
    const int h = n / 2;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    for (int j = 1; j < h; ++j) {
        f(j) = y(j - 1);
        f(n - j) = even ? y(j - 1) : -y(j - 1);
    }
    if (even) f(h) = y(h - 1) * std::sqrt(2.0);
    return f / std::sqrt(f.squaredNorm() * dx);
}

double simpson_adaptive(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6 * (fa + 4 * flm + fm);
    const double right = (b - m) / 6 * (fm + 4 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15 * tol) return left + right + diff / 15;
    return simpson_adaptive(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson_adaptive(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return simpson_adaptive(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, 50);
}

}  // namespace

Eigen::VectorXd DoubleWellSetup::vs_samples() const {
    Eigen::VectorXd v(n);
    for (int j = 0; j < n; ++j) v(j) = vs(x(j));
    return v;
}

Eigen::VectorXd DoubleWellSetup::va_samples() const {
    Eigen::VectorXd v(n);
    for (int j = 0; j < n; ++j) v(j) = va ? va(x(j)) : 0.0;
    return v;
}

void DoubleWellSetup::validate() const {
    if (!(hbar > 0)) throw ConfigError("double well: hbar must be positive");
    if (n < 8 || n % 2 != 0 || n > 16384) throw ConfigError("double well: n must be even, between 8 and 16384");
    if (std::abs(x_min + x_max) > 1e-12 * std::abs(x_max) || !(x_max > 0))
        throw ConfigError("double well: grid must be symmetric about 0");
    if (!vs) throw ConfigError("double well: missing symmetric potential");
    if (dx() > hbar / 4 * (1 + 1e-12)) throw ConfigError("double well: grid too coarse, need dx <= hbar/4");
    const Eigen::VectorXd s = vs_samples(), a = va_samples();
    for (int j = 1; j < n; ++j) {
        if (std::abs(s(j) - s(n - j)) > 1e-12 * std::max(1.0, std::abs(s(j))))
            throw ConfigError("double well: V_s is not symmetric on the grid");
        if (std::abs(a(j) + a(n - j)) > 1e-12 * std::max(1.0, std::abs(a(j))))
            throw ConfigError("double well: V_a is not antisymmetric on the grid");
    }
}

DoubleWellSetup default_double_well(double hbar, double half_width, int n, double amplitude, double width) {
    DoubleWellSetup s;
    s.x_min = -half_width;
    s.x_max = half_width;
    s.hbar = hbar;
    s.n = auto_points(hbar, half_width, n);
    s.vs = [amplitude, width](double x) { return 0.5 * x * x + amplitude * std::exp(-x * x / (2 * width * width)); };
    s.va = [](double x) { return std::tanh(x); };
    return s;
}

DoubleWellSetup harmonic_well(double hbar, double half_width, int n) {
    DoubleWellSetup s = default_double_well(hbar, half_width, n);
    s.vs = [](double x) { return 0.5 * x * x; };
    s.potential = "harmonic";
    return s;
}

DoubleWellSetup quartic_well(double hbar, double half_width, int n) {
    DoubleWellSetup s = default_double_well(hbar, half_width, n);
    s.vs = [](double x) { return (x * x - 1) * (x * x - 1); };
    s.potential = "quartic";
    s.hypotheses_hold = false;
    return s;
}

SpectralPair solve_eigenpair(const DoubleWellSetup& setup) {
    setup.validate();
    const int n = setup.n;
    const double dx = setup.dx();
    const ParitySpectrum ps = parity_spectrum(setup.vs_samples(), setup.hbar, dx, true);

    SpectralPair out;
    out.dx = dx;
    out.lambda_plus = ps.even.values(0);
    out.lambda_minus = ps.odd.values(0);
    out.lambda_third = std::min(ps.even.values(1), ps.odd.values(1));
    out.phi_plus = unfold(ps.even.vectors.col(0), n, true, dx);
    out.phi_minus = unfold(ps.odd.vectors.col(0), n, false, dx);
    if (out.phi_plus.sum() < 0) out.phi_plus = -out.phi_plus;
    if (out.phi_minus.tail(n / 2).sum() < 0) out.phi_minus = -out.phi_minus;
    out.phi_l = (out.phi_plus - out.phi_minus) / std::sqrt(2.0);
    out.phi_r = (out.phi_plus + out.phi_minus) / std::sqrt(2.0);
    out.omega_h = 0.5 * (out.lambda_minus - out.lambda_plus);
    out.big_omega_h = 0.5 * (out.lambda_minus + out.lambda_plus);

    DoubleWellSetup fine = setup;
    fine.n = 2 * n;
    const ParitySpectrum pf = parity_spectrum(fine.vs_samples(), setup.hbar, fine.dx(), false);
    out.disc_error = std::max(std::abs(pf.even.values(0) - out.lambda_plus), std::abs(pf.odd.values(0) - out.lambda_minus));
    out.gap_error = std::abs((pf.odd.values(0) - pf.even.values(0)) - (out.lambda_minus - out.lambda_plus));
    if (!(out.lambda_minus > out.lambda_plus) || out.lambda_minus - out.lambda_plus < 10 * out.gap_error)
        throw NumericError(kModule, "unresolved splitting: gap below ten times its discretization error");
    return out;
}

WellStates single_well_states(const SpectralPair& pair) {
    WellStates out;
    out.phi_l = pair.phi_l;
    out.phi_r = pair.phi_r;
    const int n = static_cast<int>(pair.phi_l.size());
    out.overlap_sup = pair.phi_l.cwiseProduct(pair.phi_r).cwiseAbs().maxCoeff();
    out.inner = pair.phi_l.dot(pair.phi_r) * pair.dx;
    for (int j = n / 2 + 1; j < n; ++j) out.mass_right += pair.phi_r(j) * pair.phi_r(j) * pair.dx;
    out.mass_right += 0.5 * pair.phi_r(n / 2) * pair.phi_r(n / 2) * pair.dx;
    for (int j = 1; j < n; ++j) out.mirror_defect = std::max(out.mirror_defect, std::abs(pair.phi_r(n - j) - pair.phi_l(j)));
    out.mirror_defect = std::max(out.mirror_defect, std::abs(pair.phi_r(0) - pair.phi_l(0)));
    return out;
}

WellMinima find_minima(const std::function<double(double)>& v, double x_min, double x_max) {
    const int m = 20000;
    const double h = (x_max - x_min) / m;
    // ties resolve towards x = 0, so a flat bottom between the wells yields its inner edges
    auto refine = [&](int lo, int hi, bool left) {
        int best = lo;
        for (int j = lo; j <= hi; ++j) {
            const double vj = v(x_min + j * h), vb = v(x_min + best * h);
            if (vj < vb || (left && vj == vb)) best = j;
        }
        double x = x_min + best * h;
        if (best > lo && best < hi) {
            const double a = v(x - h), b = v(x), c = v(x + h);
            const double den = a - 2 * b + c;
            if (den > 0) x += 0.5 * h * (a - c) / den;
        }
        return x;
    };
    WellMinima out;
    out.x_left = refine(0, m / 2, true);
    out.x_right = refine(m / 2, m, false);
    if (std::abs(out.x_left + out.x_right) > 1e-6 * std::max(1.0, std::abs(out.x_right)))
        throw NumericError(kModule, "potential minima are not symmetric");
    const double vl = v(out.x_left), vr = v(out.x_right);
    if (std::abs(vl - vr) > 1e-9 * std::max(1.0, std::abs(vl))) throw NumericError(kModule, "well depths differ");
    out.v_min = std::min(vl, vr);
    return out;
}

double agmon_distance(const std::function<double(double)>& v, double x_min, double x_max) {
    const WellMinima w = find_minima(v, x_min, x_max);
    if (w.x_right - w.x_left <= 0) return 0.0;
    auto f = [&](double x) { return std::sqrt(std::max(v(x) - w.v_min, 0.0)); };
    return simpson(f, w.x_left, w.x_right, 1e-8);
}

double agmon_distance(const DoubleWellSetup& setup) {
    return agmon_distance(setup.vs, setup.x_min, setup.x_max);
}

}  // namespace nlz
