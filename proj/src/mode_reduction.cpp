#include "nlz/mode_reduction.hpp"

#include <algorithm>
#include <cmath>

#include "nlz/errors.hpp"

namespace nlz {

namespace {

struct EnvelopeSystem {
    double eta = 0.0, delta = 0.0;
    void operator()(double tau, const double* y, double* dy) const {
        const cplx al(y[0], y[1]), ar(y[2], y[3]);
        const cplx fl = eta * tau * al - ar + delta * std::norm(al) * al;
        const cplx fr = -eta * tau * ar - al + delta * std::norm(ar) * ar;
        // a' = -i f
        dy[0] = fl.imag();
        dy[1] = -fl.real();
        dy[2] = fr.imag();
        dy[3] = -fr.real();
    }
};

void check_monotone(double t0, const std::vector<double>& samples) {
    if (samples.empty()) return;
    const double dir = samples.back() >= t0 ? 1.0 : -1.0;
    double prev = t0;
    for (double t : samples) {
        if ((t - prev) * dir < 0) throw ConfigError("sample times must be monotone away from the start");
        prev = t;
    }
}

}  // namespace

EnvelopeTrajectory envelope_integrate(cplx a_l0, cplx a_r0, double eta, double delta_h, double tau0,
                                      const std::vector<double>& samples, double tol) {
    const double norm0 = std::norm(a_l0) + std::norm(a_r0);
    if (std::abs(norm0 - 1.0) > 1e-10) throw ConfigError("envelope: initial amplitudes must be normalized");
    check_monotone(tau0, samples);
    Dop853Options o;
    o.rtol = 0.0;
    o.atol = tol;
    o.group = 2;
    o.per_unit_step = true;
    Dop853<EnvelopeSystem> solver(EnvelopeSystem{eta, delta_h}, 4, o);
    const double y0[4] = {a_l0.real(), a_l0.imag(), a_r0.real(), a_r0.imag()};
    solver.reset(tau0, y0);
    EnvelopeTrajectory out;
    for (double t : samples) {
        try {
            solver.advance_to(t);
        } catch (const StepSizeUnderflow& e) {
            throw NumericError("mode-reduction-lab", "envelope integration failure at tau = " + std::to_string(e.time()));
        }
        const auto& y = solver.state();
        out.tau.push_back(t);
        out.a_l.emplace_back(y[0], y[1]);
        out.a_r.emplace_back(y[2], y[3]);
        out.max_norm_drift =
            std::max(out.max_norm_drift, std::abs(std::norm(out.a_l.back()) + std::norm(out.a_r.back()) - norm0));
    }
    out.stats = solver.stats();
    return out;
}

EnvelopeTrajectory envelope_via_model(cplx a_l0, cplx a_r0, double eta, double delta_h, double tau0,
                                      const std::vector<double>& samples, double tol) {
    if (!(eta > 0)) throw ConfigError("envelope: the change of variables s = sqrt(eta) tau needs eta > 0");
    check_monotone(tau0, samples);
    const double r = std::sqrt(eta);
    // the model runs in conjugated amplitudes
    const ModelConfig model = preset_doublewell(1.0, eta, delta_h);
    TwoLevelState start{r * tau0, CVec::Constant(1, std::conj(a_l0)), CVec::Constant(1, std::conj(a_r0))};
    IntegrateOptions io;
    io.tol = tol;
    for (double t : samples) io.samples.push_back(r * t);
    const double s_end = io.samples.empty() ? start.s : io.samples.back();
    const Trajectory tr = integrate(start, s_end, model, io);
    EnvelopeTrajectory out;
    out.max_norm_drift = tr.max_norm_drift;
    out.stats = tr.stats;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out.tau.push_back(samples[i]);
        out.a_l.push_back(std::conj(tr.samples[i].u1(0)));
        out.a_r.push_back(std::conj(tr.samples[i].u2(0)));
    }
    return out;
}

EnvelopeTransition envelope_transition(double eta, double delta_h, double tau_max, double tol) {
    if (!(eta > 0) || !(tau_max > 0)) throw ConfigError("envelope transition: eta and T must be positive");
    EnvelopeTransition out;
    out.tau_max = tau_max;
    out.predicted = std::exp(-kPi / eta);
    auto ratio = [&](double t) {
        const EnvelopeTrajectory tr = envelope_integrate(1.0, 0.0, eta, delta_h, -t, {t}, tol);
        return std::norm(tr.a_l.back());
    };
    out.ratio = ratio(tau_max);
    out.ratio_doubled = ratio(2 * tau_max);
    return out;
}

TwoModeResult two_mode_error(const DoubleWellSetup& setup, cplx alpha_l, cplx alpha_r, const TwoModeOptions& opts) {
    if (std::abs(std::norm(alpha_l) + std::norm(alpha_r) - 1.0) > 1e-10)
        throw ConfigError("two-mode: initial amplitudes must be normalized");
    if (opts.observations < 1 || !(opts.c > 0)) throw ConfigError("two-mode: need observations >= 1 and c > 0");
    const SpectralPair pair = solve_eigenpair(setup);
    const double dx = pair.dx;
    const double hbar = setup.hbar;

    TwoModeResult out;
    out.omega_h = pair.omega_h;
    out.big_omega_h = pair.big_omega_h;
    out.kappa = setup.kappa(pair.omega_h);
    out.eps = setup.eps(pair.omega_h);
    const double valid = opts.c * std::sqrt(hbar) / pair.omega_h;
    out.t_window = opts.t_window > 0 ? opts.t_window : valid;
    if (out.t_window > valid * (1 + 1e-12)) throw ConfigError("two-mode: window exceeds the validity range");

    const Eigen::VectorXd va = setup.va_samples();
    const double gamma_l = (va.array() * pair.phi_l.array().square()).sum() * dx;
    out.eta_env = setup.eta * gamma_l;
    out.delta_env = setup.delta * std::sqrt(hbar) * pair.phi_l.array().pow(4).sum() * dx;

    std::vector<double> times, taus;
    for (int k = 0; k <= opts.observations; ++k) {
        times.push_back(out.t_window * k / opts.observations);
        taus.push_back(pair.omega_h * times.back() / hbar);
    }
    const EnvelopeTrajectory env = envelope_integrate(alpha_l, alpha_r, out.eta_env, out.delta_env, 0.0, taus);

    NlsProblem pb;
    pb.x_min = setup.x_min;
    pb.x_max = setup.x_max;
    pb.hbar = hbar;
    pb.eps = out.eps;
    pb.shift = pair.big_omega_h;
    pb.base = setup.vs_samples();
    if (out.kappa != 0.0) pb.slope = out.kappa * va;
    pb.symbol = opts.symbol;
    pb.cfl = opts.cfl;
    pb.order = opts.order;
    pb.boundary_limit = opts.boundary_limit;
    double vmax = 0;
    for (double t : {0.0, out.t_window})
        for (int j = 0; j < setup.n; ++j)
            vmax = std::max(vmax, std::abs(pb.base(j) - pb.shift + (pb.slope.size() ? t * pb.slope(j) : 0.0)));
    const double dt = opts.cfl * hbar / vmax;

    const CVec psi0 = (alpha_l * pair.phi_l.cast<cplx>() + alpha_r * pair.phi_r.cast<cplx>()).eval();
    std::size_t idx = 0;
    auto observer = [&](double t, const CVec& psi) {
        const CVec app = env.a_l[idx] * pair.phi_l.cast<cplx>() + env.a_r[idx] * pair.phi_r.cast<cplx>();
        const double e = std::sqrt((psi - app).squaredNorm() * dx);
        out.t.push_back(t);
        out.error.push_back(e);
        out.sup_error = std::max(out.sup_error, e);
        ++idx;
    };
    const NlsResult res = nls_split_step(pb, psi0, 0.0, times, dt, observer);
    out.mass_drift = res.mass_drift;
    out.steps = res.steps;
    return out;
}

LatticeResult lattice_two_mode_check(double alpha_accel, double v, double eps, double t_from, double t_to,
                                     const LatticeOptions& opts) {
    if (!(alpha_accel > 0)) throw ConfigError("lattice: acceleration must be positive");
    if (!(t_to > t_from) || opts.observations < 1 || opts.n < 8) throw ConfigError("lattice: invalid window or grid");
    const int n = opts.n;
    const double L = 4 * kPi;
    NlsProblem pb;
    pb.x_min = 0.0;
    pb.x_max = L;
    pb.hbar = 1.0;
    pb.eps = eps;
    pb.drift = alpha_accel;
    pb.base.resize(n);
    CVec psi0(n), mode_a(n), mode_b(n);
    for (int j = 0; j < n; ++j) {
        const double x = j * L / n;
        pb.base(j) = v * std::cos(x);
        psi0(j) = std::polar(1.0, 0.5 * x);
        mode_a(j) = std::polar(1.0, 0.5 * x);
        mode_b(j) = std::polar(1.0, -0.5 * x);
    }
    pb.cfl = 1.0;

    std::vector<double> times;
    for (int k = 0; k <= opts.observations; ++k) times.push_back(t_from + (t_to - t_from) * k / opts.observations);

    // the two-mode system runs backwards in s: w(s) = u(-s), s = t sqrt(alpha/2)
    const double r = std::sqrt(alpha_accel / 2);
    const ModelConfig model = preset_bloch(alpha_accel, v, 1.0).with_delta(2 * eps / std::sqrt(2 * alpha_accel));
    TwoLevelState start{-r * t_from, CVec::Constant(1, 1.0), CVec::Constant(1, 0.0)};
    IntegrateOptions io;
    io.tol = opts.tol;
    for (double t : times) io.samples.push_back(-r * t);
    const Trajectory ode = integrate(start, -r * t_to, model, io);

    LatticeResult out;
    std::size_t idx = 0;
    auto observer = [&](double t, const CVec& psi) {
        const cplx a = mode_a.dot(psi) / static_cast<double>(n);
        const cplx b = mode_b.dot(psi) / static_cast<double>(n);
        const double pa = std::norm(a), pbb = std::norm(b);
        const double mass = psi.squaredNorm() / n;
        out.t.push_back(t);
        out.pde_a.push_back(pa);
        out.pde_b.push_back(pbb);
        out.ode_1.push_back(ode.samples[idx].u1.squaredNorm());
        out.ode_2.push_back(ode.samples[idx].u2.squaredNorm());
        out.leaked.push_back(mass - pa - pbb);
        out.max_leaked = std::max(out.max_leaked, out.leaked.back());
        out.discrepancy = std::max({out.discrepancy, std::abs(pa - out.ode_1.back()), std::abs(pbb - out.ode_2.back())});
        ++idx;
    };
    const NlsResult res = nls_split_step(pb, psi0, t_from, times, opts.dt, observer);
    out.mass_drift = res.mass_drift / L;
    return out;
}

}  // namespace nlz
