#include "nlz/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "nlz/errors.hpp"

namespace nlz {

Nonlinearity Nonlinearity::affine(double c0, double cp, double cq) {
    Nonlinearity f;
    f.c0_ = c0;
    f.cp_ = cp;
    f.cq_ = cq;
    return f;
}

Nonlinearity Nonlinearity::general(std::function<double(double, double)> fn, std::string name) {
    if (!fn) throw ConfigError("nonlinearity callable is empty");
    Nonlinearity f;
    f.general_ = std::move(fn);
    f.name_ = std::move(name);
    return f;
}

double Nonlinearity::operator()(double p, double q) const {
    if (general_) return general_(p, q);
    return c0_ + cp_ * p + cq_ * q;
}

bool Nonlinearity::same_as(const Nonlinearity& other) const {
    if (is_affine() && other.is_affine()) return c0_ == other.c0_ && cp_ == other.cp_ && cq_ == other.cq_;
    if (!is_affine() && !other.is_affine()) return name_ == other.name_;
    return false;
}

ModelConfig ModelConfig::with_delta(double delta) const {
    ModelConfig m = *this;
    m.nonlinearity.delta = delta;
    return m;
}

ModelConfig make_model(const CouplingOperator& g, const NonlinearitySpec& nl) {
    ModelConfig m;
    m.g = g;
    m.nonlinearity = nl;
    const double smax = g.max_singular_value();
    m.cutoff_radius = smax > 0 ? std::sqrt(2.0) * smax : 1.0;
    return m;
}

ModelConfig preset_physics(double gamma1, double z, double delta_phys) {
    if (!(gamma1 > 0)) throw ConfigError("preset_physics: gamma1 must be positive");
    const double r = 1.0 / std::sqrt(gamma1);
    NonlinearitySpec nl;
    nl.delta = delta_phys * r;
    nl.f1 = Nonlinearity::affine(0.0, 1.0, -1.0);
    nl.f2 = Nonlinearity::affine(0.0, -1.0, 1.0);
    ModelConfig m = make_model(CouplingOperator::scalar(z * r), nl);
    m.provenance = {"physics", {{"gamma1", gamma1}, {"z", z}, {"delta", delta_phys}}, std::exp(-kPi * z * z / gamma1)};
    return m;
}

ModelConfig preset_bloch(double alpha, double v, double eps) {
    if (!(alpha > 0)) throw ConfigError("preset_bloch: alpha must be positive");
    const double r = 1.0 / std::sqrt(2.0 * alpha);
    NonlinearitySpec nl;
    nl.delta = eps * r;
    nl.f1 = Nonlinearity::affine(0.0, 0.0, 1.0);
    nl.f2 = Nonlinearity::affine(0.0, 1.0, 0.0);
    ModelConfig m = make_model(CouplingOperator::scalar(v * r), nl);
    m.provenance = {"bloch", {{"alpha", alpha}, {"v", v}, {"eps", eps}}, std::exp(-kPi * v * v / (2.0 * alpha))};
    return m;
}

ModelConfig preset_doublewell(double omega, double alpha, double delta_phys) {
    if (!(alpha > 0)) throw ConfigError("preset_doublewell: alpha must be positive");
    const double r = 1.0 / std::sqrt(alpha);
    NonlinearitySpec nl;
    nl.delta = delta_phys * r;
    nl.f1 = Nonlinearity::affine(0.0, 1.0, 0.0);
    nl.f2 = Nonlinearity::affine(0.0, 0.0, 1.0);
    ModelConfig m = make_model(CouplingOperator::scalar(-omega * r), nl);
    m.provenance = {"doublewell",
                    {{"alpha", alpha}, {"omega", omega}, {"delta", delta_phys}},
                    std::exp(-kPi * omega * omega / alpha)};
    return m;
}

CVec TwoLevelState::stacked() const {
    CVec w(u1.size() + u2.size());
    w << u1, u2;
    return w;
}

TwoLevelState TwoLevelState::from_stacked(double s, const CVec& w) {
    const Eigen::Index n = w.size() / 2;
    return {s, w.head(n), w.tail(n)};
}

TwoLevelState basis_state(int n, int index, double s) {
    CVec w = CVec::Zero(2 * n);
    w(index) = 1.0;
    return TwoLevelState::from_stacked(s, w);
}

std::vector<double> default_sample_grid(double s_from, double s_to) {
    std::vector<double> pts;
    const int uniform = 400;
    for (int k = 0; k <= uniform; ++k) pts.push_back(s_from + (s_to - s_from) * k / uniform);
    const double lo = std::min(s_from, s_to), hi = std::max(s_from, s_to);
    for (double sign : {-1.0, 1.0}) {
        for (double a = 1.0; a <= 1e7; a *= 1.1) {
            const double s = sign * a;
            if (s > lo && s < hi) pts.push_back(s);
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (s_to < s_from) std::reverse(pts.begin(), pts.end());
    return pts;
}

namespace {

struct RealSystem {
    int n;
    std::vector<cplx> g;   // row-major G
    std::vector<cplx> gs;  // row-major G*
    double delta;
    bool identical;
    const Nonlinearity* f1;
    const Nonlinearity* f2;
    const std::function<double(double, double)>* aux;

    // layout: [u1 (2n reals), u2 (2n reals), gauge, aux]
    void operator()(double s, const double* y, double* dy) const {
        const cplx* u1 = reinterpret_cast<const cplx*>(y);
        const cplx* u2 = reinterpret_cast<const cplx*>(y + 2 * n);
        cplx* d1 = reinterpret_cast<cplx*>(dy);
        cplx* d2 = reinterpret_cast<cplx*>(dy + 2 * n);
        double p = 0, q = 0;
        for (int i = 0; i < n; ++i) {
            p += std::norm(u1[i]);
            q += std::norm(u2[i]);
        }
        double F1 = 0, F2 = 0;
        if (delta != 0.0) {
            F1 = delta * (*f1)(p, q);
            F2 = identical ? F1 : delta * (*f2)(p, q);
        }
        for (int i = 0; i < n; ++i) {
            cplx gu2 = 0, gsu1 = 0;
            for (int j = 0; j < n; ++j) {
                gu2 += g[i * n + j] * u2[j];
                gsu1 += gs[i * n + j] * u1[j];
            }
            const cplx a = (s + F1) * u1[i] + gu2;
            const cplx b = (F2 - s) * u2[i] + gsu1;
            d1[i] = cplx(-a.imag(), a.real());
            d2[i] = cplx(-b.imag(), b.real());
        }
        dy[4 * n] = 0.5 * (F1 + F2);
        dy[4 * n + 1] = (*aux) ? (*aux)(p, q) : 0.0;
    }
};

RealSystem make_system(const ModelConfig& model, const std::function<double(double, double)>* aux) {
    RealSystem sys;
    sys.n = model.dim();
    const CMat& g = model.g.matrix();
    const CMat gs = g.adjoint();
    for (int i = 0; i < sys.n; ++i)
        for (int j = 0; j < sys.n; ++j) {
            sys.g.push_back(g(i, j));
            sys.gs.push_back(gs(i, j));
        }
    sys.delta = model.nonlinearity.delta;
    sys.identical = model.nonlinearity.identical();
    sys.f1 = &model.nonlinearity.f1;
    sys.f2 = &model.nonlinearity.f2;
    sys.aux = aux;
    return sys;
}

void pack(const CVec& u1, const CVec& u2, std::vector<double>& y) {
    const Eigen::Index n = u1.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const cplx a = u1(i), b = u2(i);
        y[2 * i] = a.real();
        y[2 * i + 1] = a.imag();
        y[2 * n + 2 * i] = b.real();
        y[2 * n + 2 * i + 1] = b.imag();
    }
}

TrajectorySample unpack(double s, const std::vector<double>& y, int n) {
    TrajectorySample out;
    out.s = s;
    out.u1.resize(n);
    out.u2.resize(n);
    for (int i = 0; i < n; ++i) {
        out.u1(i) = cplx(y[2 * i], y[2 * i + 1]);
        out.u2(i) = cplx(y[2 * n + 2 * i], y[2 * n + 2 * i + 1]);
    }
    out.gauge = y[4 * n];
    out.aux = y[4 * n + 1];
    return out;
}

}  // namespace

void rhs(const TwoLevelState& state, const ModelConfig& model, CVec& du1, CVec& du2) {
    const int n = model.dim();
    std::vector<double> y(4 * n + 2, 0.0), dy(4 * n + 2, 0.0);
    pack(state.u1, state.u2, y);
    const std::function<double(double, double)> none;
    make_system(model, &none)(state.s, y.data(), dy.data());
    du1.resize(n);
    du2.resize(n);
    for (int i = 0; i < n; ++i) {
        du1(i) = cplx(dy[2 * i], dy[2 * i + 1]);
        du2(i) = cplx(dy[2 * n + 2 * i], dy[2 * n + 2 * i + 1]);
    }
}

Trajectory integrate(const TwoLevelState& start, double s_to, const ModelConfig& model, const IntegrateOptions& opts) {
    const int n = model.dim();
    if (start.u1.size() != n || start.u2.size() != n) throw ConfigError("integrate: state dimension mismatch");
    if (!(opts.tol > 0)) throw ConfigError("integrate: tolerance must be positive");
    const double s_from = start.s;
    std::vector<double> grid = opts.samples.empty() ? default_sample_grid(s_from, s_to) : opts.samples;
    const double dir = s_to >= s_from ? 1.0 : -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if ((grid[i] - s_from) * dir < 0 || (grid[i] - s_to) * dir > 0)
            throw ConfigError("integrate: sample point outside the integration span");
        if (i > 0 && (grid[i] - grid[i - 1]) * dir < 0) throw ConfigError("integrate: sample points not monotone");
    }

    RealSystem sys = make_system(model, &opts.aux);
    Dop853Options dopt;
    // tol bounds the local error per unit length of s, in the max norm over complex entries
    dopt.rtol = 0.0;
    dopt.group = 2;
    dopt.per_unit_step = true;
    dopt.atol = opts.tol * std::max(1.0, std::sqrt(start.norm2()));
    Dop853<RealSystem> solver(sys, 4 * n + 2, dopt);
    std::vector<double> y(4 * n + 2, 0.0);
    pack(start.u1, start.u2, y);
    solver.reset(s_from, y.data());

    Trajectory traj;
    traj.samples.reserve(grid.size());
    const double norm0 = start.norm2();
    for (double s : grid) {
        try {
            solver.advance_to(s);
        } catch (const StepSizeUnderflow& e) {
            throw NumericError("dynamics", "integration failure at s = " + std::to_string(e.time()) +
                                               ": step size underflow");
        }
        traj.samples.push_back(unpack(s, solver.state(), n));
        const auto& b = traj.samples.back();
        traj.max_norm_drift = std::max(traj.max_norm_drift, std::abs(b.u1.squaredNorm() + b.u2.squaredNorm() - norm0));
    }
    traj.stats = solver.stats();
    if (opts.check_drift) {
        const double budget = std::max(100.0 * opts.tol * std::abs(s_to - s_from), 1e-13);
        if (traj.max_norm_drift > budget)
            throw NumericError("dynamics", "integration failure: norm drift " + std::to_string(traj.max_norm_drift) +
                                               " exceeds budget " + std::to_string(budget));
    }
    return traj;
}

GaugeTerms compute_gauge_terms(const CVec& u1, const CVec& u2, const ModelConfig& model) {
    const auto& nl = model.nonlinearity;
    const double p = u1.squaredNorm(), q = u2.squaredNorm();
    const double F1 = nl.f1(p, q);
    const double F2 = nl.identical() ? F1 : nl.f2(p, q);
    return {0.5 * nl.delta * (F1 + F2), 0.5 * nl.delta * (F1 - F2)};
}

Trajectory gauge_to_v(const Trajectory& u_traj) {
    Trajectory out = u_traj;
    for (auto& smp : out.samples) {
        const cplx ph = std::polar(1.0, -smp.gauge);
        smp.u1 *= ph;
        smp.u2 *= ph;
    }
    return out;
}

double cutoff_defect(const TwoLevelState& state, const ModelConfig& model) {
    const CVec w = state.stacked();
    return (theta_cutoff(model.cutoff_radius, model.g) * w - w).norm();
}

}  // namespace nlz
