#include "nlz/split_step.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <fftw3.h>

#include "nlz/errors.hpp"

namespace nlz {

namespace {

constexpr const char* kModule = "mode-reduction-lab";

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class FftPair {
public:
    explicit FftPair(int n) : n_(n) {
        buf_ = static_cast<cplx*>(fftw_malloc(sizeof(cplx) * n));
        auto* p = reinterpret_cast<fftw_complex*>(buf_);
        std::lock_guard<std::mutex> lock(planner_mutex());
        fwd_ = fftw_plan_dft_1d(n, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(n, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~FftPair() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    FftPair(const FftPair&) = delete;
    FftPair& operator=(const FftPair&) = delete;

    cplx* data() { return buf_; }
    void forward() { fftw_execute(fwd_); }
    void backward() { fftw_execute(bwd_); }
    int size() const { return n_; }

private:
    int n_;
    cplx* buf_;
    fftw_plan fwd_, bwd_;
};

}  // namespace

double grid_mass(const CVec& psi, double dx) {
    return psi.squaredNorm() * dx;
}

NlsResult nls_split_step(const NlsProblem& pb, const CVec& psi0, double t0, const std::vector<double>& observe,
                         double dt_max, const NlsObserver& observer) {
    const int n = pb.n();
    if (n < 4 || psi0.size() != n) throw ConfigError("split step: grid and initial data sizes differ");
    if (!(pb.hbar > 0) || !(dt_max > 0)) throw ConfigError("split step: hbar and dt must be positive");
    if (pb.slope.size() != 0 && pb.slope.size() != n) throw ConfigError("split step: slope size differs from grid");
    if (pb.symbol == KineticSymbol::ThreePoint && pb.drift != 0.0)
        throw ConfigError("split step: the 3-point symbol has no drift term");
    for (std::size_t i = 0; i < observe.size(); ++i)
        if (observe[i] < (i ? observe[i - 1] : t0)) throw ConfigError("split step: observation times must increase");

    const double dx = pb.dx();
    const double L = pb.x_max - pb.x_min;
    const bool moving = pb.slope.size() == n;
    const bool linear_static = !moving && pb.eps == 0.0;
    std::vector<double> k(n);
    for (int j = 0; j < n; ++j) k[j] = 2 * kPi / L * (j < (n + 1) / 2 ? j : j - n);

    FftPair fft(n);
    cplx* psi = fft.data();
    for (int j = 0; j < n; ++j) psi[j] = psi0(j);

    auto potential = [&](int j, double t) { return pb.base(j) - pb.shift + (moving ? t * pb.slope(j) : 0.0); };
    auto max_potential = [&](double t) {
        double m = 0;
        for (int j = 0; j < n; ++j) m = std::max(m, std::abs(potential(j, t)));
        return m;
    };

    // One step is P(a_0) K(b_1) P(a_1) ... K(b_m) P(a_m); potentials sit at the nodes c_i = b_1 + ... + b_i.
    std::vector<double> a, b;
    if (pb.order == 2) {
        a = {0.5, 0.5};
        b = {1.0};
    } else if (pb.order == 4) {
        const double w1 = 1.0 / (2.0 - std::cbrt(2.0)), w0 = 1.0 - 2.0 * w1;
        a = {0.5 * w1, 0.5 * (w1 + w0), 0.5 * (w0 + w1), 0.5 * w1};
        b = {w1, w0, w1};
    } else {
        throw ConfigError("split step: order must be 2 or 4");
    }
    std::vector<double> c(1, 0.0);
    for (double bj : b) c.push_back(c.back() + bj);

    std::map<double, std::vector<cplx>> static_phase, kinetic_phase;
    auto phase_step = [&](double t, double h) {
        if (linear_static) {
            auto it = static_phase.find(h);
            if (it == static_phase.end()) {
                std::vector<cplx> ph(n);
                for (int j = 0; j < n; ++j) ph[j] = std::polar(1.0, -potential(j, t) * h / pb.hbar);
                it = static_phase.emplace(h, std::move(ph)).first;
            }
            for (int j = 0; j < n; ++j) psi[j] *= it->second[j];
            return;
        }
        for (int j = 0; j < n; ++j) {
            const double w = potential(j, t) + pb.eps * std::norm(psi[j]);
            psi[j] *= std::polar(1.0, -w * h / pb.hbar);
        }
    };
    auto kinetic_step = [&](double t, double h) {
        fft.forward();
        const double inv = 1.0 / n;
        if (pb.drift == 0.0) {
            auto it = kinetic_phase.find(h);
            if (it == kinetic_phase.end()) {
                std::vector<cplx> ph(n);
                for (int j = 0; j < n; ++j) {
                    const double sym = pb.symbol == KineticSymbol::Spectral
                                           ? 0.5 * pb.hbar * pb.hbar * k[j] * k[j]
                                           : pb.hbar * pb.hbar / (dx * dx) * (1 - std::cos(k[j] * dx));
                    ph[j] = std::polar(inv, -sym * h / pb.hbar);
                }
                it = kinetic_phase.emplace(h, std::move(ph)).first;
            }
            for (int j = 0; j < n; ++j) psi[j] *= it->second[j];
        } else {
            const double al = pb.drift;
            for (int j = 0; j < n; ++j) {
                const double q = k[j] - al * t;
                const double integral = q * q * h - q * al * h * h + al * al * h * h * h / 3;
                psi[j] *= std::polar(inv, -0.5 * pb.hbar * integral);
            }
        }
        fft.backward();
    };

    NlsResult out;
    const double mass0 = grid_mass(psi0, dx);
    auto snapshot = [&](double t) {
        const Eigen::Map<CVec> view(psi, n);
        out.mass_drift = std::max(out.mass_drift, std::abs(grid_mass(view, dx) - mass0));
        if (pb.boundary_limit >= 0) {
            const int edge = std::max(1, static_cast<int>(pb.boundary_fraction * n));
            double bm = 0;
            for (int j = 0; j < edge; ++j) bm += (std::norm(psi[j]) + std::norm(psi[n - 1 - j])) * dx;
            out.boundary_mass = std::max(out.boundary_mass, bm);
            if (bm > pb.boundary_limit)
                throw NumericError(kModule, "boundary-mass overflow: " + std::to_string(bm) + " at t = " +
                                                std::to_string(t));
        }
        if (observer) observer(t, view);
    };

    double t = t0;
    for (double t_next : observe) {
        const double span = t_next - t;
        if (span > 0) {
            const long m = static_cast<long>(std::ceil(span / dt_max - 1e-9));
            const double h = span / m;
            if (std::max(max_potential(t), max_potential(t_next)) * h / pb.hbar > pb.cfl * (1 + 1e-12))
                throw ConfigError("split step: phase condition max|V| dt / hbar <= " + std::to_string(pb.cfl) +
                                  " violated");
            const std::size_t last = b.size();
            phase_step(t, a[0] * h);
            for (long i = 0; i < m; ++i) {
                const double ti = t + i * h;
                for (std::size_t j = 1; j <= last; ++j) {
                    kinetic_step(ti + c[j - 1] * h, b[j - 1] * h);
                    if (j < last) phase_step(ti + c[j] * h, a[j] * h);
                }
                if (i + 1 < m) phase_step(t + (i + 1) * h, (a[last] + a[0]) * h);
                else phase_step(t_next, a[last] * h);
            }
            out.steps += m;
            t = t_next;
        }
        snapshot(t);
    }
    out.t = t;
    out.psi = Eigen::Map<CVec>(psi, n);
    return out;
}

}  // namespace nlz
