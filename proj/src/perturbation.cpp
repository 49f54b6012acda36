#include "nlz/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "nlz/errors.hpp"
#include "nlz/linear_scattering.hpp"

namespace nlz {

namespace {

constexpr const char* kModule = "perturbation";

double mean_eigenvalue(const CMat& a) {
    return a.trace().real() / static_cast<double>(a.rows());
}

TailQuadrature fit_tail(const std::vector<double>& s, const std::vector<double>& partial, double lambda_bar) {
    const Eigen::Index m = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd a(m, 7);
    Eigen::VectorXd y(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double S = s[k];
        const double th = S * S + lambda_bar * std::log(S);
        a(k, 0) = 1.0;
        a(k, 1) = 1.0 / S;
        a(k, 2) = 1.0 / (S * S);
        a(k, 3) = std::cos(th) / S;
        a(k, 4) = std::sin(th) / S;
        a(k, 5) = std::cos(th) / (S * S);
        a(k, 6) = std::sin(th) / (S * S);
        y(k) = partial[k];
    }
    TailQuadrature out;
    out.s = s;
    out.partial = partial;
    out.coef = least_squares(a, y);
    out.limit = out.coef(0);
    out.residual = (a * out.coef - y).cwiseAbs().maxCoeff();
    std::vector<double> dev(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) dev[k] = std::abs(partial[k] - out.limit);
    if (*std::min_element(dev.begin(), dev.end()) > 0) out.rate = fit_loglog(s, dev);
    return out;
}

double pair_value(const Nonlinearity& f, const CVec& u1, const CVec& u2) {
    return f(u1.squaredNorm(), u2.squaredNorm());
}

}  // namespace

LambdaPm lambda_pm(const TwoLevelState& alpha, const ModelConfig& model, const LambdaOptions& opts) {
    if (!model.nonlinearity.identical()) throw ConfigError("lambda_pm requires f1 == f2");
    if (!(opts.tail_from >= 1.0) || !(opts.s_max > opts.tail_from) || opts.tail_points < 8)
        throw ConfigError("lambda_pm: need 1 <= tail_from < s_max and at least 8 tail points");
    const ModelConfig lin = model.linear();
    const Nonlinearity f = model.nonlinearity.f1;
    const int n = model.dim();

    LambdaPm out;
    out.omega_lin = slin_matrix(model.g) * alpha.stacked();
    const CVec w1 = out.omega_lin.head(n), w2 = out.omega_lin.tail(n);
    const double f_alpha = pair_value(f, alpha.u1, alpha.u2);
    const double f_omega = pair_value(f, w1, w2);
    const double lambda_bar = mean_eigenvalue(model.g.gg_star());

    const WaveOperatorResult wave = wave_operator(alpha.u1, alpha.u2, -1, lin, opts.ladder, opts.tol);

    std::vector<double> s_abs;
    const double q = std::pow(opts.s_max / opts.tail_from, 1.0 / (opts.tail_points - 1));
    for (int k = 0; k < opts.tail_points; ++k) s_abs.push_back(opts.tail_from * std::pow(q, k));
    s_abs.back() = opts.s_max;

    for (int dir : {-1, 1}) {
        const double target = dir < 0 ? f_alpha : f_omega;
        IntegrateOptions io;
        io.tol = opts.tol;
        for (double s : s_abs) io.samples.push_back(dir * s);
        io.aux = [&f, target](double p, double qq) { return f(p, qq) - target; };
        const Trajectory tr = integrate(wave.u0, dir * opts.s_max, lin, io);
        std::vector<double> partial;
        for (const auto& smp : tr.samples) partial.push_back(dir * smp.aux);
        TailQuadrature tq = fit_tail(s_abs, partial, lambda_bar);
        if (tq.residual > 1e-3)
            throw NumericError(kModule, "oscillatory tail fit residual " + std::to_string(tq.residual) +
                                            "; increase S_max");
        (dir < 0 ? out.tail_minus : out.tail_plus) = std::move(tq);
    }
    out.minus = out.tail_minus.limit;
    out.plus = out.tail_plus.limit;
    return out;
}

CVec exact_scatter_f1f2(const TwoLevelState& alpha, double delta, const ModelConfig& model, const LambdaPm& lam) {
    if (!model.nonlinearity.identical()) throw ConfigError("exact_scatter_f1f2 requires f1 == f2");
    const CVec inner = std::polar(1.0, delta * lam.minus) * alpha.stacked();
    return std::polar(1.0, delta * lam.plus) * (slin_matrix(model.g) * inner);
}

CVec exact_scatter_f1f2(const TwoLevelState& alpha, double delta, const ModelConfig& model, const LambdaOptions& opts) {
    return exact_scatter_f1f2(alpha, delta, model, lambda_pm(alpha, model, opts));
}

DevSlopeResult dev_slope_study(const ModelConfig& model, const TwoLevelState& alpha, const std::vector<double>& deltas,
                               const DevOptions& opts) {
    if (deltas.size() < 2) throw ConfigError("dev_slope_study needs at least two delta values");
    for (double d : deltas)
        if (!(d > 0)) throw ConfigError("dev_slope_study: delta values must be positive");

    DevSlopeResult out;
    out.deltas = deltas;
    out.identical = model.nonlinearity.identical();
    const CVec lin = slin_matrix(model.g) * alpha.stacked();

    std::vector<ScatteringResult> runs(deltas.size());
    const std::size_t workers =
        opts.threads > 0 ? static_cast<std::size_t>(opts.threads) : std::max<std::size_t>(1, deltas.size());
    for (std::size_t start = 0; start < deltas.size(); start += workers) {
        std::vector<std::future<ScatteringResult>> jobs;
        for (std::size_t i = start; i < std::min(deltas.size(), start + workers); ++i)
            jobs.push_back(std::async(std::launch::async, [&, i] {
                return scattering_map(alpha, model.with_delta(deltas[i]), opts.scatter);
            }));
        for (std::size_t i = start; i < std::min(deltas.size(), start + workers); ++i) runs[i] = jobs[i - start].get();
    }
    if (out.identical) out.lambda = lambda_pm(alpha, model, opts.lambda);

    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const CVec w = runs[i].omega.stacked();
        out.omega.push_back(w);
        out.residual.push_back(runs[i].omega.residual);
        out.phi.push_back(runs[i].phi);
        const double th = align_phase(w, lin);
        out.e1.push_back((std::polar(1.0, th) * w - lin).norm());
        if (out.identical) {
            const double d = deltas[i];
            const cplx first = cplx(0, d * (out.lambda.plus + out.lambda.minus));
            out.e2.push_back((w - lin - first * lin).norm());
            out.e_exact.push_back((w - exact_scatter_f1f2(alpha, d, model, out.lambda)).norm());
        }
    }

    if (opts.require_resolved)
        for (std::size_t i = 0; i < deltas.size(); ++i)
            if (out.e1[i] < 10 * out.residual[i])
                throw NumericError(kModule, "inconclusive: E1 = " + std::to_string(out.e1[i]) +
                                                " is below ten times the extraction residual at delta = " +
                                                std::to_string(deltas[i]));

    out.slope_e1 = fit_loglog(deltas, out.e1);
    if (out.identical) out.slope_e2 = fit_loglog(deltas, out.e2);
    const double phi_max = std::abs(*std::max_element(out.phi.begin(), out.phi.end(),
                                                      [](double a, double b) { return std::abs(a) < std::abs(b); }));
    out.phi_below_floor = phi_max < opts.phi_floor;
    if (!out.phi_below_floor && std::all_of(out.phi.begin(), out.phi.end(), [](double p) { return p != 0.0; }))
        out.slope_phi = fit_loglog(deltas, out.phi);
    return out;
}

}  // namespace nlz
