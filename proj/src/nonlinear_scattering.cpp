#include "nlz/nonlinear_scattering.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "nlz/errors.hpp"

namespace nlz {

namespace {

constexpr const char* kModule = "nonlinear-scattering";

// Eigendecomposition of a Hermitian PSD matrix, reused for many phase evaluations.
struct SpectralCache {
    CMat q;
    Eigen::VectorXd lam;

    explicit SpectralCache(const CMat& a) {
        Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (a + a.adjoint()));
        q = es.eigenvectors();
        lam = es.eigenvalues().cwiseMax(0.0);
    }

    // exp(i * sign * phi(s, A))
    CMat phase(double s, int sign) const {
        CVec d(lam.size());
        for (Eigen::Index k = 0; k < lam.size(); ++k) d(k) = std::polar(1.0, sign * phase_phi(s, lam(k)));
        return q * d.asDiagonal() * q.adjoint();
    }
};

std::map<double, std::size_t> index_samples(const Trajectory& traj) {
    std::map<double, std::size_t> idx;
    for (std::size_t i = 0; i < traj.samples.size(); ++i) idx[traj.samples[i].s] = i;
    return idx;
}

std::vector<std::size_t> cluster_indices(const std::map<double, std::size_t>& idx, const ExtractionGrid& grid, int k) {
    std::vector<std::size_t> out;
    for (double s : grid.cluster(k)) {
        auto it = idx.find(s);
        if (it == idx.end()) throw ConfigError("trajectory does not cover the extraction grid");
        out.push_back(it->second);
    }
    return out;
}

double wrap(double x) {
    x = std::fmod(x + kPi, 2 * kPi);
    if (x < 0) x += 2 * kPi;
    return x - kPi;
}

}  // namespace

ExtractionGrid ExtractionGrid::for_span(double s_max, int direction, int count) {
    ExtractionGrid g;
    g.direction = direction;
    g.count = count;
    g.s0 = std::max(20.0, s_max / 5.0);
    g.ratio = std::pow(0.9 * s_max / g.s0, 1.0 / (count - 1));
    g.validate();
    return g;
}

void ExtractionGrid::validate() const {
    if (std::abs(s0) < 1.0) throw ConfigError("extraction grid: |s0| < 1 is outside the log-phase domain");
    if (s0 < 20.0) throw ConfigError("extraction grid: s0 must be at least 20");
    if (!(ratio > 1.0 && ratio <= 2.0)) throw ConfigError("extraction grid: ratio must lie in (1, 2]");
    if (count < 5) throw ConfigError("extraction grid: count must be at least 5");
    if (direction != 1 && direction != -1) throw ConfigError("extraction grid: direction must be +1 or -1");
    if (points_per_period < 4) throw ConfigError("extraction grid: need at least 4 points per period");
}

std::vector<double> ExtractionGrid::centers() const {
    std::vector<double> c;
    for (int k = 0; k < count; ++k) c.push_back(direction * s0 * std::pow(ratio, k));
    return c;
}

std::vector<double> ExtractionGrid::cluster(int k) const {
    const double c = direction * s0 * std::pow(ratio, k);
    const double period = kPi / std::abs(c);
    std::vector<double> pts;
    for (int j = 0; j < points_per_period; ++j) {
        const double off = period * (static_cast<double>(j) / points_per_period - 0.5);
        pts.push_back(c + direction * off);
    }
    return pts;
}

std::vector<double> ExtractionGrid::sample_points() const {
    std::vector<double> pts;
    for (int k = 0; k < count; ++k) {
        const auto c = cluster(k);
        pts.insert(pts.end(), c.begin(), c.end());
    }
    return pts;
}

double ExtractionGrid::extent() const {
    const double c = s0 * std::pow(ratio, count - 1);
    return c + 0.5 * kPi / c;
}

CVec AsymptoticState::stacked() const {
    CVec w(omega1.size() + omega2.size());
    w << omega1, omega2;
    return w;
}

NormLimits extract_norm_limits(const Trajectory& traj, const ExtractionGrid& grid) {
    grid.validate();
    const auto idx = index_samples(traj);
    const auto centers = grid.centers();
    const int K = grid.count;
    std::vector<std::vector<std::size_t>> clusters;
    Eigen::MatrixXd a(K, 2);
    Eigen::VectorXd m1(K), m2(K);
    for (int k = 0; k < K; ++k) {
        clusters.push_back(cluster_indices(idx, grid, k));
        double s1 = 0, s2 = 0;
        for (std::size_t i : clusters.back()) {
            s1 += traj.samples[i].u1.squaredNorm();
            s2 += traj.samples[i].u2.squaredNorm();
        }
        m1(k) = s1 / clusters.back().size();
        m2(k) = s2 / clusters.back().size();
        a(k, 0) = 1.0;
        a(k, 1) = 1.0 / centers[k];
    }
    const Eigen::VectorXd f1 = least_squares(a, m1), f2 = least_squares(a, m2);
    NormLimits out;
    out.omega1 = f1(0);
    out.c1 = f1(1);
    out.omega2 = f2(0);
    out.c2 = f2(1);
    out.residual = std::max((a * f1 - m1).cwiseAbs().maxCoeff(), (a * f2 - m2).cwiseAbs().maxCoeff());
    out.centers = centers;
    for (int k = 0; k < K; ++k) {
        double dev = 0;
        for (std::size_t i : clusters[k]) {
            dev = std::max(dev, std::abs(traj.samples[i].u1.squaredNorm() - out.omega1));
            dev = std::max(dev, std::abs(traj.samples[i].u2.squaredNorm() - out.omega2));
        }
        out.deviation.push_back(dev);
    }
    if (out.residual > 1e-3)
        throw NumericError(kModule, "norm limits did not converge (fit residual " + std::to_string(out.residual) +
                                        "); increase S_max");
    return out;
}

AsymptoticState extract_scattering_state(const Trajectory& traj, const ExtractionGrid& grid, const ModelConfig& model,
                                         const ExtractOptions& opts) {
    const NormLimits nl = extract_norm_limits(traj, grid);
    const int n = model.dim();
    const auto& nls = model.nonlinearity;
    AsymptoticState out;
    out.norm1 = nl.omega1;
    out.norm2 = nl.omega2;
    out.drift1 = nls.delta * nls.f1(nl.omega1, nl.omega2);
    out.drift2 = nls.delta * nls.f2(nl.omega1, nl.omega2);

    const auto idx = index_samples(traj);
    std::vector<std::size_t> order;
    std::vector<int> center_of;
    for (int k = 0; k < grid.count; ++k)
        for (std::size_t i : cluster_indices(idx, grid, k)) {
            order.push_back(i);
            center_of.push_back(k);
        }
    const std::size_t m = order.size();

    const SpectralCache c1(model.g.gg_star()), c2(model.g.g_star_g());
    const CMat& g = model.g.matrix();
    const CMat gs = g.adjoint();
    // stripped[j][k]: log-phase-stripped candidate before drift removal
    std::vector<CVec> x1(m), x2(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto& smp = traj.samples[order[k]];
        const double s = smp.s;
        CVec y1 = smp.u1, y2 = smp.u2;
        if (opts.corrector) {
            CMat sys = CMat::Identity(2 * n, 2 * n);
            sys.topRightCorner(n, n) = -g / (2 * s);
            sys.bottomLeftCorner(n, n) = gs / (2 * s);
            CVec rhs(2 * n);
            rhs << smp.u1, smp.u2;
            const CVec sol = sys.partialPivLu().solve(rhs);
            y1 = sol.head(n);
            y2 = sol.tail(n);
        }
        x1[k] = c1.phase(s, 1).adjoint() * y1;
        x2[k] = c2.phase(s, -1).adjoint() * y2;
    }

    auto candidates = [&](const std::vector<CVec>& x, double drift) {
        std::vector<CVec> w(m);
        for (std::size_t k = 0; k < m; ++k) w[k] = std::polar(1.0, -drift * traj.samples[order[k]].s) * x[k];
        return w;
    };

    auto refine = [&](const std::vector<CVec>& x, double& drift) {
        if (!opts.refine_drift) return;
        std::vector<CVec> w = candidates(x, drift);
        Eigen::Index comp = 0;
        if (w.back().cwiseAbs().maxCoeff(&comp) < 1e-6) return;
        std::vector<double> s(m), ph(m);
        for (std::size_t k = 0; k < m; ++k) {
            s[k] = traj.samples[order[k]].s;
            ph[k] = std::arg(w[k](comp));
            if (k > 0) ph[k] = ph[k - 1] + wrap(ph[k] - ph[k - 1]);
        }
        Eigen::MatrixXd a(m, 4);
        Eigen::VectorXd y(m);
        for (std::size_t k = 0; k < m; ++k) {
            a(k, 0) = 1.0;
            a(k, 1) = s[k];
            a(k, 2) = 1.0 / s[k];
            a(k, 3) = 1.0 / (s[k] * s[k]);
            y(k) = ph[k];
        }
        drift += least_squares(a, y)(1);
    };
    refine(x1, out.drift1);
    refine(x2, out.drift2);

    const std::vector<CVec> w1 = candidates(x1, out.drift1), w2 = candidates(x2, out.drift2);
    Eigen::MatrixXcd a(m, 3);
    for (std::size_t k = 0; k < m; ++k) {
        const double s = traj.samples[order[k]].s;
        a(k, 0) = 1.0;
        a(k, 1) = 1.0 / s;
        a(k, 2) = 1.0 / (s * s);
    }
    out.omega1.resize(n);
    out.omega2.resize(n);
    out.centers = grid.centers();
    out.deviation.assign(grid.count, 0.0);
    for (int j = 0; j < 2; ++j) {
        const std::vector<CVec>& w = j == 0 ? w1 : w2;
        for (int c = 0; c < n; ++c) {
            CVec y(m);
            for (std::size_t k = 0; k < m; ++k) y(k) = w[k](c);
            const CVec coef = least_squares(a, y);
            (j == 0 ? out.omega1 : out.omega2)(c) = coef(0);
            const CVec r = a * coef - y;
            for (std::size_t k = 0; k < m; ++k) {
                out.residual = std::max(out.residual, std::abs(r(k)));
                out.deviation[center_of[k]] = std::max(out.deviation[center_of[k]], std::abs(r(k)));
            }
        }
    }
    if (out.residual > 1e-2)
        throw NumericError(kModule, "extraction failure: fit residual " + std::to_string(out.residual));
    return out;
}

TwoLevelState corrected_ansatz(double s, const CVec& w1, const CVec& w2, const ModelConfig& model, bool corrector) {
    const auto& nls = model.nonlinearity;
    const double p = w1.squaredNorm(), q = w2.squaredNorm();
    const CVec v1 = std::polar(1.0, nls.delta * nls.f1(p, q) * s) * (phase_unitary(s, model.g.gg_star(), 1) * w1);
    const CVec v2 = std::polar(1.0, nls.delta * nls.f2(p, q) * s) * (phase_unitary(s, model.g.g_star_g(), -1) * w2);
    TwoLevelState out{s, v1, v2};
    if (corrector) {
        out.u1 -= model.g.matrix() * v2 / (2 * s);
        out.u2 += model.g.adjoint() * v1 / (2 * s);
    }
    return out;
}

WaveOperatorResult wave_operator(const CVec& w1, const CVec& w2, int direction, const ModelConfig& model,
                                 const WaveLadder& ladder, double tol) {
    const double norm = w1.squaredNorm() + w2.squaredNorm();
    if (std::abs(norm - 1.0) > 1e-8) throw ConfigError("wave_operator: asymptotic state must be normalized");
    if (direction != 1 && direction != -1) throw ConfigError("wave_operator: direction must be +1 or -1");
    if (ladder.levels < 3 || !(ladder.ratio > 1.0) || !(ladder.n0 >= 1.0))
        throw ConfigError("wave_operator: ladder needs at least 3 levels with ratio > 1 and n0 >= 1");
    WaveOperatorResult out;
    std::vector<CVec> u0;
    IntegrateOptions io;
    io.tol = tol;
    io.samples = {0.0};
    for (int k = 0; k < ladder.levels; ++k) {
        const double nk = ladder.n0 * std::pow(ladder.ratio, k);
        out.levels.push_back(nk);
        const TwoLevelState start = corrected_ansatz(direction * nk, w1, w2, model, ladder.corrector);
        const Trajectory tr = integrate(start, 0.0, model, io);
        u0.push_back(tr.state(tr.samples.size() - 1).stacked());
    }
    for (int k = 0; k + 1 < ladder.levels; ++k) out.diffs.push_back((u0[k + 1] - u0[k]).norm());
    std::vector<double> lv(out.levels.begin(), out.levels.end() - 1);
    const bool resolvable = *std::min_element(out.diffs.begin(), out.diffs.end()) > 0;
    double p = 1.0;
    if (resolvable) {
        out.rate = fit_loglog(lv, out.diffs);
        p = std::clamp(-out.rate.slope, 0.5, 3.0);
    }
    if (out.diffs.back() > 1e-8 && out.diffs.back() >= out.diffs.front())
        throw NumericError(kModule, "wave operator ladder does not converge");
    CVec ext;
    if (resolvable && out.rate.slope <= -0.5) {
        const CVec& last = u0.back();
        const CVec& prev = u0[u0.size() - 2];
        ext = last + (last - prev) / (std::pow(ladder.ratio, p) - 1.0);
    } else {
        // differences sit at the integration noise floor; extrapolating would amplify it
        const auto k = std::min_element(out.diffs.begin(), out.diffs.end()) - out.diffs.begin();
        ext = u0[k];
    }
    ext *= std::sqrt(norm) / ext.norm();
    out.u0 = TwoLevelState::from_stacked(0.0, ext);
    return out;
}

ScatteringResult scattering_map(const TwoLevelState& alpha, const ModelConfig& model, const ScatteringOptions& opts) {
    if (std::abs(alpha.norm2() - 1.0) > 1e-8) throw ConfigError("scattering_map: alpha must be normalized");
    if (alpha.u1.size() != model.dim() || alpha.u2.size() != model.dim())
        throw ConfigError("scattering_map: alpha dimension does not match the coupling");
    ScatteringResult out;
    out.wave = wave_operator(alpha.u1, alpha.u2, -1, model, opts.ladder, opts.tol);

    auto run = [&](int direction) {
        ExtractionGrid grid = ExtractionGrid::for_span(opts.s_max, direction, opts.grid_count);
        IntegrateOptions io;
        io.tol = opts.tol;
        io.samples = grid.sample_points();
        if (std::abs(io.samples.back()) < opts.s_max) io.samples.push_back(direction * opts.s_max);
        const Trajectory tr = integrate(out.wave.u0, direction * opts.s_max, model, io);
        out.norm_drift = std::max(out.norm_drift, tr.max_norm_drift);
        return extract_scattering_state(tr, grid, model, opts.extract);
    };
    out.omega = run(1);
    if (opts.measure_phi) {
        out.alpha_back = run(-1);
        double ph[2] = {0, 0};
        bool ok = true;
        for (int j = 0; j < 2; ++j) {
            const CVec& a = j == 0 ? alpha.u1 : alpha.u2;
            const CVec& b = j == 0 ? out.alpha_back.omega1 : out.alpha_back.omega2;
            const cplx ov = a.dot(b);
            if (a.norm() < 1e-6 || std::abs(ov) < 1e-6) ok = false;
            else ph[j] = std::arg(ov);
        }
        out.phi = ok ? 0.5 * wrap(ph[0] - ph[1]) : 0.0;
        out.omega.phi = out.phi;
        if (model.nonlinearity.identical() && std::abs(out.phi) > 1e-3)
            throw NumericError(kModule, "phase phi = " + std::to_string(out.phi) + " for identical f1 = f2");
    }
    return out;
}

PopulationSeries mode_populations(const Trajectory& u_traj, const ModelConfig& model, const ExtractionGrid& grid) {
    grid.validate();
    const auto idx = index_samples(u_traj);
    PopulationSeries out;
    out.centers = grid.centers();
    std::vector<std::vector<std::pair<double, double>>> pops(grid.count);
    Eigen::MatrixXd a(grid.count, 3);
    Eigen::VectorXd yp(grid.count), ym(grid.count);
    for (int k = 0; k < grid.count; ++k) {
        double sp = 0, sm = 0;
        for (std::size_t i : cluster_indices(idx, grid, k)) {
            const auto& smp = u_traj.samples[i];
            const double mm = compute_gauge_terms(smp.u1, smp.u2, model).small_m;
            const ProjectorPair pr = projectors(smp.s, mm, model.g);
            CVec v(2 * model.dim());
            v << smp.u1, smp.u2;
            v *= std::polar(1.0, -smp.gauge);
            const double pp = (pr.plus * v).squaredNorm(), pm = (pr.minus * v).squaredNorm();
            pops[k].push_back({pp, pm});
            sp += pp;
            sm += pm;
        }
        out.plus.push_back(sp / pops[k].size());
        out.minus.push_back(sm / pops[k].size());
        a(k, 0) = 1.0;
        a(k, 1) = 1.0 / (out.centers[k] * out.centers[k]);
        a(k, 2) = a(k, 1) / out.centers[k];
        yp(k) = out.plus.back();
        ym(k) = out.minus.back();
    }
    out.limit_plus = least_squares(a, yp)(0);
    out.limit_minus = least_squares(a, ym)(0);
    for (int k = 0; k < grid.count; ++k) {
        double dev = 0;
        for (const auto& [pp, pm] : pops[k])
            dev = std::max({dev, std::abs(pp - out.limit_plus), std::abs(pm - out.limit_minus)});
        out.deviation.push_back(dev);
    }
    out.fitted = *std::min_element(out.deviation.begin(), out.deviation.end()) > 1e-12;
    if (out.fitted) out.rate = decay_rate(out.centers, out.deviation);
    return out;
}

LineFit decay_rate(const std::vector<double>& centers, const std::vector<double>& deviation) {
    return fit_loglog(centers, deviation);
}

}  // namespace nlz
