#include "nlz/operator_core.hpp"

#include <cmath>

#include "nlz/errors.hpp"

namespace nlz {

double phase_phi(double s, double lambda) {
    if (s == 0.0) throw ConfigError("phase_phi: s = 0 is outside the domain");
    return 0.5 * s * s + 0.5 * lambda * std::log(std::abs(s));
}

CouplingOperator CouplingOperator::scalar(double z) {
    CMat g(1, 1);
    g(0, 0) = z;
    return {g, CouplingKind::ScalarReal};
}

CouplingOperator CouplingOperator::scalar(cplx z) {
    CMat g(1, 1);
    g(0, 0) = z;
    return {g, CouplingKind::ScalarComplex};
}

CouplingOperator CouplingOperator::quaternion(double a, double b, double c, double d) {
    const cplx i(0.0, 1.0);
    CMat g(2, 2);
    g << a + i * d, i * b + c, i * b - c, a - i * d;
    return {g, CouplingKind::Quaternion};
}

CouplingOperator CouplingOperator::general(const CMat& g) {
    if (g.rows() != g.cols() || g.rows() == 0)
        throw ConfigError("coupling operator must be a non-empty square matrix");
    if (!g.allFinite()) throw ConfigError("coupling operator has non-finite entries");
    return {g, CouplingKind::General};
}

double CouplingOperator::max_singular_value() const {
    Eigen::JacobiSVD<CMat> svd(g_);
    return svd.singularValues()(0);
}

CMat hermitian_funcalc(const CMat& a, const std::function<cplx(double)>& f) {
    if (a.rows() != a.cols()) throw ConfigError("hermitian_funcalc: matrix is not square");
    const double scale = std::max(1.0, a.norm());
    if ((a - a.adjoint()).norm() > 1e-10 * scale)
        throw ConfigError("hermitian_funcalc: matrix is not Hermitian");
    const CMat sym = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(sym);
    const auto& ev = es.eigenvalues();
    if (ev.size() > 0 && ev.minCoeff() < -1e-10 * std::max(a.norm(), 1e-300))
        throw ConfigError("hermitian_funcalc: matrix is not positive semidefinite");
    CVec fv(ev.size());
    for (Eigen::Index k = 0; k < ev.size(); ++k) fv(k) = f(std::max(ev(k), 0.0));
    return es.eigenvectors() * fv.asDiagonal() * es.eigenvectors().adjoint();
}

CMat phase_unitary(double s, const CMat& a, int sign) {
    if (s == 0.0) throw ConfigError("phase_unitary: s = 0 is outside the domain");
    const double sg = sign >= 0 ? 1.0 : -1.0;
    return hermitian_funcalc(a, [&](double lam) { return std::polar(1.0, sg * phase_phi(s, lam)); });
}

double theta_profile(double u) {
    const double x = std::abs(u);
    if (x <= 0.5) return 1.0;
    if (x >= 1.0) return 0.0;
    const double y = 2.0 * x - 1.0;
    return std::exp(1.0 - 1.0 / (1.0 - y * y));
}

CMat block_diag(const CMat& upper, const CMat& lower) {
    CMat out = CMat::Zero(upper.rows() + lower.rows(), upper.cols() + lower.cols());
    out.topLeftCorner(upper.rows(), upper.cols()) = upper;
    out.bottomRightCorner(lower.rows(), lower.cols()) = lower;
    return out;
}

CMat j_operator(int n) {
    return block_diag(CMat::Identity(n, n), -CMat::Identity(n, n));
}

CMat k_operator(const CouplingOperator& g) {
    const int n = g.dim();
    CMat out = CMat::Zero(2 * n, 2 * n);
    out.topRightCorner(n, n) = g.matrix();
    out.bottomLeftCorner(n, n) = g.adjoint();
    return out;
}

CMat v_operator(double s, const CouplingOperator& g) {
    return s * j_operator(g.dim()) + k_operator(g);
}

CMat theta_cutoff(double radius, const CouplingOperator& g) {
    if (!(radius > 0.0)) throw ConfigError("theta_cutoff: radius must be positive");
    const double r2 = radius * radius;
    auto th = [r2](double lam) { return cplx(theta_profile(lam / r2), 0.0); };
    return block_diag(hermitian_funcalc(g.gg_star(), th), hermitian_funcalc(g.g_star_g(), th));
}

ProjectorPair projectors(double s, double m, const CouplingOperator& g) {
    const double sigma = s + m;
    const int n = g.dim();
    const CMat id = CMat::Identity(n, n);
    const CMat a = sigma * sigma * id + g.gg_star();
    const CMat b = sigma * sigma * id + g.g_star_g();
    Eigen::SelfAdjointEigenSolver<CMat> ea(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<CMat> eb(0.5 * (b + b.adjoint()), Eigen::EigenvaluesOnly);
    if (std::min(ea.eigenvalues().minCoeff(), eb.eigenvalues().minCoeff()) <= 1e-28)
        throw ConfigError("projectors: sigma^2 + GG* is singular");
    auto root = [](double lam) { return cplx(std::sqrt(lam), 0.0); };
    auto inv_root = [](double lam) { return cplx(1.0 / std::sqrt(lam), 0.0); };
    ProjectorPair out;
    out.sigma = sigma;
    out.lambda = block_diag(hermitian_funcalc(a, root), hermitian_funcalc(b, root));
    const CMat lambda_inv = block_diag(hermitian_funcalc(a, inv_root), hermitian_funcalc(b, inv_root));
    const CMat w = lambda_inv * v_operator(sigma, g);
    const CMat id2 = CMat::Identity(2 * n, 2 * n);
    out.plus = 0.5 * (id2 + w);
    out.minus = 0.5 * (id2 - w);
    return out;
}

}  // namespace nlz
