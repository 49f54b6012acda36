#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace nlz {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

// s^2/2 + (lambda/2) ln|s|
double phase_phi(double s, double lambda);

enum class CouplingKind { ScalarReal, ScalarComplex, Quaternion, General };

class CouplingOperator {
public:
    CouplingOperator() : CouplingOperator(scalar(0.0)) {}

    static CouplingOperator scalar(double z);
    static CouplingOperator scalar(cplx z);
    // a + i(b sx + c sy + d sz), so that G*G = GG* = (a^2+b^2+c^2+d^2) I
    static CouplingOperator quaternion(double a, double b, double c, double d);
    static CouplingOperator general(const CMat& g);

    const CMat& matrix() const { return g_; }
    CMat adjoint() const { return g_.adjoint(); }
    CMat gg_star() const { return g_ * g_.adjoint(); }
    CMat g_star_g() const { return g_.adjoint() * g_; }
    int dim() const { return static_cast<int>(g_.rows()); }
    CouplingKind kind() const { return kind_; }
    double max_singular_value() const;

private:
    CouplingOperator(CMat g, CouplingKind kind) : g_(std::move(g)), kind_(kind) {}
    CMat g_;
    CouplingKind kind_;
};

// f(A) for Hermitian positive semidefinite A through its eigendecomposition.
CMat hermitian_funcalc(const CMat& a, const std::function<cplx(double)>& f);

// exp(i * sign * phi(s, A))
CMat phase_unitary(double s, const CMat& a, int sign);

double theta_profile(double u);

CMat block_diag(const CMat& upper, const CMat& lower);
CMat j_operator(int n);
CMat k_operator(const CouplingOperator& g);
CMat v_operator(double s, const CouplingOperator& g);

// diag(theta(GG*/R^2), theta(G*G/R^2))
CMat theta_cutoff(double radius, const CouplingOperator& g);

struct ProjectorPair {
    CMat plus;
    CMat minus;
    CMat lambda;
    double sigma = 0.0;
};

// Spectral projectors of V(s + m): (I +- Lambda^{-1} V(sigma)) / 2.
ProjectorPair projectors(double s, double m, const CouplingOperator& g);

}  // namespace nlz
