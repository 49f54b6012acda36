#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "nlz/operator_core.hpp"

namespace nlz {

enum class KineticSymbol {
    Spectral,    // (hbar^2/2)(k - drift t)^2
    ThreePoint,  // (hbar^2/dx^2)(1 - cos k dx), the symbol of the 3-point Laplacian
};

// i hbar psi_t = T psi + (V(t) - shift) psi + eps |psi|^2 psi on a periodic grid, V(t) = base + t slope.
// The solution carries the extra factor exp(i shift t / hbar) relative to the unshifted equation.
struct NlsProblem {
    double x_min = 0.0;
    double x_max = 1.0;
    double hbar = 1.0;
    double eps = 0.0;
    double shift = 0.0;
    double drift = 0.0;
    Eigen::VectorXd base;
    Eigen::VectorXd slope;  // empty: static potential
    KineticSymbol symbol = KineticSymbol::Spectral;
    int order = 2;                // 2: Strang; 4: triple-jump composition of Strang steps
    double cfl = 0.1;             // bound on max|V - shift| dt / hbar
    double boundary_limit = -1;   // negative disables the boundary-mass monitor
    double boundary_fraction = 0.05;

    int n() const { return static_cast<int>(base.size()); }
    double dx() const { return (x_max - x_min) / n(); }
};

struct NlsResult {
    CVec psi;
    double t = 0.0;
    long steps = 0;
    double mass_drift = 0.0;  // max |mass(t) - mass(0)| at observation times
    double boundary_mass = 0.0;
};

using NlsObserver = std::function<void(double t, const CVec& psi)>;

// Potential phases at step boundaries are fused; lands exactly on each observation time.
NlsResult nls_split_step(const NlsProblem& problem, const CVec& psi0, double t0, const std::vector<double>& observe,
                         double dt_max, const NlsObserver& observer = {});

double grid_mass(const CVec& psi, double dx);

}  // namespace nlz
