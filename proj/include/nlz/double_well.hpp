#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace nlz {

// Uniform periodic grid x_j = x_min + j dx, j < n, symmetric about 0 as a torus.
struct DoubleWellSetup {
    double x_min = -4.0;
    double x_max = 4.0;
    int n = 0;
    double hbar = 0.2;
    double eta = 0.0;
    double delta = 0.0;
    std::function<double(double)> vs;
    std::function<double(double)> va;
    std::string potential = "default";
    bool hypotheses_hold = true;  // false for test potentials outside the at-most-quadratic class

    double dx() const { return (x_max - x_min) / n; }
    double x(int j) const { return x_min + j * dx(); }
    Eigen::VectorXd vs_samples() const;
    Eigen::VectorXd va_samples() const;
    void validate() const;

    double kappa(double omega_h) const { return eta * omega_h * omega_h / hbar; }
    double eps(double omega_h) const { return delta * omega_h * std::sqrt(hbar); }
};

// n = 0 picks the smallest even 5-smooth n with dx <= hbar / 4.
DoubleWellSetup default_double_well(double hbar, double half_width = 4.0, int n = 0, double amplitude = 2.0,
                                    double width = 0.8);
DoubleWellSetup harmonic_well(double hbar, double half_width = 4.0, int n = 0);
DoubleWellSetup quartic_well(double hbar, double half_width = 3.0, int n = 0);

struct SpectralPair {
    double lambda_plus = 0.0, lambda_minus = 0.0, lambda_third = 0.0;
    Eigen::VectorXd phi_plus, phi_minus;  // normalized with dx weights
    Eigen::VectorXd phi_l, phi_r;
    double omega_h = 0.0;   // (lambda_minus - lambda_plus) / 2
    double big_omega_h = 0.0;  // (lambda_minus + lambda_plus) / 2
    double disc_error = 0.0;   // eigenvalue change under grid refinement
    double gap_error = 0.0;
    double dx = 0.0;
};

// Lowest eigenpairs of -(hbar^2/2) d^2 + V_s with the 3-point Laplacian, solved per parity sector.
SpectralPair solve_eigenpair(const DoubleWellSetup& setup);

struct WellStates {
    Eigen::VectorXd phi_l, phi_r;
    double overlap_sup = 0.0;  // max |phi_L phi_R|
    double mass_right = 0.0;   // mass of phi_R on x > 0
    double mirror_defect = 0.0;
    double inner = 0.0;
};

WellStates single_well_states(const SpectralPair& pair);

struct WellMinima {
    double x_left = 0.0, x_right = 0.0, v_min = 0.0;
};

WellMinima find_minima(const std::function<double(double)>& v, double x_min, double x_max);

double agmon_distance(const std::function<double(double)>& v, double x_min, double x_max);
double agmon_distance(const DoubleWellSetup& setup);

}  // namespace nlz
