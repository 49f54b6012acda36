#pragma once

#include <vector>

#include "nlz/double_well.hpp"
#include "nlz/dynamics.hpp"
#include "nlz/split_step.hpp"

namespace nlz {

struct EnvelopeTrajectory {
    std::vector<double> tau;
    std::vector<cplx> a_l, a_r;
    double max_norm_drift = 0.0;
    Dop853Stats stats;
};

// i a_L' = eta tau a_L - a_R + delta |a_L|^2 a_L,  i a_R' = -eta tau a_R - a_L + delta |a_R|^2 a_R
EnvelopeTrajectory envelope_integrate(cplx a_l0, cplx a_r0, double eta, double delta_h, double tau0,
                                      const std::vector<double>& samples, double tol = 1e-11);

// Same system through the nonlinear Landau-Zener integrator with s = sqrt(eta) tau; needs eta > 0.
EnvelopeTrajectory envelope_via_model(cplx a_l0, cplx a_r0, double eta, double delta_h, double tau0,
                                      const std::vector<double>& samples, double tol = 1e-11);

struct EnvelopeTransition {
    double tau_max = 0.0;
    double ratio = 0.0;          // |a_L(T)|^2 / |a_L(-T)|^2 starting from a_L = 1
    double ratio_doubled = 0.0;  // same at 2T
    double predicted = 0.0;      // exp(-pi / eta)
};

EnvelopeTransition envelope_transition(double eta, double delta_h, double tau_max, double tol = 1e-11);

struct TwoModeOptions {
    double c = 0.5;
    double t_window = 0.0;  // 0: c sqrt(hbar) / omega_h
    int observations = 200;
    double cfl = 0.1;
    int order = 4;
    KineticSymbol symbol = KineticSymbol::ThreePoint;
    double boundary_limit = 1e-10;
};

struct TwoModeResult {
    std::vector<double> t;
    std::vector<double> error;
    double sup_error = 0.0;
    double omega_h = 0.0, big_omega_h = 0.0;
    double kappa = 0.0, eps = 0.0;
    double eta_env = 0.0, delta_env = 0.0;
    double t_window = 0.0;
    double mass_drift = 0.0;
    long steps = 0;
};

TwoModeResult two_mode_error(const DoubleWellSetup& setup, cplx alpha_l, cplx alpha_r, const TwoModeOptions& opts = {});

struct LatticeOptions {
    int n = 64;
    double dt = 0.005;
    int observations = 400;
    double tol = 1e-11;
};

struct LatticeResult {
    std::vector<double> t;
    std::vector<double> pde_a, pde_b, ode_1, ode_2, leaked;
    double discrepancy = 0.0;
    double max_leaked = 0.0;
    double mass_drift = 0.0;
};

// Accelerated-lattice equation on the 4 pi torus against the two-mode ODE, starting in exp(i x / 2).
LatticeResult lattice_two_mode_check(double alpha_accel, double v, double eps, double t_from, double t_to,
                                     const LatticeOptions& opts = {});

}  // namespace nlz
