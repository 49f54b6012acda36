#pragma once

#include "nlz/dynamics.hpp"
#include "nlz/operator_core.hpp"

namespace nlz {

cplx complex_gamma(cplx z);

struct SlinCoefficients {
    double a = 1.0;
    cplx b;
};

SlinCoefficients slin_coefficients(double lambda);

// [[a(GG*), -conj(b)(GG*) G], [b(G*G) G*, a(G*G)]]
CMat slin_matrix(const CouplingOperator& g);

double lz_transition(double z);

// Phase theta minimizing ||e^{i theta} a - b|| in Frobenius norm.
double align_phase(const CMat& a, const CMat& b);

struct ScatteringOptions;

struct SlinCheck {
    CMat numeric;
    CMat closed_form;
    double max_deviation = 0.0;
    double phase = 0.0;  // global phase applied to the numeric matrix
};

SlinCheck verify_slin_numeric(const CouplingOperator& g, const ScatteringOptions& opts);

}  // namespace nlz
