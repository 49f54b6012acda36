#pragma once

#include <vector>

#include "nlz/nonlinear_scattering.hpp"

namespace nlz {

// Partial integrals P(S_k) of an oscillatory integrand and their extrapolated limit.
struct TailQuadrature {
    std::vector<double> s;
    std::vector<double> partial;
    double limit = 0.0;
    Eigen::VectorXd coef;  // limit, 1/S, 1/S^2, then cos/sin(theta) over S and S^2
    double residual = 0.0;
    LineFit rate;  // log-log fit of |P(S_k) - limit|; meaningless when the integrand vanishes
};

struct LambdaOptions {
    double s_max = 200.0;
    double tail_from = 20.0;
    int tail_points = 40;
    double tol = 1e-11;
    WaveLadder ladder;
};

struct LambdaPm {
    double minus = 0.0;
    double plus = 0.0;
    TailQuadrature tail_minus, tail_plus;
    CVec omega_lin;
};

// Requires f1 == f2; the common function is integrated along the delta = 0 trajectory through alpha.
LambdaPm lambda_pm(const TwoLevelState& alpha, const ModelConfig& model, const LambdaOptions& opts = {});

// exp(i delta Lambda+) S^lin exp(i delta Lambda-) alpha
CVec exact_scatter_f1f2(const TwoLevelState& alpha, double delta, const ModelConfig& model, const LambdaPm& lam);
CVec exact_scatter_f1f2(const TwoLevelState& alpha, double delta, const ModelConfig& model,
                        const LambdaOptions& opts = {});

struct DevOptions {
    ScatteringOptions scatter;
    LambdaOptions lambda;
    bool require_resolved = true;
    double phi_floor = 1e-3;
    int threads = 0;  // 0: one per delta
};

struct DevSlopeResult {
    std::vector<double> deltas;
    std::vector<CVec> omega;
    std::vector<double> e1;        // ||S_delta alpha - S^lin alpha|| after global phase alignment
    std::vector<double> e2;        // second-order residual, only when f1 == f2
    std::vector<double> e_exact;   // distance to the exact formula, only when f1 == f2
    std::vector<double> phi;
    std::vector<double> residual;  // extraction residual per delta
    LineFit slope_e1, slope_e2, slope_phi;
    bool phi_below_floor = false;
    bool identical = false;
    LambdaPm lambda;
};

// model's own delta is ignored; each run uses model.with_delta(delta).
DevSlopeResult dev_slope_study(const ModelConfig& model, const TwoLevelState& alpha, const std::vector<double>& deltas,
                               const DevOptions& opts = {});

}  // namespace nlz
