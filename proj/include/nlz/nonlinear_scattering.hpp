#pragma once

#include <vector>

#include "nlz/dynamics.hpp"
#include "nlz/fitting.hpp"

namespace nlz {

// Clusters of points spanning one local period pi/|s_k| around centers direction*s0*ratio^k.
struct ExtractionGrid {
    double s0 = 40.0;
    double ratio = 1.285;
    int count = 7;
    int direction = 1;
    int points_per_period = 16;

    static ExtractionGrid for_span(double s_max, int direction, int count = 7);
    void validate() const;
    std::vector<double> centers() const;
    std::vector<double> cluster(int k) const;
    std::vector<double> sample_points() const;  // ordered away from s = 0
    double extent() const;                       // largest |s| touched
};

struct NormLimits {
    double omega1 = 0.0, omega2 = 0.0;
    double c1 = 0.0, c2 = 0.0;
    double residual = 0.0;
    std::vector<double> centers;
    std::vector<double> deviation;  // per-center max | |u_j|^2 - Omega_j |
};

struct AsymptoticState {
    CVec omega1, omega2;
    double norm1 = 0.0, norm2 = 0.0;  // Omega_j
    double drift1 = 0.0, drift2 = 0.0;
    double residual = 0.0;
    double phi = 0.0;
    std::vector<double> centers;
    std::vector<double> deviation;  // per-center max deviation from the affine fit

    CVec stacked() const;
    TwoLevelState state() const { return {0.0, omega1, omega2}; }
};

struct ExtractOptions {
    bool corrector = true;
    bool refine_drift = true;
};

NormLimits extract_norm_limits(const Trajectory& traj, const ExtractionGrid& grid);

AsymptoticState extract_scattering_state(const Trajectory& traj, const ExtractionGrid& grid, const ModelConfig& model,
                                         const ExtractOptions& opts = {});

// Asymptotic profile with drift and log phases, plus the -+G/(2s) cross terms when corrector is set.
TwoLevelState corrected_ansatz(double s, const CVec& w1, const CVec& w2, const ModelConfig& model,
                               bool corrector = true);

struct WaveLadder {
    double n0 = 50.0;
    double ratio = 1.5;
    int levels = 6;
    bool corrector = true;  // off: start each level from the bare asymptotic profile
};

struct WaveOperatorResult {
    TwoLevelState u0;
    std::vector<double> levels;
    std::vector<double> diffs;  // D_k = ||u^{(k+1)}(0) - u^{(k)}(0)||
    LineFit rate;               // log-log fit of D_k against n_k
    double phi = 0.0;
};

WaveOperatorResult wave_operator(const CVec& w1, const CVec& w2, int direction, const ModelConfig& model,
                                 const WaveLadder& ladder = {}, double tol = 1e-11);

struct ScatteringOptions {
    double s_max = 200.0;
    double tol = 1e-11;
    int grid_count = 7;
    WaveLadder ladder;
    ExtractOptions extract;
    bool measure_phi = true;
};

struct ScatteringResult {
    AsymptoticState omega;
    AsymptoticState alpha_back;
    WaveOperatorResult wave;
    double phi = 0.0;
    double norm_drift = 0.0;
};

ScatteringResult scattering_map(const TwoLevelState& alpha, const ModelConfig& model, const ScatteringOptions& opts = {});

struct PopulationSeries {
    std::vector<double> centers;
    std::vector<double> plus, minus;  // period means of ||Pi_+- v||^2
    double limit_plus = 0.0, limit_minus = 0.0;
    std::vector<double> deviation;  // per-center max |pop - limit| over both branches
    bool fitted = false;
    LineFit rate;
};

PopulationSeries mode_populations(const Trajectory& u_traj, const ModelConfig& model, const ExtractionGrid& grid);

// Rates used by the diagnostics: log-log fit of per-center deviations.
LineFit decay_rate(const std::vector<double>& centers, const std::vector<double>& deviation);

}  // namespace nlz
