#pragma once

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nlz/dop853.hpp"
#include "nlz/operator_core.hpp"

namespace nlz {

// f(p, q) with p = |u1|^2, q = |u2|^2. Either affine (c0 + cp p + cq q) or an arbitrary callable.
class Nonlinearity {
public:
    Nonlinearity() = default;
    static Nonlinearity affine(double c0, double cp, double cq);
    static Nonlinearity general(std::function<double(double, double)> f, std::string name);

    double operator()(double p, double q) const;
    bool is_affine() const { return !general_; }
    double c0() const { return c0_; }
    double cp() const { return cp_; }
    double cq() const { return cq_; }
    const std::string& name() const { return name_; }
    bool same_as(const Nonlinearity& other) const;

private:
    double c0_ = 0.0, cp_ = 0.0, cq_ = 0.0;
    std::function<double(double, double)> general_;
    std::string name_ = "affine";
};

struct NonlinearitySpec {
    double delta = 0.0;
    Nonlinearity f1;
    Nonlinearity f2;

    bool identical() const { return f1.same_as(f2); }
};

struct Provenance {
    std::string preset = "custom";
    std::vector<std::pair<std::string, double>> params;
    double predicted_lz = std::numeric_limits<double>::quiet_NaN();
};

struct ModelConfig {
    CouplingOperator g;
    NonlinearitySpec nonlinearity;
    double cutoff_radius = 1.0;
    Provenance provenance;

    int dim() const { return g.dim(); }
    ModelConfig with_delta(double delta) const;
    ModelConfig linear() const { return with_delta(0.0); }
};

// cutoff_radius defaults to sqrt(2) times the largest singular value of G.
ModelConfig make_model(const CouplingOperator& g, const NonlinearitySpec& nl = {});

ModelConfig preset_physics(double gamma1, double z, double delta_phys);
ModelConfig preset_bloch(double alpha, double v, double eps);
ModelConfig preset_doublewell(double omega, double alpha, double delta_phys);

struct TwoLevelState {
    double s = 0.0;
    CVec u1;
    CVec u2;

    double p() const { return u1.squaredNorm(); }
    double q() const { return u2.squaredNorm(); }
    double norm2() const { return p() + q(); }
    CVec stacked() const;
    static TwoLevelState from_stacked(double s, const CVec& w);
};

TwoLevelState basis_state(int n, int index, double s = 0.0);

struct TrajectorySample {
    double s = 0.0;
    CVec u1;
    CVec u2;
    double gauge = 0.0;  // int_{s_from}^{s} M
    double aux = 0.0;    // optional extra quadrature
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    Dop853Stats stats;
    double max_norm_drift = 0.0;

    TwoLevelState state(std::size_t i) const { return {samples[i].s, samples[i].u1, samples[i].u2}; }
    const TrajectorySample& back() const { return samples.back(); }
};

struct IntegrateOptions {
    double tol = 1e-11;
    std::vector<double> samples;  // empty: hybrid uniform/geometric grid
    std::function<double(double, double)> aux;
    bool check_drift = true;
};

std::vector<double> default_sample_grid(double s_from, double s_to);

Trajectory integrate(const TwoLevelState& start, double s_to, const ModelConfig& model,
                     const IntegrateOptions& opts = {});

void rhs(const TwoLevelState& state, const ModelConfig& model, CVec& du1, CVec& du2);

struct GaugeTerms {
    double big_m = 0.0;    // (delta/2)(F1 + F2)
    double small_m = 0.0;  // (delta/2)(F1 - F2)
};

GaugeTerms compute_gauge_terms(const CVec& u1, const CVec& u2, const ModelConfig& model);

// v = u exp(-i int M)
Trajectory gauge_to_v(const Trajectory& u_traj);

double cutoff_defect(const TwoLevelState& state, const ModelConfig& model);

}  // namespace nlz
