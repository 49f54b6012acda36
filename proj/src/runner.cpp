#include "nlz/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "nlz/errors.hpp"
#include "nlz/linear_scattering.hpp"
#include "nlz/mode_reduction.hpp"
#include "nlz/perturbation.hpp"

namespace nlz {

namespace fs = std::filesystem;

namespace {

// ---- config helpers ----

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

Json& section(Json& parent, const std::string& key) {
    if (!parent.contains(key)) parent[key] = Json::object();
    if (!parent[key].is_object()) throw ConfigError("'" + key + "' must be an object");
    return parent[key];
}

double num(Json& obj, const std::string& key, double def, const std::string& where) {
    if (!obj.contains(key)) obj[key] = def;
    if (!obj[key].is_number()) throw ConfigError(where + "." + key + " must be a number");
    return obj[key].get<double>();
}

int integer(Json& obj, const std::string& key, int def, const std::string& where) {
    if (!obj.contains(key)) obj[key] = def;
    if (!obj[key].is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
    return obj[key].get<int>();
}

bool boolean(Json& obj, const std::string& key, bool def, const std::string& where) {
    if (!obj.contains(key)) obj[key] = def;
    if (!obj[key].is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
    return obj[key].get<bool>();
}

std::vector<double> num_list(Json& obj, const std::string& key, const std::vector<double>& def, const std::string& where) {
    if (!obj.contains(key)) obj[key] = def;
    if (obj[key].is_number()) obj[key] = Json::array({obj[key]});
    if (!obj[key].is_array() || obj[key].empty()) throw ConfigError(where + "." + key + " must be a non-empty list");
    std::vector<double> out;
    for (const auto& v : obj[key]) {
        if (!v.is_number()) throw ConfigError(where + "." + key + " must contain numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

cplx complex_value(const Json& v, const std::string& where) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw ConfigError(where + " must be a number or a [re, im] pair");
}

std::array<double, 3> affine_coeffs(Json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) obj[key] = Json::array({0.0, 0.0, 0.0});
    const Json& v = obj[key];
    if (!v.is_array() || v.size() != 3) throw ConfigError(where + "." + key + " must be [c0, cp, cq]");
    std::array<double, 3> c{};
    for (int i = 0; i < 3; ++i) {
        if (!v[i].is_number()) throw ConfigError(where + "." + key + " must contain numbers");
        c[i] = v[i].get<double>();
    }
    return c;
}

CouplingOperator coupling_from_json(Json& c) {
    if (!c.is_object() || !c.contains("type") || !c["type"].is_string())
        throw ConfigError("model.coupling needs a string 'type'");
    const std::string type = c["type"].get<std::string>();
    const std::string where = "model.coupling";
    if (type == "scalar") {
        check_keys(c, {"type", "value"}, where);
        return CouplingOperator::scalar(num(c, "value", 1.0, where));
    }
    if (type == "scalar-complex") {
        check_keys(c, {"type", "re", "im"}, where);
        return CouplingOperator::scalar(cplx(num(c, "re", 1.0, where), num(c, "im", 0.0, where)));
    }
    if (type == "quaternion") {
        check_keys(c, {"type", "a", "b", "c", "d"}, where);
        return CouplingOperator::quaternion(num(c, "a", 0.0, where), num(c, "b", 0.0, where), num(c, "c", 0.0, where),
                                            num(c, "d", 0.0, where));
    }
    if (type == "matrix") {
        check_keys(c, {"type", "re", "im"}, where);
        if (!c.contains("re") || !c["re"].is_array() || c["re"].empty())
            throw ConfigError("model.coupling.re must be a square list of rows");
        const std::size_t n = c["re"].size();
        if (!c.contains("im")) c["im"] = Json::array();
        CMat g = CMat::Zero(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            const Json& row = c["re"][i];
            if (!row.is_array() || row.size() != n) throw ConfigError("model.coupling.re must be square");
            for (std::size_t j = 0; j < n; ++j) g(i, j) += row[j].get<double>();
            if (!c["im"].empty()) {
                const Json& irow = c["im"].at(i);
                if (!irow.is_array() || irow.size() != n) throw ConfigError("model.coupling.im must be square");
                for (std::size_t j = 0; j < n; ++j) g(i, j) += cplx(0.0, irow[j].get<double>());
            }
        }
        return CouplingOperator::general(g);
    }
    throw ConfigError("unknown coupling type '" + type + "'");
}

ModelConfig model_from_json(Json& m) {
    if (!m.contains("preset")) m["preset"] = "physics";
    if (!m["preset"].is_string()) throw ConfigError("model.preset must be a string");
    const std::string preset = m["preset"].get<std::string>();
    const std::string w = "model";
    if (preset == "physics") {
        check_keys(m, {"preset", "gamma1", "z", "delta"}, w);
        return preset_physics(num(m, "gamma1", 1.0, w), num(m, "z", 1.0, w), num(m, "delta", 0.0, w));
    }
    if (preset == "bloch") {
        check_keys(m, {"preset", "alpha", "v", "eps"}, w);
        return preset_bloch(num(m, "alpha", 0.5, w), num(m, "v", 1.0, w), num(m, "eps", 1.0, w));
    }
    if (preset == "doublewell") {
        check_keys(m, {"preset", "omega", "alpha", "delta"}, w);
        return preset_doublewell(num(m, "omega", 1.0, w), num(m, "alpha", 1.0, w), num(m, "delta", 0.0, w));
    }
    if (preset == "custom") {
        check_keys(m, {"preset", "coupling", "delta", "f1", "f2"}, w);
        if (!m.contains("coupling")) m["coupling"] = Json{{"type", "scalar"}, {"value", 1.0}};
        const CouplingOperator g = coupling_from_json(m["coupling"]);
        NonlinearitySpec nl;
        nl.delta = num(m, "delta", 0.0, w);
        const auto c1 = affine_coeffs(m, "f1", w), c2 = affine_coeffs(m, "f2", w);
        nl.f1 = Nonlinearity::affine(c1[0], c1[1], c1[2]);
        nl.f2 = Nonlinearity::affine(c2[0], c2[1], c2[2]);
        return make_model(g, nl);
    }
    throw ConfigError("unknown model preset '" + preset + "'");
}

TwoLevelState state_from_json(Json& s, int n, double at) {
    check_keys(s, {"u1", "u2"}, "state");
    if (!s.contains("u1")) {
        Json u1 = Json::array(), u2 = Json::array();
        for (int i = 0; i < n; ++i) {
            u1.push_back(Json::array({i == 0 ? 1.0 : 0.0, 0.0}));
            u2.push_back(Json::array({0.0, 0.0}));
        }
        s["u1"] = u1;
        if (!s.contains("u2")) s["u2"] = u2;
    }
    if (!s.contains("u2")) throw ConfigError("state.u2 missing");
    TwoLevelState out{at, CVec(n), CVec(n)};
    for (int k = 0; k < 2; ++k) {
        const Json& v = s[k == 0 ? "u1" : "u2"];
        if (!v.is_array() || static_cast<int>(v.size()) != n)
            throw ConfigError("state components must have the coupling dimension " + std::to_string(n));
        for (int i = 0; i < n; ++i) (k == 0 ? out.u1 : out.u2)(i) = complex_value(v[i], "state entry");
    }
    if (std::abs(out.norm2() - 1.0) > 1e-8) throw ConfigError("state must be normalized");
    return out;
}

struct Numerics {
    double s_max, tol, s_from, s_to;
    int grid_count, direction;
    double s0, ratio;
    bool custom_grid;
    WaveLadder ladder;
    ExtractOptions extract;
    bool require_resolved;

    ExtractionGrid grid() const {
        ExtractionGrid g = ExtractionGrid::for_span(s_max, direction, grid_count);
        if (custom_grid) {
            g.s0 = s0;
            g.ratio = ratio;
            g.validate();
        }
        return g;
    }
    ScatteringOptions scattering() const {
        ScatteringOptions o;
        o.s_max = s_max;
        o.tol = tol;
        o.grid_count = grid_count;
        o.ladder = ladder;
        o.extract = extract;
        return o;
    }
};

Numerics numerics_from_json(Json& n) {
    const std::string w = "numerics";
    check_keys(n, {"s_max", "tol", "grid_count", "s0", "ratio", "direction", "s_from", "s_to", "ladder", "corrector",
                   "refine_drift", "require_resolved"},
               w);
    Numerics out{};
    out.s_max = num(n, "s_max", 200.0, w);
    out.tol = num(n, "tol", 1e-11, w);
    out.grid_count = integer(n, "grid_count", 7, w);
    out.direction = integer(n, "direction", 1, w);
    out.s_from = num(n, "s_from", 0.0, w);
    out.s_to = num(n, "s_to", out.s_max, w);
    out.custom_grid = n.contains("s0") || n.contains("ratio");
    if (out.custom_grid) {
        const ExtractionGrid def = ExtractionGrid::for_span(out.s_max, 1, out.grid_count);
        out.s0 = num(n, "s0", def.s0, w);
        out.ratio = num(n, "ratio", def.ratio, w);
    }
    Json& l = section(n, "ladder");
    check_keys(l, {"n0", "ratio", "levels", "corrector"}, "numerics.ladder");
    out.ladder.n0 = num(l, "n0", 50.0, "numerics.ladder");
    out.ladder.ratio = num(l, "ratio", 1.5, "numerics.ladder");
    out.ladder.levels = integer(l, "levels", 6, "numerics.ladder");
    out.ladder.corrector = boolean(l, "corrector", true, "numerics.ladder");
    out.extract.corrector = boolean(n, "corrector", true, w);
    out.extract.refine_drift = boolean(n, "refine_drift", true, w);
    out.require_resolved = boolean(n, "require_resolved", true, w);
    if (!(out.s_max > 20) || !(out.tol > 0)) throw ConfigError("numerics: need s_max > 20 and tol > 0");
    return out;
}

struct LabParams {
    std::vector<double> hbars;
    double eta, delta, c, cfl, half_width;
    int order, observations;
    cplx alpha_l, alpha_r;
    double transition_eta, transition_tau;
};

LabParams lab_from_json(Json& l, const std::vector<double>& default_hbars) {
    const std::string w = "lab";
    check_keys(l, {"hbars", "eta", "delta", "c", "cfl", "order", "half_width", "observations", "alpha_l", "alpha_r",
                   "transition"},
               w);
    LabParams p{};
    p.hbars = num_list(l, "hbars", default_hbars, w);
    p.eta = num(l, "eta", 0.0, w);
    p.delta = num(l, "delta", 0.0, w);
    p.c = num(l, "c", 0.5, w);
    p.cfl = num(l, "cfl", 0.4, w);
    p.order = integer(l, "order", 4, w);
    p.half_width = num(l, "half_width", 4.0, w);
    p.observations = integer(l, "observations", 200, w);
    if (!l.contains("alpha_l")) l["alpha_l"] = Json::array({1.0, 0.0});
    if (!l.contains("alpha_r")) l["alpha_r"] = Json::array({0.0, 0.0});
    p.alpha_l = complex_value(l["alpha_l"], "lab.alpha_l");
    p.alpha_r = complex_value(l["alpha_r"], "lab.alpha_r");
    Json& t = section(l, "transition");
    check_keys(t, {"eta", "tau"}, "lab.transition");
    p.transition_eta = num(t, "eta", 1.0, "lab.transition");
    p.transition_tau = num(t, "tau", 200.0, "lab.transition");
    for (double h : p.hbars)
        if (!(h > 0)) throw ConfigError("lab.hbars must be positive");
    return p;
}

// ---- table helpers ----

std::string cell(double x) { return format_number(x); }
std::string cell(long x) { return std::to_string(x); }
std::string cell(int x) { return std::to_string(x); }

void add_state_columns(std::vector<std::string>& header, const std::string& prefix, int n) {
    for (int j = 1; j <= 2; ++j)
        for (int i = 0; i < n; ++i) {
            header.push_back(prefix + std::to_string(j) + "_re_" + std::to_string(i));
            header.push_back(prefix + std::to_string(j) + "_im_" + std::to_string(i));
        }
}

void add_state_cells(std::vector<std::string>& row, const CVec& w) {
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        row.push_back(cell(w(i).real()));
        row.push_back(cell(w(i).imag()));
    }
}

// Work-stealing map over independent items; results land in index order.
template <class R, class F>
std::vector<R> parallel_map(std::size_t count, int threads, F fn, std::vector<std::exception_ptr>* errors = nullptr) {
    std::vector<R> out(count);
    std::vector<std::exception_ptr> errs(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (errors) {
        *errors = errs;
    } else {
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }
    return out;
}

// ---- experiments ----

ExperimentOutput run_simulate(Json& cfg) {
    ModelConfig model = model_from_json(section(cfg, "model"));
    const Numerics nm = numerics_from_json(section(cfg, "numerics"));
    const TwoLevelState start = state_from_json(section(cfg, "state"), model.dim(), nm.s_from);
    IntegrateOptions io;
    io.tol = nm.tol;
    const Trajectory tr = integrate(start, nm.s_to, model, io);
    const auto& last = tr.back();
    ExperimentOutput out;
    out.table.header = {"s_from", "s_to", "final_norm", "max_norm_drift", "p_final", "q_final", "cutoff_defect",
                        "accepted_steps", "rejected_steps"};
    out.table.rows.push_back({cell(nm.s_from), cell(nm.s_to), cell(last.u1.squaredNorm() + last.u2.squaredNorm()),
                              cell(tr.max_norm_drift), cell(last.u1.squaredNorm()), cell(last.u2.squaredNorm()),
                              cell(cutoff_defect(tr.state(tr.samples.size() - 1), model)), cell(tr.stats.accepted),
                              cell(tr.stats.rejected)});
    CsvTable traj;
    traj.header = {"s", "p", "q", "norm", "gauge"};
    add_state_columns(traj.header, "u", model.dim());
    for (const auto& smp : tr.samples) {
        std::vector<std::string> row = {cell(smp.s), cell(smp.u1.squaredNorm()), cell(smp.u2.squaredNorm()),
                                        cell(smp.u1.squaredNorm() + smp.u2.squaredNorm()), cell(smp.gauge)};
        CVec w(2 * model.dim());
        w << smp.u1, smp.u2;
        add_state_cells(row, w);
        traj.rows.push_back(std::move(row));
    }
    out.extra.emplace_back("trajectory_0.csv", std::move(traj));
    out.diagnostics["max_norm_drift"] = tr.max_norm_drift;
    return out;
}

ExperimentOutput run_extract(Json& cfg) {
    ModelConfig model = model_from_json(section(cfg, "model"));
    const Numerics nm = numerics_from_json(section(cfg, "numerics"));
    const TwoLevelState start = state_from_json(section(cfg, "state"), model.dim(), nm.s_from);
    const ExtractionGrid grid = nm.grid();
    IntegrateOptions io;
    io.tol = nm.tol;
    io.samples = grid.sample_points();
    const Trajectory tr = integrate(start, io.samples.back(), model, io);
    const AsymptoticState st = extract_scattering_state(tr, grid, model, nm.extract);
    ExperimentOutput out;
    out.table.header = {"norm1", "norm2", "drift1", "drift2", "residual"};
    add_state_columns(out.table.header, "omega", model.dim());
    std::vector<std::string> row = {cell(st.norm1), cell(st.norm2), cell(st.drift1), cell(st.drift2),
                                    cell(st.residual)};
    add_state_cells(row, st.stacked());
    out.table.rows.push_back(std::move(row));
    out.diagnostics["residual"] = st.residual;
    out.diagnostics["max_norm_drift"] = tr.max_norm_drift;
    return out;
}

ExperimentOutput run_scatter(Json& cfg) {
    ModelConfig model = model_from_json(section(cfg, "model"));
    const Numerics nm = numerics_from_json(section(cfg, "numerics"));
    const TwoLevelState alpha = state_from_json(section(cfg, "state"), model.dim(), 0.0);
    const ScatteringResult r = scattering_map(alpha, model, nm.scattering());
    const CVec w = r.omega.stacked();
    const CVec lin = slin_matrix(model.g) * alpha.stacked();
    const double e1 = (std::polar(1.0, align_phase(w, lin)) * w - lin).norm();
    ExperimentOutput out;
    out.table.header = {"delta", "phi", "E1", "residual", "norm_drift", "wave_slope"};
    add_state_columns(out.table.header, "omega", model.dim());
    std::vector<std::string> row = {cell(model.nonlinearity.delta), cell(r.phi), cell(e1), cell(r.omega.residual),
                                    cell(r.norm_drift), cell(r.wave.rate.slope)};
    add_state_cells(row, w);
    out.table.rows.push_back(std::move(row));
    out.diagnostics["residual"] = r.omega.residual;
    out.diagnostics["wave_diffs"] = r.wave.diffs;
    out.diagnostics["norm_drift"] = r.norm_drift;
    return out;
}

ExperimentOutput run_linear_verify(Json& cfg, int threads) {
    const Numerics nm = numerics_from_json(section(cfg, "numerics"));
    const std::vector<double> zs = num_list(cfg, "zs", {0.25, 0.5, 1.0}, "config");
    const ScatteringOptions so = nm.scattering();
    const auto rows = parallel_map<std::vector<std::string>>(zs.size(), threads, [&](std::size_t i) {
        const double z = zs[i];
        const ModelConfig model = make_model(CouplingOperator::scalar(z));
        ScatteringOptions o = so;
        o.measure_phi = false;
        const ScatteringResult r = scattering_map(basis_state(1, 0), model, o);
        const double t_num = r.omega.omega1.squaredNorm();
        const double t_formula = lz_transition(z);
        return std::vector<std::string>{cell(z), cell(t_num), cell(t_formula), cell(std::abs(t_num - t_formula)),
                                        cell(r.omega.residual)};
    });
    ExperimentOutput out;
    out.table.header = {"z", "T_numeric", "T_formula", "abs_err", "residual"};
    out.table.rows = rows;
    return out;
}

ExperimentOutput run_dev_slopes(Json& cfg, int threads) {
    ModelConfig model = model_from_json(section(cfg, "model"));
    const Numerics nm = numerics_from_json(section(cfg, "numerics"));
    const TwoLevelState alpha = state_from_json(section(cfg, "state"), model.dim(), 0.0);
    const std::vector<double> deltas = num_list(cfg, "deltas", {0.02, 0.04, 0.08, 0.16}, "config");
    DevOptions o;
    o.scatter = nm.scattering();
    o.lambda.s_max = nm.s_max;
    o.lambda.tol = nm.tol;
    o.lambda.ladder = nm.ladder;
    o.require_resolved = nm.require_resolved;
    o.threads = threads;
    const DevSlopeResult r = dev_slope_study(model, alpha, deltas, o);
    ExperimentOutput out;
    out.table.header = {"delta", "E1", "E2", "E_exact", "phi", "residual", "slope_E1", "slope_E2"};
    for (std::size_t i = 0; i < deltas.size(); ++i)
        out.table.rows.push_back({cell(deltas[i]), cell(r.e1[i]), r.identical ? cell(r.e2[i]) : "",
                                  r.identical ? cell(r.e_exact[i]) : "", cell(r.phi[i]), cell(r.residual[i]),
                                  cell(r.slope_e1.slope), r.identical ? cell(r.slope_e2.slope) : ""});
    out.diagnostics["slope_E1"] = r.slope_e1.slope;
    if (r.identical) out.diagnostics["slope_E2"] = r.slope_e2.slope;
    out.diagnostics["phi_below_floor"] = r.phi_below_floor;
    if (!r.phi_below_floor) out.diagnostics["slope_phi"] = r.slope_phi.slope;
    return out;
}

ExperimentOutput run_lambda_pm(Json& cfg) {
    ModelConfig model = model_from_json(section(cfg, "model"));
    const Numerics nm = numerics_from_json(section(cfg, "numerics"));
    const TwoLevelState alpha = state_from_json(section(cfg, "state"), model.dim(), 0.0);
    LambdaOptions lo;
    lo.s_max = nm.s_max;
    lo.tol = nm.tol;
    lo.ladder = nm.ladder;
    const LambdaPm lam = lambda_pm(alpha, model, lo);
    ExperimentOutput out;
    out.table.header = {"lambda_minus", "lambda_plus", "residual_minus", "residual_plus", "rate_minus", "rate_plus"};
    out.table.rows.push_back({cell(lam.minus), cell(lam.plus), cell(lam.tail_minus.residual),
                              cell(lam.tail_plus.residual), cell(lam.tail_minus.rate.slope),
                              cell(lam.tail_plus.rate.slope)});
    CsvTable tail;
    tail.header = {"side", "S", "partial", "limit"};
    for (const auto* tq : {&lam.tail_minus, &lam.tail_plus})
        for (std::size_t k = 0; k < tq->s.size(); ++k)
            tail.rows.push_back({tq == &lam.tail_minus ? "minus" : "plus", cell(tq->s[k]), cell(tq->partial[k]),
                                 cell(tq->limit)});
    out.extra.emplace_back("lambda-pm-tail.csv", std::move(tail));
    return out;
}

ExperimentOutput run_lab_spectral(Json& cfg, int threads) {
    const LabParams lp = lab_from_json(section(cfg, "lab"), {0.25, 0.2, 0.15, 0.1});
    struct Row {
        std::vector<std::string> cells;
        double omega = 0;
    };
    const auto rows = parallel_map<Row>(lp.hbars.size(), threads, [&](std::size_t i) {
        const double h = lp.hbars[i];
        const DoubleWellSetup setup = default_double_well(h, lp.half_width);
        const SpectralPair p = solve_eigenpair(setup);
        const WellStates w = single_well_states(p);
        return Row{{cell(h), cell(setup.n), cell(p.lambda_plus), cell(p.lambda_minus), cell(p.lambda_third),
                    cell(p.omega_h), cell(p.big_omega_h), cell(p.disc_error), cell(p.gap_error), cell(w.overlap_sup),
                    cell(w.mass_right)},
                   p.omega_h};
    });
    const double gamma = agmon_distance(default_double_well(lp.hbars.front(), lp.half_width));
    ExperimentOutput out;
    out.table.header = {"hbar", "n", "lambda_plus", "lambda_minus", "lambda_third", "omega_h", "Omega_h", "disc_error",
                        "gap_error", "overlap_sup", "mass_right"};
    std::vector<double> inv, logw;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.table.rows.push_back(rows[i].cells);
        inv.push_back(1.0 / lp.hbars[i]);
        logw.push_back(std::log(rows[i].omega));
    }
    out.diagnostics["gamma_agmon"] = gamma;
    if (rows.size() >= 2) {
        const LineFit f = fit_line(inv, logw);
        out.diagnostics["splitting_slope"] = f.slope;
        out.diagnostics["splitting_r2"] = f.r2;
    }
    return out;
}

ExperimentOutput run_lab_envelope(Json& cfg, int threads) {
    const LabParams lp = lab_from_json(section(cfg, "lab"), {0.25, 0.2, 0.15});
    TwoModeOptions o;
    o.c = lp.c;
    o.cfl = lp.cfl;
    o.order = lp.order;
    o.observations = lp.observations;
    const double mass = std::norm(lp.alpha_l) + std::norm(lp.alpha_r);
    if (std::abs(mass - 1.0) > 1e-10) throw ConfigError("lab: alpha_l, alpha_r must be normalized");
    const auto rows = parallel_map<std::vector<std::string>>(lp.hbars.size(), threads, [&](std::size_t i) {
        DoubleWellSetup setup = default_double_well(lp.hbars[i], lp.half_width);
        setup.eta = lp.eta;
        setup.delta = lp.delta;
        const TwoModeResult r = two_mode_error(setup, lp.alpha_l, lp.alpha_r, o);
        return std::vector<std::string>{cell(lp.hbars[i]), cell(r.omega_h), cell(r.t_window), cell(r.sup_error),
                                        cell(r.eta_env), cell(r.delta_env), cell(r.steps), cell(r.mass_drift)};
    });
    ExperimentOutput out;
    out.table.header = {"hbar", "omega_h", "t_window", "sup_error", "eta_env", "delta_env", "steps", "mass_drift"};
    out.table.rows = rows;
    if (lp.transition_eta > 0) {
        const EnvelopeTransition tr = envelope_transition(lp.transition_eta, 0.0, lp.transition_tau);
        CsvTable t;
        t.header = {"eta", "tau", "ratio", "ratio_doubled", "predicted"};
        t.rows.push_back({cell(lp.transition_eta), cell(tr.tau_max), cell(tr.ratio), cell(tr.ratio_doubled),
                          cell(tr.predicted)});
        out.extra.emplace_back("lab-envelope-transition.csv", std::move(t));
    }
    return out;
}

ExperimentOutput run_lab_lattice(Json& cfg) {
    Json& l = section(cfg, "lattice");
    const std::string w = "lattice";
    check_keys(l, {"alpha", "v", "eps", "t_from", "t_to", "n", "dt", "observations"}, w);
    LatticeOptions o;
    const double alpha = num(l, "alpha", 0.02, w), v = num(l, "v", 0.2, w), eps = num(l, "eps", 0.0, w);
    const double t_from = num(l, "t_from", -25.0, w), t_to = num(l, "t_to", 25.0, w);
    o.n = integer(l, "n", 64, w);
    o.dt = num(l, "dt", 0.005, w);
    o.observations = integer(l, "observations", 400, w);
    const LatticeResult r = lattice_two_mode_check(alpha, v, eps, t_from, t_to, o);
    ExperimentOutput out;
    out.table.header = {"t", "pde_a", "pde_b", "ode_1", "ode_2", "leaked"};
    for (std::size_t i = 0; i < r.t.size(); ++i)
        out.table.rows.push_back({cell(r.t[i]), cell(r.pde_a[i]), cell(r.pde_b[i]), cell(r.ode_1[i]), cell(r.ode_2[i]),
                                  cell(r.leaked[i])});
    out.diagnostics["discrepancy"] = r.discrepancy;
    out.diagnostics["max_leaked"] = r.max_leaked;
    out.diagnostics["mass_drift"] = r.mass_drift;
    return out;
}

void set_path(Json& cfg, const std::string& path, const Json& value) {
    Json* node = &cfg;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("sweep: empty parameter path");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i])) (*node)[parts[i]] = Json::object();
        node = &(*node)[parts[i]];
        if (!node->is_object()) throw ConfigError("sweep: path '" + path + "' crosses a non-object");
    }
    (*node)[parts.back()] = value;
}

std::string json_cell(const Json& v) {
    if (v.is_number()) return format_number(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

ExperimentOutput run_single(const std::string& kind, Json& cfg, int threads);

ExperimentOutput run_sweep(Json& cfg, int threads) {
    Json& sw = section(cfg, "sweep");
    check_keys(sw, {"experiment", "grid"}, "sweep");
    if (!sw.contains("experiment") || !sw["experiment"].is_string()) throw ConfigError("sweep.experiment missing");
    const std::string sub = sw["experiment"].get<std::string>();
    if (sub == "sweep" || std::find(experiment_kinds().begin(), experiment_kinds().end(), sub) == experiment_kinds().end())
        throw ConfigError("sweep.experiment must name a non-sweep experiment");
    if (!sw.contains("grid") || !sw["grid"].is_object() || sw["grid"].empty())
        throw ConfigError("sweep.grid must map parameter paths to value lists");
    std::vector<std::string> keys;
    std::vector<std::vector<Json>> values;
    std::size_t total = 1;
    for (auto it = sw["grid"].begin(); it != sw["grid"].end(); ++it) {
        if (!it.value().is_array() || it.value().empty()) throw ConfigError("sweep.grid values must be non-empty lists");
        keys.push_back(it.key());
        values.emplace_back(it.value().begin(), it.value().end());
        total *= values.back().size();
    }
    if (total > 10000) throw ConfigError("sweep grid exceeds 10^4 points");

    Json base = cfg;
    base.erase("sweep");
    base.erase("output_dir");
    std::vector<std::vector<Json>> points(total);
    for (std::size_t p = 0; p < total; ++p) {
        std::size_t rem = p;
        std::vector<Json> pt(keys.size());
        for (std::size_t k = keys.size(); k-- > 0;) {
            pt[k] = values[k][rem % values[k].size()];
            rem /= values[k].size();
        }
        points[p] = pt;
    }
    // validate once so schema errors fail the whole run instead of every row
    {
        Json probe = base;
        for (std::size_t k = 0; k < keys.size(); ++k) set_path(probe, keys[k], points[0][k]);
        (void)probe;
    }

    std::vector<std::exception_ptr> errors;
    const auto results = parallel_map<ExperimentOutput>(
        total, threads,
        [&](std::size_t p) {
            Json c = base;
            for (std::size_t k = 0; k < keys.size(); ++k) set_path(c, keys[k], points[p][k]);
            return run_single(sub, c, 1);
        },
        &errors);

    std::vector<std::string> sub_header;
    for (std::size_t p = 0; p < total; ++p)
        if (!errors[p]) {
            sub_header = results[p].table.header;
            break;
        }
    ExperimentOutput out;
    out.table.header = keys;
    out.table.header.push_back("status");
    out.table.header.push_back("error");
    out.table.header.insert(out.table.header.end(), sub_header.begin(), sub_header.end());
    int failures = 0;
    for (std::size_t p = 0; p < total; ++p) {
        std::vector<std::string> prefix;
        for (const auto& v : points[p]) prefix.push_back(json_cell(v));
        if (errors[p]) {
            ++failures;
            std::string msg;
            try {
                std::rethrow_exception(errors[p]);
            } catch (const std::exception& e) {
                msg = e.what();
            }
            std::vector<std::string> row = prefix;
            row.push_back("error");
            row.push_back(msg);
            row.resize(out.table.header.size());
            out.table.rows.push_back(row);
            continue;
        }
        for (const auto& r : results[p].table.rows) {
            std::vector<std::string> row = prefix;
            row.push_back("ok");
            row.push_back("");
            row.insert(row.end(), r.begin(), r.end());
            row.resize(out.table.header.size());
            out.table.rows.push_back(row);
        }
    }
    out.diagnostics["points"] = total;
    out.diagnostics["failures"] = failures;
    return out;
}

ExperimentOutput run_single(const std::string& kind, Json& cfg, int threads) {
    if (kind == "simulate") return run_simulate(cfg);
    if (kind == "extract") return run_extract(cfg);
    if (kind == "scatter") return run_scatter(cfg);
    if (kind == "linear-verify") return run_linear_verify(cfg, threads);
    if (kind == "dev-slopes") return run_dev_slopes(cfg, threads);
    if (kind == "lambda-pm") return run_lambda_pm(cfg);
    if (kind == "lab-spectral") return run_lab_spectral(cfg, threads);
    if (kind == "lab-envelope") return run_lab_envelope(cfg, threads);
    if (kind == "lab-lattice") return run_lab_lattice(cfg);
    if (kind == "sweep") return run_sweep(cfg, threads);
    throw ConfigError("unknown experiment kind '" + kind + "'");
}

const std::set<std::string> kTopKeys = {"kind", "model", "state", "numerics", "zs", "deltas",
                                        "lab", "lattice", "sweep", "output_dir"};

// ---- output ----

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + tmp.string());
        f << content;
        f.flush();
        if (!f) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k = {"simulate",   "extract",      "scatter",      "linear-verify",
                                               "dev-slopes", "lambda-pm",    "lab-spectral", "lab-envelope",
                                               "lab-lattice", "sweep"};
    return k;
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string CsvTable::render() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += csv_escape(cells[i]);
        }
        out += "\r\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

RunConfig make_run_config(const std::string& kind, const Json& raw, const std::string& out_override, int threads) {
    if (std::find(experiment_kinds().begin(), experiment_kinds().end(), kind) == experiment_kinds().end())
        throw ConfigError("unknown experiment kind '" + kind + "'");
    if (!raw.is_object()) throw ConfigError("config must be a JSON object");
    check_keys(raw, kTopKeys, "config");
    if (raw.contains("kind") && raw["kind"] != kind)
        throw ConfigError("config kind '" + raw["kind"].dump() + "' does not match the command '" + kind + "'");
    if (threads < 1) throw ConfigError("--threads must be at least 1");
    RunConfig cfg;
    cfg.kind = kind;
    cfg.config = raw;
    cfg.config["kind"] = kind;
    cfg.threads = threads;
    if (!out_override.empty()) cfg.out_dir = out_override;
    else if (const char* env = std::getenv("NLZ_OUT_DIR"); env && *env) cfg.out_dir = env;
    else if (raw.contains("output_dir")) {
        if (!raw["output_dir"].is_string()) throw ConfigError("output_dir must be a string");
        cfg.out_dir = raw["output_dir"].get<std::string>();
    } else cfg.out_dir = "nlz_out";
    return cfg;
}

ExperimentOutput execute(const std::string& kind, const Json& config, int threads) {
    Json cfg = config;
    return run_single(kind, cfg, threads);
}

std::string sha256_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 14];
    while (f) {
        f.read(buf, sizeof buf);
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char h[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(h, sizeof h, "%02x", md[i]);
        hex += h;
    }
    return hex;
}

RunOutcome run(const RunConfig& rc) {
    RunOutcome outcome;
    Json& man = outcome.manifest;
    man["tool"] = "nlz";
    man["version"] = kToolVersion;
    man["kind"] = rc.kind;
    const auto t0 = std::chrono::steady_clock::now();
    Json cfg = rc.config;
    std::string category, module, message;
    ExperimentOutput result;
    try {
        result = run_single(rc.kind, cfg, rc.threads);
    } catch (const ConfigError& e) {
        category = "config";
        message = e.what();
        outcome.exit_code = 2;
    } catch (const nlohmann::json::exception& e) {
        category = "config";
        message = e.what();
        outcome.exit_code = 2;
    } catch (const NumericError& e) {
        category = "numeric";
        module = e.module();
        message = e.what();
        outcome.exit_code = 3;
    } catch (const IoError& e) {
        category = "io";
        message = e.what();
        outcome.exit_code = 4;
    }
    man["config"] = cfg;
    man["output_dir"] = rc.out_dir;
    man["threads"] = rc.threads;
    man["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    man["files"] = Json::array();

    try {
        std::error_code ec;
        fs::create_directories(rc.out_dir, ec);
        if (ec || !fs::is_directory(rc.out_dir)) throw IoError("output directory not writable: " + rc.out_dir);
        if (outcome.exit_code == 0) {
            std::vector<std::pair<std::string, const CsvTable*>> files = {{rc.kind + ".csv", &result.table}};
            for (const auto& [name, table] : result.extra) files.emplace_back(name, &table);
            for (const auto& [name, table] : files) {
                const fs::path p = fs::path(rc.out_dir) / name;
                write_atomic(p, table->render());
                man["files"].push_back(
                    {{"name", name}, {"sha256", sha256_file(p.string())}, {"bytes", fs::file_size(p)}, {"rows", table->rows.size()}});
            }
            man["status"] = "ok";
            man["diagnostics"] = result.diagnostics;
        } else {
            man["status"] = "error";
            man["error"] = {{"category", category}, {"module", module}, {"message", message}};
        }
        write_atomic(fs::path(rc.out_dir) / "manifest.json", man.dump(2) + "\n");
    } catch (const IoError& e) {
        if (outcome.exit_code == 0) {
            outcome.exit_code = 4;
            man["status"] = "error";
            man["error"] = {{"category", "io"}, {"module", ""}, {"message", e.what()}};
        }
    } catch (const fs::filesystem_error& e) {
        if (outcome.exit_code == 0) {
            outcome.exit_code = 4;
            man["status"] = "error";
            man["error"] = {{"category", "io"}, {"module", ""}, {"message", e.what()}};
        }
    }
    return outcome;
}

RunOutcome run_from_file(const std::string& kind, const std::string& config_path, const std::string& out_override,
                         int threads) {
    auto fail = [&](const std::string& msg) {
        RunOutcome o;
        o.exit_code = 2;
        o.manifest = {{"tool", "nlz"}, {"version", kToolVersion}, {"kind", kind}, {"status", "error"},
                      {"error", {{"category", "config"}, {"module", ""}, {"message", msg}}}};
        return o;
    };
    Json raw = Json::object();
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) return fail("cannot read config file " + config_path);
        try {
            raw = Json::parse(f);
        } catch (const nlohmann::json::exception& e) {
            return fail(std::string("config parse error: ") + e.what());
        }
    }
    RunConfig rc;
    try {
        rc = make_run_config(kind, raw, out_override, threads);
    } catch (const ConfigError& e) {
        return fail(e.what());
    }
    return run(rc);
}

}  // namespace nlz
