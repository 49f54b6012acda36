#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nlz/errors.hpp"

namespace nlz {

struct Dop853Options {
    double rtol = 1e-11;
    double atol = 1e-11;
    double h_min = 1e-12;
    double h_max = 0.0;  // 0: unbounded
    long max_steps = 200'000'000;
    double beta = 0.04;
    std::size_t group = 1;
    bool per_unit_step = false;  // control local error divided by |h|
};

struct Dop853Stats {
    long accepted = 0;
    long rejected = 0;
    long evaluations = 0;
};

class StepSizeUnderflow : public NumericError {
public:
    StepSizeUnderflow(double t, std::vector<double> last)
        : NumericError("integrator", "step size underflow at t = " + std::to_string(t)),
          t_(t),
          last_(std::move(last)) {}
    double time() const { return t_; }
    const std::vector<double>& last_state() const { return last_; }

private:
    double t_;
    std::vector<double> last_;
};

// Dormand-Prince 8(5,3) with PI step control. F: void(double t, const double* y, double* dy).
template <class F>
class Dop853 {
public:
    Dop853(F f, std::size_t n, Dop853Options opt = {})
        : f_(std::move(f)), n_(n), opt_(opt), y_(n), y1_(n), yy_(n), k_(12, std::vector<double>(n)) {}

    void reset(double t, const double* y) {
        t_ = t;
        std::copy(y, y + n_, y_.begin());
        h_ = 0.0;
        facold_ = 1e-4;
        fresh_ = true;
    }

    double time() const { return t_; }
    const std::vector<double>& state() const { return y_; }
    const Dop853Stats& stats() const { return stats_; }

    void advance_to(double t_end) {
        if (t_end == t_) return;
        const double dir = t_end > t_ ? 1.0 : -1.0;
        if (fresh_ || dir != dir_) {
            dir_ = dir;
            eval(t_, y_.data(), k_[0].data());
            h_ = initial_step(std::abs(t_end - t_));
            fresh_ = false;
        }
        const double expo1 = (opt_.per_unit_step ? 1.0 / 7.0 : 1.0 / 8.0) - 0.2 * opt_.beta;
        const double facc1 = 3.0, facc2 = 1.0 / 6.0, safe = 0.9;
        bool reject = false;
        while (true) {
            double h = std::abs(h_);
            if (opt_.h_max > 0) h = std::min(h, opt_.h_max);
            bool last = false;
            if (h >= std::abs(t_end - t_)) {
                h = std::abs(t_end - t_);
                last = true;
            }
            if (h < opt_.h_min && !last) throw StepSizeUnderflow(t_, y_);
            if (stats_.accepted + stats_.rejected > opt_.max_steps)
                throw NumericError("integrator", "step budget exhausted");
            const double hs = dir_ * h;
            step(hs);
            const double err = error_estimate(hs);
            const double fac11 = std::pow(err, expo1);
            double fac = fac11 / std::pow(facold_, opt_.beta);
            fac = std::max(facc2, std::min(facc1, fac / safe));
            double hnew = h / fac;
            if (err <= 1.0) {
                facold_ = std::max(err, 1e-4);
                ++stats_.accepted;
                y_.swap(y1_);
                t_ = last ? t_end : t_ + hs;
                std::copy(k_[3].begin(), k_[3].end(), k_[0].begin());
                if (reject) hnew = std::min(hnew, h);
                reject = false;
                if (!last) h_ = hnew;
                else h_ = std::max(std::abs(h_), hnew);
                if (last) return;
            } else {
                hnew = h / std::min(facc1, fac11 / safe);
                ++stats_.rejected;
                reject = true;
                h_ = hnew;
                if (hnew < opt_.h_min) throw StepSizeUnderflow(t_, y_);
            }
        }
    }

private:
    void eval(double t, const double* y, double* dy) {
        f_(t, y, dy);
        ++stats_.evaluations;
    }

    double initial_step(double hmax) {
        double dnf = 0, dny = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double sk = opt_.atol + opt_.rtol * std::abs(y_[i]);
            dnf += (k_[0][i] / sk) * (k_[0][i] / sk);
            dny += (y_[i] / sk) * (y_[i] / sk);
        }
        double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
        h = std::min(h, hmax);
        for (std::size_t i = 0; i < n_; ++i) yy_[i] = y_[i] + dir_ * h * k_[0][i];
        eval(t_ + dir_ * h, yy_.data(), k_[1].data());
        double der2 = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double sq = (k_[1][i] - k_[0][i]) / (opt_.atol + opt_.rtol * std::abs(y_[i]));
            der2 += sq * sq;
        }
        der2 = std::sqrt(der2) / h;
        const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
        const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.125);
        return std::min(100.0 * h, std::min(h1, hmax));
    }

    void step(double h) {
        static constexpr double c2 = 0.526001519587677318785587544488E-01,
                                c3 = 0.789002279381515978178381316732E-01,
                                c4 = 0.118350341907227396726757197510E+00,
                                c5 = 0.281649658092772603273242802490E+00,
                                c6 = 0.333333333333333333333333333333E+00, c7 = 0.25E+00,
                                c8 = 0.307692307692307692307692307692E+00,
                                c9 = 0.651282051282051282051282051282E+00, c10 = 0.6E+00,
                                c11 = 0.857142857142857142857142857142E+00;
        static constexpr double b1 = 5.42937341165687622380535766363E-2, b6 = 4.45031289275240888144113950566E0,
                                b7 = 1.89151789931450038304281599044E0, b8 = -5.8012039600105847814672114227E0,
                                b9 = 3.1116436695781989440891606237E-1, b10 = -1.52160949662516078556178806805E-1,
                                b11 = 2.01365400804030348374776537501E-1, b12 = 4.47106157277725905176885569043E-2;
        static constexpr double a21 = 5.26001519587677318785587544488E-2, a31 = 1.97250569845378994544595329183E-2,
                                a32 = 5.91751709536136983633785987549E-2, a41 = 2.95875854768068491816892993775E-2,
                                a43 = 8.87627564304205475450678981324E-2, a51 = 2.41365134159266685502369798665E-1,
                                a53 = -8.84549479328286085344864962717E-1, a54 = 9.24834003261792003115737966543E-1,
                                a61 = 3.7037037037037037037037037037E-2, a64 = 1.70828608729473871279604482173E-1,
                                a65 = 1.25467687566822425016691814123E-1, a71 = 3.7109375E-2,
                                a74 = 1.70252211019544039314978060272E-1, a75 = 6.02165389804559606850219397283E-2,
                                a76 = -1.7578125E-2, a81 = 3.70920001185047927108779319836E-2,
                                a84 = 1.70383925712239993810214054705E-1, a85 = 1.07262030446373284651809199168E-1,
                                a86 = -1.53194377486244017527936158236E-2, a87 = 8.27378916381402288758473766002E-3,
                                a91 = 6.24110958716075717114429577812E-1, a94 = -3.36089262944694129406857109825E0,
                                a95 = -8.68219346841726006818189891453E-1, a96 = 2.75920996994467083049415600797E1,
                                a97 = 2.01540675504778934086186788979E1, a98 = -4.34898841810699588477366255144E1,
                                a101 = 4.77662536438264365890433908527E-1, a104 = -2.48811461997166764192642586468E0,
                                a105 = -5.90290826836842996371446475743E-1, a106 = 2.12300514481811942347288949897E1,
                                a107 = 1.52792336328824235832596922938E1, a108 = -3.32882109689848629194453265587E1,
                                a109 = -2.03312017085086261358222928593E-2, a111 = -9.3714243008598732571704021658E-1,
                                a114 = 5.18637242884406370830023853209E0, a115 = 1.09143734899672957818500254654E0,
                                a116 = -8.14978701074692612513997267357E0, a117 = -1.85200656599969598641566180701E1,
                                a118 = 2.27394870993505042818970056734E1, a119 = 2.49360555267965238987089396762E0,
                                a1110 = -3.0467644718982195003823669022E0, a121 = 2.27331014751653820792359768449E0,
                                a124 = -1.05344954667372501984066689879E1, a125 = -2.00087205822486249909675718444E0,
                                a126 = -1.79589318631187989172765950534E1, a127 = 2.79488845294199600508499808837E1,
                                a128 = -2.85899827713502369474065508674E0, a129 = -8.87285693353062954433549289258E0,
                                a1210 = 1.23605671757943030647266201528E1, a1211 = 6.43392746015763530355970484046E-1;
        auto& k1 = k_[0];
        auto& k2 = k_[1];
        auto& k3 = k_[2];
        auto& k4 = k_[3];
        auto& k5 = k_[4];
        auto& k6 = k_[5];
        auto& k7 = k_[6];
        auto& k8 = k_[7];
        auto& k9 = k_[8];
        auto& k10 = k_[9];
        auto& k11 = k_[10];
        auto& k12 = k_[11];
        const std::size_t n = n_;
        const double t = t_;
        for (std::size_t i = 0; i < n; ++i) yy_[i] = y_[i] + h * a21 * k1[i];
        eval(t + c2 * h, yy_.data(), k2.data());
        for (std::size_t i = 0; i < n; ++i) yy_[i] = y_[i] + h * (a31 * k1[i] + a32 * k2[i]);
        eval(t + c3 * h, yy_.data(), k3.data());
        for (std::size_t i = 0; i < n; ++i) yy_[i] = y_[i] + h * (a41 * k1[i] + a43 * k3[i]);
        eval(t + c4 * h, yy_.data(), k4.data());
        for (std::size_t i = 0; i < n; ++i) yy_[i] = y_[i] + h * (a51 * k1[i] + a53 * k3[i] + a54 * k4[i]);
        eval(t + c5 * h, yy_.data(), k5.data());
        for (std::size_t i = 0; i < n; ++i) yy_[i] = y_[i] + h * (a61 * k1[i] + a64 * k4[i] + a65 * k5[i]);
        eval(t + c6 * h, yy_.data(), k6.data());
        for (std::size_t i = 0; i < n; ++i)
            yy_[i] = y_[i] + h * (a71 * k1[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        eval(t + c7 * h, yy_.data(), k7.data());
        for (std::size_t i = 0; i < n; ++i)
            yy_[i] = y_[i] + h * (a81 * k1[i] + a84 * k4[i] + a85 * k5[i] + a86 * k6[i] + a87 * k7[i]);
        eval(t + c8 * h, yy_.data(), k8.data());
        for (std::size_t i = 0; i < n; ++i)
            yy_[i] = y_[i] + h * (a91 * k1[i] + a94 * k4[i] + a95 * k5[i] + a96 * k6[i] + a97 * k7[i] + a98 * k8[i]);
        eval(t + c9 * h, yy_.data(), k9.data());
        for (std::size_t i = 0; i < n; ++i)
            yy_[i] = y_[i] + h * (a101 * k1[i] + a104 * k4[i] + a105 * k5[i] + a106 * k6[i] + a107 * k7[i] +
                                  a108 * k8[i] + a109 * k9[i]);
        eval(t + c10 * h, yy_.data(), k10.data());
        for (std::size_t i = 0; i < n; ++i)
            yy_[i] = y_[i] + h * (a111 * k1[i] + a114 * k4[i] + a115 * k5[i] + a116 * k6[i] + a117 * k7[i] +
                                  a118 * k8[i] + a119 * k9[i] + a1110 * k10[i]);
        eval(t + c11 * h, yy_.data(), k11.data());
        for (std::size_t i = 0; i < n; ++i)
            yy_[i] = y_[i] + h * (a121 * k1[i] + a124 * k4[i] + a125 * k5[i] + a126 * k6[i] + a127 * k7[i] +
                                  a128 * k8[i] + a129 * k9[i] + a1210 * k10[i] + a1211 * k11[i]);
        eval(t + h, yy_.data(), k12.data());
        for (std::size_t i = 0; i < n; ++i) {
            k5[i] = b1 * k1[i] + b6 * k6[i] + b7 * k7[i] + b8 * k8[i] + b9 * k9[i] + b10 * k10[i] +
                    b11 * k11[i] + b12 * k12[i];
            y1_[i] = y_[i] + h * k5[i];
        }
        eval(t + h, y1_.data(), k4.data());
    }

    double error_estimate(double h) const {
        static constexpr double bhh1 = 0.244094488188976377952755905512E+00,
                                bhh2 = 0.733846688281611857341361741547E+00,
                                bhh3 = 0.220588235294117647058823529412E-01,
                                er1 = 0.1312004499419488073250102996E-01, er6 = -0.1225156446376204440720569753E+01,
                                er7 = -0.4957589496572501915214079952E+00, er8 = 0.1664377182454986536961530415E+01,
                                er9 = -0.3503288487499736816886487290E+00, er10 = 0.3341791187130174790297318841E+00,
                                er11 = 0.8192320648511571246570742613E-01, er12 = -0.2235530786388629525884427845E-01;
        const auto& k1 = k_[0];
        const auto& k5 = k_[4];
        const auto& k6 = k_[5];
        const auto& k7 = k_[6];
        const auto& k8 = k_[7];
        const auto& k9 = k_[8];
        const auto& k10 = k_[9];
        const auto& k11 = k_[10];
        const auto& k12 = k_[11];
        // max norm over groups of `group` consecutive components (2: complex entries)
        double err = 0, err2 = 0, g_err = 0, g_err2 = 0;
        const std::size_t group = std::max<std::size_t>(1, opt_.group);
        for (std::size_t i = 0; i < n_; ++i) {
            const double sk = 1.0 / (opt_.atol + opt_.rtol * std::max(std::abs(y_[i]), std::abs(y1_[i])));
            double sq = (k5[i] - bhh1 * k1[i] - bhh2 * k9[i] - bhh3 * k12[i]) * sk;
            g_err2 += sq * sq;
            sq = (er1 * k1[i] + er6 * k6[i] + er7 * k7[i] + er8 * k8[i] + er9 * k9[i] + er10 * k10[i] +
                  er11 * k11[i] + er12 * k12[i]) *
                 sk;
            g_err += sq * sq;
            if ((i + 1) % group == 0 || i + 1 == n_) {
                err = std::max(err, g_err);
                err2 = std::max(err2, g_err2);
                g_err = g_err2 = 0;
            }
        }
        const double deno = err + 0.01 * err2;
        const double scale = opt_.per_unit_step ? 1.0 : std::abs(h);
        return scale * err * std::sqrt(1.0 / (deno <= 0.0 ? 1.0 : deno));
    }

    F f_;
    std::size_t n_;
    Dop853Options opt_;
    Dop853Stats stats_;
    double t_ = 0.0;
    double h_ = 0.0;
    double dir_ = 1.0;
    double facold_ = 1e-4;
    bool fresh_ = true;
    std::vector<double> y_, y1_, yy_;
    std::vector<std::vector<double>> k_;
};

}  // namespace nlz
