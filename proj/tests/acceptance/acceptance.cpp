// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "maplab/cli.hpp"
#include "maplab/errors.hpp"
#include "maplab/fixtures.hpp"
#include "maplab/fourier.hpp"
#include "maplab/io.hpp"
#include "maplab/limit_checks.hpp"
#include "maplab/mestim.hpp"
#include "maplab/montecarlo.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

using namespace maplab;

namespace {

const std::vector<std::string> kDiscrete = {"two_state",    "iid_rademacher", "lattice_pm1", "skewed_mixture",
                                            "gaussian_iid", "birth_death_5",  "ct_two_state"};

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [violated: " << what << "]";
        }
    }
};

int threads() {
    return resolve_threads(0);
}

// ||A||_2 in L2(pi) from a direct SVD of D^{1/2} A D^{-1/2}.
double svd_norm(const Matrix& A, const Vector& pi) {
    const Vector s = pi.cwiseSqrt();
    const Matrix B = s.asDiagonal() * A * s.cwiseInverse().asDiagonal();
    return Eigen::JacobiSVD<Matrix>(B).singularValues()(0);
}

Outcome c1_spectral_gap() {
    Outcome o;
    const auto k = fixture("two_state").kernel();
    const auto table = spectral_gap_report(k, 11);
    const Matrix Pi = k.projection();
    double worst = 0.0;
    for (int t = 1; t <= 10; ++t) {
        const double svd = svd_norm(k.power(t) - Pi, k.pi());
        worst = std::max({worst, std::abs(table.at(t + 1) - std::pow(0.5, t)), std::abs(svd - std::pow(0.5, t))});
    }
    o.require(worst <= 1e-10, "two_state norms within 1e-10");
    o.require(table.fit.has_value(), "rate fit present");
    const double eps = table.fit ? table.fit->epsilon : 0.0;
    o.require(std::abs(eps - std::numbers::ln2) <= 1e-6, "epsilon = ln 2 within 1e-6");
    const auto iid = spectral_gap_report(fixture("iid_rademacher").kernel(), 10);
    double iid_max = 0.0;
    for (int t = 2; t <= 10; ++t) iid_max = std::max(iid_max, iid.at(t));
    o.require(iid_max == 0.0, "iid_rademacher bound zero for t >= 2");
    o.detail << "max |norm - 0.5^t| = " << worst << ", epsilon - ln2 = " << eps - std::numbers::ln2
             << ", iid max bound(t>=2) = " << iid_max;
    return o;
}

Outcome c2_semigroup() {
    Outcome o;
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> zeta(-3.0, 3.0), time(0.01, 5.0);
    std::uniform_int_distribution<int> step(1, 10);
    std::vector<MapSpec> specs;
    for (const auto& n : kDiscrete) specs.push_back(fixture(n));
    specs.push_back(fixture("two_state", false));
    const auto ct = ct_fixture("ct_two_state");
    const auto ct_raw = ct_fixture("ct_two_state", false);
    double worst = 0.0;
    int ct_cases = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t pick = rng() % (specs.size() + 2);
        double r;
        if (pick < specs.size()) {
            const auto& s = specs[pick];
            Vector z = Vector::Constant(s.dim(), zeta(rng));
            r = check_semigroup(s, z, step(rng), step(rng));
        } else {
            ++ct_cases;
            r = check_semigroup(pick == specs.size() ? *ct : *ct_raw, zeta(rng), time(rng), time(rng));
        }
        worst = std::max(worst, r);
    }
    o.require(worst <= 1e-9, "residual <= 1e-9");
    o.require(ct_cases > 0, "continuous-time cases drawn");
    o.detail << "1000 cases (" << ct_cases << " continuous-time), max residual = " << worst;
    return o;
}

Outcome c3_expansion() {
    Outcome o;
    double worst_id = 0.0, worst_origin = 0.0, worst_slope = 0.0, worst_bound = 0.0;
    for (const auto& name : kDiscrete) {
        const auto spec = fixture(name);
        const Vector ones = Vector::Ones(spec.states());
        const double r = std::min(1.0, branch_radius(spec, 1.0));
        for (int n = 0; n <= 50; ++n) {
            worst_origin = std::max(worst_origin, std::abs(evaluate_expansion(spec, 0.0, n, ones).rhs_rem));
        }
        for (int g = 1; g <= 20; ++g) {
            const double z = r * g / 20.0;
            double kappa = 0.0, constant = 0.0;
            for (int n = 0; n <= 50; ++n) {
                const auto e = evaluate_expansion(spec, z, n, ones);
                worst_id = std::max(worst_id, e.identity_residual());
                kappa = e.kappa;
                constant = e.remainder_constant;
                const double cap = constant * std::pow(kappa, n);
                if (std::abs(e.rhs_rem) > cap + 1e-12) worst_bound = std::max(worst_bound, std::abs(e.rhs_rem) - cap);
            }
            // Least-squares slope of log|R_n| on n = 25..50.
            const auto R = remainder_sequence(spec, z, 50, ones);
            if (kappa <= 1e-12 || std::abs(R[25]) <= 1e-300) continue;
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            int m = 0;
            for (int n = 25; n <= 50; ++n) {
                const double y = std::log(std::abs(R[n]));
                sx += n, sy += y, sxx += double(n) * n, sxy += n * y, ++m;
            }
            const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            worst_slope = std::max(worst_slope, std::abs(slope - std::log(kappa)));
        }
    }
    o.require(worst_id <= 1e-9, "identity residual <= 1e-9");
    o.require(worst_origin <= 1e-12, "R_n(0, 1) = 0 within 1e-12");
    o.require(worst_bound == 0.0, "|R_n| <= C kappa^n");
    o.require(worst_slope <= 0.05, "log-slope within 0.05 of ln kappa");
    o.detail << "identity " << worst_id << ", origin " << worst_origin << ", bound excess " << worst_bound
             << ", slope error " << worst_slope;
    return o;
}

Outcome c4_derivatives() {
    Outcome o;
    double g = 0.0, h = 0.0, m3 = 0.0;
    for (const auto& name : kDiscrete) {
        const auto raw = fixture(name, false);
        const auto d_raw = derivatives_at_zero(raw, 1);
        const Vector mean = exact_mean(raw);
        g = std::max(g, (d_raw.grad - Complex(0.0, 1.0) * mean.cast<Complex>()).cwiseAbs().maxCoeff());
        const auto spec = fixture(name);
        const auto d = derivatives_at_zero(spec, 3);
        const Matrix hess = d.hess.real();
        h = std::max(h, (-hess - variance_series(spec)).norm());
        m3 = std::max(m3, std::abs(d.mu3.value_or(NAN) - third_cumulant_rate(spec)));
    }
    o.require(g <= 1e-6, "gradient within 1e-6");
    o.require(h <= 1e-5, "Hessian within 1e-5");
    o.require(m3 <= 1e-5, "mu3 within 1e-5");
    o.detail << "gradient " << g << ", Hessian " << h << ", mu3 " << m3;
    return o;
}

Outcome c5_taylor() {
    Outcome o;
    double worst = 1e9;
    std::string at;
    for (const auto& name : kDiscrete) {
        const auto spec = fixture(name);
        const double s2 = variance_series_scalar(spec);
        std::vector<double> grid;
        for (int i = 0; i <= 20; ++i) grid.push_back(std::pow(10.0, -3.0 + 2.0 * i / 20.0));
        auto zs = grid;
        zs.insert(zs.begin(), 0.0);
        const auto br = lambda_branch(spec, zs);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int m = static_cast<int>(grid.size());
        for (int i = 0; i < m; ++i) {
            const double z = grid[i];
            const double err = std::abs(br.points[i + 1].lambda - 1.0 + s2 * z * z / 2.0);
            const double x = std::log(z), y = std::log(err);
            sx += x, sy += y, sxx += x * x, sxy += x * y;
        }
        const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        if (slope < worst) worst = slope, at = name;
    }
    o.require(worst >= 2.9, "slope >= 2.9");
    o.detail << "min slope " << worst << " (" << at << ")";
    return o;
}

Outcome c6_mixing() {
    Outcome o;
    int skipped = 0;
    double worst = -1e9;
    for (std::size_t i = 0; i < kDiscrete.size(); ++i) {
        const auto rep = rho_mixing_check(fixture(kDiscrete[i]), 10, 100000, 600 + i, threads());
        for (const auto& r : rep.records) worst = std::max(worst, (r.empirical - r.bound) / r.se);
        skipped += static_cast<int>(rep.skipped.size());
        o.require(rep.verdict, kDiscrete[i]);
    }
    o.detail << "max (empirical - bound)/se = " << worst << " (gate 4), skipped lags " << skipped;
    return o;
}

Outcome c7_clt() {
    Outcome o;
    CheckOptions opt;
    opt.threads = threads();
    const auto d = clt_check(fixture("two_state"), {4096}, 100000, 701, opt);
    const auto c = ct_limit_check(*ct_fixture("ct_two_state"), {4096.0}, 100000, 702, opt);
    const double kd = d.records.at(0).kolmogorov, kc = c.records.at(0).kolmogorov;
    o.require(kd <= 0.03, "two_state K <= 0.03");
    o.require(kc <= 0.03, "ct_two_state K <= 0.03");
    o.detail << "K(two_state, n=4096) = " << kd << ", K(ct_two_state, t=4096) = " << kc;
    return o;
}

Outcome c8_berry_esseen() {
    Outcome o;
    CheckOptions opt;
    opt.threads = threads();
    for (const char* name : {"two_state", "iid_rademacher"}) {
        const auto rep = berry_esseen_check(fixture(name), {256, 1024, 4096}, 2000000, 801, opt);
        o.require(rep.flatness_ratio <= 2.0, std::string(name) + " max/min <= 2");
        o.detail << name << ": sqrt(n)K =";
        for (const auto& r : rep.records) o.detail << " " << std::sqrt(r.n) * r.kolmogorov;
        o.detail << ", ratio " << rep.flatness_ratio << ", B_hat " << rep.B_hat << "; ";
        if (std::string(name) == "iid_rademacher") {
            o.require(rep.B_hat >= 0.2 && rep.B_hat <= 0.7, "iid_rademacher B_hat in [0.2, 0.7]");
        }
    }
    return o;
}

Outcome c9_edgeworth() {
    Outcome o;
    EdgeworthOptions eo;
    eo.cdf_source = CdfSource::FourierInversion;
    const auto rep = edgeworth_check(fixture("skewed_mixture"), {256, 1024, 4096}, 1, 0, eo);
    bool helps = true;
    for (const auto& r : rep.records) helps = helps && *r.edgeworth_residual < r.kolmogorov;
    const double first = std::sqrt(256.0) * *rep.records.front().edgeworth_residual;
    const double last = std::sqrt(4096.0) * *rep.records.back().edgeworth_residual;
    o.require(helps, "corrected < uncorrected at every n");
    o.require(last < 0.5 * first, "sqrt(n) residual at 4096 < half of 256");
    int bit_mismatch = 0;
    for (const char* name : {"gaussian_iid", "iid_rademacher", "lattice_pm1"}) {
        const auto spec = fixture(name);
        const double sigma = std::sqrt(variance_series_scalar(spec));
        const double mu3 = snapped_mu3(spec, sigma);
        for (double a : kolmogorov_grid()) {
            for (double n : {256.0, 4096.0}) {
                const double e = edgeworth_cdf(a, n, sigma, mu3), g = normal_cdf(a);
                if (std::memcmp(&e, &g, sizeof e) != 0) ++bit_mismatch;
            }
        }
    }
    o.require(bit_mismatch == 0, "symmetric correction identically zero");
    o.detail << "sqrt(n) residual " << first << " -> " << last << ", symmetric bit mismatches " << bit_mismatch;
    return o;
}

Outcome c10_llt() {
    Outcome o;
    LltOptions lo;
    lo.threads = threads();
    const auto g = llt_check(fixture("gaussian_iid"), {4096}, 100000, 1001, lo);
    const auto& r = g.records.at(0);
    o.require(r.ratio && std::abs(*r.ratio - 1.0) <= 3.0 * r.ratio_se, "gaussian ratio within 1 +- 3 se");
    lo.allow_lattice = true;
    const auto l = llt_check(fixture("lattice_pm1"), {4096, 4097}, 100000, 1002, lo);
    bool outside = false;
    o.detail << "gaussian ratio " << r.ratio.value_or(NAN) << " +- " << r.ratio_se << "; lattice ratios";
    for (const auto& x : l.records) {
        outside = outside || (x.ratio && (*x.ratio < 0.5 || *x.ratio > 1.5));
        o.detail << " " << x.ratio.value_or(NAN);
    }
    o.require(outside, "lattice ratio outside [0.5, 1.5]");
    return o;
}

Outcome c11_nonlattice() {
    Outcome o;
    const auto lat = nonlattice_scan(fixture("lattice_pm1"), std::vector<double>{2.0 * std::numbers::pi});
    std::vector<double> K;
    for (int i = 0; i <= 990; ++i) K.push_back(0.1 + 0.01 * i);
    const auto gau = nonlattice_scan(fixture("gaussian_iid"), K);
    o.require(std::abs(lat.rho_hat - 1.0) <= 1e-9, "lattice radius 1 at 2 pi");
    o.require(gau.rho_hat < 1.0 - 1e-3, "gaussian rho_hat < 1 - 1e-3");
    o.detail << "lattice_pm1 radius at 2pi " << lat.rho_hat << ", gaussian_iid rho_hat " << gau.rho_hat;
    return o;
}

Outcome c12_nonstationary() {
    Outcome o;
    // E_{delta_0}[Y_n] = sum_k (delta_0 - pi) P^k xi = (delta_0 - pi) xi * sum_k 0.5^k.
    const double pi1 = 0.3 / 0.5;
    const double lam2 = 1.0 - 0.3 - 0.2;
    const double oracle = (0.0 - pi1) * lam2 / (1.0 - lam2);
    EdgeworthOptions eo;
    eo.mu = Vector::Unit(2, 0);
    eo.allow_lattice = true;
    eo.threads = threads();
    const auto rep = edgeworth_check(fixture("two_state"), {1024}, 1000000, 1201, eo);
    const auto& r = rep.records.at(0);
    o.require(std::abs(rep.b_mu - oracle) <= 1e-10, "b_mu matches geometric series");
    o.require(*r.edgeworth_residual < *r.edgeworth_residual_no_bias, "bias term improves residual");
    o.detail << "b_mu " << rep.b_mu << " (oracle " << oracle << "), residual with bias " << *r.edgeworth_residual
             << ", without " << *r.edgeworth_residual_no_bias << ", K " << r.kolmogorov;
    return o;
}

Outcome c13_eq16() {
    Outcome o;
    const auto problem = mean_contrast_problem();
    double worst = 0.0;
    for (const auto& pt : problem.points) {
        const double a = pt.theta;
        Matrix P(2, 2);
        P << 1.0 - a, a, 0.2, 0.8;
        // Edge derivative of the contrast: -2 (1{x'=1} - alpha0); the constant drops out after centering.
        std::vector<EdgeLaw> laws;
        for (int x = 0; x < 2; ++x) {
            for (int y = 0; y < 2; ++y) laws.push_back({x, y, IncrementLaw::deterministic(y == 1 ? -2.0 : 0.0)});
        }
        const MapSpec spec(StochasticKernel(P), 1, laws, true);
        const double s2 = variance_series_scalar(spec);
        MomentRecursion rec(spec, 2);
        rec.advance(1);
        double max_v = 0.0, at_1024 = 0.0;
        for (int n = 2; n <= 4096; ++n) {
            rec.step();
            const double v = n * std::abs(s2 - rec.moment(2) / n);
            max_v = std::max(max_v, v);
            if (n == 1024) at_1024 = v;
        }
        o.require(max_v <= 1.5 * at_1024, "bounded at theta " + std::to_string(a));
        o.require(pt.eq16_bounded, "build_problem agrees at theta " + std::to_string(a));
        worst = std::max(worst, max_v / at_1024);
    }
    o.detail << "max over theta of max_n / value at 1024 = " << worst;
    return o;
}

Outcome c14_mestim() {
    Outcome o;
    const auto rep = estimator_be_check(mean_contrast_problem(), {}, {256, 1024, 4096}, 100000, 1401, threads());
    o.require(rep.no_growth, "sqrt(n) distance does not grow");
    o.require(rep.gamma_nonincreasing, "gamma_hat non-increasing");
    o.detail << "max_theta sqrt(n)K =";
    for (double v : rep.max_scaled_distance) o.detail << " " << v;
    o.detail << " (scaled se";
    for (double v : rep.max_scaled_se) o.detail << " " << v;
    o.detail << "), gamma_hat";
    std::vector<long> seen;
    for (const auto& r : rep.records) {
        if (std::find(seen.begin(), seen.end(), r.n) == seen.end()) seen.push_back(r.n), o.detail << " " << r.gamma_hat;
    }
    o.detail << ", C_hat " << rep.C_hat;
    return o;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

Outcome c15_determinism() {
    Outcome o;
    const auto dir = std::filesystem::temp_directory_path() / "maplab_acceptance";
    std::filesystem::create_directories(dir);
    const std::vector<std::vector<std::string>> commands = {
        {"analyze", "--fixture", "birth_death_5"},
        {"scan-lambda", "--fixture", "skewed_mixture"},
        {"simulate", "--fixture", "skewed_mixture", "--n", "200", "--paths", "20000", "--seed", "5"},
        {"simulate", "--fixture", "ct_two_state", "--t", "50", "--paths", "5000", "--seed", "5"},
        {"verify-clt", "--fixture", "two_state", "--n-list", "64,256", "--paths", "20000", "--seed", "5"},
        {"verify-be", "--fixture", "two_state", "--n-list", "256,1024,4096", "--paths", "20000", "--seed", "7"},
        {"verify-edgeworth", "--fixture", "skewed_mixture", "--n-list", "64,256", "--paths", "20000", "--seed", "5"},
        {"verify-edgeworth", "--fixture", "two_state", "--init", "[1,0]", "--allow-lattice", "--n-list", "64",
         "--paths", "20000", "--seed", "5"},
        {"verify-llt", "--fixture", "gaussian_iid", "--n-list", "64,256", "--paths", "20000", "--seed", "5"},
        {"verify-ct", "--fixture", "ct_two_state", "--t-list", "16,64", "--paths", "5000", "--seed", "5"},
        {"mixing-bound", "--fixture", "birth_death_5", "--paths", "20000", "--seed", "5"},
        {"mestimate", "--fixture", "mean_contrast_problem", "--n-list", "64,256", "--reps", "2000", "--seed", "5"},
    };
    int compared = 0, differing = 0;
    for (std::size_t c = 0; c < commands.size(); ++c) {
        std::string bytes[2];
        for (int k = 0; k < 2; ++k) {
            const auto out = dir / ("report_" + std::to_string(c) + "_" + std::to_string(k));
            auto args = commands[c];
            args.insert(args.begin(), "maplab");
            args.insert(args.end(), {"--threads", k == 0 ? "1" : "3", "--out", out.string()});
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream so, se;
            const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), so, se);
            o.require(code == 0 || code == 1, commands[c][0] + " ran");
            bytes[k] = slurp(out);
            if (commands[c][0] == "simulate") bytes[k] += slurp(out.string() + ".json");
        }
        ++compared;
        if (bytes[0].empty() || bytes[0] != bytes[1]) {
            ++differing;
            o.require(false, commands[c][0] + " byte-identical");
        }
    }
    o.detail << compared << " reports compared across thread counts 1 and 3, " << differing << " differ";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 spectral gap", c1_spectral_gap}, {"2 semigroup", c2_semigroup},
        {"3 expansion", c3_expansion},       {"4 derivatives", c4_derivatives},
        {"5 taylor", c5_taylor},             {"6 rho-mixing", c6_mixing},
        {"7 clt", c7_clt},                   {"8 berry-esseen", c8_berry_esseen},
        {"9 edgeworth", c9_edgeworth},       {"10 llt", c10_llt},
        {"11 nonlattice scan", c11_nonlattice}, {"12 non-stationary", c12_nonstationary},
        {"13 eq16 boundedness", c13_eq16},   {"14 m-estimator be", c14_mestim},
        {"15 determinism", c15_determinism},
    };
    std::vector<std::string> only(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const std::string id = name.substr(0, name.find(' '));
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
