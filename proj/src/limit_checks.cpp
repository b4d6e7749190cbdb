#include "maplab/limit_checks.hpp"

#include "maplab/errors.hpp"
#include "maplab/fourier.hpp"
#include "maplab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace maplab {

namespace {

constexpr double kDegenerate = 1e-12;

MapSpec centered(const MapSpec& spec) {
    return spec.centered() ? spec : spec.centered_copy();
}

double sigma_of(const MapSpec& spec) {
    const double s2 = variance_series_scalar(spec);
    if (!(s2 > kDegenerate)) throw DegenerateVariance("asymptotic variance vanishes: the limit is a Dirac mass");
    return std::sqrt(s2);
}

std::vector<long> normalized(std::vector<long> n_list) {
    if (n_list.empty()) throw InvalidSpec("empty n list");
    std::sort(n_list.begin(), n_list.end());
    n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
    if (n_list.front() < 1) throw InvalidSpec("n values must be >= 1");
    return n_list;
}

// Y_n for every n in the (sorted) list, from one run with checkpoints.
std::vector<std::vector<double>> terminal_columns(const MapSpec& spec, const std::vector<long>& n_list, long paths,
                                                  std::uint64_t seed, const std::optional<Vector>& mu, int threads) {
    SimulationOptions opt;
    opt.threads = threads;
    for (std::size_t i = 0; i + 1 < n_list.size(); ++i) opt.checkpoints.push_back(static_cast<double>(n_list[i]));
    const auto batch = simulate_discrete(spec, n_list.back(), paths, seed, mu, opt);
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        out.push_back(i + 1 < n_list.size() ? batch.column(i) : batch.column());
    }
    return out;
}

std::vector<double> standardized_sorted(std::vector<double> y, double n, double sigma) {
    const double scale = sigma * std::sqrt(n);
    for (double& v : y) v /= scale;
    std::sort(y.begin(), y.end());
    return y;
}

GaussianComparison gaussian_record(const std::vector<double>& sorted, double n, double sigma) {
    GaussianComparison r;
    r.n = n;
    r.sample_size = static_cast<long>(sorted.size());
    r.sigma_used = sigma;
    r.kolmogorov = ecdf_distance(sorted, normal_cdf);
    r.be_constant = std::sqrt(n) * r.kolmogorov;
    r.se = dkw_se(r.sample_size);
    return r;
}

bool monotone_within_noise(const std::vector<GaussianComparison>& records) {
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].kolmogorov - records[i].se > records[i - 1].kolmogorov + records[i - 1].se) return false;
    }
    return true;
}

bool no_growth(const std::vector<GaussianComparison>& records) {
    if (records.size() < 2) return true;
    const auto& last = records.back();
    double ceiling = 0.0;
    for (std::size_t i = 0; i + 1 < records.size(); ++i) {
        ceiling = std::max(ceiling, std::sqrt(records[i].n) * (records[i].kolmogorov + 2 * records[i].se));
    }
    return std::sqrt(last.n) * (last.kolmogorov - 2 * last.se) <= ceiling;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

double normal_cdf(double a) {
    return 0.5 * std::erfc(-a / std::numbers::sqrt2);
}

double normal_pdf(double a) {
    return std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
}

double dkw_se(long N, double delta) {
    if (N < 1) return 0.0;
    return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(N)));
}

const std::vector<double>& kolmogorov_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g(2001);
        for (int i = 0; i <= 2000; ++i) g[static_cast<std::size_t>(i)] = -5.0 + i * 0.005;
        return g;
    }();
    return grid;
}

double ecdf_distance(const std::vector<double>& sorted, const std::function<double(double)>& G) {
    const auto N = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        // Ties share one jump: the ECDF steps from (first index)/N to (last index + 1)/N.
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double g = G(sorted[i]);
        d = std::max({d, std::abs(static_cast<double>(j + 1) / N - g), std::abs(static_cast<double>(i) / N - g)});
        i = j;
    }
    for (double a : kolmogorov_grid()) {
        const auto k = std::upper_bound(sorted.begin(), sorted.end(), a) - sorted.begin();
        d = std::max(d, std::abs(static_cast<double>(k) / N - G(a)));
    }
    return d;
}

double edgeworth_cdf(double a, double n, double sigma, double mu3, double bias) {
    double s = normal_cdf(a);
    if (mu3 != 0.0) s += mu3 / (6.0 * sigma * sigma * sigma * std::sqrt(n)) * (1.0 - a * a) * normal_pdf(a);
    if (bias != 0.0) s -= bias * normal_pdf(a) / (sigma * std::sqrt(n));
    return s;
}

std::string to_string(CdfSource source) {
    return source == CdfSource::MonteCarlo ? "monte_carlo" : "fourier_inversion";
}

CltReport clt_check(const MapSpec& input, std::vector<long> n_list, long paths, std::uint64_t seed,
                    const CheckOptions& options) {
    const MapSpec spec = centered(input);
    if (spec.dim() != 1) throw InvalidSpec("Kolmogorov comparisons require d = 1");
    n_list = normalized(std::move(n_list));
    const double sigma = sigma_of(spec);
    const auto columns = terminal_columns(spec, n_list, paths, seed, std::nullopt, options.threads);

    CltReport report;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        const double n = static_cast<double>(n_list[i]);
        report.records.push_back(gaussian_record(standardized_sorted(columns[i], n, sigma), n, sigma));
    }
    report.monotone_trend = monotone_within_noise(report.records);
    const auto& last = report.records.back();
    report.final_within_bound = last.kolmogorov <= 2 * last.se + options.clt_constant / std::sqrt(last.n);
    report.verdict = report.monotone_trend && report.final_within_bound;
    return report;
}

BerryEsseenReport berry_esseen_check(const MapSpec& input, std::vector<long> n_list, long paths, std::uint64_t seed,
                                     const CheckOptions& options) {
    const MapSpec spec = centered(input);
    if (spec.dim() != 1) throw InvalidSpec("Kolmogorov comparisons require d = 1");
    n_list = normalized(std::move(n_list));
    const double sigma = sigma_of(spec);
    const auto columns = terminal_columns(spec, n_list, paths, seed, std::nullopt, options.threads);

    BerryEsseenReport report;
    report.B_hat = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        const double n = static_cast<double>(n_list[i]);
        auto r = gaussian_record(standardized_sorted(columns[i], n, sigma), n, sigma);
        report.B_hat = std::max(report.B_hat, std::sqrt(n) * (r.kolmogorov - 2 * r.se));
        const double v = std::sqrt(n) * (r.kolmogorov - r.se);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        report.records.push_back(r);
    }
    report.flatness_ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    report.no_growth = no_growth(report.records);
    report.verdict = report.no_growth;
    return report;
}

double snapped_mu3(const MapSpec& spec, double sigma) {
    const double mu3 = third_cumulant_rate(spec);
    return std::abs(mu3) <= 1e-9 * sigma * sigma * sigma ? 0.0 : mu3;
}

bool spec_is_lattice(const MapSpec& spec) {
    if (detect_lattice(spec).verdict == LatticeReport::Verdict::Lattice) return true;
    std::vector<double> K;
    for (int i = 0; i <= 990; ++i) K.push_back(0.1 + 0.01 * i);
    return !nonlattice_scan(spec, K).nonlattice;
}

EdgeworthReport edgeworth_check(const MapSpec& input, std::vector<long> n_list, long paths, std::uint64_t seed,
                                const EdgeworthOptions& options) {
    const MapSpec spec = centered(input);
    if (spec.dim() != 1) throw InvalidSpec("Edgeworth comparisons require d = 1");
    n_list = normalized(std::move(n_list));

    EdgeworthReport report;
    report.lattice = spec_is_lattice(spec);
    if (report.lattice && !options.allow_lattice) {
        throw LatticeSpec("Edgeworth expansion requires a nonlattice spec");
    }
    if (report.lattice && options.cdf_source == CdfSource::FourierInversion) {
        throw LatticeSpec("Fourier inversion requires a nonlattice spec");
    }
    report.sigma = sigma_of(spec);
    report.mu3 = snapped_mu3(spec, report.sigma);
    if (options.mu) report.b_mu = asymptotic_bias(spec, *options.mu)(0);
    report.note = "the o(1/sqrt(n)) gate is a falsification test; no explicit rate is available";
    const double sigma = report.sigma;

    auto with_bias = [&](double n) {
        return [=, &report](double a) { return edgeworth_cdf(a, n, sigma, report.mu3, report.b_mu); };
    };
    auto without_bias = [&](double n) {
        return [=, &report](double a) { return edgeworth_cdf(a, n, sigma, report.mu3, 0.0); };
    };

    if (options.cdf_source == CdfSource::MonteCarlo) {
        const auto columns = terminal_columns(spec, n_list, paths, seed, options.mu, options.threads);
        for (std::size_t i = 0; i < n_list.size(); ++i) {
            const double n = static_cast<double>(n_list[i]);
            const auto sorted = standardized_sorted(columns[i], n, sigma);
            auto r = gaussian_record(sorted, n, sigma);
            r.bias = report.b_mu;
            r.edgeworth_residual = ecdf_distance(sorted, with_bias(n));
            if (options.mu) r.edgeworth_residual_no_bias = ecdf_distance(sorted, without_bias(n));
            report.records.push_back(r);
        }
    } else {
        const auto& grid = kolmogorov_grid();
        for (long ni : n_list) {
            const double n = static_cast<double>(ni);
            const auto F = inversion_cdf(spec, static_cast<int>(ni), sigma, grid, options.mu);
            GaussianComparison r;
            r.n = n;
            r.sigma_used = sigma;
            r.cdf_source = CdfSource::FourierInversion;
            r.bias = report.b_mu;
            double k = 0.0, e = 0.0, e0 = 0.0;
            const auto G = with_bias(n);
            const auto G0 = without_bias(n);
            for (std::size_t j = 0; j < grid.size(); ++j) {
                k = std::max(k, std::abs(F[j] - normal_cdf(grid[j])));
                e = std::max(e, std::abs(F[j] - G(grid[j])));
                e0 = std::max(e0, std::abs(F[j] - G0(grid[j])));
            }
            r.kolmogorov = k;
            r.be_constant = std::sqrt(n) * k;
            r.edgeworth_residual = e;
            if (options.mu) r.edgeworth_residual_no_bias = e0;
            report.records.push_back(r);
        }
    }

    report.decreasing = true;
    report.correction_helps = true;
    for (std::size_t i = 0; i < report.records.size(); ++i) {
        const auto& r = report.records[i];
        if (report.mu3 != 0.0 && !(*r.edgeworth_residual < r.kolmogorov)) report.correction_helps = false;
        if (i > 0) {
            const auto& p = report.records[i - 1];
            if (!(std::sqrt(r.n) * (*r.edgeworth_residual - 2 * r.se) <
                  std::sqrt(p.n) * (*p.edgeworth_residual + 2 * p.se))) {
                report.decreasing = false;
            }
        }
    }
    report.verdict = report.decreasing && report.correction_helps;
    return report;
}

double Bump::integral(int d) const {
    return height * std::pow(half_width, d);
}

double Bump::operator()(const double* y, int d) const {
    if (height == 0.0 || half_width <= 0.0) return 0.0;
    double v = height;
    for (int i = 0; i < d; ++i) v *= std::max(0.0, 1.0 - std::abs(y[i] - center) / half_width);
    return v;
}

LltReport llt_check(const MapSpec& input, std::vector<long> n_list, long paths, std::uint64_t seed,
                    const LltOptions& options) {
    const MapSpec spec = centered(input);
    n_list = normalized(std::move(n_list));
    const int d = spec.dim();
    if (!options.allow_lattice && d == 1 && spec_is_lattice(spec)) {
        throw LatticeSpec("local limit theorem requires a nonlattice spec");
    }
    if (!options.allow_lattice && d > 1 && detect_lattice(spec).verdict == LatticeReport::Verdict::Lattice) {
        throw LatticeSpec("local limit theorem requires a nonlattice spec");
    }
    const double det = variance_series(spec).determinant();
    if (!(det > kDegenerate)) throw DegenerateVariance("asymptotic covariance is singular");

    LltReport report;
    auto record = [&](long n, const std::vector<double>& values) {
        LltRecord r;
        r.n = n;
        const double factor = std::sqrt(det) * std::pow(2.0 * std::numbers::pi * static_cast<double>(n), 0.5 * d);
        double s = 0.0, s2 = 0.0;
        for (double g : values) {
            s += g;
            s2 += g * g;
        }
        const double N = static_cast<double>(values.size());
        const double m = s / N;
        const double var = std::max(0.0, s2 / N - m * m) * N / std::max(1.0, N - 1.0);
        r.estimate = factor * m;
        r.se = factor * std::sqrt(var / N);
        r.target = options.bump.integral(d);
        if (r.target > 0.0) {
            r.ratio = r.estimate / r.target;
            r.ratio_se = r.se / r.target;
            r.covers_one = std::abs(*r.ratio - 1.0) <= 3.0 * r.ratio_se;
        } else {
            r.covers_one = r.estimate == 0.0;
        }
        report.records.push_back(r);
    };

    if (d == 1) {
        const auto columns = terminal_columns(spec, n_list, paths, seed, std::nullopt, options.threads);
        for (std::size_t i = 0; i < n_list.size(); ++i) {
            std::vector<double> g(columns[i].size());
            for (std::size_t p = 0; p < g.size(); ++p) g[p] = options.bump(&columns[i][p], 1);
            record(n_list[i], g);
        }
    } else {
        SimulationOptions opt;
        opt.threads = options.threads;
        for (std::size_t i = 0; i < n_list.size(); ++i) {
            const auto batch = simulate_discrete(spec, n_list[i], paths, seed + i, std::nullopt, opt);
            std::vector<double> g(static_cast<std::size_t>(paths));
            for (long p = 0; p < paths; ++p) {
                g[static_cast<std::size_t>(p)] = options.bump(batch.terminal_y.data() + p * d, d);
            }
            record(n_list[i], g);
        }
    }
    report.verdict = report.records.back().covers_one;
    return report;
}

RhoMixReport rho_mixing_check(const MapSpec& input, int max_lag, long paths, std::uint64_t seed, int threads) {
    if (max_lag < 1 || paths < 3) throw InvalidSpec("mixing check needs max_lag >= 1 and paths >= 3");
    const MapSpec spec = centered(input);
    const auto panel = increment_panel(spec, max_lag + 1, paths, seed, threads);
    const auto table = spectral_gap_report(spec.kernel(), max_lag);

    std::vector<double> first(static_cast<std::size_t>(paths));
    for (long p = 0; p < paths; ++p) first[static_cast<std::size_t>(p)] = panel(p, 0);
    std::vector<double> sorted = first;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) { return sorted[static_cast<std::size_t>(q * static_cast<double>(paths - 1))]; };

    struct Functional {
        std::string name;
        std::function<double(double)> f;
    };
    std::vector<Functional> family = {{"linear", [](double x) { return x; }},
                                      {"quadratic", [](double x) { return x * x; }}};
    for (double q : {0.25, 0.5, 0.75}) {
        // Margin for rounding in the running-sum differences.
        const double c = quantile(q) + 1e-9 * (1.0 + std::abs(quantile(q)));
        family.push_back({"bin_q" + std::to_string(static_cast<int>(q * 100)), [c](double x) { return x <= c ? 1.0 : 0.0; }});
    }

    RhoMixReport report;
    report.vacuous = true;
    for (double b : table.bound) {
        if (b < 1.0 - 1e-12) report.vacuous = false;
    }
    const double se = 1.0 / std::sqrt(static_cast<double>(paths));
    for (int lag = 1; lag <= max_lag; ++lag) {
        RhoMixRecord r;
        r.lag = lag;
        r.bound = table.at(lag);
        r.se = se;
        for (const auto& f : family) {
            for (const auto& h : family) {
                std::vector<double> a(static_cast<std::size_t>(paths)), b(static_cast<std::size_t>(paths));
                for (long p = 0; p < paths; ++p) {
                    a[static_cast<std::size_t>(p)] = f.f(panel(p, 0));
                    b[static_cast<std::size_t>(p)] = h.f(panel(p, lag));
                }
                const double ma = mean(a), mb = mean(b);
                double sab = 0.0, saa = 0.0, sbb = 0.0;
                for (std::size_t p = 0; p < a.size(); ++p) {
                    sab += (a[p] - ma) * (b[p] - mb);
                    saa += (a[p] - ma) * (a[p] - ma);
                    sbb += (b[p] - mb) * (b[p] - mb);
                }
                if (saa <= 1e-12 * static_cast<double>(paths) || sbb <= 1e-12 * static_cast<double>(paths)) {
                    if (lag == 1) report.skipped.push_back(f.name + "/" + h.name);
                    continue;
                }
                r.empirical = std::max(r.empirical, std::abs(sab) / std::sqrt(saa * sbb));
            }
        }
        r.within = r.empirical <= r.bound + 4.0 * se;
        report.records.push_back(r);
    }
    report.verdict = std::all_of(report.records.begin(), report.records.end(), [](const RhoMixRecord& r) { return r.within; });
    return report;
}

double ct_short_time_second_moment(const CtMapSpec& ct) {
    const double h = 1e-3;
    const CMatrix Ap = ct.fourier_generator(h), Am = ct.fourier_generator(-h);
    const CVector pi = ct.pi().cast<Complex>();
    const CVector ones = CVector::Ones(ct.states());
    double sup = 0.0;
    for (int i = 1; i <= 100; ++i) {
        const double v = i / 100.0;
        const Complex fp = pi.transpose() * (matrix_exp(CMatrix(v * Ap)) * ones);
        const Complex fm = pi.transpose() * (matrix_exp(CMatrix(v * Am)) * ones);
        sup = std::max(sup, (2.0 - fp.real() - fm.real()) / (h * h));
    }
    return sup;
}

CtLimitReport ct_limit_check(const CtMapSpec& input, std::vector<double> t_list, long paths, std::uint64_t seed,
                             const CheckOptions& options) {
    if (t_list.empty()) throw InvalidSpec("empty t list");
    std::sort(t_list.begin(), t_list.end());
    t_list.erase(std::unique(t_list.begin(), t_list.end()), t_list.end());
    if (!(t_list.front() > 0.0)) throw InvalidSpec("t values must be positive");

    auto ct = input.centered()
                  ? std::make_shared<const CtMapSpec>(input)
                  : std::make_shared<const CtMapSpec>(input.generator(), input.reward(),
                                                      input.has_jump_increments()
                                                          ? std::optional<Matrix>(input.jump_increments())
                                                          : std::nullopt,
                                                      true);
    const double sigma = sigma_of(ct_sample_skeleton(ct));

    // Observation times: every t and its integer part.
    std::vector<double> times;
    for (double t : t_list) {
        times.push_back(t);
        const double fl = std::floor(t);
        if (fl >= 1.0 && fl < t) times.push_back(fl);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    SimulationOptions opt;
    opt.threads = options.threads;
    opt.checkpoints.assign(times.begin(), times.end() - 1);
    const auto batch = simulate_ct(*ct, times.back(), paths, seed, std::nullopt, opt);
    auto column_at = [&](double t) {
        const auto it = std::find(times.begin(), times.end(), t);
        const auto idx = static_cast<std::size_t>(it - times.begin());
        return idx + 1 < times.size() ? batch.column(idx) : batch.column();
    };

    CtLimitReport report;
    const double short_sup = ct_short_time_second_moment(*ct);
    for (double t : t_list) {
        const auto y = column_at(t);
        report.records.push_back(gaussian_record(standardized_sorted(y, t, sigma), t, sigma));

        CtFractionalRecord f;
        f.t = t;
        f.bound = short_sup / t;
        const double fl = std::floor(t);
        if (fl >= 1.0 && fl < t) {
            const auto base = column_at(fl);
            double s = 0.0, s2 = 0.0;
            for (std::size_t p = 0; p < y.size(); ++p) {
                const double r = (y[p] - base[p]) * (y[p] - base[p]) / t;
                s += r;
                s2 += r * r;
            }
            const double N = static_cast<double>(y.size());
            f.second_moment = s / N;
            f.se = std::sqrt(std::max(0.0, s2 / N - f.second_moment * f.second_moment) / N);
        }
        f.within = f.second_moment <= f.bound + 3.0 * f.se;
        report.fractional.push_back(f);
    }
    report.monotone_trend = monotone_within_noise(report.records);
    const auto& last = report.records.back();
    report.final_within_bound = last.kolmogorov <= 2 * last.se + options.clt_constant / std::sqrt(last.n);
    report.no_growth = no_growth(report.records);
    const bool fractional_ok = std::all_of(report.fractional.begin(), report.fractional.end(),
                                           [](const CtFractionalRecord& f) { return f.within; });
    report.verdict = report.monotone_trend && report.final_within_bound && report.no_growth && fractional_ok;
    return report;
}

}  // namespace maplab
