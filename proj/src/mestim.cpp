#include "maplab/mestim.hpp"

#include "maplab/errors.hpp"
#include "maplab/limit_checks.hpp"
#include "maplab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace maplab {

namespace {

constexpr double kResidualTol = 1e-10;

struct Violations {
    bool enforce;
    std::vector<std::string>& log;

    void operator()(const std::string& condition, std::size_t theta, const std::string& what) const {
        if (enforce) throw ConditionViolated(condition, theta, what);
        log.push_back(condition + " at theta[" + std::to_string(theta) + "]: " + what);
    }
};

// E_pi[h(X0, X1)] over supported edges.
double stationary_edge_mean(const StochasticKernel& k, const std::function<double(Eigen::Index, Eigen::Index)>& h) {
    double s = 0.0;
    for (Eigen::Index x = 0; x < k.size(); ++x) {
        if (k.pi()(x) <= 0.0) continue;
        for (Eigen::Index y = 0; y < k.size(); ++y) {
            if (k.P()(x, y) > 0.0) s += k.pi()(x) * k.P()(x, y) * h(x, y);
        }
    }
    return s;
}

MapSpec edge_functional(const StochasticKernel& k, const std::function<double(Eigen::Index, Eigen::Index)>& h) {
    std::vector<EdgeLaw> laws;
    for (Eigen::Index x = 0; x < k.size(); ++x) {
        for (Eigen::Index y = 0; y < k.size(); ++y) {
            if (k.P()(x, y) > 0.0) laws.push_back({x, y, IncrementLaw::deterministic(h(x, y))});
        }
    }
    return MapSpec(k, 1, std::move(laws), true);
}

std::vector<double> interior_grid(const ContrastFamily& f, int points) {
    std::vector<double> g;
    for (int j = 1; j <= points; ++j) g.push_back(f.alpha_lo + (f.alpha_hi - f.alpha_lo) * j / (points + 1));
    return g;
}

// Safeguarded Newton on a function with positive derivative inside [a, b].
double polish_root(const std::function<double(double)>& g, const std::function<double(double)>& dg, double a,
                   double b, double x) {
    double ga = g(a);
    for (int it = 0; it < 200; ++it) {
        const double fx = g(x);
        if (fx == 0.0) return x;
        if ((fx < 0.0) == (ga < 0.0)) {
            a = x;
            ga = fx;
        } else {
            b = x;
        }
        const double d = dg(x);
        double next = d != 0.0 ? x - fx / d : 0.5 * (a + b);
        if (!(next > std::min(a, b) && next < std::max(a, b))) next = 0.5 * (a + b);
        if (std::abs(next - x) <= 1e-16 * (1.0 + std::abs(x))) return next;
        x = next;
        if (std::abs(b - a) <= 1e-16 * (1.0 + std::abs(x))) return x;
    }
    return x;
}

}  // namespace

ContrastFamily mean_contrast_family(Matrix xi, double alpha_lo, double alpha_hi, double scale) {
    ContrastFamily f;
    f.id = "mean_contrast";
    f.alpha_lo = alpha_lo;
    f.alpha_hi = alpha_hi;
    f.F = [xi, scale](double a, Eigen::Index x, Eigen::Index y) { return scale * (xi(x, y) - a) * (xi(x, y) - a); };
    f.F1 = [xi, scale](double a, Eigen::Index x, Eigen::Index y) { return -2.0 * scale * (xi(x, y) - a); };
    f.F2 = [scale](double, Eigen::Index, Eigen::Index) { return 2.0 * scale; };
    f.W = [](Eigen::Index) { return 0.0; };
    return f;
}

MEstimationProblem build_problem(const ContrastFamily& family,
                                 const std::vector<std::pair<double, StochasticKernel>>& theta_grid,
                                 const BuildOptions& options) {
    if (theta_grid.empty()) throw InvalidSpec("empty parameter grid");
    if (!(family.alpha_lo < family.alpha_hi)) throw InvalidSpec("empty parameter domain");
    MEstimationProblem problem{family, {}, 0.0, 0.0, 0.0, {}};
    const Violations violate{options.enforce, problem.violations};
    std::mt19937_64 rng(options.check_seed);

    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
        const auto& [theta, kernel] = theta_grid[i];
        ThetaPoint pt{theta, kernel};
        auto g = [&](double a) {
            return stationary_edge_mean(kernel, [&](Eigen::Index x, Eigen::Index y) { return family.F1(a, x, y); });
        };
        auto dg = [&](double a) {
            return stationary_edge_mean(kernel, [&](Eigen::Index x, Eigen::Index y) { return family.F2(a, x, y); });
        };

        // (V1): exactly one sign change of E[F1] inside the domain.
        const auto grid = interior_grid(family, 400);
        std::vector<std::size_t> changes;
        for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
            const double a = g(grid[j]), b = g(grid[j + 1]);
            if (a == 0.0 || (a < 0.0) != (b < 0.0)) changes.push_back(j);
        }
        if (changes.size() != 1) {
            violate("V1", i, std::to_string(changes.size()) + " roots of E[F1] in the domain");
            if (changes.empty()) {
                problem.points.push_back(pt);
                continue;
            }
        }
        const std::size_t j = changes.front();
        pt.alpha0 = polish_root(g, dg, grid[j], grid[j + 1], 0.5 * (grid[j] + grid[j + 1]));
        if (std::abs(g(pt.alpha0)) > 1e-10) violate("V1", i, "E[F1(alpha0)] not zero");

        pt.m = dg(pt.alpha0);
        if (!(pt.m > 0.0)) violate("V2", i, "m(theta) <= 0");

        const double a0 = pt.alpha0;
        const MapSpec s1 = edge_functional(kernel, [&](Eigen::Index x, Eigen::Index y) { return family.F1(a0, x, y); });
        const double var1 = variance_series_scalar(s1);
        pt.sigma1 = std::sqrt(std::max(0.0, var1));
        if (!(pt.sigma1 > 1e-12)) violate("V4", i, "sigma1(theta) = 0");

        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (Eigen::Index x = 0; x < kernel.size(); ++x) {
            for (Eigen::Index y = 0; y < kernel.size(); ++y) {
                if (kernel.P()(x, y) > 0.0 && kernel.pi()(x) > 0.0) {
                    lo = std::min(lo, family.F2(a0, x, y));
                    hi = std::max(hi, family.F2(a0, x, y));
                }
            }
        }
        if (hi - lo > 1e-12 * (1.0 + std::abs(pt.m))) {
            const double m = pt.m;
            const MapSpec s2 = edge_functional(kernel, [&](Eigen::Index x, Eigen::Index y) { return family.F2(a0, x, y) - m; });
            pt.sigma2 = std::sqrt(std::max(0.0, variance_series_scalar(s2)));
            if (!(pt.sigma2 > 1e-12)) violate("V4", i, "sigma2(theta) = 0 for a non-constant F2");
        }
        pt.tau = pt.m > 0.0 ? pt.sigma1 / pt.m : 0.0;

        // n |sigma1^2 - E[Y_n^2]/n| for n = 2..4096.
        MomentRecursion rec(s1, 2);
        rec.step();
        for (int n = 2; n <= 4096; ++n) {
            rec.step();
            const double v = std::abs(n * var1 - rec.moment(2));
            pt.eq16_max = std::max(pt.eq16_max, v);
            if (n == 1024) pt.eq16_at_1024 = v;
        }
        pt.eq16_bounded = pt.eq16_max <= 1.5 * pt.eq16_at_1024 || pt.eq16_max <= 1e-12;

        pt.mean_W = 0.0;
        for (Eigen::Index x = 0; x < kernel.size(); ++x) pt.mean_W += kernel.pi()(x) * family.W(x);

        // (V5) and derivative consistency on sampled triples.
        std::uniform_real_distribution<double> ua(family.alpha_lo, family.alpha_hi);
        std::uniform_int_distribution<Eigen::Index> us(0, kernel.size() - 1);
        for (int k = 0; k < 200; ++k) {
            const double a = ua(rng), b = ua(rng);
            const Eigen::Index x = us(rng), y = us(rng);
            if (std::abs(family.F2(a, x, y) - family.F2(b, x, y)) > std::abs(a - b) * (family.W(x) + family.W(y)) + 1e-12) {
                violate("V5", i, "second derivative exceeds its Lipschitz witness");
                break;
            }
            const double h = 1e-5 * (family.alpha_hi - family.alpha_lo);
            if (family.contains(a - h) && family.contains(a + h)) {
                const double fd = (family.F(a + h, x, y) - family.F(a - h, x, y)) / (2 * h);
                if (std::abs(fd - family.F1(a, x, y)) > 1e-6 * std::max(1.0, std::abs(fd))) {
                    violate("V5", i, "F1 disagrees with the difference quotient of F");
                    break;
                }
            }
        }

        const auto table = spectral_gap_report(kernel, 64);
        if (!table.gap_present) violate("M", i, "no L2 spectral gap");
        double C = 1.0, kappa = 0.0;
        if (table.fit) {
            C = std::max(1.0, table.fit->C);
            kappa = std::exp(-table.fit->epsilon);
        }
        problem.gap_C = std::max(problem.gap_C, C);
        problem.gap_kappa = std::max(problem.gap_kappa, kappa);
        problem.points.push_back(pt);
    }
    if (!(problem.gap_kappa < 1.0)) violate("M", 0, "no uniform gap over the grid");

    problem.d = std::numeric_limits<double>::infinity();
    for (const auto& pt : problem.points) problem.d = std::min(problem.d, pt.m / (4.0 * (pt.mean_W + 1.0)));
    return problem;
}

MEstimationProblem mean_contrast_problem(double scale) {
    Matrix xi(2, 2);
    xi << 0.0, 1.0, 0.0, 1.0;
    std::vector<std::pair<double, StochasticKernel>> grid;
    for (double a : {0.2, 0.25, 0.3, 0.35, 0.4}) {
        Matrix P(2, 2);
        P << 1.0 - a, a, 0.2, 0.8;
        grid.emplace_back(a, StochasticKernel(P));
    }
    return build_problem(mean_contrast_family(xi, -1.0, 2.0, scale), grid);
}

double EstimatorRun::standardized() const {
    if (!standardized_value) throw DegenerateVariance("tau(theta) = 0: standardized estimator undefined");
    return *standardized_value;
}

double minimize_contrast(const ContrastFamily& f, const std::uint32_t* counts, Eigen::Index S, long n,
                         double* residual) {
    auto sum = [&](const ContrastFamily::Fn& fn, double a) {
        double s = 0.0;
        for (Eigen::Index x = 0; x < S; ++x) {
            for (Eigen::Index y = 0; y < S; ++y) {
                const auto c = counts[x * S + y];
                if (c) s += c * fn(a, x, y);
            }
        }
        return s / static_cast<double>(n);
    };
    auto M = [&](double a) { return sum(f.F, a); };
    auto M1 = [&](double a) { return sum(f.F1, a); };
    auto M2 = [&](double a) { return sum(f.F2, a); };

    const auto grid = interior_grid(f, 64);
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double v = M(grid[j]);
        if (v < best_value) {
            best_value = v;
            best = j;
        }
    }
    // Bracket of an upward sign change of M1 around the best grid point.
    const double edge = 1e-9 * (f.alpha_hi - f.alpha_lo);
    const double a = best > 0 ? grid[best - 1] : f.alpha_lo + edge;
    const double b = best + 1 < grid.size() ? grid[best + 1] : f.alpha_hi - edge;
    const double ga = M1(a), gb = M1(b);
    if (!(ga <= 0.0 && gb >= 0.0)) throw NoInteriorRoot("first-order condition has no root inside the domain");
    const double alpha = ga == 0.0 ? a : (gb == 0.0 ? b : polish_root(M1, M2, a, b, grid[best]));
    if (residual) *residual = std::abs(M1(alpha));
    return alpha;
}

EstimatorRun estimate(const MEstimationProblem& problem, std::size_t theta_index, long n, std::uint64_t seed) {
    if (n < 1) throw InvalidSpec("estimation needs n >= 1");
    const auto& pt = problem.points.at(theta_index);
    const auto batch = simulate_edge_counts(pt.kernel, {n}, 1, seed, pt.start);
    EstimatorRun run;
    run.theta_index = theta_index;
    run.n = n;
    run.alpha_hat = minimize_contrast(problem.family, batch.at(0, 0), batch.states, n, &run.residual);
    if (pt.tau > 1e-12) {
        run.standardized_value = std::sqrt(static_cast<double>(n)) * (run.alpha_hat - pt.alpha0) / pt.tau;
    }
    return run;
}

EstimatorBeReport estimator_be_check(const MEstimationProblem& problem, std::vector<std::size_t> theta_indices,
                                     std::vector<long> n_list, long replications, std::uint64_t seed, int threads) {
    if (theta_indices.empty()) {
        for (std::size_t i = 0; i < problem.points.size(); ++i) theta_indices.push_back(i);
    }
    if (n_list.empty() || replications < 1) throw InvalidSpec("estimator check needs n values and replications");
    std::sort(n_list.begin(), n_list.end());
    n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());

    EstimatorBeReport report;
    report.n_list = n_list;
    report.max_scaled_distance.assign(n_list.size(), 0.0);
    report.max_scaled_se.assign(n_list.size(), 0.0);
    report.gamma_nonincreasing = true;

    for (std::size_t i : theta_indices) {
        const auto& pt = problem.points.at(i);
        if (!(pt.tau > 1e-12)) throw DegenerateVariance("tau(theta) = 0: standardized estimator undefined");
        const std::uint64_t theta_seed = seed ^ (0x9E3779B97F4A7C15ULL * (i + 1));
        const auto batch = simulate_edge_counts(pt.kernel, n_list, replications, theta_seed, pt.start, threads);
        double prev_gamma = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n_list.size(); ++k) {
            const long n = n_list[k];
            const double rn = std::sqrt(static_cast<double>(n));
            EstimatorBeRecord rec;
            rec.theta_index = i;
            rec.n = n;
            rec.replications = replications;
            std::vector<double> z;
            z.reserve(static_cast<std::size_t>(replications));
            long exits = 0;
            for (long r = 0; r < replications; ++r) {
                double residual = 0.0, alpha = 0.0;
                try {
                    alpha = minimize_contrast(problem.family, batch.at(r, k), batch.states, n, &residual);
                } catch (const NoInteriorRoot&) {
                    ++rec.failures;
                    ++exits;
                    continue;
                }
                if (residual > kResidualTol) {
                    ++rec.failures;
                    ++exits;
                    continue;
                }
                if (std::abs(alpha - pt.alpha0) >= problem.d) ++exits;
                z.push_back(rn * (alpha - pt.alpha0) / pt.tau);
            }
            std::sort(z.begin(), z.end());
            rec.distance = z.empty() ? 1.0 : ecdf_distance(z, normal_cdf);
            rec.se = dkw_se(static_cast<long>(z.size()));
            rec.gamma_hat = static_cast<double>(exits) / static_cast<double>(replications);
            if (rec.gamma_hat > prev_gamma) report.gamma_nonincreasing = false;
            prev_gamma = rec.gamma_hat;
            if (rn * rec.distance >= report.max_scaled_distance[k]) {
                report.max_scaled_distance[k] = rn * rec.distance;
                report.max_scaled_se[k] = rn * rec.se;
            }
            report.C_hat = std::max(report.C_hat, rn * rec.distance / (1.0 + rn * rec.gamma_hat));
            report.records.push_back(rec);
        }
    }

    double ceiling = 0.0;
    for (std::size_t k = 0; k + 1 < n_list.size(); ++k) {
        ceiling = std::max(ceiling, report.max_scaled_distance[k] + 2 * report.max_scaled_se[k]);
    }
    const std::size_t last = n_list.size() - 1;
    report.no_growth = n_list.size() < 2 ||
                       report.max_scaled_distance[last] - 2 * report.max_scaled_se[last] <= ceiling;
    report.verdict = report.no_growth && report.gamma_nonincreasing;
    return report;
}

}  // namespace maplab
