#pragma once

// M-estimation for parametric finite-state chains: contrast families, the
// certified problem over a parameter grid, estimator runs and the uniform
// Berry-Esseen check for the standardized estimator.

#include "maplab/map_model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace maplab {

/// Contrast F(alpha, x, x') on an open interval with closed-form derivatives in
/// alpha and a Lipschitz witness W for the second derivative.
struct ContrastFamily {
    using Fn = std::function<double(double, Eigen::Index, Eigen::Index)>;

    std::string id;
    double alpha_lo = 0.0;
    double alpha_hi = 1.0;
    Fn F;
    Fn F1;
    Fn F2;
    std::function<double(Eigen::Index)> W;

    bool contains(double alpha) const { return alpha > alpha_lo && alpha < alpha_hi; }
};

/// F = c (xi(x, x') - alpha)^2 with W = 0.
ContrastFamily mean_contrast_family(Matrix xi, double alpha_lo, double alpha_hi, double scale = 1.0);

struct ThetaPoint {
    ThetaPoint(double theta_value, StochasticKernel k) : theta(theta_value), kernel(std::move(k)) {}

    double theta = 0.0;
    StochasticKernel kernel;
    double alpha0 = 0.0;
    double m = 0.0;
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    double tau = 0.0;
    double mean_W = 0.0;
    /// max over n = 2..4096 of n |sigma1^2 - E[Y_n^2]/n| and its value at n = 1024.
    double eq16_max = 0.0;
    double eq16_at_1024 = 0.0;
    bool eq16_bounded = false;
    /// Initial law for non-stationary runs; pi when absent.
    std::optional<Vector> start;
};

struct MEstimationProblem {
    ContrastFamily family;
    std::vector<ThetaPoint> points;
    /// Shared gap constants: ||P_theta^n - Pi_theta||_2 <= C kappa^n on the grid.
    double gap_C = 0.0;
    double gap_kappa = 0.0;
    /// Consistency radius inf m / (4 (E W + 1)).
    double d = 0.0;
    /// Conditions recorded instead of thrown when building without enforcement.
    std::vector<std::string> violations;
};

struct BuildOptions {
    bool enforce = true;
    std::uint64_t check_seed = 12345;
};

/// Computes alpha0, m, sigma1, sigma2 and tau per parameter and certifies the
/// conditions; throws ConditionViolated naming the condition and parameter.
MEstimationProblem build_problem(const ContrastFamily& family,
                                 const std::vector<std::pair<double, StochasticKernel>>& theta_grid,
                                 const BuildOptions& options = {});

/// Two-state family P = [[1-a, a], [0.2, 0.8]], a in {0.2, 0.25, 0.3, 0.35, 0.4},
/// contrast (1{x' = 1} - alpha)^2 on (-1, 2).
MEstimationProblem mean_contrast_problem(double scale = 1.0);

struct EstimatorRun {
    std::size_t theta_index = 0;
    long n = 0;
    double alpha_hat = 0.0;
    double residual = 0.0;
    std::optional<double> standardized_value;
    /// sqrt(n)(alpha_hat - alpha0)/tau; throws DegenerateVariance when tau = 0.
    double standardized() const;
};

/// Minimizer of M_n for the given edge counts (global coarse scan, then Newton
/// with bisection safeguard). Throws NoInteriorRoot.
double minimize_contrast(const ContrastFamily& family, const std::uint32_t* counts, Eigen::Index states, long n,
                         double* residual = nullptr);

EstimatorRun estimate(const MEstimationProblem& problem, std::size_t theta_index, long n, std::uint64_t seed);

struct EstimatorBeRecord {
    std::size_t theta_index = 0;
    long n = 0;
    long replications = 0;
    long failures = 0;
    double distance = 0.0;
    double se = 0.0;
    double gamma_hat = 0.0;
};

struct EstimatorBeReport {
    std::vector<EstimatorBeRecord> records;
    /// Per n, max over theta of sqrt(n) * distance, with the matching se.
    std::vector<long> n_list;
    std::vector<double> max_scaled_distance;
    std::vector<double> max_scaled_se;
    bool no_growth = false;
    bool gamma_nonincreasing = false;
    /// Empirical max of sqrt(n) distance / (1 + sqrt(n) gamma_hat).
    double C_hat = 0.0;
    bool verdict = false;
};

EstimatorBeReport estimator_be_check(const MEstimationProblem& problem, std::vector<std::size_t> theta_indices,
                                     std::vector<long> n_list, long replications, std::uint64_t seed,
                                     int threads = 0);

}  // namespace maplab
