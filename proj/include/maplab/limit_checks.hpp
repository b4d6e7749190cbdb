#pragma once

// Monte Carlo and exact-CDF checks of the Gaussian limit theorems.
//
// Every gate carries the DKW slack se = sqrt(ln(2/delta) / (2N)), delta = 1e-3,
// so verdicts are deterministic given seeds.

#include "maplab/map_model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace maplab {

double normal_cdf(double a);
double normal_pdf(double a);

/// DKW half-width for an ECDF over N points.
double dkw_se(long N, double delta = 1e-3);

/// The 2001-point evaluation grid on [-5, 5].
const std::vector<double>& kolmogorov_grid();

/// sup_a |F_hat(a) - G(a)| for the ECDF of `sorted`, evaluated on both sides of
/// every jump and on the fixed grid (the grid matters when G is not monotone).
double ecdf_distance(const std::vector<double>& sorted, const std::function<double(double)>& G);

/// First-order Edgeworth CDF, with the non-stationary bias term when bias != 0.
double edgeworth_cdf(double a, double n, double sigma, double mu3, double bias = 0.0);

enum class CdfSource { MonteCarlo, FourierInversion };
std::string to_string(CdfSource source);

struct GaussianComparison {
    double n = 0.0;
    long sample_size = 0;
    double sigma_used = 0.0;
    double kolmogorov = 0.0;
    double be_constant = 0.0;
    std::optional<double> edgeworth_residual;
    /// Residual of the Edgeworth CDF without the bias term (set when a start law is given).
    std::optional<double> edgeworth_residual_no_bias;
    /// -b_mu eta(a) / (sigma sqrt(n)) is applied with this b_mu.
    double bias = 0.0;
    double se = 0.0;
    CdfSource cdf_source = CdfSource::MonteCarlo;
};

struct CheckOptions {
    int threads = 0;
    /// Constant in the final CLT gate K(n_max) <= 2 se + C / sqrt(n_max).
    double clt_constant = 1.0;
};

struct CltReport {
    std::vector<GaussianComparison> records;
    bool monotone_trend = false;
    bool final_within_bound = false;
    bool verdict = false;
};

/// Stationary start. Throws DegenerateVariance when sigma^2 <= 1e-12.
CltReport clt_check(const MapSpec& spec, std::vector<long> n_list, long paths, std::uint64_t seed,
                    const CheckOptions& options = {});

struct BerryEsseenReport {
    std::vector<GaussianComparison> records;
    /// max_n sqrt(n) (K_n - 2 se).
    double B_hat = 0.0;
    /// max / min of sqrt(n) (K_n - se); infinite when a value is not positive.
    double flatness_ratio = 0.0;
    /// sqrt(n_max)(K - 2 se) stays below the largest earlier sqrt(n)(K + 2 se).
    bool no_growth = false;
    bool verdict = false;
};

BerryEsseenReport berry_esseen_check(const MapSpec& spec, std::vector<long> n_list, long paths,
                                     std::uint64_t seed, const CheckOptions& options = {});

struct EdgeworthOptions {
    std::optional<Vector> mu;
    CdfSource cdf_source = CdfSource::MonteCarlo;
    /// Runs the comparison on lattice specs (negative controls and bias checks).
    bool allow_lattice = false;
    int threads = 0;
};

struct EdgeworthReport {
    std::vector<GaussianComparison> records;
    double sigma = 0.0;
    /// Zero exactly when the spec is symmetric to working precision.
    double mu3 = 0.0;
    double b_mu = 0.0;
    bool lattice = false;
    /// sqrt(n) residual decreasing along n (within slack).
    bool decreasing = false;
    /// Residual below the Gaussian distance at every n (vacuous when mu3 = 0).
    bool correction_helps = false;
    bool verdict = false;
    std::string note;
};

EdgeworthReport edgeworth_check(const MapSpec& spec, std::vector<long> n_list, long paths, std::uint64_t seed,
                                const EdgeworthOptions& options = {});

/// Third cumulant rate with values below 1e-9 sigma^3 set to exactly zero.
double snapped_mu3(const MapSpec& spec, double sigma);

/// True when either the structural detector or a spectral scan over [0.1, 10]
/// finds a lattice.
bool spec_is_lattice(const MapSpec& spec);

struct Bump {
    double center = 0.0;
    double half_width = 1.0;
    double height = 1.0;
    double integral(int d) const;
    double operator()(const double* y, int d) const;
};

struct LltRecord {
    long n = 0;
    double estimate = 0.0;
    double target = 0.0;
    double se = 0.0;
    std::optional<double> ratio;
    double ratio_se = 0.0;
    bool covers_one = false;
};

struct LltOptions {
    Bump bump;
    bool allow_lattice = false;
    int threads = 0;
};

struct LltReport {
    std::vector<LltRecord> records;
    bool verdict = false;
};

LltReport llt_check(const MapSpec& spec, std::vector<long> n_list, long paths, std::uint64_t seed,
                    const LltOptions& options = {});

struct RhoMixRecord {
    int lag = 0;
    double empirical = 0.0;
    double bound = 0.0;
    double se = 0.0;
    bool within = false;
};

struct RhoMixReport {
    std::vector<RhoMixRecord> records;
    /// Functional pairs skipped for zero sample variance.
    std::vector<std::string> skipped;
    /// Bound identically 1: the chain has no gap and the check says nothing.
    bool vacuous = false;
    bool verdict = false;
};

RhoMixReport rho_mixing_check(const MapSpec& spec, int max_lag, long paths, std::uint64_t seed, int threads = 0);

struct CtFractionalRecord {
    double t = 0.0;
    double second_moment = 0.0;
    double bound = 0.0;
    double se = 0.0;
    bool within = false;
};

struct CtLimitReport {
    std::vector<GaussianComparison> records;
    std::vector<CtFractionalRecord> fractional;
    bool monotone_trend = false;
    bool final_within_bound = false;
    bool no_growth = false;
    bool verdict = false;
};

CtLimitReport ct_limit_check(const CtMapSpec& ct, std::vector<double> t_list, long paths, std::uint64_t seed,
                             const CheckOptions& options = {});

/// sup over v in (0, 1] of E_pi[Y_v^2] on a 100-point grid.
double ct_short_time_second_moment(const CtMapSpec& ct);

}  // namespace maplab
