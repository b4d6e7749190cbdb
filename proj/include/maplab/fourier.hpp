#pragma once

// Fourier operators S_t(zeta), the dominant eigenvalue branch and the
// decomposition S_1(zeta)^n = lambda(zeta)^n Pi(zeta) + N(zeta)^n.

#include "maplab/map_model.hpp"

#include <optional>
#include <vector>

namespace maplab {

struct FourierOperator {
    Vector zeta;
    double t = 1.0;
    CMatrix M;
};

FourierOperator build_fourier(const MapSpec& spec, const Vector& zeta, int t = 1);
FourierOperator build_fourier(const MapSpec& spec, double zeta, int t = 1);
FourierOperator build_fourier(const CtMapSpec& spec, double zeta, double t);

/// ||S_{s+t} - S_s S_t||_2 in L2(pi).
double check_semigroup(const MapSpec& spec, const Vector& zeta, int s, int t);
double check_semigroup(const CtMapSpec& spec, double zeta, double s, double t);

double spectral_radius(const CMatrix& M);

struct BranchPoint {
    Vector zeta;
    Complex lambda;
    CVector right;
    CVector left;
    /// Rank-one spectral projection v w^T / (w^T v).
    CMatrix projection;
    /// Largest modulus among the remaining eigenvalues.
    double kappa = 0.0;
    double separation = 0.0;
};

struct SpectralSummary {
    /// In the order of the input grid.
    std::vector<BranchPoint> points;
    double kappa_hat = 0.0;
    double min_separation = 0.0;
};

/// Follows the dominant eigenvalue from zeta = 0 along the grid; every segment
/// between a point and its predecessor is scanned for loss of separation.
SpectralSummary lambda_branch(const MapSpec& spec, const std::vector<Vector>& grid);
SpectralSummary lambda_branch(const MapSpec& spec, const std::vector<double>& grid);

/// Largest r <= r_max such that the branch keeps separation on [-r, r] (d = 1),
/// found by stepping outward with the given step.
double branch_radius(const MapSpec& spec, double r_max, double step = 0.01);

struct Derivatives {
    CVector grad;
    CMatrix hess;
    std::optional<Complex> third;
    /// Hessian of -log lambda at 0 (equals -Hess lambda(0) for centered specs).
    Matrix Sigma;
    double sigma2 = 0.0;
    /// i (log lambda)'''(0), d = 1.
    std::optional<double> mu3;
};

/// Richardson-extrapolated central differences with h in {1e-2, 5e-3}.
Derivatives derivatives_at_zero(const MapSpec& spec, int order = 3);

struct ExpansionEvaluation {
    Vector zeta;
    int n = 0;
    Complex lambda;
    Complex L;
    Complex lhs;
    Complex rhs_main;
    Complex rhs_rem;
    /// Subdominant modulus at zeta.
    double kappa = 0.0;
    /// Conditioning constant C in |R_n| <= C kappa^n ||f||_2 (infinite when the
    /// eigenbasis is numerically defective).
    double remainder_constant = 0.0;
    double identity_residual() const { return std::abs(lhs - rhs_main - rhs_rem); }
};

ExpansionEvaluation evaluate_expansion(const MapSpec& spec, const Vector& zeta, int n, const Vector& f);
ExpansionEvaluation evaluate_expansion(const MapSpec& spec, double zeta, int n, const Vector& f);

/// R_n(zeta, f) = pi N^n (I - Pi) f for n = 0..n_max.
std::vector<Complex> remainder_sequence(const MapSpec& spec, double zeta, int n_max, const Vector& f);

struct NonlatticeScan {
    double rho_hat = 0.0;
    Vector worst_zeta;
    bool nonlattice = false;
    std::vector<double> radius;
};

NonlatticeScan nonlattice_scan(const MapSpec& spec, const std::vector<Vector>& K);
NonlatticeScan nonlattice_scan(const MapSpec& spec, const std::vector<double>& K);

struct ContourResult {
    double projection_residual = 0.0;
    double remainder_residual = 0.0;
    double kappa = 0.0;
    double residual() const { return std::max(projection_residual, remainder_residual); }
};

/// Trapezoidal quadrature (256 nodes) of the resolvent over the circle around 1
/// of radius 1 - kappa and the circle around 0 of radius kappa; compares Pi(zeta)
/// and N(zeta)^n with the eigendecomposition.
ContourResult contour_crosscheck(const MapSpec& spec, double zeta, int n,
                                 std::optional<double> kappa = std::nullopt);

struct InversionOptions {
    double v_max = 30.0;
    int panels = 600;
};

/// Exact CDF of Y_n / (sigma sqrt(n)) at the points a, by Gil-Pelaez inversion of
/// mu S_1(zeta)^n 1. Throws LatticeSpec when the characteristic function does not
/// decay over the integration range.
std::vector<double> inversion_cdf(const MapSpec& spec, int n, double sigma,
                                  const std::vector<double>& a,
                                  const std::optional<Vector>& initial = std::nullopt,
                                  const InversionOptions& options = {});

}  // namespace maplab
