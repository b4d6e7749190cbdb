#pragma once

// Finite-state Markov kernels and their L2(pi) geometry.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace maplab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

inline constexpr double kRowSumTol = 1e-12;
inline constexpr double kStationaryTol = 1e-10;

/// Row-stochastic transition matrix together with its unique stationary law.
///
/// Construction validates the rows, solves for pi and rejects kernels with more
/// than one closed communicating class. Transient states are allowed and carry
/// zero stationary mass.
class StochasticKernel {
public:
    StochasticKernel(std::vector<std::string> states, Matrix P);
    explicit StochasticKernel(Matrix P);

    // Cross-checks a supplied pi against the solved one (mismatch > tol throws).
    StochasticKernel(std::vector<std::string> states, Matrix P, const Vector& claimed_pi,
                     double tol = 1e-8);

    const std::vector<std::string>& states() const noexcept { return states_; }
    const Matrix& P() const noexcept { return P_; }
    const Vector& pi() const noexcept { return pi_; }
    Eigen::Index size() const noexcept { return P_.rows(); }

    /// Rank-one projection onto constants: every row equals pi.
    Matrix projection() const;
    /// Indices x with pi(x) > 0, in increasing order.
    std::vector<Eigen::Index> support() const;
    /// P^n by binary powering.
    Matrix power(int n) const;

private:
    std::vector<std::string> states_;
    Matrix P_;
    Vector pi_;
};

/// pi P = pi, sum pi = 1, by a direct solve restricted to the closed class.
Vector solve_stationary(const Matrix& P);

/// Operator norm on L2(pi): top singular value of D^{1/2} A D^{-1/2}, D = diag(pi),
/// computed on the support of pi.
double l2_operator_norm(const Matrix& A, const Vector& pi);
double l2_operator_norm(const CMatrix& A, const Vector& pi);

/// Weighted inner product <f, g> = sum pi(x) f(x) conj(g(x)).
Complex l2_inner(const CVector& f, const CVector& g, const Vector& pi);
double l2_norm(const CVector& f, const Vector& pi);

struct RateFit {
    double C = 0.0;
    double epsilon = 0.0;
};

struct MixingBoundTable {
    // bound[t-1] = ||P^{t-1} - Pi||_2 for t = 1..t_max.
    std::vector<double> bound;
    // Absent when every bound for t >= 2 vanishes (P = Pi) or fewer than two
    // positive points are available.
    std::optional<RateFit> fit;
    bool gap_present = false;

    int t_max() const { return static_cast<int>(bound.size()); }
    double at(int t) const { return bound.at(static_cast<std::size_t>(t - 1)); }
};

MixingBoundTable spectral_gap_report(const StochasticKernel& kernel, int t_max);

/// Interpolation bound between two operator norms with exponent alpha in [0, 1].
double interpolation_bound(double norm_p1, double norm_p2, double alpha);

bool check_reversible(const StochasticKernel& kernel, double tol = 1e-12);

}  // namespace maplab
