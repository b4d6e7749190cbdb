#pragma once

// Discrete- and continuous-time Markov additive processes over a finite chain.

#include "maplab/chain_core.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace maplab {

/// Law of the additive increment attached to one edge (x, x') of the chain.
///
/// Every kind has a closed-form characteristic function. The callable kind is
/// produced by time-1 sampling of a continuous-time model; its raw moments
/// (d = 1, orders 0..4) are extracted numerically at construction.
class IncrementLaw {
public:
    enum class Kind { Deterministic, Gaussian, Mixture, Callable };

    struct Atom {
        double prob;
        Vector value;
    };
    using CharFn = std::function<Complex(double)>;

    static IncrementLaw deterministic(Vector value);
    static IncrementLaw deterministic(double value);
    static IncrementLaw gaussian(Vector mean, Matrix cov);
    static IncrementLaw gaussian(double mean, double variance);
    static IncrementLaw mixture(std::vector<Atom> atoms);
    static IncrementLaw callable(CharFn phi, std::array<double, 5> raw_moments);

    Kind kind() const noexcept { return kind_; }
    int dim() const noexcept { return dim_; }

    Complex cf(const Vector& zeta) const;
    Complex cf(double zeta) const;
    Vector mean() const;
    /// E[Z Z^T].
    Matrix second_moment() const;
    /// E[Z^k] for d = 1 and k <= 4.
    double raw_moment(int k) const;
    /// Law of Z + delta.
    IncrementLaw shifted(const Vector& delta) const;

    const Vector& value() const { return value_; }
    const Vector& gaussian_mean() const { return value_; }
    const Matrix& covariance() const { return cov_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    /// Square-root factor L with L L^T = cov (Gaussian kind).
    const Matrix& cov_factor() const { return chol_; }

private:
    IncrementLaw() = default;

    Kind kind_ = Kind::Deterministic;
    int dim_ = 1;
    Vector value_;
    Matrix cov_;
    Matrix chol_;
    std::vector<Atom> atoms_;
    CharFn phi_;
    std::array<double, 5> moments_{};
};

class CtMapSpec;

struct EdgeLaw {
    Eigen::Index from;
    Eigen::Index to;
    IncrementLaw law;
};

/// Discrete-time MAP: driving kernel plus one increment law per supported edge.
class MapSpec {
public:
    /// When `centered` is set, every edge law is shifted by minus the stationary
    /// one-step mean so that E_{pi,0}[Y_1] = 0.
    MapSpec(StochasticKernel kernel, int d, std::vector<EdgeLaw> increments, bool centered);

    const StochasticKernel& kernel() const noexcept { return kernel_; }
    Eigen::Index states() const noexcept { return kernel_.size(); }
    int dim() const noexcept { return d_; }
    bool centered() const noexcept { return centered_; }
    /// Amount subtracted from every edge law by centering (zero otherwise).
    const Vector& centering_shift() const noexcept { return shift_; }

    bool has_law(Eigen::Index x, Eigen::Index y) const;
    const IncrementLaw& law(Eigen::Index x, Eigen::Index y) const;

    /// Every edge law deterministic, d = 1: table of values (0 on unsupported edges).
    std::optional<Matrix> deterministic_table() const;
    bool has_kind(IncrementLaw::Kind kind) const;

    /// Set for time-1 skeletons of continuous-time specs.
    const std::shared_ptr<const CtMapSpec>& ct_source() const noexcept { return ct_; }

    MapSpec centered_copy() const;

    static MapSpec skeleton(std::shared_ptr<const CtMapSpec> ct, StochasticKernel kernel,
                            std::vector<EdgeLaw> increments);

private:
    MapSpec() = default;
    void index_laws(std::vector<EdgeLaw> increments);

    StochasticKernel kernel_{Matrix::Identity(1, 1)};
    int d_ = 1;
    bool centered_ = false;
    Vector shift_;
    std::vector<std::optional<IncrementLaw>> laws_;
    std::shared_ptr<const CtMapSpec> ct_;
};

/// Continuous-time MAP: Y_t = int_0^t reward(X_s) ds + sum of jump increments.
class CtMapSpec {
public:
    CtMapSpec(Matrix generator, Vector reward, std::optional<Matrix> jump_increments,
              bool centered);

    const Matrix& generator() const noexcept { return G_; }
    const Vector& reward() const noexcept { return reward_; }
    /// Zero matrix when the spec has no jump increments.
    const Matrix& jump_increments() const noexcept { return jumps_; }
    bool has_jump_increments() const noexcept { return has_jumps_; }
    const Vector& pi() const noexcept { return pi_; }
    Eigen::Index states() const noexcept { return G_.rows(); }
    bool centered() const noexcept { return centered_; }
    double uniformization_rate() const noexcept { return rate_; }
    /// Stationary drift per unit time of the uncentered process.
    double drift() const noexcept { return drift_; }

    /// Feynman-Kac generator G(zeta): off-diagonal G(x,y) e^{i zeta xi2(x,y)},
    /// diagonal G(x,x) + i zeta reward(x).
    CMatrix fourier_generator(double zeta) const;

private:
    Matrix G_;
    Vector reward_;
    Matrix jumps_;
    bool has_jumps_ = false;
    Vector pi_;
    bool centered_ = false;
    double rate_ = 0.0;
    double drift_ = 0.0;
};

/// exp(M) via Eigen's scaling-and-squaring Pade implementation.
CMatrix matrix_exp(const CMatrix& M);
Matrix matrix_exp(const Matrix& M);

/// Per-state transfer of raw moments of Y_n, stepped one time unit at a time.
///
/// Keeps m_j(x) = E_{mu,0}[Y_n^j 1{X_n = x}] for j = 0..order and updates them by
/// binomial convolution with the edge increment moments.
class MomentRecursion {
public:
    MomentRecursion(const MapSpec& spec, int order, std::optional<Vector> initial = std::nullopt);

    void step();
    void advance(int steps);
    int n() const noexcept { return n_; }
    /// E[Y_n^j].
    double moment(int j) const;

private:
    const MapSpec& spec_;
    int order_;
    int n_ = 0;
    std::vector<Vector> m_;
    // edge_moments_[j](x, y) = E[Z^j | x -> y].
    std::vector<Matrix> edge_moments_;
};

Vector exact_mean(const MapSpec& spec);
double exact_moments(const MapSpec& spec, int n, int order);

/// Asymptotic covariance Sigma (d x d) by the lag-covariance series with a
/// geometric truncation bound from the L2 gap.
Matrix variance_series(const MapSpec& spec, double tol = 1e-13);
double variance_series_scalar(const MapSpec& spec, double tol = 1e-13);

/// lim E[Y_n^3]/n from the slope of the exact third moment between n1 and n2.
double third_cumulant_rate(const MapSpec& spec, int n1 = 2048, int n2 = 4096);

/// b_mu = lim E_{mu,0}[Y_n] for a centered spec started from mu.
Vector asymptotic_bias(const MapSpec& spec, const Vector& mu, double tol = 1e-14);

struct LatticeReport {
    enum class Verdict { Lattice, Nonlattice, Undetermined };
    Verdict verdict = Verdict::Undetermined;
    bool is_lattice = false;
    double shift = 0.0;
    double span = 0.0;
    // Witness beta over states (support of pi only; zero elsewhere).
    Vector beta;
};

LatticeReport detect_lattice(const MapSpec& spec, double tol = 1e-9);

/// Time-1 skeleton: kernel exp(G) and edge laws given by the Feynman-Kac matrix.
MapSpec ct_sample_skeleton(std::shared_ptr<const CtMapSpec> ct);

}  // namespace maplab
