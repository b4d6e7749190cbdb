#include "maplab/fixtures.hpp"
#include "maplab/map_model.hpp"
#include "maplab/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace maplab;

namespace {

Matrix mat2(double a, double b, double c, double d) {
    Matrix M(2, 2);
    M << a, b, c, d;
    return M;
}

MapSpec table_spec(const Matrix& P, const Matrix& v, bool centered) {
    std::vector<EdgeLaw> laws;
    for (Eigen::Index x = 0; x < P.rows(); ++x) {
        for (Eigen::Index y = 0; y < P.cols(); ++y) {
            if (P(x, y) > 0.0) laws.push_back({x, y, IncrementLaw::deterministic(v(x, y))});
        }
    }
    return MapSpec(StochasticKernel(P), 1, std::move(laws), centered);
}

}  // namespace

TEST(IncrementLaw, CharacteristicFunctions) {
    const auto g = IncrementLaw::gaussian(0.5, 2.0);
    EXPECT_NEAR(std::abs(g.cf(1.0) - std::exp(Complex(-1.0, 0.5))), 0.0, 1e-15);
    const auto m = IncrementLaw::mixture({{0.5, Vector::Constant(1, -1.0)}, {0.5, Vector::Constant(1, 1.0)}});
    EXPECT_NEAR(std::abs(m.cf(0.7) - std::cos(0.7)), 0.0, 1e-15);
    EXPECT_NEAR(g.raw_moment(4), std::pow(0.5, 4) + 6 * 0.25 * 2.0 + 3 * 4.0, 1e-12);
    EXPECT_THROW(g.raw_moment(5), MomentUndefined);
}

TEST(IncrementLaw, Validation) {
    EXPECT_THROW(IncrementLaw::mixture({{0.5, Vector::Constant(1, 0.0)}, {0.4, Vector::Constant(1, 1.0)}}),
                 InvalidSpec);
    Matrix cov(2, 2);
    cov << 1.0, 2.0, 2.0, 1.0;
    EXPECT_THROW(IncrementLaw::gaussian(Vector::Zero(2), cov), InvalidSpec);
    cov << 1.0, 0.5, 0.4, 1.0;
    EXPECT_THROW(IncrementLaw::gaussian(Vector::Zero(2), cov), InvalidSpec);
}

TEST(MapSpec, MissingEdgeLawRejected) {
    std::vector<EdgeLaw> laws = {{0, 0, IncrementLaw::deterministic(0.0)}};
    EXPECT_THROW(MapSpec(StochasticKernel(mat2(0.7, 0.3, 0.2, 0.8)), 1, laws, false), InvalidSpec);
}

TEST(ExactMean, Examples) {
    EXPECT_NEAR(exact_mean(fixture("two_state", false))(0), 0.6, 1e-15);
    EXPECT_NEAR(exact_mean(fixture("two_state", true))(0), 0.0, 1e-15);
    const Matrix P = mat2(0.7, 0.3, 0.2, 0.8);
    EXPECT_NEAR(exact_mean(table_spec(P, Matrix::Constant(2, 2, 2.5), false))(0), 2.5, 1e-15);
    EXPECT_NEAR(exact_mean(table_spec(P, Matrix::Zero(2, 2), false))(0), 0.0, 0.0);
}

TEST(ExactMoments, MeanAdditivity) {
    for (const char* name : {"two_state", "birth_death_5", "skewed_mixture"}) {
        const auto spec = fixture(name, false);
        EXPECT_NEAR(exact_moments(spec, 2, 1), 2.0 * exact_mean(spec)(0), 1e-12) << name;
    }
}

TEST(ExactMoments, IidIdentity) {
    // Independent steps: E[Y_n^2] = n Var + n^2 mean^2.
    const auto spec = fixture("skewed_mixture", false);
    const double mean = exact_mean(spec)(0);
    const double var = 0.8 * (0.25 + 0.25) + 0.2 * (4.0 + 0.25) - mean * mean;
    for (int n : {1, 5, 40}) {
        EXPECT_NEAR(exact_moments(spec, n, 2), n * var + n * n * mean * mean, 1e-10 * n * n);
    }
}

TEST(ExactMoments, ZeroIncrements) {
    const auto spec = table_spec(mat2(0.7, 0.3, 0.2, 0.8), Matrix::Zero(2, 2), false);
    for (int k = 1; k <= 4; ++k) EXPECT_EQ(exact_moments(spec, 17, k), 0.0);
}

TEST(ExactMoments, TwoStateVarianceLimit) {
    EXPECT_NEAR(exact_moments(fixture("two_state"), 10000, 2) / 10000.0, 0.72, 1e-3);
}

TEST(ExactMoments, OrderAboveFourUndefined) {
    EXPECT_THROW(exact_moments(fixture("two_state"), 3, 5), MomentUndefined);
}

TEST(VarianceSeries, OracleValues) {
    EXPECT_NEAR(variance_series_scalar(fixture("two_state")), 0.72, 1e-12);
    EXPECT_NEAR(variance_series_scalar(fixture("iid_rademacher")), 1.0, 1e-13);
    EXPECT_NEAR(variance_series_scalar(fixture("lattice_pm1")), 1.5, 1e-12);
    EXPECT_NEAR(variance_series_scalar(fixture("skewed_mixture")), 1.25, 1e-12);
    EXPECT_NEAR(variance_series_scalar(fixture("birth_death_5")), 1.185786959154799, 1e-11);
    EXPECT_NEAR(variance_series_scalar(fixture("ct_two_state")), 4.0 / 27.0, 1e-7);
}

TEST(VarianceSeries, AgreesWithMomentDifferencing) {
    const auto spec = fixture("birth_death_5");
    const double sigma2 = variance_series_scalar(spec);
    double prev = 1e300;
    for (int n : {25, 50, 100, 200}) {
        const double diff = (exact_moments(spec, 2 * n, 2) - exact_moments(spec, n, 2)) / n;
        const double err = std::abs(diff - sigma2);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-6);
}

TEST(VarianceSeries, PeriodicChainHasNoGap) {
    const auto spec = table_spec(mat2(0.0, 1.0, 1.0, 0.0), mat2(0.0, 1.0, -1.0, 0.0), true);
    EXPECT_THROW(variance_series(spec), GapAbsent);
}

TEST(ThirdCumulant, OracleValues) {
    EXPECT_NEAR(third_cumulant_rate(fixture("two_state")), -0.624, 1e-9);
    EXPECT_NEAR(third_cumulant_rate(fixture("iid_rademacher")), 0.0, 1e-12);
    EXPECT_NEAR(third_cumulant_rate(fixture("lattice_pm1")), 0.0, 1e-9);
    EXPECT_NEAR(third_cumulant_rate(fixture("skewed_mixture")), 1.5, 1e-9);
    EXPECT_NEAR(third_cumulant_rate(fixture("birth_death_5")), 6.176862953985084, 1e-8);
    EXPECT_NEAR(third_cumulant_rate(fixture("ct_two_state")), 4.0 / 81.0, 1e-6);
}

TEST(AsymptoticBias, TwoStatePointMasses) {
    const auto spec = fixture("two_state");
    Vector e0 = Vector::Zero(2), e1 = Vector::Zero(2);
    e0(0) = 1.0;
    e1(1) = 1.0;
    // Occupation bias sum_k (P^k 1_{1})(x) - 0.6 = (1{x=1} - 0.6)/(1 - 0.5) shifted by one step.
    EXPECT_NEAR(asymptotic_bias(spec, e0)(0), -0.6, 1e-12);
    EXPECT_NEAR(asymptotic_bias(spec, e1)(0), 0.4, 1e-12);
    EXPECT_NEAR(asymptotic_bias(spec, spec.kernel().pi())(0), 0.0, 1e-12);
}

TEST(AsymptoticBias, MatchesFiniteMean) {
    const auto spec = fixture("birth_death_5");
    Vector mu = Vector::Zero(5);
    mu(4) = 1.0;
    MomentRecursion rec(spec, 1, mu);
    rec.advance(3000);
    EXPECT_NEAR(asymptotic_bias(spec, mu)(0), rec.moment(1), 1e-9);
}

TEST(Lattice, IntegerIncrements) {
    const auto r = detect_lattice(fixture("iid_rademacher"));
    ASSERT_TRUE(r.is_lattice);
    EXPECT_NEAR(r.span, 2.0, 1e-12);
    EXPECT_NEAR(r.shift, 1.0, 1e-12);
    const auto q = detect_lattice(fixture("two_state", false));
    ASSERT_TRUE(q.is_lattice);
    EXPECT_NEAR(std::fmod(1.0, q.span), 0.0, 1e-12);
}

TEST(Lattice, IncommensurableCycles) {
    Matrix P = Matrix::Constant(2, 2, 0.5);
    const auto r = detect_lattice(table_spec(P, mat2(1.0, 0.0, 0.0, std::sqrt(2.0)), false));
    EXPECT_FALSE(r.is_lattice);
    EXPECT_EQ(r.verdict, LatticeReport::Verdict::Nonlattice);
}

TEST(Lattice, GaussianEdgeIsNonlattice) {
    const auto r = detect_lattice(fixture("skewed_mixture"));
    EXPECT_FALSE(r.is_lattice);
    EXPECT_EQ(r.verdict, LatticeReport::Verdict::Nonlattice);
}

TEST(Lattice, MixtureIsUndetermined) {
    Matrix P = Matrix::Constant(1, 1, 1.0);
    std::vector<EdgeLaw> laws = {{0, 0, IncrementLaw::mixture({{0.5, Vector::Constant(1, 0.0)},
                                                               {0.5, Vector::Constant(1, 1.0)}})}};
    const auto r = detect_lattice(MapSpec(StochasticKernel(P), 1, laws, false));
    EXPECT_EQ(r.verdict, LatticeReport::Verdict::Undetermined);
    EXPECT_FALSE(r.is_lattice);
}

TEST(Lattice, WitnessHolds) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick(-4, 4);
    std::uniform_real_distribution<double> grad(-3.0, 3.0);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + trial % 4;
        Matrix P = Matrix::Constant(n, n, 1.0 / n);
        Matrix v(n, n);
        for (int x = 0; x < n; ++x) {
            for (int y = 0; y < n; ++y) v(x, y) = 0.5 + 3.0 * pick(rng);
        }
        const auto r = detect_lattice(table_spec(P, v, false));
        ASSERT_TRUE(r.is_lattice);
        for (int x = 0; x < n; ++x) {
            for (int y = 0; y < n; ++y) {
                const double q = (v(x, y) + r.beta(y) - r.beta(x) - r.shift) / r.span;
                EXPECT_NEAR(q, std::round(q), 1e-8);
            }
        }
        // Adding a gradient leaves the verdict unchanged.
        Vector b(n);
        for (int x = 0; x < n; ++x) b(x) = grad(rng);
        Matrix w = v;
        for (int x = 0; x < n; ++x) {
            for (int y = 0; y < n; ++y) w(x, y) += b(y) - b(x);
        }
        EXPECT_TRUE(detect_lattice(table_spec(P, w, false)).is_lattice);
    }
}

TEST(Skeleton, ZeroRewardAndOneState) {
    auto ct = std::make_shared<const CtMapSpec>(mat2(-1.0, 1.0, 2.0, -2.0), Vector::Zero(2),
                                                std::nullopt, false);
    const auto sk = ct_sample_skeleton(ct);
    EXPECT_NEAR((sk.kernel().P() - matrix_exp(ct->generator())).cwiseAbs().maxCoeff(), 0.0, 1e-14);
    for (Eigen::Index x = 0; x < 2; ++x) {
        for (Eigen::Index y = 0; y < 2; ++y) EXPECT_NEAR(sk.law(x, y).raw_moment(2), 0.0, 1e-8);
    }

    auto one = std::make_shared<const CtMapSpec>(Matrix::Zero(1, 1), Vector::Constant(1, 1.7),
                                                 std::nullopt, false);
    const auto s1 = ct_sample_skeleton(one);
    EXPECT_NEAR(std::abs(s1.law(0, 0).cf(0.9) - std::exp(Complex(0.0, 0.9 * 1.7))), 0.0, 1e-13);
    EXPECT_NEAR(s1.law(0, 0).raw_moment(1), 1.7, 1e-8);
    EXPECT_NEAR(s1.law(0, 0).raw_moment(2), 1.7 * 1.7, 1e-7);
}

TEST(CtMapSpec, StationaryAndCentering) {
    const auto ct = ct_fixture("ct_two_state");
    EXPECT_NEAR(ct->pi()(0), 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(ct->drift(), 1.0 / 3.0, 1e-14);
    EXPECT_NEAR(ct->pi().dot(ct->reward()), 0.0, 1e-15);
    EXPECT_THROW(CtMapSpec(mat2(-1.0, 1.0, 2.0, -1.0), Vector::Zero(2), std::nullopt, false),
                 NotStochastic);
}

TEST(Skeleton, CenteredMeanVanishes) {
    EXPECT_NEAR(exact_mean(fixture("ct_two_state"))(0), 0.0, 1e-12);
}
