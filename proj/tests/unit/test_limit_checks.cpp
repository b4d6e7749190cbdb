#include "maplab/errors.hpp"
#include "maplab/fixtures.hpp"
#include "maplab/fourier.hpp"
#include "maplab/limit_checks.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace maplab;

namespace {

MapSpec table_spec(const Matrix& P, const Matrix& v, bool centered) {
    std::vector<EdgeLaw> laws;
    for (Eigen::Index x = 0; x < P.rows(); ++x) {
        for (Eigen::Index y = 0; y < P.cols(); ++y) {
            if (P(x, y) > 0.0) laws.push_back({x, y, IncrementLaw::deterministic(v(x, y))});
        }
    }
    return MapSpec(StochasticKernel(P), 1, std::move(laws), centered);
}

Matrix two_state_P() {
    Matrix P(2, 2);
    P << 0.7, 0.3, 0.2, 0.8;
    return P;
}

}  // namespace

TEST(NormalHelpers, ReferenceValues) {
    EXPECT_NEAR(normal_cdf(1.959963984540054) / 0.975, 1.0, 1e-14);
    EXPECT_NEAR(normal_cdf(-10.0) / 7.619853024160527e-24, 1.0, 1e-12);
    EXPECT_NEAR(normal_pdf(0.0), 0.3989422804014327, 1e-16);
    EXPECT_NEAR(dkw_se(100000), std::sqrt(std::log(2000.0) / 200000.0), 1e-16);
    EXPECT_EQ(kolmogorov_grid().size(), 2001u);
}

TEST(EcdfDistance, SinglePointAndBruteForce) {
    EXPECT_NEAR(ecdf_distance({0.0}, normal_cdf), 0.5, 1e-15);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.3, 1.2);
    std::vector<double> s(300);
    for (double& v : s) v = nd(rng);
    std::sort(s.begin(), s.end());
    const double exact = ecdf_distance(s, normal_cdf);
    double brute = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double g = normal_cdf(s[i]);
        brute = std::max({brute, std::abs((i + 1.0) / s.size() - g), std::abs(double(i) / s.size() - g)});
    }
    EXPECT_DOUBLE_EQ(exact, brute);
    EXPECT_GE(exact, 0.0);
    EXPECT_LE(exact, 1.0);
}

TEST(EcdfDistance, TiesFormOneJump) {
    EXPECT_NEAR(ecdf_distance({0.0, 0.0}, normal_cdf), 0.5, 1e-15);
}

TEST(CltCheck, DegenerateVariance) {
    EXPECT_THROW(clt_check(table_spec(two_state_P(), Matrix::Zero(2, 2), false), {10}, 100, 1), DegenerateVariance);
}

TEST(CltCheck, RademacherDistance) {
    const auto r = clt_check(fixture("iid_rademacher"), {10000}, 20000, 2);
    EXPECT_LE(r.records.back().kolmogorov, 0.02);
}

TEST(CltCheck, TwoStateTrend) {
    const auto r = clt_check(fixture("two_state"), {100, 1000, 10000}, 20000, 3);
    EXPECT_TRUE(r.monotone_trend);
    EXPECT_TRUE(r.verdict);
    EXPECT_NEAR(r.records[0].sigma_used, std::sqrt(0.72), 1e-12);
}

TEST(BerryEsseen, RademacherConstant) {
    const auto r = berry_esseen_check(fixture("iid_rademacher"), {256, 1024}, 20000, 4);
    EXPECT_LE(r.B_hat, 0.6);
    EXPECT_TRUE(r.no_growth);
}

TEST(BerryEsseen, LatticeSpecStillBounded) {
    const auto r = berry_esseen_check(fixture("lattice_pm1"), {64, 256, 1024}, 20000, 5);
    EXPECT_TRUE(r.verdict);
    EXPECT_GT(r.records.back().be_constant, 0.1);
}

TEST(Edgeworth, LatticeRejected) {
    EXPECT_THROW(edgeworth_check(fixture("lattice_pm1"), {64}, 100, 1), LatticeSpec);
    EXPECT_THROW(edgeworth_check(fixture("two_state"), {64}, 100, 1), LatticeSpec);
}

TEST(Edgeworth, SymmetricCorrectionVanishes) {
    const auto r = edgeworth_check(fixture("gaussian_iid"), {16, 64}, 5000, 6);
    EXPECT_EQ(r.mu3, 0.0);
    for (const auto& rec : r.records) EXPECT_EQ(*rec.edgeworth_residual, rec.kolmogorov);
}

TEST(Edgeworth, SkewedMixtureThirdCumulant) {
    // Centered i.i.d. increments: mu3 equals the third central moment.
    const auto spec = fixture("skewed_mixture");
    const double sigma = std::sqrt(variance_series_scalar(spec));
    EXPECT_NEAR(snapped_mu3(spec, sigma), 1.5, 1e-6);
}

TEST(Edgeworth, InversionMatchesBinomialNormalMixture) {
    // Given the number k of draws from the second component, Y_n is Gaussian.
    const int n = 64;
    const auto spec = fixture("skewed_mixture");
    const double sigma = std::sqrt(1.25);
    const std::vector<double> a = {-2.0, -0.5, 0.0, 0.7, 2.5};
    const auto F = inversion_cdf(spec, n, sigma, a);
    const boost::math::binomial_distribution<double> bin(n, 0.2);
    for (std::size_t j = 0; j < a.size(); ++j) {
        double oracle = 0.0;
        for (int k = 0; k <= n; ++k) {
            // Centered means: -0.5 - 0 and 2 - 0 (raw mean is 0).
            const double mean = (n - k) * -0.5 + k * 2.0;
            const double sd = std::sqrt(0.25 * n);
            oracle += boost::math::pdf(bin, k) * normal_cdf((a[j] * sigma * std::sqrt(n) - mean) / sd);
        }
        EXPECT_NEAR(F[j], oracle, 1e-9) << a[j];
    }
}

TEST(Edgeworth, CorrectionHelpsExactly) {
    EdgeworthOptions opt;
    opt.cdf_source = CdfSource::FourierInversion;
    const auto r = edgeworth_check(fixture("skewed_mixture"), {64, 256}, 0, 0, opt);
    EXPECT_TRUE(r.correction_helps);
    EXPECT_TRUE(r.decreasing);
    for (const auto& rec : r.records) EXPECT_LT(*rec.edgeworth_residual, rec.kolmogorov);
}

TEST(Edgeworth, BiasTermUsesExactLimit) {
    EdgeworthOptions opt;
    opt.mu = Vector::Unit(2, 0);
    opt.allow_lattice = true;
    const auto r = edgeworth_check(fixture("two_state"), {256}, 20000, 7, opt);
    EXPECT_NEAR(r.b_mu, asymptotic_bias(fixture("two_state"), Vector::Unit(2, 0))(0), 0.0);
    EXPECT_TRUE(r.lattice);
    ASSERT_TRUE(r.records[0].edgeworth_residual_no_bias.has_value());
}

TEST(Llt, GaussianRatioCoversOne) {
    const auto r = llt_check(fixture("gaussian_iid"), {1024}, 20000, 8);
    ASSERT_TRUE(r.records[0].ratio.has_value());
    EXPECT_TRUE(r.verdict) << *r.records[0].ratio << " +- " << r.records[0].ratio_se;
}

TEST(Llt, LatticeParityOscillates) {
    EXPECT_THROW(llt_check(fixture("lattice_pm1"), {100}, 100, 1), LatticeSpec);
    LltOptions opt;
    opt.allow_lattice = true;
    const auto r = llt_check(fixture("lattice_pm1"), {1024, 1025}, 20000, 9, opt);
    EXPECT_GT(*r.records[0].ratio, 1.5);
    EXPECT_LT(*r.records[1].ratio, 0.5);
}

TEST(Llt, ZeroBumpGivesZero) {
    LltOptions opt;
    opt.bump.height = 0.0;
    const auto r = llt_check(fixture("gaussian_iid"), {16}, 500, 10, opt);
    EXPECT_EQ(r.records[0].estimate, 0.0);
    EXPECT_TRUE(r.verdict);
}

TEST(RhoMixing, IidWithinNoise) {
    const auto r = rho_mixing_check(fixture("iid_rademacher"), 4, 20000, 11);
    EXPECT_TRUE(r.verdict);
    for (const auto& rec : r.records) {
        if (rec.lag >= 2) EXPECT_EQ(rec.bound, 0.0 + rec.bound);
        EXPECT_LE(rec.empirical, 4 * rec.se + rec.bound);
    }
}

TEST(RhoMixing, TwoStateBoundColumn) {
    const auto r = rho_mixing_check(fixture("two_state"), 5, 20000, 12);
    EXPECT_TRUE(r.verdict);
    EXPECT_FALSE(r.vacuous);
    for (const auto& rec : r.records) EXPECT_NEAR(rec.bound, std::pow(0.5, rec.lag - 1), 1e-12);
}

TEST(RhoMixing, TwoValuedIncrementsMatchExactCorrelation) {
    // Every functional of a two-valued increment is affine, so the maximal correlation is 0.5^lag.
    const auto r = rho_mixing_check(fixture("two_state"), 10, 40000, 15);
    for (const auto& rec : r.records) EXPECT_NEAR(rec.empirical, std::pow(0.5, rec.lag), 4 * rec.se) << rec.lag;
}

TEST(RhoMixing, PeriodicChainIsVacuous) {
    Matrix P(2, 2);
    P << 0.0, 1.0, 1.0, 0.0;
    Matrix v(2, 2);
    v << 0.0, 1.0, -1.0, 0.0;
    std::vector<EdgeLaw> laws = {{0, 1, IncrementLaw::gaussian(1.0, 1.0)}, {1, 0, IncrementLaw::gaussian(-1.0, 1.0)}};
    const MapSpec spec(StochasticKernel(P), 1, laws, true);
    const auto r = rho_mixing_check(spec, 3, 2000, 13);
    EXPECT_TRUE(r.vacuous);
}

TEST(CtLimit, ConstantRewardDegenerate) {
    Matrix G(2, 2);
    G << -1.0, 1.0, 2.0, -2.0;
    const CtMapSpec ct(G, Vector::Constant(2, 0.7), std::nullopt, false);
    EXPECT_THROW(ct_limit_check(ct, {10.0}, 100, 1), DegenerateVariance);
}

TEST(CtLimit, TwoStateFixture) {
    const auto r = ct_limit_check(*ct_fixture("ct_two_state"), {100.5, 1000.0}, 100000, 14);
    EXPECT_LE(r.records.back().kolmogorov, 0.05);
    EXPECT_NEAR(r.records.back().sigma_used * r.records.back().sigma_used, 4.0 / 27.0, 1e-7);
    EXPECT_TRUE(r.fractional[0].within);
    EXPECT_GT(r.fractional[0].second_moment, 0.0);
    EXPECT_TRUE(r.verdict);
}

TEST(CtLimit, ShortTimeMomentAtUnitTime) {
    // For the centered fixture, E[Y_1^2] equals the exact second moment of the skeleton at n = 1.
    const auto ct = ct_fixture("ct_two_state");
    const auto skeleton = fixture("ct_two_state");
    EXPECT_NEAR(ct_short_time_second_moment(*ct), exact_moments(skeleton, 1, 2), 1e-6);
}
