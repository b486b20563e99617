#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <stablesem/correlations.hpp>
#include <stablesem/errors.hpp>
#include <stablesem/simgen.hpp>

#include "oracles.hpp"

using namespace stablesem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Pair {
    std::vector<double> x, y;
};

Pair bivariate_normal(double rho, std::size_t n, Rng& rng)
{
    std::normal_distribution<double> z;
    Pair p;
    p.x.resize(n);
    p.y.resize(n);
    const double s = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = z(rng);
        p.x[i] = a;
        p.y[i] = rho * a + s * z(rng);
    }
    return p;
}

std::vector<double> cut(const std::vector<double>& v, const std::vector<double>& cuts)
{
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        int k = 1;
        for (double c : cuts) k += v[i] >= c ? 1 : 0;
        out[i] = k;
    }
    return out;
}

std::vector<double> median_split(const std::vector<double>& v) { return cut(v, {0.0}); }

} // namespace

TEST(BivariateNormal, MatchesQuadratureOracle)
{
    const std::vector<double> limits{-kInf, -3.0, -1.2, 0.0, 0.4, 2.5, kInf};
    const std::vector<double> rhos{-0.99, -0.7, -0.2, 0.0, 0.3, 0.85, 0.99};
    double worst = 0.0;
    for (double h : limits) {
        for (double k : limits) {
            for (double r : rhos) {
                worst = std::max(worst, std::abs(bivariate_normal_cdf(h, k, r) - oracle::bvn_cdf_quadrature(h, k, r)));
            }
        }
    }
    EXPECT_LE(worst, 1e-7);
}

TEST(BivariateNormal, RectangleSumsToOne)
{
    const std::vector<double> cuts{-kInf, -0.5, 0.7, kInf};
    double total = 0.0;
    for (std::size_t a = 0; a + 1 < cuts.size(); ++a) {
        for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
            total += bivariate_normal_rectangle(cuts[a], cuts[a + 1], cuts[b], cuts[b + 1], 0.6);
        }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Pearson, Identities)
{
    const std::vector<double> x{1, 2, 4, 7, 11};
    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    EXPECT_NEAR(pearson(x, x), 1.0, 1e-12);
    EXPECT_NEAR(pearson(x, neg), -1.0, 1e-12);
}

TEST(Pearson, IndependentDraws)
{
    Rng rng(3);
    const auto p = bivariate_normal(0.0, 100000, rng);
    EXPECT_LT(std::abs(pearson(p.x, p.y)), 0.02);
}

TEST(Pearson, ZeroVarianceRejected)
{
    const std::vector<double> c{2, 2, 2, 2}, x{1, 2, 3, 4};
    EXPECT_THROW((void)pearson(c, x), DegenerateColumnError);
}

TEST(Thresholds, MedianSplit)
{
    const std::vector<double> codes{1, 2, 1, 2, 1, 2, 2, 1};
    const auto t = estimate_thresholds(codes, 2);
    ASSERT_EQ(t.tau.size(), 1U);
    EXPECT_NEAR(t.tau[0], 0.0, 1e-12);
}

TEST(Thresholds, OneSigmaSplit)
{
    std::vector<double> codes(8413, 1.0);
    codes.resize(10000, 2.0);
    EXPECT_NEAR(estimate_thresholds(codes, 2).tau[0], 1.0, 1e-3);
}

TEST(Thresholds, Quartiles)
{
    std::vector<double> codes(25, 1.0);
    codes.resize(75, 2.0);
    codes.resize(100, 3.0);
    const auto t = estimate_thresholds(codes, 3);
    ASSERT_EQ(t.tau.size(), 2U);
    EXPECT_NEAR(t.tau[0], -0.6745, 1e-4);
    EXPECT_NEAR(t.tau[1], 0.6745, 1e-4);
    EXPECT_EQ(t.lower(1), -kInf);
    EXPECT_EQ(t.upper(3), kInf);
}

TEST(Thresholds, SingleCategoryRejected)
{
    const std::vector<double> codes{2, 2, 2};
    EXPECT_THROW((void)estimate_thresholds(codes, 3), DegenerateColumnError);
}

TEST(Thresholds, EmptyCategoryKeepsThresholdsFinite)
{
    const std::vector<double> codes{1, 1, 3, 3, 3, 1};
    const auto t = estimate_thresholds(codes, 3);
    EXPECT_TRUE(std::isfinite(t.tau[0]) && std::isfinite(t.tau[1]));
    EXPECT_LT(t.tau[0], t.tau[1]);
}

TEST(Thresholds, RecoverCutPoints)
{
    Rng rng(8);
    std::normal_distribution<double> z;
    std::vector<double> v(100000);
    for (auto& x : v) x = z(rng);
    const std::vector<double> cuts{-1.1, -0.2, 0.5, 1.4};
    const auto t = estimate_thresholds(cut(v, cuts), 5);
    for (std::size_t j = 0; j < cuts.size(); ++j) EXPECT_NEAR(t.tau[j], cuts[j], 0.03);
}

TEST(Polychoric, IdenticalBinaryHitsBoundary)
{
    const std::vector<double> x{1, 2, 2, 1, 2, 1, 1, 2, 2, 1};
    const auto est = polychoric(x, 2, x, 2);
    EXPECT_TRUE(est.at_boundary);
    EXPECT_DOUBLE_EQ(est.rho, kRhoBound);
}

TEST(Polychoric, MedianSplitRecoversLatentCorrelation)
{
    Rng rng(12);
    for (double rho : {0.5, 0.0, -0.7}) {
        const auto p = bivariate_normal(rho, 100000, rng);
        const auto est = polychoric(median_split(p.x), 2, median_split(p.y), 2);
        EXPECT_NEAR(est.rho, rho, 0.02) << "rho " << rho;
        EXPECT_FALSE(est.at_boundary);
    }
}

TEST(Polychoric, InvariantUnderIncreasingRelabel)
{
    Rng rng(13);
    const auto p = bivariate_normal(0.4, 10000, rng);
    const auto x = cut(p.x, {-0.5, 0.6});
    const auto y = cut(p.y, {0.1});
    std::vector<double> spread(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) spread[i] = 2 * x[i] - 1;  // 1,2,3 -> 1,3,5
    const double base = polychoric(x, 3, y, 2).rho;
    EXPECT_NEAR(polychoric(spread, 5, y, 2).rho, base, 2e-3);
}

TEST(Polyserial, DichotomizedCopy)
{
    Rng rng(14);
    const auto p = bivariate_normal(0.0, 100000, rng);
    EXPECT_NEAR(polyserial(p.x, median_split(p.x), 2).rho, 1.0, 0.02);
}

TEST(Polyserial, IndependentAndNegative)
{
    Rng rng(15);
    const auto indep = bivariate_normal(0.0, 100000, rng);
    EXPECT_LT(std::abs(polyserial(indep.x, cut(indep.y, {-0.3, 0.8}), 3).rho), 0.02);
    const auto neg = bivariate_normal(-0.7, 100000, rng);
    EXPECT_NEAR(polyserial(neg.x, cut(neg.y, {-0.3, 0.8}), 3).rho, -0.7, 0.02);
}

TEST(MixedMatrix, AllContinuousIsPearson)
{
    Rng rng(16);
    Dataset d;
    for (int c = 0; c < 3; ++c) {
        const auto p = bivariate_normal(0.3, 200, rng);
        d.columns.push_back({"c" + std::to_string(c), IndicatorType::continuous(), p.x});
    }
    const auto r = mixed_correlation_matrix(d);
    EXPECT_EQ(r.kind, MatrixKind::correlation);
    for (int a = 0; a < 3; ++a) {
        EXPECT_DOUBLE_EQ(r.S(a, a), 1.0);
        for (int b = 0; b < 3; ++b) {
            if (a != b) EXPECT_NEAR(r.S(a, b), pearson(d.columns[a].values, d.columns[b].values), 1e-12);
        }
    }
}

TEST(MixedMatrix, CovarianceOptionOnlyWhenContinuous)
{
    Rng rng(17);
    Dataset d;
    const auto p = bivariate_normal(0.3, 500, rng);
    std::vector<double> scaled;
    for (double v : p.x) scaled.push_back(3 * v);
    d.columns.push_back({"a", IndicatorType::continuous(), scaled});
    d.columns.push_back({"b", IndicatorType::continuous(), p.y});
    CorrelationOptions opt;
    opt.prefer_covariance = true;
    const auto cov = mixed_correlation_matrix(d, opt);
    EXPECT_EQ(cov.kind, MatrixKind::covariance);
    EXPECT_NEAR(cov.S(0, 0), 9.0, 1.5);

    d.columns.push_back({"o", IndicatorType::ordinal(2), median_split(p.y)});
    EXPECT_EQ(mixed_correlation_matrix(d, opt).kind, MatrixKind::correlation);
}

TEST(MixedMatrix, SingleColumn)
{
    Dataset d;
    d.columns.push_back({"a", IndicatorType::continuous(), {1, 2, 3, 5}});
    const auto r = mixed_correlation_matrix(d);
    ASSERT_EQ(r.S.rows(), 1);
    EXPECT_DOUBLE_EQ(r.S(0, 0), 1.0);
}

TEST(MixedMatrix, OrdinalDataRecoversImpliedCorrelation)
{
    Rng rng(18);
    const auto sem = random_sem(3, 3, 3, rng);
    const auto data = simulate(sem.measurement, sem.params, 10000, rng);
    const auto disc = discretize(data, rng);
    const auto r = mixed_correlation_matrix(disc.data);

    const Matrix sigma = to_indicator_order(sem.params.layout, implied_covariance(sem.params));
    const Vector inv_sd = sigma.diagonal().cwiseSqrt().cwiseInverse();
    const Matrix truth = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
    EXPECT_LT((r.S - truth).cwiseAbs().maxCoeff(), 0.05);
    EXPECT_LT((r.S - r.S.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MixedMatrix, PairFailureNamesColumns)
{
    Dataset d;
    d.columns.push_back({"flat", IndicatorType::continuous(), {1, 1, 1, 1}});
    d.columns.push_back({"b", IndicatorType::continuous(), {1, 2, 3, 4}});
    try {
        (void)mixed_correlation_matrix(d);
        FAIL() << "expected DegenerateColumnError";
    } catch (const DegenerateColumnError& e) {
        EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
    }
}

TEST(NearestPd, ClipsAndKeepsUnitDiagonal)
{
    Matrix a(3, 3);
    a << 1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0;
    ASSERT_LT(Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues().minCoeff(), 0.0);
    const Matrix fixed = nearest_correlation_pd(a, 1e-6);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(fixed).eigenvalues().minCoeff(), 1e-6 * (1 - 1e-9));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(fixed(i, i), 1.0, 1e-12);
    EXPECT_LT((fixed - fixed.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DatasetChecks, InvalidCellsRejected)
{
    Dataset d;
    d.columns.push_back({"a", IndicatorType::continuous(), {1, std::nan(""), 3}});
    EXPECT_THROW(d.validate(), InputError);
    Dataset o;
    o.columns.push_back({"o", IndicatorType::ordinal(3), {1, 4, 2}});
    try {
        o.validate();
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_EQ(e.rows(), std::vector<std::size_t>{1});
    }
}
