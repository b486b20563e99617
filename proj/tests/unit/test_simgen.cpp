#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <stablesem/errors.hpp>
#include <stablesem/simgen.hpp>

#include "oracles.hpp"

using namespace stablesem;

namespace {

Matrix data_covariance(const Dataset& d)
{
    const auto n = static_cast<Eigen::Index>(d.rows());
    Matrix x(n, static_cast<Eigen::Index>(d.cols()));
    for (std::size_t c = 0; c < d.cols(); ++c) x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Vector>(d.columns[c].values.data(), n);
    const Matrix centered = x.rowwise() - x.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(n - 1);
}

} // namespace

TEST(RandomSem, ShapeAndBounds)
{
    Rng rng(1);
    for (int rep = 0; rep < 30; ++rep) {
        const auto sem = random_sem(4, 3, 5, rng);
        const auto& m = sem.measurement;
        EXPECT_EQ(m.latent_count(), 4);
        EXPECT_GE(m.indicator_count(), 12);
        EXPECT_LE(m.indicator_count(), 20);
        for (int node = 0; node < 4; ++node) {
            const auto ind = m.indicators_of(node);
            EXPECT_GE(ind.size(), 3U);
            EXPECT_LE(ind.size(), 5U);
        }
        EXPECT_TRUE(is_acyclic(sem.structure.graph.adjacency()));
        // each indicator loads on exactly one latent
        const Matrix lambda = loading_matrix(sem.params);
        for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
            EXPECT_EQ((lambda.row(i).array() != 0.0).count(), 1) << "indicator " << i;
        }
    }
}

TEST(RandomSem, CoefficientRanges)
{
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const auto sem = random_sem(5, 3, 4, rng);
        const Matrix lambda = loading_matrix(sem.params);
        for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
            for (Eigen::Index j = 0; j < lambda.cols(); ++j) {
                const double v = std::abs(lambda(i, j));
                if (v != 0.0) {
                    EXPECT_GE(v, 0.5);
                    EXPECT_LE(v, 1.5);
                }
            }
        }
        const auto add = [](const Matrix& b) {
            for (Eigen::Index i = 0; i < b.size(); ++i) {
                const double v = std::abs(b.data()[i]);
                if (v != 0.0) {
                    EXPECT_GE(v, 0.3);
                    EXPECT_LE(v, 0.9);
                }
            }
        };
        add(sem.params.B);
        add(sem.params.Gamma);
    }
}

TEST(RandomSem, SeedDeterministic)
{
    Rng a(3), b(3);
    const auto x = random_sem(4, 3, 5, a);
    const auto y = random_sem(4, 3, 5, b);
    EXPECT_EQ(x.structure.graph, y.structure.graph);
    EXPECT_EQ(implied_covariance(x.params), implied_covariance(y.params));
}

TEST(RandomSem, EdgeDensity)
{
    Rng rng(4);
    const int n = 6, reps = 2000;
    double total = 0.0;
    for (int r = 0; r < reps; ++r) total += static_cast<double>(random_sem(n, 3, 3, rng).structure.graph.edge_count());
    // p = 2 / (n - 1) over n (n - 1) / 2 pairs gives n expected edges
    EXPECT_NEAR(total / reps, n, 0.2);
}

TEST(Simulate, CovarianceConvergesToImplied)
{
    Rng rng(5);
    const auto sem = random_sem(3, 3, 4, rng);
    const auto data = simulate(sem.measurement, sem.params, 200000, rng);
    const Matrix implied = to_indicator_order(sem.params.layout, implied_covariance(sem.params));
    const Matrix sample = data_covariance(data);
    EXPECT_LT((sample - implied).cwiseAbs().maxCoeff(), 0.03 * std::max(1.0, implied.cwiseAbs().maxCoeff()));
}

TEST(Simulate, ZeroCoefficientDecouples)
{
    Rng rng(6);
    auto sem = random_sem(2, 3, 3, rng);
    sem.params.B.setZero();
    sem.params.Gamma.setZero();
    const auto data = simulate(sem.measurement, sem.params, 100000, rng);
    const Matrix s = data_covariance(data);
    const auto first = sem.measurement.indicators_of(0);
    const auto second = sem.measurement.indicators_of(1);
    for (int i : first) {
        for (int j : second) {
            EXPECT_LT(std::abs(s(i, j)) / std::sqrt(s(i, i) * s(j, j)), 0.02);
        }
    }
}

TEST(Simulate, SeedDeterministicAndNamed)
{
    Rng g(7);
    const auto sem = random_sem(3, 3, 3, g);
    Rng a(8), b(8);
    const auto x = simulate(sem.measurement, sem.params, 50, a);
    const auto y = simulate(sem.measurement, sem.params, 50, b);
    ASSERT_EQ(x.cols(), y.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) {
        EXPECT_EQ(x.columns[c].values, y.columns[c].values);
        EXPECT_EQ(x.columns[c].name, sem.measurement.indicator_names[c]);
    }
    EXPECT_EQ(x.rows(), 50U);
}

TEST(Discretize, CodesInRangeAndShapeKept)
{
    Rng rng(9);
    const auto sem = random_sem(3, 3, 4, rng);
    const auto data = simulate(sem.measurement, sem.params, 2000, rng);
    const auto d = discretize(data, rng);
    ASSERT_EQ(d.data.cols(), data.cols());
    ASSERT_EQ(d.data.rows(), data.rows());
    for (std::size_t c = 0; c < data.cols(); ++c) {
        const auto& col = d.data.columns[c];
        EXPECT_EQ(col.name, data.columns[c].name);
        ASSERT_TRUE(col.type.is_ordinal());
        const int w = col.type.categories;
        EXPECT_GE(w, 2);
        EXPECT_LE(w, 7);
        EXPECT_EQ(d.cut_probabilities[c].size(), static_cast<std::size_t>(w - 1));
        for (double v : col.values) {
            EXPECT_EQ(v, std::round(v));
            EXPECT_GE(v, 1.0);
            EXPECT_LE(v, w);
        }
        // codes are monotone in the underlying value
        for (std::size_t r = 1; r < data.rows(); ++r) {
            if (data.columns[c].values[r] > data.columns[c].values[r - 1]) {
                EXPECT_GE(col.values[r], col.values[r - 1]);
            }
        }
    }
}

TEST(Discretize, BinsHoldAtLeastFivePercent)
{
    Rng rng(10);
    const auto sem = random_sem(4, 3, 5, rng);
    const auto d = discretize(simulate(sem.measurement, sem.params, 100, rng), rng);
    for (const auto& cuts : d.cut_probabilities) {
        double prev = 0.0;
        for (double p : cuts) {
            EXPECT_GE(p - prev, 0.05 - 1e-12);
            prev = p;
        }
        EXPECT_GE(1.0 - prev, 0.05 - 1e-12);
    }
}

TEST(Discretize, ThresholdsRecovered)
{
    Rng rng(11);
    const auto sem = random_sem(2, 3, 3, rng);
    const auto d = discretize(simulate(sem.measurement, sem.params, 100000, rng), rng);
    for (std::size_t c = 0; c < d.data.cols(); ++c) {
        const auto& col = d.data.columns[c];
        const auto th = estimate_thresholds(col.values, col.type.categories);
        for (std::size_t k = 0; k < d.cut_probabilities[c].size(); ++k) {
            EXPECT_NEAR(th.tau[k], normal_quantile(d.cut_probabilities[c][k]), 0.03);
        }
    }
}

TEST(Roc, PerfectAndConstant)
{
    std::vector<std::pair<double, bool>> perfect{{0.9, true}, {0.8, true}, {0.2, false}, {0.1, false}};
    EXPECT_DOUBLE_EQ(roc_from_scores(perfect).auc, 1.0);
    std::vector<std::pair<double, bool>> flat{{0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}};
    EXPECT_DOUBLE_EQ(roc_from_scores(flat).auc, 0.5);
    std::vector<std::pair<double, bool>> inverted{{0.1, true}, {0.9, false}};
    EXPECT_DOUBLE_EQ(roc_from_scores(inverted).auc, 0.0);
}

TEST(Roc, CurveEndpoints)
{
    const auto r = roc_from_scores({{0.3, true}, {0.7, false}, {0.6, true}});
    ASSERT_GE(r.points.size(), 2U);
    EXPECT_EQ(r.points.front(), std::make_pair(0.0, 0.0));
    EXPECT_EQ(r.points.back(), std::make_pair(1.0, 1.0));
    EXPECT_EQ(r.positives, 2);
    EXPECT_EQ(r.negatives, 1);
}

TEST(Roc, MatchesMannWhitney)
{
    Rng rng(12);
    std::uniform_int_distribution<int> level(0, 8);
    std::bernoulli_distribution label(0.4);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::pair<double, bool>> scored;
        const int n = 3 + trial % 30;
        for (int k = 0; k < n; ++k) scored.emplace_back(level(rng) / 8.0, label(rng));
        const auto r = roc_from_scores(scored);
        const bool both = std::any_of(scored.begin(), scored.end(), [](auto& p) { return p.second; }) &&
                          std::any_of(scored.begin(), scored.end(), [](auto& p) { return !p.second; });
        EXPECT_EQ(r.defined, both);
        if (both) EXPECT_NEAR(r.auc, oracle::mann_whitney_auc(scored), 1e-12);
    }
}

TEST(Roc, MonotoneTransformInvariant)
{
    Rng rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::pair<double, bool>> scored, squashed;
    for (int k = 0; k < 50; ++k) {
        const double s = u(rng);
        const bool l = u(rng) < s;
        scored.emplace_back(s, l);
        squashed.emplace_back(std::exp(3 * s) - 7, l);
    }
    EXPECT_NEAR(roc_from_scores(scored).auc, roc_from_scores(squashed).auc, 1e-12);
}

TEST(Roc, UndefinedWithoutNegatives)
{
    const auto r = roc_from_scores({{0.3, true}, {0.6, true}});
    EXPECT_FALSE(r.defined);
    EXPECT_TRUE(std::isnan(r.auc));
}

TEST(Roc, StabilityAgainstTruth)
{
    // truth: 0 -> 1; stability puts the true pair first
    Cpdag truth(3);
    truth.set_directed(0, 1);
    StabilityGraph edge(StabilityKind::edge, 3, 3);
    edge.set_counts({1, 4, 4, 4});
    auto sym = [&](int a, int b, int c, double v) {
        edge.set(a, b, c, v);
        edge.set(b, a, c, v);
    };
    sym(0, 1, 1, 0.9);
    sym(1, 2, 1, 0.2);
    sym(0, 2, 3, 0.95);
    const auto capped = roc_auc(edge, truth, 2);
    EXPECT_EQ(capped.positives, 1);
    EXPECT_EQ(capped.negatives, 2);
    EXPECT_DOUBLE_EQ(capped.auc, 1.0);
    EXPECT_DOUBLE_EQ(roc_auc(edge, truth).auc, 0.5);

    StabilityGraph path(StabilityKind::causal_path, 3, 3);
    path.set_counts({1, 4, 4, 4});
    path.set(0, 1, 1, 0.7);
    path.set(1, 0, 1, 0.1);
    const auto p = roc_auc(path, truth);
    EXPECT_EQ(p.positives, 1);
    EXPECT_EQ(p.negatives, 5);
    EXPECT_DOUBLE_EQ(p.auc, 1.0);
}

TEST(SimScheme, Parse)
{
    const auto c = SimScheme::parse("C3-5");
    EXPECT_EQ(c.kind, IndicatorKind::continuous);
    EXPECT_EQ(c.min_indicators, 3);
    EXPECT_EQ(c.max_indicators, 5);
    const auto o = SimScheme::parse("O1-4", 6);
    EXPECT_EQ(o.kind, IndicatorKind::ordinal);
    EXPECT_EQ(o.min_indicators, 1);
    EXPECT_EQ(o.max_indicators, 4);
    EXPECT_EQ(o.n_latents, 6);
    EXPECT_THROW((void)SimScheme::parse("X3-5"), SpecError);
    EXPECT_THROW((void)SimScheme::parse("C5-3").validate(), SpecError);
}
