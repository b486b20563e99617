#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <stablesem/optimizer.hpp>

using namespace stablesem;

namespace {

double rosenbrock(const Vector& x, Vector* g)
{
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    if (g != nullptr) {
        g->resize(2);
        (*g)[0] = -2.0 * a - 400.0 * x[0] * b;
        (*g)[1] = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
}

} // namespace

TEST(Bfgs, Rosenbrock)
{
    Vector x0(2);
    x0 << -1.2, 1.0;
    const auto r = minimize_bfgs(rosenbrock, x0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-4);
    EXPECT_NEAR(r.x[1], 1.0, 1e-4);
    EXPECT_LT(r.value, 1e-8);
}

TEST(Bfgs, AcceptedValuesNeverIncrease)
{
    std::vector<double> accepted;
    Objective traced = [&](const Vector& x, Vector* g) {
        const double v = rosenbrock(x, g);
        if (g != nullptr) accepted.push_back(v);  // gradients are only requested at accepted points
        return v;
    };
    Vector x0(2);
    x0 << -1.5, 2.0;
    (void)minimize_bfgs(traced, x0);
    ASSERT_GT(accepted.size(), 2U);
    for (std::size_t k = 1; k < accepted.size(); ++k) EXPECT_LE(accepted[k], accepted[k - 1]);
}

TEST(Bfgs, QuadraticInFewSteps)
{
    Matrix a(3, 3);
    a << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
    Vector b(3);
    b << 1, -2, 0.5;
    Objective q = [&](const Vector& x, Vector* g) {
        if (g != nullptr) *g = a * x - b;
        return 0.5 * x.dot(a * x) - b.dot(x);
    };
    const auto r = minimize_bfgs(q, Vector::Zero(3));
    EXPECT_TRUE(r.converged);
    EXPECT_LT((r.x - a.ldlt().solve(b)).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LE(r.iterations, 20);
}

TEST(Bfgs, InfeasibleStart)
{
    Objective f = [](const Vector&, Vector*) { return std::numeric_limits<double>::infinity(); };
    const auto r = minimize_bfgs(f, Vector::Zero(2));
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.reason, StopReason::infeasible_start);
}

TEST(Bfgs, BacktracksOutOfInfeasibleRegion)
{
    // log barrier: +inf for x <= 0, minimum at x = 1
    Objective f = [](const Vector& x, Vector* g) {
        if (x[0] <= 0.0) return std::numeric_limits<double>::infinity();
        if (g != nullptr) *g = Vector::Constant(1, 1.0 - 1.0 / x[0]);
        return x[0] - std::log(x[0]);
    };
    const auto r = minimize_bfgs(f, Vector::Constant(1, 8.0));
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-4);
}

TEST(Bfgs, IterationCapReported)
{
    MinimizeOptions opt;
    opt.max_iterations = 2;
    Vector x0(2);
    x0 << -1.2, 1.0;
    const auto r = minimize_bfgs(rosenbrock, x0, opt);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.reason, StopReason::max_iterations);
}

TEST(CentralDifference, MatchesAnalytic)
{
    Vector x(2);
    x << 0.3, -0.7;
    Vector g;
    (void)rosenbrock(x, &g);
    const Vector fd = central_difference_gradient(rosenbrock, x, 1e-5);
    EXPECT_LT((fd - g).cwiseAbs().maxCoeff(), 1e-5);
}
