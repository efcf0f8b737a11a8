#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "frfhb/distributions.hpp"
#include "frfhb/transforms.hpp"

using namespace frfhb;

// Reference values below are frozen from 40-digit evaluations.

TEST(LogNormalCdf, MatchesReferenceAcrossTail)
{
    const std::pair<double, double> cases[] = {
        {0.0, -0.69314718055994530942},   {-1.5, -2.705944400823889807}, {2.0, -0.023012909328963488465},
        {-19.0, -184.36612866916096735}, {-25.0, -316.63940800802025894}, {-40.0, -804.60844201375378817},
    };
    for (const auto& [z, ref] : cases)
        EXPECT_NEAR(log_normal_cdf(z), ref, 1e-12 * std::abs(ref)) << z;
}

TEST(LogNormalCdf, ContinuousAtTailSwitch)
{
    EXPECT_NEAR(log_normal_cdf(-20.0 - 1e-12), log_normal_cdf(-20.0 + 1e-12), 1e-9);
}

TEST(HazardRatio, MatchesReference)
{
    const std::pair<double, double> cases[] = {
        {-25.0, 25.039873012057562583}, {-19.0, 19.052343949197502906},
        {0.0, 0.79788456080286535588},  {1.3, 0.18973503541925961675},
    };
    for (const auto& [z, ref] : cases)
        EXPECT_NEAR(normal_hazard_ratio(z), ref, 1e-10 * ref) << z;
}

TEST(TruncatedNormal, MatchesReference)
{
    EXPECT_NEAR(truncated_normal_lpdf(3.0, 5.0, 25.0).value, -2.4356226666153232269, 1e-13);
    EXPECT_NEAR(truncated_normal_lpdf(0.5, -2.0, 1.0).value, -0.26075419952264079294, 1e-13);
    EXPECT_NEAR(truncated_normal_lpdf(1e-4, 100.0, 1e4).value, -5.8513539401698142203, 1e-13);
    EXPECT_EQ(truncated_normal_lpdf(-1e-9, 1.0, 1.0).value, neg_inf);
}

TEST(TruncatedNormal, MeanOfHalfNormal)
{
    EXPECT_NEAR(PriorSpec::truncated_normal(0.0, 1e4).mean(), 79.788456080286535588, 1e-10);
    EXPECT_NEAR(PriorSpec::truncated_normal(190.0, 25.0).mean(), 190.0, 1e-12);
}

TEST(TruncatedNormal, DensityIntegratesToOne)
{
    for (auto [m, v] : {std::pair{0.0, 1.0}, {-2.0, 1.0}, {5.0, 25.0}}) {
        const double hi = std::max(m, 0.0) + 12.0 * std::sqrt(v);
        const int n = 200000;
        const double h = hi / n;
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double wgt = (i == 0 || i == n) ? 0.5 : 1.0;
            s += wgt * std::exp(truncated_normal_lpdf(i * h, m, v).value);
        }
        EXPECT_NEAR(s * h, 1.0, 1e-6) << m << " " << v;
    }
}

TEST(Normal, ValueAtResidueHyperprior)
{
    EXPECT_NEAR(normal_lpdf(-0.003, -0.004, 9e-6).value, 4.8346489015537990498, 1e-13);
}

TEST(Beta, ModeDensity)
{
    const double x = 5.0 / 1004.0;
    EXPECT_NEAR(beta_lpdf(x, 6.0, 1000.0).value, 5.1749364852611717477, 1e-10);
    EXPECT_NEAR(beta_lpdf(x, 6.0, 1000.0).d_x, 0.0, 1e-9);
    EXPECT_EQ(beta_lpdf(0.0, 2.0, 2.0).value, neg_inf);
    EXPECT_EQ(beta_lpdf(1.0, 2.0, 2.0).value, neg_inf);
}

namespace {

template <class F>
double central(F f, double x, double h)
{
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

void expect_close(double analytic, double numeric, const char* what)
{
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    EXPECT_LE(std::abs(analytic - numeric) / scale, 1e-6) << what << ": " << analytic << " vs " << numeric;
}

} // namespace

TEST(Gradients, NormalFamiliesMatchFiniteDifferences)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> xs(0.01, 8.0), ms(-6.0, 8.0), vs(0.2, 20.0);
    for (int i = 0; i < 200; ++i) {
        const double x = xs(rng), m = ms(rng), v = vs(rng);
        for (auto lpdf : {&normal_lpdf, &truncated_normal_lpdf}) {
            const auto g = lpdf(x, m, v);
            expect_close(g.d_x, central([&](double t) { return lpdf(t, m, v).value; }, x, 1e-5), "d_x");
            expect_close(g.d_mean, central([&](double t) { return lpdf(x, t, v).value; }, m, 1e-5), "d_mean");
            expect_close(g.d_var, central([&](double t) { return lpdf(x, m, t).value; }, v, 1e-6 * v), "d_var");
        }
    }
}

TEST(Gradients, TruncatedNormalDeepTail)
{
    // mean / sd = -30: the normaliser uses the asymptotic branch
    const double x = 0.3, m = -30.0, v = 1.0;
    const auto g = truncated_normal_lpdf(x, m, v);
    expect_close(g.d_mean, central([&](double t) { return truncated_normal_lpdf(x, t, v).value; }, m, 1e-4), "d_mean");
    expect_close(g.d_var, central([&](double t) { return truncated_normal_lpdf(x, m, t).value; }, v, 1e-5), "d_var");
}

TEST(Gradients, BetaMatchesFiniteDifferences)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> xs(0.001, 0.2), as(1.5, 12.0), bs(50.0, 2000.0);
    for (int i = 0; i < 200; ++i) {
        const double x = xs(rng), a = as(rng), b = bs(rng);
        const auto g = beta_lpdf(x, a, b);
        expect_close(g.d_x, central([&](double t) { return beta_lpdf(t, a, b).value; }, x, 1e-7), "d_x");
        expect_close(g.d_alpha, central([&](double t) { return beta_lpdf(x, t, b).value; }, a, 1e-5), "d_alpha");
        expect_close(g.d_beta, central([&](double t) { return beta_lpdf(x, a, t).value; }, b, 1e-3), "d_beta");
    }
}

TEST(PriorSpec, ValidationRejectsBadParameters)
{
    EXPECT_THROW(PriorSpec::normal(0.0, 0.0).validate("p"), InvalidArgument);
    EXPECT_THROW(PriorSpec::truncated_normal(0.0, -1.0).validate("p"), InvalidArgument);
    EXPECT_THROW(PriorSpec::beta_dist(0.0, 1.0).validate("p"), InvalidArgument);
    EXPECT_THROW(PriorSpec::normal(NAN, 1.0).validate("p"), InvalidArgument);
    EXPECT_NO_THROW(PriorSpec::beta_dist(6.0, 1000.0).validate("p"));
}

namespace {

Layout mixed_layout()
{
    Layout l;
    l.add({"a", "x", -1, -1, Transform::identity});
    l.add({"w0", "omega", 0, 0, Transform::ordered_head});
    l.add({"w1", "omega", 0, 1, Transform::ordered_tail});
    l.add({"w2", "omega", 0, 2, Transform::ordered_tail});
    l.add({"z", "zeta", 0, 0, Transform::logit});
    l.add({"s", "sigma2", -1, -1, Transform::log});
    l.add({"v0", "omega", 1, 0, Transform::ordered_head});
    l.add({"v1", "omega", 1, 1, Transform::ordered_tail});
    return l;
}

// Smooth test function of the constrained values.
double test_fn(const std::vector<double>& x)
{
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += std::sin(0.3 * static_cast<double>(i + 1) * x[i]) + 0.01 * x[i] * x[i];
    return s;
}

std::vector<double> test_grad(const std::vector<double>& x)
{
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double k = 0.3 * static_cast<double>(i + 1);
        g[i] = k * std::cos(k * x[i]) + 0.02 * x[i];
    }
    return g;
}

} // namespace

TEST(Transforms, RoundTripAndOrdering)
{
    const auto l = mixed_layout();
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 2.0);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> u(l.size());
        for (double& v : u)
            v = nd(rng);
        const auto x = constrain(l, u);
        EXPECT_LT(x[1], x[2]);
        EXPECT_LT(x[2], x[3]);
        EXPECT_GT(x[1], 0.0);
        EXPECT_GT(x[4], 0.0);
        EXPECT_LT(x[4], 1.0);
        EXPECT_LT(x[6], x[7]);
        const auto back = unconstrain(l, x);
        for (std::size_t k = 0; k < u.size(); ++k)
            EXPECT_NEAR(back[k], u[k], 1e-9 * (1.0 + std::abs(u[k])));
    }
}

TEST(Transforms, UnconstrainRejectsInfeasiblePoints)
{
    const auto l = mixed_layout();
    EXPECT_THROW(unconstrain(l, std::vector<double>{0, 1, 2, 1.5, 0.5, 1, 1, 2}), InvalidArgument);
    EXPECT_THROW(unconstrain(l, std::vector<double>{0, 1, 2, 3, 1.0, 1, 1, 2}), InvalidArgument);
    EXPECT_THROW(unconstrain(l, std::vector<double>{0, 1, 2, 3, 0.5, 0, 1, 2}), InvalidArgument);
    EXPECT_THROW(unconstrain(l, std::vector<double>{0, 1}), InvalidArgument);
}

TEST(Transforms, LogJacobianMatchesNumericalDeterminant)
{
    const auto l = mixed_layout();
    const std::vector<double> u{0.3, 1.2, -0.4, 0.7, -1.1, 0.2, 2.0, -3.0};
    // the Jacobian is lower triangular, so log|det| = sum log |dx_i/du_i|
    double expected = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        auto xi = [&](double t) {
            auto v = u;
            v[i] = t;
            return constrain(l, v)[i];
        };
        expected += std::log(std::abs(central(xi, u[i], 1e-6)));
    }
    EXPECT_NEAR(log_jacobian(l, u), expected, 1e-7);
}

TEST(Transforms, LogDensityJacobianOfLogTransformHasUnitDerivative)
{
    Layout l;
    l.add({"s", "sigma2_H", -1, -1, Transform::log});
    for (double u : {-8.0, 0.0, 3.0}) {
        const double fd = (log_jacobian(l, std::vector<double>{u + 1e-6}) - log_jacobian(l, std::vector<double>{u - 1e-6})) / 2e-6;
        EXPECT_NEAR(fd, 1.0, 1e-8);
    }
}

TEST(Transforms, PullBackMatchesFiniteDifferences)
{
    const auto l = mixed_layout();
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> u(l.size());
        for (double& v : u)
            v = nd(rng);
        const auto x = constrain(l, u);
        std::vector<double> gu(u.size());
        pull_back_gradient(l, u, x, test_grad(x), gu);
        auto total = [&](const std::vector<double>& v) { return test_fn(constrain(l, v)) + log_jacobian(l, v); };
        for (std::size_t i = 0; i < u.size(); ++i) {
            auto f = [&](double t) {
                auto v = u;
                v[i] = t;
                return total(v);
            };
            expect_close(gu[i], central(f, u[i], 1e-6), "pull-back");
        }
    }
}

TEST(Layout, RejectsDuplicatesAndOrphanTails)
{
    Layout l;
    l.add({"a", "x", -1, -1, Transform::identity});
    EXPECT_THROW(l.add({"a", "x", -1, -1, Transform::log}), InvalidArgument);
    EXPECT_THROW(l.add({"t", "x", -1, -1, Transform::ordered_tail}), InvalidArgument);
    EXPECT_EQ(l.index_of("a"), 0u);
    EXPECT_THROW((void)l.index_of("missing"), InvalidArgument);
}
