#pragma once

// Log-densities with analytic gradients. Normal-family distributions are
// parameterised by (mean, variance); truncated normals are truncated below at 0.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "frfhb/errors.hpp"

namespace frfhb {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();
inline constexpr double half_log_two_pi = 0.91893853320467274178; // 0.5 * log(2 pi)

namespace detail {

// 1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8, the asymptotic Mills-ratio series.
inline double mills_series(double z) noexcept
{
    const double iz2 = 1.0 / (z * z);
    return 1.0 + iz2 * (-1.0 + iz2 * (3.0 + iz2 * (-15.0 + iz2 * 105.0)));
}

inline constexpr double tail_switch = -20.0;

// Special functions report failures through their return values; the
// densities map those to -inf instead of throwing inside the sampler.
using quiet_policy = boost::math::policies::policy<
    boost::math::policies::domain_error<boost::math::policies::ignore_error>,
    boost::math::policies::pole_error<boost::math::policies::ignore_error>,
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>,
    boost::math::policies::evaluation_error<boost::math::policies::ignore_error>>;

} // namespace detail

/// log Phi(z), stable for large negative z.
inline double log_normal_cdf(double z) noexcept
{
    if (z < detail::tail_switch)
        return -0.5 * z * z - std::log(-z) - half_log_two_pi + std::log(detail::mills_series(z));
    return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
}

/// phi(z) / Phi(z) (inverse Mills ratio of the lower tail).
inline double normal_hazard_ratio(double z) noexcept
{
    if (z < detail::tail_switch)
        return -z / detail::mills_series(z);
    return std::exp(-0.5 * z * z - half_log_two_pi - log_normal_cdf(z));
}

struct NormalGrad {
    double value;
    double d_x;
    double d_mean;
    double d_var;
};

inline NormalGrad normal_lpdf(double x, double mean, double var) noexcept
{
    const double r = x - mean;
    const double inv = 1.0 / var;
    return {
        -half_log_two_pi - 0.5 * std::log(var) - 0.5 * r * r * inv,
        -r * inv,
        r * inv,
        -0.5 * inv + 0.5 * r * r * inv * inv,
    };
}

/// Parameter-only part of a lower-truncated normal: log Phi(mean / sd) and
/// the hazard ratio, shared by every variate with the same parameters.
struct TruncationTerm {
    double log_cdf = 0.0;
    double ratio = 0.0;
};

inline TruncationTerm truncation_term(double mean, double var) noexcept
{
    const double z = mean / std::sqrt(var);
    return {log_normal_cdf(z), normal_hazard_ratio(z)};
}

/// Normal(mean, var) truncated to [0, inf).
inline NormalGrad truncated_normal_lpdf(double x, double mean, double var, const TruncationTerm& t) noexcept
{
    if (x < 0.0)
        return {neg_inf, 0.0, 0.0, 0.0};
    auto g = normal_lpdf(x, mean, var);
    const double sd = std::sqrt(var);
    g.value -= t.log_cdf;
    g.d_mean -= t.ratio / sd;
    g.d_var += t.ratio * mean / (2.0 * var * sd);
    return g;
}

inline NormalGrad truncated_normal_lpdf(double x, double mean, double var) noexcept
{
    return truncated_normal_lpdf(x, mean, var, truncation_term(mean, var));
}

struct BetaGrad {
    double value;
    double d_x;
    double d_alpha;
    double d_beta;
};

/// Parameter-only part of the beta log-density.
struct BetaNormaliser {
    double log_beta = 0.0;
    double digamma_alpha = 0.0;
    double digamma_beta = 0.0;
    double digamma_sum = 0.0;
    bool valid = false;
};

inline BetaNormaliser beta_normaliser(double alpha, double beta)
{
    if (!(alpha > 0.0 && beta > 0.0) || !std::isfinite(alpha + beta))
        return {};
    const detail::quiet_policy pol;
    BetaNormaliser n;
    n.log_beta =
        boost::math::lgamma(alpha, pol) + boost::math::lgamma(beta, pol) - boost::math::lgamma(alpha + beta, pol);
    n.digamma_alpha = boost::math::digamma(alpha, pol);
    n.digamma_beta = boost::math::digamma(beta, pol);
    n.digamma_sum = boost::math::digamma(alpha + beta, pol);
    n.valid = std::isfinite(n.log_beta);
    return n;
}

inline BetaGrad beta_lpdf(double x, double alpha, double beta, const BetaNormaliser& n)
{
    if (!(x > 0.0 && x < 1.0) || !n.valid)
        return {neg_inf, 0.0, 0.0, 0.0};
    const double lx = std::log(x);
    const double l1x = std::log1p(-x);
    return {
        (alpha - 1.0) * lx + (beta - 1.0) * l1x - n.log_beta,
        (alpha - 1.0) / x - (beta - 1.0) / (1.0 - x),
        lx - n.digamma_alpha + n.digamma_sum,
        l1x - n.digamma_beta + n.digamma_sum,
    };
}

inline BetaGrad beta_lpdf(double x, double alpha, double beta)
{
    return beta_lpdf(x, alpha, beta, beta_normaliser(alpha, beta));
}

/// A prior with fixed parameters.
struct PriorSpec {
    enum class Kind { normal, truncated_normal, beta };

    Kind kind = Kind::normal;
    double p1 = 0.0; // mean, or alpha for beta
    double p2 = 1.0; // variance, or beta for beta

    static PriorSpec normal(double mean, double var) { return {Kind::normal, mean, var}; }
    static PriorSpec truncated_normal(double mean, double var) { return {Kind::truncated_normal, mean, var}; }
    static PriorSpec beta_dist(double alpha, double beta) { return {Kind::beta, alpha, beta}; }

    void validate(const std::string& what) const
    {
        if (!std::isfinite(p1) || !std::isfinite(p2))
            throw InvalidArgument(what + ": prior parameters must be finite");
        if (kind == Kind::beta) {
            if (!(p1 > 0.0 && p2 > 0.0))
                throw InvalidArgument(what + ": beta shapes must be positive");
        }
        else if (!(p2 > 0.0)) {
            throw InvalidArgument(what + ": prior variance must be positive");
        }
    }

    /// (log-density, d/dx) at x.
    [[nodiscard]] std::pair<double, double> lpdf(double x) const
    {
        switch (kind) {
        case Kind::normal: {
            const auto g = normal_lpdf(x, p1, p2);
            return {g.value, g.d_x};
        }
        case Kind::truncated_normal: {
            const auto g = truncated_normal_lpdf(x, p1, p2);
            return {g.value, g.d_x};
        }
        case Kind::beta: {
            const auto g = beta_lpdf(x, p1, p2);
            return {g.value, g.d_x};
        }
        }
        return {neg_inf, 0.0};
    }

    /// Mean of the (possibly truncated) distribution.
    [[nodiscard]] double mean() const
    {
        switch (kind) {
        case Kind::normal:
            return p1;
        case Kind::truncated_normal: {
            const double sd = std::sqrt(p2);
            return p1 + sd * normal_hazard_ratio(p1 / sd);
        }
        case Kind::beta:
            return p1 / (p1 + p2);
        }
        return p1;
    }
};

} // namespace frfhb
