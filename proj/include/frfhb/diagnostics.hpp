#pragma once

// Convergence diagnostics for multi-chain MCMC output: rank-normalised split
// R-hat, effective sample size from Geyer's initial monotone sequence, and
// Monte Carlo standard errors.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <unsupported/Eigen/FFT>

#include "frfhb/errors.hpp"

namespace frfhb {

using Chains = std::vector<std::vector<double>>;

namespace detail {

inline void check_chains(const Chains& chains, std::size_t min_chains)
{
    if (chains.size() < min_chains)
        throw InvalidArgument("diagnostics need at least " + std::to_string(min_chains) + " chains");
    const std::size_t n = chains[0].size();
    if (n < 4)
        throw InvalidArgument("diagnostics need at least 4 draws per chain");
    for (const auto& c : chains) {
        if (c.size() != n)
            throw InvalidArgument("chains have different lengths");
        for (double v : c)
            if (!std::isfinite(v))
                throw InvalidArgument("chains contain non-finite draws");
    }
}

inline double mean(std::span<const double> x)
{
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sample_variance(std::span<const double> x)
{
    const double m = mean(x);
    double s = 0.0;
    for (double v : x)
        s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

/// Biased autocovariance (divisor n) at every lag, via zero-padded FFT.
inline std::vector<double> autocovariance(std::span<const double> x)
{
    const std::size_t n = x.size();
    std::size_t len = 1;
    while (len < 2 * n)
        len <<= 1;
    const double m = mean(x);
    std::vector<double> padded(len, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        padded[i] = x[i] - m;
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, padded);
    for (auto& c : spec)
        c = std::norm(c);
    std::vector<double> ac;
    fft.inv(ac, spec);
    ac.resize(n);
    for (double& v : ac)
        v /= static_cast<double>(n);
    return ac;
}

inline Chains split_chains(const Chains& chains)
{
    Chains out;
    for (const auto& c : chains) {
        const std::size_t half = c.size() / 2;
        // with an odd count the middle draw is dropped
        out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
    }
    return out;
}

inline double inv_normal_cdf(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

/// Pooled ranks (ties averaged) mapped through the normal quantile function.
inline Chains rank_normalise(const Chains& chains)
{
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (std::size_t i = 0; i < chains[c].size(); ++i)
            all.emplace_back(chains[c][i], c * chains[0].size() + i);
    std::sort(all.begin(), all.end());
    const auto S = static_cast<double>(all.size());
    std::vector<double> z(all.size());
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1].first == all[i].first)
            ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        const double v = inv_normal_cdf((rank - 0.375) / (S + 0.25));
        for (std::size_t k = i; k <= j; ++k)
            z[all[k].second] = v;
        i = j + 1;
    }
    Chains out(chains.size(), std::vector<double>(chains[0].size()));
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (std::size_t i = 0; i < chains[c].size(); ++i)
            out[c][i] = z[c * chains[0].size() + i];
    return out;
}

inline Chains fold(const Chains& chains)
{
    std::vector<double> all;
    for (const auto& c : chains)
        all.insert(all.end(), c.begin(), c.end());
    const std::size_t mid = all.size() / 2;
    std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(mid), all.end());
    double median = all[mid];
    if (all.size() % 2 == 0) {
        const double lower = *std::max_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + lower);
    }
    Chains out = chains;
    for (auto& c : out)
        for (double& v : c)
            v = std::abs(v - median);
    return out;
}

/// Classic potential scale reduction of (already split) chains.
inline double basic_rhat(const Chains& chains)
{
    const auto n = static_cast<double>(chains[0].size());
    std::vector<double> means, vars;
    for (const auto& c : chains) {
        means.push_back(mean(c));
        vars.push_back(sample_variance(c));
    }
    const double W = mean(vars);
    const double B = n * sample_variance(means);
    if (!(W > 0.0))
        throw InvalidArgument("chains have zero variance");
    const double var_plus = (n - 1.0) / n * W + B / n;
    return std::sqrt(var_plus / W);
}

/// Effective sample size of (already split) chains.
inline double basic_ess(const Chains& chains)
{
    const std::size_t m = chains.size();
    const std::size_t n = chains[0].size();
    std::vector<std::vector<double>> acov;
    std::vector<double> chain_mean, chain_var;
    for (const auto& c : chains) {
        acov.push_back(autocovariance(c));
        chain_mean.push_back(mean(c));
        chain_var.push_back(acov.back()[0] * static_cast<double>(n) / (static_cast<double>(n) - 1.0));
    }
    const double mean_var = mean(chain_var);
    if (!(mean_var > 0.0))
        throw InvalidArgument("chains have zero variance");
    double var_plus = mean_var * (static_cast<double>(n) - 1.0) / static_cast<double>(n);
    if (m > 1)
        var_plus += sample_variance(chain_mean);

    auto mean_acov = [&](std::size_t lag) {
        double s = 0.0;
        for (const auto& a : acov)
            s += a[lag];
        return s / static_cast<double>(m);
    };
    std::vector<double> rho(n + 2, 0.0);
    rho[0] = 1.0;
    double rho_even = 1.0;
    double rho_odd = n > 1 ? 1.0 - (mean_var - mean_acov(1)) / var_plus : 0.0;
    rho[1] = rho_odd;
    std::size_t s = 1;
    while (s + 4 < n && rho_even + rho_odd > 0.0) {
        rho_even = 1.0 - (mean_var - mean_acov(s + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - mean_acov(s + 2)) / var_plus;
        if (rho_even + rho_odd >= 0.0) {
            rho[s + 1] = rho_even;
            rho[s + 2] = rho_odd;
        }
        s += 2;
    }
    const std::size_t max_s = s;
    if (rho[max_s] > 0.0)
        rho[max_s + 1] = rho[max_s];
    // initial monotone sequence
    for (std::size_t t = 1; t + 3 <= max_s; t += 2) {
        if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
            rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
            rho[t + 2] = rho[t + 1];
        }
    }
    const double total = static_cast<double>(m * n);
    double tau = -1.0 + 2.0 * std::accumulate(rho.begin(), rho.begin() + static_cast<std::ptrdiff_t>(max_s + 1), 0.0) +
                 rho[max_s + 1];
    tau = std::max(tau, 1.0 / std::log10(total));
    return total / tau;
}

} // namespace detail

struct ConvergenceStats {
    double rhat = 0.0;     // max of bulk and folded rank-normalised split R-hat
    double ess_bulk = 0.0; // rank-normalised split-chain ESS
    double ess_mean = 0.0; // split-chain ESS of the raw draws (for the MCSE of the mean)
};

/// Rank-normalised split R-hat and ESS of one scalar quantity.
inline ConvergenceStats rhat_ess(const Chains& chains)
{
    detail::check_chains(chains, 2);
    const auto split = detail::split_chains(chains);
    {
        std::vector<double> all;
        for (const auto& c : chains)
            all.insert(all.end(), c.begin(), c.end());
        const auto [lo, hi] = std::minmax_element(all.begin(), all.end());
        if (*lo == *hi)
            throw InvalidArgument("constant draws: R-hat and ESS are undefined");
    }
    ConvergenceStats out;
    const auto z = detail::rank_normalise(split);
    const double bulk = detail::basic_rhat(z);
    const double folded = detail::basic_rhat(detail::rank_normalise(detail::fold(split)));
    out.rhat = std::max(bulk, folded);
    out.ess_bulk = detail::basic_ess(z);
    out.ess_mean = detail::basic_ess(split);
    return out;
}

/// Monte Carlo standard error of the posterior mean.
inline double mcse_mean(const Chains& chains)
{
    const auto stats = rhat_ess(chains);
    std::vector<double> all;
    for (const auto& c : chains)
        all.insert(all.end(), c.begin(), c.end());
    return std::sqrt(detail::sample_variance(all) / stats.ess_mean);
}

} // namespace frfhb
