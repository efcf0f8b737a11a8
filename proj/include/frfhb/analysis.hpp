#pragma once

// Posterior post-processing: parameter summaries, kernel density estimates,
// population-level marginals, posterior-predictive FRF bands, temperature
// extrapolation and NMSE scoring.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "frfhb/diagnostics.hpp"
#include "frfhb/errors.hpp"
#include "frfhb/modal.hpp"
#include "frfhb/model.hpp"
#include "frfhb/nuts.hpp"
#include "frfhb/random.hpp"
#include "frfhb/transforms.hpp"

namespace frfhb {

/// Post-warm-up draws mapped to constrained space, chain by chain.
class PosteriorDraws {
public:
    PosteriorDraws() = default;

    PosteriorDraws(const Trace& trace, const Layout& layout) : dimension_(trace.dimension)
    {
        if (trace.dimension != layout.size())
            throw InvalidArgument("trace dimension " + std::to_string(trace.dimension) +
                                  " does not match the model layout (" + std::to_string(layout.size()) + ")");
        if (trace.total_draws() == 0)
            throw InvalidArgument("trace has no draws");
        for (const auto& c : trace.chains) {
            std::vector<double> x(c.size() * dimension_);
            for (std::size_t d = 0; d < c.size(); ++d)
                constrain_into(layout, c.draw(d), std::span<double>(x).subspan(d * dimension_, dimension_));
            chains_.push_back(std::move(x));
        }
    }

    /// Draws already in constrained space: one row-major block per chain.
    PosteriorDraws(std::size_t dimension, std::vector<std::vector<double>> chains)
        : dimension_(dimension), chains_(std::move(chains))
    {
        if (dimension_ == 0)
            throw InvalidArgument("posterior draws need a positive dimension");
        std::size_t total = 0;
        for (const auto& c : chains_) {
            if (c.size() % dimension_ != 0)
                throw InvalidArgument("chain length is not a multiple of the dimension");
            total += c.size();
        }
        if (total == 0)
            throw InvalidArgument("trace has no draws");
    }

    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    [[nodiscard]] std::size_t chains() const noexcept { return chains_.size(); }
    [[nodiscard]] std::size_t draws_per_chain(std::size_t c) const { return chains_.at(c).size() / dimension_; }

    [[nodiscard]] std::size_t size() const noexcept
    {
        std::size_t n = 0;
        for (const auto& c : chains_)
            n += c.size() / dimension_;
        return n;
    }

    [[nodiscard]] std::span<const double> draw(std::size_t chain, std::size_t d) const
    {
        return std::span<const double>(chains_.at(chain)).subspan(d * dimension_, dimension_);
    }

    /// Calls f(draw) for every draw, chain by chain.
    void for_each(const std::function<void(std::span<const double>)>& f) const
    {
        for (std::size_t c = 0; c < chains_.size(); ++c)
            for (std::size_t d = 0; d < draws_per_chain(c); ++d)
                f(draw(c, d));
    }

    [[nodiscard]] Chains coordinate(std::size_t i) const
    {
        if (i >= dimension_)
            throw InvalidArgument("coordinate index out of range");
        Chains out;
        for (std::size_t c = 0; c < chains_.size(); ++c) {
            std::vector<double> v(draws_per_chain(c));
            for (std::size_t d = 0; d < v.size(); ++d)
                v[d] = chains_[c][d * dimension_ + i];
            out.push_back(std::move(v));
        }
        return out;
    }

    [[nodiscard]] std::vector<double> pooled(std::size_t i) const
    {
        std::vector<double> out;
        for (const auto& c : coordinate(i))
            out.insert(out.end(), c.begin(), c.end());
        return out;
    }

    [[nodiscard]] double mean(std::size_t i) const { return detail::mean(pooled(i)); }

private:
    std::size_t dimension_ = 0;
    std::vector<std::vector<double>> chains_;
};

/// Linearly interpolated sample quantile (the usual "type 7" definition).
inline double quantile(std::vector<double> x, double p)
{
    if (x.empty())
        throw InvalidArgument("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0))
        throw InvalidArgument("quantile probability must lie in [0, 1]");
    std::sort(x.begin(), x.end());
    const double h = p * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double q05 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
    double rhat = 1.0;
    double ess_bulk = 0.0;
    double mcse_mean = 0.0;
};

struct PosteriorSummary {
    std::vector<ParameterSummary> parameters;
    std::size_t chains = 0;
    std::size_t draws = 0;
    std::size_t divergences = 0;

    [[nodiscard]] double max_rhat() const noexcept
    {
        double r = 0.0;
        for (const auto& p : parameters)
            r = std::max(r, p.rhat);
        return r;
    }

    [[nodiscard]] double divergence_rate() const noexcept
    {
        return draws == 0 ? 0.0 : static_cast<double>(divergences) / static_cast<double>(draws);
    }

    [[nodiscard]] const ParameterSummary& at(const std::string& name) const
    {
        for (const auto& p : parameters)
            if (p.name == name)
                return p;
        throw InvalidArgument("no parameter named '" + name + "' in the summary");
    }
};

/// Per-parameter expectation, spread, quantiles and convergence statistics.
/// A parameter whose draws are all identical gets R-hat 1 and ESS 0.
inline PosteriorSummary summarise(const PosteriorDraws& draws, const Layout& layout, std::size_t divergences = 0)
{
    if (draws.dimension() != layout.size())
        throw InvalidArgument("posterior draws do not match the model layout");
    PosteriorSummary s;
    s.chains = draws.chains();
    s.draws = draws.size();
    s.divergences = divergences;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto chains = draws.coordinate(i);
        std::vector<double> all;
        for (const auto& c : chains)
            all.insert(all.end(), c.begin(), c.end());
        ParameterSummary p;
        p.name = layout[i].name;
        p.mean = detail::mean(all);
        p.sd = all.size() > 1 ? std::sqrt(detail::sample_variance(all)) : 0.0;
        p.q05 = quantile(all, 0.05);
        p.q50 = quantile(all, 0.50);
        p.q95 = quantile(all, 0.95);
        const bool constant = std::all_of(all.begin(), all.end(), [&](double v) { return v == all.front(); });
        if (!constant && chains.size() >= 2 && chains[0].size() >= 4) {
            const auto st = rhat_ess(chains);
            p.rhat = st.rhat;
            p.ess_bulk = st.ess_bulk;
            p.mcse_mean = std::sqrt(detail::sample_variance(all) / st.ess_mean);
        }
        s.parameters.push_back(std::move(p));
    }
    return s;
}

inline PosteriorSummary summarise(const Trace& trace, const Layout& layout)
{
    return summarise(PosteriorDraws(trace, layout), layout, trace.divergences());
}

struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;

    /// Trapezoidal integral of the density over the grid.
    [[nodiscard]] double integral() const
    {
        double s = 0.0;
        for (std::size_t i = 1; i < grid.size(); ++i)
            s += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
        return s;
    }

    /// Density at x by linear interpolation; zero outside the grid.
    [[nodiscard]] double at(double x) const
    {
        if (grid.empty() || x < grid.front() || x > grid.back())
            return 0.0;
        const auto it = std::upper_bound(grid.begin(), grid.end(), x);
        if (it == grid.end())
            return density.back();
        const auto i = static_cast<std::size_t>(it - grid.begin());
        const double t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
        return density[i - 1] + t * (density[i] - density[i - 1]);
    }

    [[nodiscard]] double mode() const
    {
        const auto it = std::max_element(density.begin(), density.end());
        return grid[static_cast<std::size_t>(it - density.begin())];
    }
};

/// Silverman's rule of thumb 0.9 min(sd, IQR / 1.34) n^(-1/5); falls back to
/// the standard deviation alone when the interquartile range is zero.
inline double silverman_bandwidth(std::span<const double> samples)
{
    std::vector<double> x(samples.begin(), samples.end());
    const double sd = std::sqrt(detail::sample_variance(x));
    const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

/// Gaussian-kernel density estimate on an even grid spanning the samples
/// plus three bandwidths either side. The mass beyond the grid is cut off,
/// so the curve is rescaled to integrate to one over the grid.
inline KdeCurve kde(std::span<const double> samples, std::size_t grid_points = 512)
{
    if (samples.size() < 2)
        throw InvalidArgument("kde needs at least two samples");
    if (grid_points < 2)
        throw InvalidArgument("kde needs at least two grid points");
    for (double v : samples)
        if (!std::isfinite(v))
            throw InvalidArgument("kde samples must be finite");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    if (*lo_it == *hi_it)
        throw InvalidArgument("kde needs at least two distinct samples");

    KdeCurve k;
    k.bandwidth = silverman_bandwidth(samples);
    const double lo = *lo_it - 3.0 * k.bandwidth;
    const double hi = *hi_it + 3.0 * k.bandwidth;
    k.grid.resize(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i)
        k.grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1);

    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = k.bandwidth;
    const double norm = 1.0 / (static_cast<double>(sorted.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    k.density.assign(grid_points, 0.0);
    for (std::size_t i = 0; i < grid_points; ++i) {
        // kernels further than 8 bandwidths contribute below 1e-14 of their peak
        const auto first = std::lower_bound(sorted.begin(), sorted.end(), k.grid[i] - 8.0 * h);
        const auto last = std::upper_bound(sorted.begin(), sorted.end(), k.grid[i] + 8.0 * h);
        double s = 0.0;
        for (auto it = first; it != last; ++it) {
            const double z = (k.grid[i] - *it) / h;
            s += std::exp(-0.5 * z * z);
        }
        k.density[i] = s * norm;
    }
    const double mass = k.integral();
    for (double& d : k.density)
        d /= mass;
    return k;
}

enum class MarginalFamily { normal, beta };

/// One posterior draw of the two parameters of a population distribution:
/// (mean, variance) for the normal family, (alpha, beta) for the beta family.
struct HyperDraw {
    double first = 0.0;
    double second = 0.0;
};

/// Draws one value from the population distribution of every hyper-draw.
inline std::vector<double> sample_population(std::span<const HyperDraw> hyper, MarginalFamily family, Rng& rng)
{
    std::vector<double> out;
    out.reserve(hyper.size());
    for (const auto& h : hyper) {
        if (family == MarginalFamily::normal) {
            if (!(h.second >= 0.0))
                throw InvalidArgument("population variance must be non-negative");
            out.push_back(h.first + std::sqrt(h.second) * standard_normal(rng));
        } else {
            if (!(h.first > 0.0 && h.second > 0.0))
                throw InvalidArgument("beta shape parameters must be positive");
            std::gamma_distribution<double> ga(h.first, 1.0);
            std::gamma_distribution<double> gb(h.second, 1.0);
            const double x = ga(rng);
            const double y = gb(rng);
            out.push_back(x / (x + y));
        }
    }
    return out;
}

/// Two-stage population marginal: one value per hyper-draw, then a KDE.
inline KdeCurve population_marginal(std::span<const HyperDraw> hyper, MarginalFamily family, Rng& rng,
                                    std::size_t grid_points = 512)
{
    if (hyper.empty())
        throw InvalidArgument("population marginal needs hyper-parameter draws");
    const auto values = sample_population(hyper, family, rng);
    return kde(values, grid_points);
}

/// Population marginal of a modal quantity of a fitted multi-structure model.
/// `role` is "omega" (normal on mu_omega, sigma2_omega), "zeta" (beta on
/// alpha_zeta, beta_zeta), "A" (normal on mu_A, sigma2_A) or "sigma2_H"
/// (normal on mu_sigma2, sigma2_sigma2); `mode` is zero-based and ignored for
/// "sigma2_H"; `group` selects the hyper group of a no-pooling fit.
inline KdeCurve population_marginal(const PosteriorDraws& draws, const Layout& layout, const std::string& role,
                                    std::size_t mode, Rng& rng, int group = -1, std::size_t grid_points = 512)
{
    std::string first_role, second_role;
    MarginalFamily family = MarginalFamily::normal;
    if (role == "omega") {
        first_role = "mu_omega";
        second_role = "sigma2_omega";
    } else if (role == "zeta") {
        first_role = "alpha_zeta";
        second_role = "beta_zeta";
        family = MarginalFamily::beta;
    } else if (role == "A") {
        first_role = "mu_A";
        second_role = "sigma2_A";
    } else if (role == "sigma2_H") {
        first_role = "mu_sigma2";
        second_role = "sigma2_sigma2";
    } else {
        throw InvalidArgument("no population distribution for '" + role + "'");
    }
    const bool per_mode = role != "sigma2_H";
    const auto find = [&](const std::string& r) -> std::size_t {
        for (std::size_t i = 0; i < layout.size(); ++i) {
            const auto& p = layout[i];
            if (p.role == r && p.domain == group && (!per_mode || p.mode == static_cast<int>(mode)))
                return i;
        }
        throw InvalidArgument("layout has no '" + r + "' node for the requested mode and group");
    };
    const std::size_t i1 = find(first_role);
    const std::size_t i2 = find(second_role);
    std::vector<HyperDraw> hyper;
    hyper.reserve(draws.size());
    draws.for_each([&](std::span<const double> x) { hyper.push_back({x[i1], x[i2]}); });
    return population_marginal(hyper, family, rng, grid_points);
}

/// How the curve spread and the noise level are combined into the band.
enum class BandComposition {
    std_plus_noise,    // half-width 3 (sd_curve + sqrt(E[sigma2_H]))
    variance_additive, // half-width 3 sqrt(sd_curve^2 + E[sigma2_H])
};

struct PredictiveBand {
    FrequencyGrid grid;
    std::vector<double> mean;
    std::vector<double> sd;    // pointwise spread of the draw curves (divisor: draw count)
    std::vector<double> lower; // mean - half-width
    std::vector<double> upper; // mean + half-width
    double noise_variance = 0.0; // posterior expectation of sigma2_H

    /// Fraction of `truth` (on the same grid) inside [lower, upper].
    [[nodiscard]] double coverage(std::span<const double> truth) const
    {
        if (truth.size() != mean.size())
            throw InvalidArgument("coverage: truth has " + std::to_string(truth.size()) + " values, band has " +
                                  std::to_string(mean.size()));
        std::size_t inside = 0;
        for (std::size_t i = 0; i < truth.size(); ++i)
            inside += (truth[i] >= lower[i] && truth[i] <= upper[i]) ? 1 : 0;
        return static_cast<double>(inside) / static_cast<double>(truth.size());
    }
};

namespace detail {

/// Band from per-draw (modes, noise variance) pairs supplied by `at`.
inline PredictiveBand predictive_band(const PosteriorDraws& draws, const FrequencyGrid& grid,
                                      const std::function<std::pair<std::vector<Mode>, double>(std::span<const double>)>& at,
                                      BandComposition composition)
{
    if (draws.size() == 0)
        throw InvalidArgument("posterior-predictive band needs at least one draw");
    const auto w = grid.radians();
    const std::size_t n = w.size();
    std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
    double noise_sum = 0.0;
    std::vector<double> curve(n);
    std::vector<double> first;
    std::size_t count = 0;
    draws.for_each([&](std::span<const double> x) {
        const auto [modes, noise] = at(x);
        for (std::size_t i = 0; i < n; ++i)
            curve[i] = frf_real_at(modes, w[i]);
        // accumulate around the first curve to keep the variance well conditioned
        if (first.empty())
            first = curve;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = curve[i] - first[i];
            sum[i] += d;
            sum_sq[i] += d * d;
        }
        noise_sum += noise;
        ++count;
    });
    const auto c = static_cast<double>(count);
    PredictiveBand band;
    band.grid = grid;
    band.noise_variance = noise_sum / c;
    const double noise_sd = std::sqrt(std::max(band.noise_variance, 0.0));
    band.mean.resize(n);
    band.sd.resize(n);
    band.lower.resize(n);
    band.upper.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = sum[i] / c;
        band.mean[i] = first[i] + m;
        band.sd[i] = std::sqrt(std::max(0.0, sum_sq[i] / c - m * m));
        const double half = composition == BandComposition::std_plus_noise
                                ? 3.0 * (band.sd[i] + noise_sd)
                                : 3.0 * std::sqrt(band.sd[i] * band.sd[i] + band.noise_variance);
        band.lower[i] = band.mean[i] - half;
        band.upper[i] = band.mean[i] + half;
    }
    return band;
}

} // namespace detail

/// Posterior-predictive real FRF of domain `k`: mean of the draw curves and a
/// 3-sigma band combining their pointwise spread with the noise level.
inline PredictiveBand posterior_predictive_frf(const PosteriorDraws& draws, const HierarchicalModel& model,
                                               const FrequencyGrid& grid, std::size_t k,
                                               BandComposition composition = BandComposition::std_plus_noise)
{
    if (draws.dimension() != model.dimension())
        throw InvalidArgument("posterior draws do not match the model layout");
    if (k >= model.domain_count())
        throw InvalidArgument("domain index " + std::to_string(k) + " out of range");
    return detail::predictive_band(
        draws, grid,
        [&](std::span<const double> x) { return std::make_pair(model.domain_modes(x, k), model.noise_variance(x, k)); },
        composition);
}

/// Posterior-predictive real FRF of a temperature model at any temperature.
inline PredictiveBand posterior_predictive_frf_at(const PosteriorDraws& draws, const TemperatureModel& model,
                                                  const FrequencyGrid& grid, double temperature_c,
                                                  BandComposition composition = BandComposition::std_plus_noise)
{
    if (draws.dimension() != model.dimension())
        throw InvalidArgument("posterior draws do not match the model layout");
    return detail::predictive_band(
        draws, grid,
        [&](std::span<const double> x) {
            return std::make_pair(model.modes_at(x, temperature_c), model.noise_variance(x, 0));
        },
        composition);
}

struct TemperaturePrediction {
    double temperature_c = 0.0;
    Mode mode;
};

/// Point predictions from fixed law coefficients (e.g. posterior expectations).
inline std::vector<TemperaturePrediction> extrapolate_temperature(const TemperatureLaw& law, double residue,
                                                                  std::span<const double> temperatures)
{
    std::vector<TemperaturePrediction> out;
    out.reserve(temperatures.size());
    for (double t : temperatures)
        out.push_back({t, Mode{law.natural_frequency(t), law.damping_ratio(t), residue}});
    return out;
}

/// Law built from the posterior expectation of every coefficient.
inline TemperatureLaw expected_law(const PosteriorDraws& draws, const TemperatureModel& model)
{
    if (draws.dimension() != model.dimension())
        throw InvalidArgument("posterior draws do not match the model layout");
    std::vector<double> mean(model.dimension());
    for (std::size_t i = 0; i < mean.size(); ++i)
        mean[i] = draws.mean(i);
    return model.law(mean);
}

/// Point predictions from the posterior expectations of the law coefficients.
inline std::vector<TemperaturePrediction> extrapolate_temperature(const PosteriorDraws& draws,
                                                                  const TemperatureModel& model,
                                                                  std::span<const double> temperatures)
{
    const auto law = expected_law(draws, model);
    const std::size_t ia = model.layout().index_of("A");
    return extrapolate_temperature(law, draws.mean(ia), temperatures);
}

struct IntervalEstimate {
    double mean = 0.0;
    double sd = 0.0;
    double lower = 0.0; // mean - 3 sd
    double upper = 0.0; // mean + 3 sd
};

struct TemperatureBand {
    double temperature_c = 0.0;
    IntervalEstimate natural_frequency;
    IntervalEstimate damping_ratio;
};

/// Evaluates the laws for every posterior draw and reports mean +/- 3 sd.
inline std::vector<TemperatureBand> extrapolate_temperature_band(const PosteriorDraws& draws,
                                                                 const TemperatureModel& model,
                                                                 std::span<const double> temperatures)
{
    if (draws.dimension() != model.dimension())
        throw InvalidArgument("posterior draws do not match the model layout");
    const auto interval = [](const std::vector<double>& v) {
        IntervalEstimate e;
        e.mean = detail::mean(v);
        e.sd = v.size() > 1 ? std::sqrt(detail::sample_variance(v)) : 0.0;
        e.lower = e.mean - 3.0 * e.sd;
        e.upper = e.mean + 3.0 * e.sd;
        return e;
    };
    std::vector<TemperatureBand> out;
    for (double t : temperatures) {
        std::vector<double> wn, zeta;
        draws.for_each([&](std::span<const double> x) {
            const auto law = model.law(x);
            wn.push_back(law.natural_frequency(t));
            zeta.push_back(law.damping_ratio(t));
        });
        out.push_back({t, interval(wn), interval(zeta)});
    }
    return out;
}

/// Normalised mean-squared error in percent: 100 / (N var(y)) sum (y - y*)^2,
/// with the population variance (divisor N) of the test data.
inline double nmse(std::span<const double> test, std::span<const double> prediction)
{
    if (test.empty())
        throw InvalidArgument("nmse needs at least one test point");
    if (test.size() != prediction.size())
        throw InvalidArgument("nmse: test and prediction lengths differ (" + std::to_string(test.size()) + " vs " +
                              std::to_string(prediction.size()) + ")");
    const auto n = static_cast<double>(test.size());
    const double m = detail::mean(test);
    double var = 0.0, sse = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        var += (test[i] - m) * (test[i] - m);
        const double r = test[i] - prediction[i];
        sse += r * r;
    }
    var /= n;
    if (!(var > 0.0))
        throw InvalidArgument("nmse is undefined for constant test data");
    return 100.0 / (n * var) * sse;
}

} // namespace frfhb
