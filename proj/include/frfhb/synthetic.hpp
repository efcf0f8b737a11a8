#pragma once

// Synthetic stand-ins for measured FRF populations: noise-free truth curves on
// a frequency band plus noisy, decimated training sets.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "frfhb/data.hpp"
#include "frfhb/errors.hpp"
#include "frfhb/modal.hpp"
#include "frfhb/model.hpp"
#include "frfhb/random.hpp"
#include "frfhb/signal.hpp"

namespace frfhb {

struct SyntheticDomain {
    std::string name;
    std::vector<Mode> modes; // rad/s
    std::optional<double> temperature_c;
    std::size_t train_points = 0; // 0: test-only domain
};

struct SyntheticConfig {
    double band_lo_hz = 24.0;
    double band_hi_hz = 61.0;
    double step_hz = 4.88e-2;
    /// Training noise standard deviation as a fraction of the largest
    /// |real part| over all training domains.
    double noise_fraction = 0.05;
    std::vector<SyntheticDomain> domains;
    /// Generating law, when the domains are temperature states of one structure.
    std::optional<TemperatureLaw> law;
    double law_residue = 0.0;

    void validate() const
    {
        if (!(band_lo_hz >= 0.0 && band_lo_hz < band_hi_hz))
            throw ConfigError("band lower limit must lie below the upper limit");
        if (!(step_hz > 0.0))
            throw ConfigError("frequency step must be positive");
        if (!(noise_fraction >= 0.0))
            throw ConfigError("noise fraction must be non-negative");
        if (domains.empty())
            throw ConfigError("synthetic configuration has no domains");
        bool any_train = false;
        for (const auto& d : domains) {
            if (d.modes.empty())
                throw ConfigError("domain '" + d.name + "' has no modes");
            any_train = any_train || d.train_points > 0;
        }
        if (!any_train)
            throw ConfigError("no domain has training points");
    }

    [[nodiscard]] FrequencyGrid grid() const
    {
        return FrequencyGrid::linspace_step(band_lo_hz, band_hi_hz, step_hz, FrequencyUnit::hz);
    }
};

struct SyntheticDataset {
    FrfDataset truth; // every domain, full grid, noise-free
    FrfDataset train; // training domains only, decimated and noisy
    double noise_std = 0.0;
};

/// Modes of each temperature state implied by `law` and a shared residue.
inline std::vector<SyntheticDomain> temperature_domains(const TemperatureLaw& law, double residue,
                                                        const std::vector<double>& temperatures,
                                                        const std::vector<double>& train_temperatures,
                                                        std::size_t train_points)
{
    std::vector<SyntheticDomain> out;
    for (double t : temperatures) {
        SyntheticDomain d;
        d.name = "T" + std::to_string(static_cast<long long>(std::lround(t)));
        d.temperature_c = t;
        d.modes = {Mode{law.natural_frequency(t), law.damping_ratio(t), residue}};
        validate_mode(d.modes[0], 0);
        for (double tt : train_temperatures)
            if (tt == t)
                d.train_points = train_points;
        out.push_back(std::move(d));
    }
    return out;
}

inline SyntheticDataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed)
{
    config.validate();
    const auto grid = config.grid();
    const auto omega = grid.radians();
    SyntheticDataset out;
    for (const auto& d : config.domains) {
        const ModalParameterSet params(d.modes);
        const auto re = frf_real(params, grid);
        FrfDomain dom{d.name, {}, d.temperature_c};
        dom.points.reserve(re.size());
        for (std::size_t i = 0; i < re.size(); ++i)
            dom.points.push_back({omega[i], re[i]});
        out.truth.domains.push_back(std::move(dom));
    }

    double peak = 0.0;
    for (std::size_t k = 0; k < config.domains.size(); ++k)
        if (config.domains[k].train_points > 0)
            peak = std::max(peak, peak_abs_value(out.truth.domains[k].points));
    out.noise_std = config.noise_fraction * peak;

    for (std::size_t k = 0; k < config.domains.size(); ++k) {
        const auto& d = config.domains[k];
        if (d.train_points == 0)
            continue;
        const auto& truth = out.truth.domains[k];
        if (d.train_points > truth.points.size())
            throw ConfigError("domain '" + d.name + "' asks for more training points than the grid holds");
        const std::uint64_t ks = splitmix64(seed + 0x100 + k);
        auto kept = decimate_spectral_lines(truth.points, d.train_points, ks);
        auto noisy = add_noise_with_std(kept, out.noise_std, splitmix64(ks));
        out.train.domains.push_back({truth.name, std::move(noisy), truth.temperature_c});
    }
    return out;
}

/// Four two-mode "blades" with frequencies offset around common means and
/// training counts {100, 100, 7, 20}.
inline SyntheticConfig case1_benchmark()
{
    SyntheticConfig c;
    c.band_lo_hz = 24.0;
    c.band_hi_hz = 61.0;
    c.step_hz = 4.88e-2;
    c.noise_fraction = 0.05;
    const double w1 = 190.0, w2 = 335.0;
    const double offsets[4][2] = {{0.015, 0.012}, {-0.012, -0.016}, {0.004, -0.005}, {-0.006, 0.003}};
    const double zetas[4][2] = {{0.0060, 0.0055}, {0.0058, 0.0062}, {0.0063, 0.0057}, {0.0056, 0.0061}};
    const std::size_t counts[4] = {100, 100, 7, 20};
    for (std::size_t k = 0; k < 4; ++k) {
        SyntheticDomain d;
        d.name = "blade" + std::to_string(k + 1);
        d.modes = {Mode{w1 * (1.0 + offsets[k][0]), zetas[k][0], -0.004},
                   Mode{w2 * (1.0 + offsets[k][1]), zetas[k][1], -0.004}};
        d.train_points = counts[k];
        c.domains.push_back(std::move(d));
    }
    return c;
}

/// One single-mode structure whose natural frequency is quadratic and damping
/// linear in temperature, trained at {-10, -5, 10, 25} C and tested from -20
/// to 30 C in 5 C steps.
inline SyntheticConfig case2_benchmark()
{
    SyntheticConfig c;
    c.band_lo_hz = 135.0;
    c.band_hi_hz = 155.0;
    c.step_hz = 4.88e-2;
    c.noise_fraction = 0.05;
    TemperatureLaw law;
    law.mu_omega = 910.0;
    law.a = {-0.5, 0.007};
    law.mu_zeta = 0.01;
    law.b = {-8e-5};
    c.law = law;
    c.law_residue = -0.008;
    std::vector<double> temps;
    for (int t = -20; t <= 30; t += 5)
        temps.push_back(t);
    c.domains = temperature_domains(law, c.law_residue, temps, {-10.0, -5.0, 10.0, 25.0}, 100);
    return c;
}

} // namespace frfhb
