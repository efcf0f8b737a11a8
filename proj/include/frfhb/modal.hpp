#pragma once

// Closed-form modal accelerance FRFs for proportionally damped linear
// structures, with analytic partial derivatives of the real part.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "frfhb/errors.hpp"

namespace frfhb {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double hz_to_rad(double hz) noexcept { return hz * two_pi; }
inline constexpr double rad_to_hz(double rad) noexcept { return rad / two_pi; }

/// One vibration mode. `natural_frequency` is in rad/s; `residue` is the
/// product of the mass-normalised mode shapes at the drive and response points.
struct Mode {
    double natural_frequency = 0.0;
    double damping_ratio = 0.0;
    double residue = 0.0;

    friend bool operator==(const Mode&, const Mode&) = default;
};

inline void validate_mode(const Mode& mode, std::size_t index)
{
    if (!(mode.natural_frequency > 0.0) || !std::isfinite(mode.natural_frequency))
        throw InvalidArgument("mode " + std::to_string(index) + ": natural frequency must be positive and finite");
    if (!(mode.damping_ratio > 0.0 && mode.damping_ratio < 1.0))
        throw InvalidArgument("mode " + std::to_string(index) + ": damping ratio must lie in (0, 1)");
    if (!std::isfinite(mode.residue))
        throw InvalidArgument("mode " + std::to_string(index) + ": residue must be finite");
}

/// Modal parameters of one domain, ordered by increasing natural frequency.
class ModalParameterSet {
public:
    ModalParameterSet() = default;

    explicit ModalParameterSet(std::vector<Mode> modes, int domain_index = 0)
        : modes_(std::move(modes)), domain_index_(domain_index)
    {
        if (modes_.empty())
            throw InvalidArgument("modal parameter set needs at least one mode");
        for (std::size_t m = 0; m < modes_.size(); ++m) {
            validate_mode(modes_[m], m);
            if (m > 0 && !(modes_[m].natural_frequency > modes_[m - 1].natural_frequency))
                throw InvalidArgument("natural frequencies must be strictly increasing (mode " +
                                      std::to_string(m) + ")");
        }
    }

    [[nodiscard]] std::span<const Mode> modes() const noexcept { return modes_; }
    [[nodiscard]] std::size_t size() const noexcept { return modes_.size(); }
    [[nodiscard]] const Mode& operator[](std::size_t m) const { return modes_[m]; }
    [[nodiscard]] int domain_index() const noexcept { return domain_index_; }

private:
    std::vector<Mode> modes_;
    int domain_index_ = 0;
};

enum class FrequencyUnit { rad_per_s, hz };

/// Strictly increasing, non-negative frequency values tagged with their unit.
class FrequencyGrid {
public:
    FrequencyGrid() = default;

    FrequencyGrid(std::vector<double> values, FrequencyUnit unit) : values_(std::move(values)), unit_(unit)
    {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
                throw InvalidArgument("frequency grid values must be finite and non-negative");
            if (i > 0 && !(values_[i] > values_[i - 1]))
                throw InvalidArgument("frequency grid must be strictly increasing");
        }
    }

    static FrequencyGrid rad_per_s(std::vector<double> values) { return {std::move(values), FrequencyUnit::rad_per_s}; }
    static FrequencyGrid hz(std::vector<double> values) { return {std::move(values), FrequencyUnit::hz}; }

    /// Evenly spaced grid from `lo` to at most `hi` with spacing `step`, all in `unit`.
    static FrequencyGrid linspace_step(double lo, double hi, double step, FrequencyUnit unit)
    {
        if (!(step > 0.0) || !(hi >= lo))
            throw InvalidArgument("invalid grid range");
        std::vector<double> v;
        const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
        v.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            v.push_back(lo + step * static_cast<double>(i));
        return {std::move(v), unit};
    }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] FrequencyUnit unit() const noexcept { return unit_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] FrequencyGrid in(FrequencyUnit target) const
    {
        if (target == unit_)
            return *this;
        std::vector<double> v(values_);
        for (double& x : v)
            x = (target == FrequencyUnit::rad_per_s) ? hz_to_rad(x) : rad_to_hz(x);
        FrequencyGrid out;
        out.values_ = std::move(v);
        out.unit_ = target;
        return out;
    }

    [[nodiscard]] std::vector<double> radians() const
    {
        auto g = in(FrequencyUnit::rad_per_s);
        return std::move(g.values_);
    }

private:
    std::vector<double> values_;
    FrequencyUnit unit_ = FrequencyUnit::rad_per_s;
};

namespace detail {

// a = wn^2 - w^2, c = 2 zeta w wn, |d|^2 = a^2 + c^2 (factored form).
struct ModalDenominator {
    double a;
    double c;
    double d2;
};

inline ModalDenominator denominator(double wn, double zeta, double w) noexcept
{
    const double a = (wn - w) * (wn + w);
    const double c = 2.0 * zeta * w * wn;
    return {a, c, a * a + c * c};
}

[[noreturn]] inline void throw_non_finite(std::size_t mode, double w)
{
    throw EvaluationError("non-finite FRF contribution from mode " + std::to_string(mode) + " at omega=" +
                          std::to_string(w) + " rad/s");
}

} // namespace detail

/// Real part of the accelerance at one frequency (rad/s). No validation;
/// callers guarantee finite parameters.
inline double frf_real_at(std::span<const Mode> modes, double w) noexcept
{
    double sum = 0.0;
    for (const Mode& m : modes) {
        const auto d = detail::denominator(m.natural_frequency, m.damping_ratio, w);
        sum += m.residue * d.a / d.d2;
    }
    return -w * w * sum;
}

/// Complex accelerance H(w) = -w^2 sum_m A_m / (wn_m^2 - w^2 + 2i zeta_m w wn_m).
inline std::vector<std::complex<double>> frf_complex(const ModalParameterSet& params, const FrequencyGrid& grid)
{
    const auto w_rad = grid.radians();
    std::vector<std::complex<double>> out(w_rad.size());
    for (std::size_t i = 0; i < w_rad.size(); ++i) {
        const double w = w_rad[i];
        std::complex<double> sum{0.0, 0.0};
        for (std::size_t m = 0; m < params.size(); ++m) {
            const Mode& mode = params[m];
            const std::complex<double> den{(mode.natural_frequency - w) * (mode.natural_frequency + w),
                                           2.0 * mode.damping_ratio * w * mode.natural_frequency};
            const std::complex<double> term = mode.residue / den;
            if (!std::isfinite(term.real()) || !std::isfinite(term.imag()))
                detail::throw_non_finite(m, w);
            sum += term;
        }
        out[i] = -w * w * sum;
    }
    return out;
}

/// Real part of the accelerance, evaluated with the factored denominator.
inline std::vector<double> frf_real(const ModalParameterSet& params, const FrequencyGrid& grid)
{
    const auto w_rad = grid.radians();
    std::vector<double> out(w_rad.size());
    for (std::size_t i = 0; i < w_rad.size(); ++i) {
        const double w = w_rad[i];
        double sum = 0.0;
        for (std::size_t m = 0; m < params.size(); ++m) {
            const Mode& mode = params[m];
            const auto d = detail::denominator(mode.natural_frequency, mode.damping_ratio, w);
            const double term = mode.residue * d.a / d.d2;
            if (!std::isfinite(term))
                detail::throw_non_finite(m, w);
            sum += term;
        }
        out[i] = -w * w * sum;
    }
    return out;
}

/// Imaginary part of the accelerance: -w^2 sum_m A_m (-2 zeta w wn) / |d|^2.
inline std::vector<double> frf_imag(const ModalParameterSet& params, const FrequencyGrid& grid)
{
    const auto w_rad = grid.radians();
    std::vector<double> out(w_rad.size());
    for (std::size_t i = 0; i < w_rad.size(); ++i) {
        const double w = w_rad[i];
        double sum = 0.0;
        for (std::size_t m = 0; m < params.size(); ++m) {
            const Mode& mode = params[m];
            const auto d = detail::denominator(mode.natural_frequency, mode.damping_ratio, w);
            const double term = -mode.residue * d.c / d.d2;
            if (!std::isfinite(term))
                detail::throw_non_finite(m, w);
            sum += term;
        }
        out[i] = -w * w * sum;
    }
    return out;
}

/// Partial derivatives of the real FRF part w.r.t. (wn, zeta, A) of one mode at one frequency.
struct ModePartials {
    double natural_frequency;
    double damping_ratio;
    double residue;
};

inline ModePartials frf_real_partials_at(const Mode& mode, double w) noexcept
{
    const double wn = mode.natural_frequency;
    const double zeta = mode.damping_ratio;
    const auto d = detail::denominator(wn, zeta, w);
    const double w2 = w * w;
    const double inv_d2 = 1.0 / d.d2;
    // f = -w^2 A a / D; dg/da = (c^2 - a^2)/D^2, dg/dc = -2ac/D^2 with g = a/D
    const double dg_da = (d.c * d.c - d.a * d.a) * inv_d2 * inv_d2;
    const double dg_dc = -2.0 * d.a * d.c * inv_d2 * inv_d2;
    const double scale = -w2 * mode.residue;
    return {
        scale * (dg_da * 2.0 * wn + dg_dc * 2.0 * zeta * w),
        scale * (dg_dc * 2.0 * w * wn),
        -w2 * d.a * inv_d2,
    };
}

/// Row-major (points x 3M) Jacobian of the real FRF; columns ordered
/// (wn_0, zeta_0, A_0, wn_1, zeta_1, A_1, ...).
class FrfGradient {
public:
    enum class Field : std::size_t { natural_frequency = 0, damping_ratio = 1, residue = 2 };

    FrfGradient(std::size_t points, std::size_t modes) : points_(points), modes_(modes), values_(points * modes * 3) {}

    [[nodiscard]] std::size_t points() const noexcept { return points_; }
    [[nodiscard]] std::size_t modes() const noexcept { return modes_; }
    [[nodiscard]] std::size_t columns() const noexcept { return modes_ * 3; }

    double& at(std::size_t point, std::size_t mode, Field field)
    {
        return values_[point * columns() + mode * 3 + static_cast<std::size_t>(field)];
    }
    [[nodiscard]] double at(std::size_t point, std::size_t mode, Field field) const
    {
        return values_[point * columns() + mode * 3 + static_cast<std::size_t>(field)];
    }
    [[nodiscard]] std::span<const double> row(std::size_t point) const
    {
        return std::span<const double>(values_).subspan(point * columns(), columns());
    }

private:
    std::size_t points_;
    std::size_t modes_;
    std::vector<double> values_;
};

inline FrfGradient frf_real_gradient(const ModalParameterSet& params, const FrequencyGrid& grid)
{
    const auto w_rad = grid.radians();
    FrfGradient grad(w_rad.size(), params.size());
    using F = FrfGradient::Field;
    for (std::size_t i = 0; i < w_rad.size(); ++i) {
        for (std::size_t m = 0; m < params.size(); ++m) {
            const auto p = frf_real_partials_at(params[m], w_rad[i]);
            if (!std::isfinite(p.natural_frequency) || !std::isfinite(p.damping_ratio) || !std::isfinite(p.residue))
                detail::throw_non_finite(m, w_rad[i]);
            grad.at(i, m, F::natural_frequency) = p.natural_frequency;
            grad.at(i, m, F::damping_ratio) = p.damping_ratio;
            grad.at(i, m, F::residue) = p.residue;
        }
    }
    return grad;
}

} // namespace frfhb
