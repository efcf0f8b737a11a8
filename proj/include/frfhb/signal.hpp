#pragma once

// Time-domain simulation of modal systems and H1 spectral estimation.
//
// FFT convention: forward transform unscaled, X_k = sum_n x_n exp(-2 pi i k n / N).
// Spectra are one-sided densities, G = (2 / (fs * sum w^2)) * mean_blocks(A B*),
// with the DC and Nyquist lines not doubled. H1 is a ratio of two such spectra,
// so it does not depend on this scaling.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/MatrixFunctions>

#include "frfhb/data.hpp"
#include "frfhb/errors.hpp"
#include "frfhb/modal.hpp"
#include "frfhb/random.hpp"

namespace frfhb {

struct TimeSeries {
    std::vector<double> samples;
    double sample_rate = 1.0; // Hz

    TimeSeries() = default;
    TimeSeries(std::vector<double> s, double fs) : samples(std::move(s)), sample_rate(fs) { validate(); }

    void validate() const
    {
        if (samples.size() < 2)
            throw DataError("time series needs at least two samples");
        if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
            throw DataError("sample rate must be positive");
    }

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
};

enum class Window { hann, rectangular };

/// Symmetric Hann window, w[i] = 0.5 (1 - cos(2 pi i / (n - 1))).
inline std::vector<double> hann_window(std::size_t n)
{
    if (n < 2)
        throw InvalidArgument("hann window length must be at least 2");
    std::vector<double> w(n);
    const double denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / denom));
    // exact symmetry and endpoints
    for (std::size_t i = 0; i < n / 2; ++i)
        w[n - 1 - i] = w[i];
    w.front() = 0.0;
    w.back() = 0.0;
    if (n % 2 == 1)
        w[n / 2] = 1.0;
    return w;
}

inline std::vector<double> make_window(Window kind, std::size_t n)
{
    if (kind == Window::hann)
        return hann_window(n);
    return std::vector<double>(n, 1.0);
}

/// One-sided spectrum (lines 0..n/2) of a real sequence, unscaled forward FFT.
inline std::vector<std::complex<double>> rfft(std::span<const double> x)
{
    Eigen::FFT<double> fft;
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out;
    fft.fwd(out, in);
    out.resize(x.size() / 2 + 1);
    return out;
}

struct SpectralRecord {
    FrequencyGrid frequencies; // Hz
    std::vector<std::complex<double>> cross_spectrum; // G_zu: response x conj(force)
    std::vector<double> auto_spectrum;                // G_zz: force auto-spectrum
    std::size_t block_count = 0;
};

struct H1Estimate {
    SpectralRecord spectra;
    std::vector<std::complex<double>> frf;

    [[nodiscard]] const FrequencyGrid& frequencies() const noexcept { return spectra.frequencies; }
};

/// Averaged cross/auto spectra over `block_count` non-overlapping windowed blocks.
inline SpectralRecord averaged_spectra(const TimeSeries& force, const TimeSeries& response, std::size_t block_count,
                                       Window window)
{
    force.validate();
    response.validate();
    if (force.size() != response.size())
        throw DataError("force and response series have different lengths");
    if (force.sample_rate != response.sample_rate)
        throw DataError("force and response series have different sample rates");
    if (block_count < 1)
        throw InvalidArgument("block count must be at least 1");
    const std::size_t block_len = force.size() / block_count;
    if (block_len < 2)
        throw DataError("series too short for the requested block count");

    const auto w = make_window(window, block_len);
    const double sum_w2 = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
    const std::size_t lines = block_len / 2 + 1;

    std::vector<std::complex<double>> gzu(lines);
    std::vector<double> gzz(lines, 0.0);
    std::vector<double> zb(block_len), ub(block_len);
    for (std::size_t b = 0; b < block_count; ++b) {
        const std::size_t off = b * block_len;
        for (std::size_t i = 0; i < block_len; ++i) {
            zb[i] = w[i] * force.samples[off + i];
            ub[i] = w[i] * response.samples[off + i];
        }
        const auto Z = rfft(zb);
        const auto U = rfft(ub);
        for (std::size_t k = 0; k < lines; ++k) {
            gzu[k] += U[k] * std::conj(Z[k]);
            gzz[k] += std::norm(Z[k]);
        }
    }

    const double fs = force.sample_rate;
    const double base = 2.0 / (fs * sum_w2 * static_cast<double>(block_count));
    std::vector<double> freqs(lines);
    for (std::size_t k = 0; k < lines; ++k) {
        const bool edge = (k == 0) || (block_len % 2 == 0 && k == lines - 1);
        const double scale = edge ? 0.5 * base : base;
        gzu[k] *= scale;
        gzz[k] *= scale;
        freqs[k] = fs * static_cast<double>(k) / static_cast<double>(block_len);
    }
    return {FrequencyGrid::hz(std::move(freqs)), std::move(gzu), std::move(gzz), block_count};
}

/// H1 = G_zu / G_zz on the one-sided grid (Hz). Throws DataError if any
/// retained line has a zero force auto-spectrum.
inline H1Estimate h1_estimate(const TimeSeries& force, const TimeSeries& response, std::size_t block_count,
                              Window window = Window::hann)
{
    auto spectra = averaged_spectra(force, response, block_count, window);
    std::vector<std::complex<double>> h(spectra.auto_spectrum.size());
    const auto f = spectra.frequencies.values();
    for (std::size_t k = 0; k < h.size(); ++k) {
        if (!(spectra.auto_spectrum[k] > 0.0))
            throw DataError("force auto-spectrum is zero at line " + std::to_string(k) + " (" +
                            std::to_string(f[k]) + " Hz)");
        h[k] = spectra.cross_spectrum[k] / spectra.auto_spectrum[k];
    }
    return {std::move(spectra), std::move(h)};
}

namespace detail {

// Ramp-invariant (first-order hold) discretisation of
//   p'' + 2 zeta wn p' + wn^2 p = u,  y = p'' = u - 2 zeta wn p' - wn^2 p,
// exact when the excitation is linear between samples.
struct ModalFilter {
    Eigen::Matrix2d phi;
    Eigen::Vector2d gamma_minus_lambda;
    Eigen::Vector2d lambda;
    Eigen::RowVector2d c;
};

inline ModalFilter modal_filter(double wn, double zeta, double dt)
{
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    m(0, 1) = 1.0;
    m(1, 0) = -wn * wn;
    m(1, 1) = -2.0 * zeta * wn;
    m(1, 2) = 1.0;
    m(2, 3) = 1.0 / dt;
    const Eigen::Matrix4d e = (m * dt).exp();
    ModalFilter f;
    f.phi = e.block<2, 2>(0, 0);
    const Eigen::Vector2d gamma = e.block<2, 1>(0, 2);
    f.lambda = e.block<2, 1>(0, 3);
    f.gamma_minus_lambda = gamma - f.lambda;
    f.c << -wn * wn, -2.0 * zeta * wn;
    return f;
}

} // namespace detail

/// Minimum excitation length (samples) accepted by the simulator: one period
/// of the lowest mode.
inline std::size_t simulator_warmup_samples(const ModalParameterSet& params, double sample_rate)
{
    const double wn_min = params[0].natural_frequency;
    return static_cast<std::size_t>(std::ceil(sample_rate * two_pi / wn_min));
}

/// Acceleration response of the proportionally damped system with the given
/// modal parameters to the force `excitation`, plus Gaussian measurement noise
/// with RMS equal to `noise_level` times the clean response RMS.
inline TimeSeries simulate_mdof_response(const ModalParameterSet& params, const TimeSeries& excitation,
                                         double noise_level = 0.0, std::uint64_t seed = 0)
{
    excitation.validate();
    if (params.size() == 0)
        throw InvalidArgument("no modes to simulate");
    if (!(noise_level >= 0.0))
        throw InvalidArgument("noise level must be non-negative");
    const double fs = excitation.sample_rate;
    const double nyquist_rad = std::numbers::pi * fs;
    for (std::size_t m = 0; m < params.size(); ++m) {
        if (!(params[m].natural_frequency < nyquist_rad))
            throw InvalidArgument("mode " + std::to_string(m) + " lies above the Nyquist frequency");
    }
    const std::size_t warmup = simulator_warmup_samples(params, fs);
    if (excitation.size() < warmup)
        throw DataError("excitation shorter than filter warm-up (" + std::to_string(warmup) + " samples)");

    const auto& u = excitation.samples;
    const std::size_t n = u.size();
    std::vector<double> y(n, 0.0);
    const double dt = 1.0 / fs;
    for (const Mode& mode : params.modes()) {
        const auto f = detail::modal_filter(mode.natural_frequency, mode.damping_ratio, dt);
        Eigen::Vector2d x = Eigen::Vector2d::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            const double ui = u[i];
            y[i] += mode.residue * (f.c.dot(x) + ui);
            const double next = (i + 1 < n) ? u[i + 1] : ui;
            x = f.phi * x + f.gamma_minus_lambda * ui + f.lambda * next;
        }
    }

    if (noise_level > 0.0) {
        const double rms = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0) / static_cast<double>(n));
        auto rng = make_stream(seed, 0x5151);
        std::normal_distribution<double> noise(0.0, noise_level * rms);
        for (double& v : y)
            v += noise(rng);
    }
    return TimeSeries(std::move(y), fs);
}

/// Gaussian white-noise force signal of unit variance.
inline TimeSeries white_noise(std::size_t n, double sample_rate, std::uint64_t seed)
{
    auto rng = make_stream(seed, 0xF0CE);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> s(n);
    for (double& v : s)
        v = nd(rng);
    return TimeSeries(std::move(s), sample_rate);
}

/// Uniform random subset of `keep` observations, returned in their original order.
inline std::vector<FrfObservation> decimate_spectral_lines(std::span<const FrfObservation> frf, std::size_t keep,
                                                           std::uint64_t seed)
{
    if (keep < 1 || keep > frf.size())
        throw InvalidArgument("keep must lie in [1, " + std::to_string(frf.size()) + "]");
    std::vector<std::size_t> idx(frf.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rng = make_stream(seed, 0xDEC1);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < keep; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    std::vector<FrfObservation> out;
    out.reserve(keep);
    for (std::size_t i : idx)
        out.push_back(frf[i]);
    return out;
}

/// Adds zero-mean Gaussian noise with the given standard deviation.
inline std::vector<FrfObservation> add_noise_with_std(std::span<const FrfObservation> frf, double stddev,
                                                      std::uint64_t seed)
{
    if (frf.empty())
        throw InvalidArgument("cannot add noise to an empty observation list");
    if (!(stddev >= 0.0))
        throw InvalidArgument("noise standard deviation must be non-negative");
    std::vector<FrfObservation> out(frf.begin(), frf.end());
    if (stddev == 0.0)
        return out;
    auto rng = make_stream(seed, 0xA0D1);
    std::normal_distribution<double> nd(0.0, stddev);
    for (auto& o : out)
        o.value += nd(rng);
    return out;
}

inline double peak_abs_value(std::span<const FrfObservation> frf)
{
    double peak = 0.0;
    for (const auto& o : frf)
        peak = std::max(peak, std::abs(o.value));
    return peak;
}

/// Adds zero-mean Gaussian noise with standard deviation `fraction * max|value|`.
inline std::vector<FrfObservation> add_training_noise(std::span<const FrfObservation> frf, double fraction,
                                                      std::uint64_t seed)
{
    if (frf.empty())
        throw InvalidArgument("cannot add noise to an empty observation list");
    if (!(fraction >= 0.0))
        throw InvalidArgument("noise fraction must be non-negative");
    return add_noise_with_std(frf, fraction * peak_abs_value(frf), seed);
}

} // namespace frfhb
