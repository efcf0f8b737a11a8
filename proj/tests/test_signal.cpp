#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "frfhb/signal.hpp"

using namespace frfhb;

namespace {

TimeSeries sinusoid(double omega, double amplitude, double fs, std::size_t n)
{
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i)
        s[i] = amplitude * std::sin(omega * static_cast<double>(i) / fs);
    return TimeSeries(std::move(s), fs);
}

// Least-squares amplitude of a sinusoid at `omega` over samples [from, n).
double fitted_amplitude(const TimeSeries& ts, double omega, std::size_t from)
{
    double ss = 0, sc = 0, cc = 0, ys = 0, yc = 0;
    for (std::size_t i = from; i < ts.size(); ++i) {
        const double t = static_cast<double>(i) / ts.sample_rate;
        const double s = std::sin(omega * t), c = std::cos(omega * t);
        ss += s * s;
        sc += s * c;
        cc += c * c;
        ys += ts.samples[i] * s;
        yc += ts.samples[i] * c;
    }
    const double det = ss * cc - sc * sc;
    const double a = (ys * cc - yc * sc) / det;
    const double b = (yc * ss - ys * sc) / det;
    return std::hypot(a, b);
}

std::vector<FrfObservation> ramp_observations(std::size_t n)
{
    std::vector<FrfObservation> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = {static_cast<double>(i), std::sin(0.01 * static_cast<double>(i))};
    return out;
}

} // namespace

TEST(HannWindow, SmallLengths)
{
    EXPECT_EQ(hann_window(3), (std::vector<double>{0.0, 1.0, 0.0}));
    const auto w5 = hann_window(5);
    const std::vector<double> expected{0.0, 0.5, 1.0, 0.5, 0.0};
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_NEAR(w5[i], expected[i], 1e-15);
    EXPECT_EQ(hann_window(2), (std::vector<double>{0.0, 0.0}));
    EXPECT_THROW(hann_window(1), InvalidArgument);
    EXPECT_THROW(hann_window(0), InvalidArgument);
}

TEST(HannWindow, SymmetricWithUnitPeakForOddLengths)
{
    for (std::size_t n : {7u, 101u, 1025u}) {
        const auto w = hann_window(n);
        EXPECT_EQ(*std::max_element(w.begin(), w.end()), 1.0);
        for (std::size_t i = 0; i < n; ++i)
            EXPECT_EQ(w[i], w[n - 1 - i]);
    }
}

TEST(Fft, ParsevalHoldsForOneSidedSpectrum)
{
    for (std::size_t n : {64u, 1000u, 81u}) {
        const auto x = white_noise(n, 1.0, 3 + n).samples;
        const auto X = rfft(x);
        const double time_energy = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
        double freq_energy = 0.0;
        for (std::size_t k = 0; k < X.size(); ++k) {
            const bool single = (k == 0) || (n % 2 == 0 && k == X.size() - 1);
            freq_energy += (single ? 1.0 : 2.0) * std::norm(X[k]);
        }
        freq_energy /= static_cast<double>(n);
        EXPECT_NEAR(freq_energy / time_energy, 1.0, 1e-9) << n;
    }
}

TEST(Fft, HannCoherentGainRecoversExactBinAmplitude)
{
    const std::size_t n = 4096;
    const double fs = 512.0;
    const std::size_t bin = 300;
    const double amplitude = 1.7;
    const auto s = sinusoid(two_pi * fs * bin / n, amplitude, fs, n);
    const auto w = hann_window(n);
    std::vector<double> xw(n);
    for (std::size_t i = 0; i < n; ++i)
        xw[i] = w[i] * s.samples[i];
    const auto X = rfft(xw);
    const double coherent_gain = std::accumulate(w.begin(), w.end(), 0.0);
    EXPECT_NEAR(2.0 * std::abs(X[bin]) / coherent_gain, amplitude, 0.01 * amplitude);
}

TEST(H1, IdenticalSeriesGiveUnitFrf)
{
    const auto x = white_noise(20 * 256, 256.0, 9);
    const auto h = h1_estimate(x, x, 20, Window::hann);
    ASSERT_EQ(h.frf.size(), 129u);
    for (const auto& v : h.frf) {
        EXPECT_NEAR(v.real(), 1.0, 1e-12);
        EXPECT_NEAR(v.imag(), 0.0, 1e-12);
    }
    EXPECT_EQ(h.spectra.block_count, 20u);
    for (double g : h.spectra.auto_spectrum)
        EXPECT_GE(g, 0.0);
}

TEST(H1, ZeroResponseGivesZeroFrf)
{
    const auto x = white_noise(4096, 128.0, 2);
    const TimeSeries zero(std::vector<double>(4096, 0.0), 128.0);
    const auto h = h1_estimate(x, zero, 8, Window::hann);
    for (const auto& v : h.frf)
        EXPECT_EQ(std::abs(v), 0.0);
}

TEST(H1, FrequencyGridIsOneSidedInHz)
{
    const auto x = white_noise(1000, 100.0, 4);
    const auto h = h1_estimate(x, x, 2, Window::rectangular);
    const auto f = h.frequencies().values();
    ASSERT_EQ(f.size(), 251u);
    EXPECT_EQ(h.frequencies().unit(), FrequencyUnit::hz);
    EXPECT_DOUBLE_EQ(f[0], 0.0);
    EXPECT_DOUBLE_EQ(f[1], 0.2);
    EXPECT_DOUBLE_EQ(f.back(), 50.0);
}

TEST(H1, ErrorPaths)
{
    const auto x = white_noise(1024, 64.0, 5);
    const auto y = white_noise(1000, 64.0, 6);
    EXPECT_THROW(h1_estimate(x, y, 4), DataError);
    const TimeSeries other_rate(x.samples, 32.0);
    EXPECT_THROW(h1_estimate(x, other_rate, 4), DataError);
    EXPECT_THROW(h1_estimate(x, x, 0), InvalidArgument);
    const TimeSeries silent(std::vector<double>(1024, 0.0), 64.0);
    try {
        (void)h1_estimate(silent, x, 4);
        FAIL() << "expected DataError";
    }
    catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 0"), std::string::npos);
    }
}

TEST(Simulator, ZeroExcitationGivesZeroResponse)
{
    const ModalParameterSet p({{190.0, 0.02, -0.004}, {335.0, 0.02, -0.004}});
    const TimeSeries zero(std::vector<double>(2048, 0.0), 512.0);
    const auto y = simulate_mdof_response(p, zero, 0.0);
    for (double v : y.samples)
        EXPECT_EQ(v, 0.0);
}

TEST(Simulator, IsLinearInExcitation)
{
    const ModalParameterSet p({{190.0, 0.02, -0.004}, {335.0, 0.02, 0.003}});
    const auto u = white_noise(4096, 512.0, 12);
    TimeSeries u2 = u;
    for (double& v : u2.samples)
        v *= 2.0;
    const auto y1 = simulate_mdof_response(p, u, 0.0);
    const auto y2 = simulate_mdof_response(p, u2, 0.0);
    for (std::size_t i = 0; i < y1.size(); ++i)
        EXPECT_NEAR(y2.samples[i], 2.0 * y1.samples[i], 1e-12 * (1.0 + std::abs(y2.samples[i])));
}

TEST(Simulator, LowFrequencySinusoidMatchesAnalyticAmplitude)
{
    const ModalParameterSet p({{190.0, 0.02, -0.004}, {335.0, 0.02, -0.004}});
    const double fs = 1024.0;
    const double omega = 40.0; // far below the first mode
    const auto u = sinusoid(omega, 1.0, fs, static_cast<std::size_t>(30 * fs));
    const auto y = simulate_mdof_response(p, u, 0.0);
    const double measured = fitted_amplitude(y, omega, static_cast<std::size_t>(10 * fs));
    const double expected = std::abs(frf_complex(p, FrequencyGrid::rad_per_s({omega}))[0]);
    EXPECT_NEAR(measured / expected, 1.0, 0.01);
}

TEST(Simulator, NoiseLevelSetsRmsRatio)
{
    const ModalParameterSet p({{190.0, 0.02, -0.004}});
    const auto u = white_noise(1 << 16, 512.0, 1);
    const auto clean = simulate_mdof_response(p, u, 0.0);
    const auto noisy = simulate_mdof_response(p, u, 0.1, 77);
    double e2 = 0, c2 = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        e2 += std::pow(noisy.samples[i] - clean.samples[i], 2);
        c2 += clean.samples[i] * clean.samples[i];
    }
    EXPECT_NEAR(std::sqrt(e2 / c2), 0.1, 0.005);
    const auto again = simulate_mdof_response(p, u, 0.1, 77);
    EXPECT_EQ(again.samples, noisy.samples);
}

TEST(Simulator, RejectsShortExcitationAndAliasedModes)
{
    const ModalParameterSet p({{190.0, 0.02, -0.004}});
    // one period of 190 rad/s at 512 Hz is 17 samples
    EXPECT_THROW(simulate_mdof_response(p, TimeSeries(std::vector<double>(10, 1.0), 512.0)), DataError);
    EXPECT_NO_THROW(simulate_mdof_response(p, TimeSeries(std::vector<double>(17, 1.0), 512.0)));
    EXPECT_THROW(simulate_mdof_response(p, TimeSeries(std::vector<double>(1000, 1.0), 50.0)), InvalidArgument);
}

TEST(H1, ConvergesToAnalyticFrfAsBlocksLengthen)
{
    const ModalParameterSet p({{190.0, 0.02, -0.004}});
    const double fs = 1024.0;
    const std::size_t blocks = 20;
    double previous = std::numeric_limits<double>::infinity();
    for (double df : {0.4, 0.2, 0.1, 0.05}) {
        const auto len = static_cast<std::size_t>(std::llround(fs / df));
        const auto u = white_noise(len * blocks, fs, 21);
        const auto y = simulate_mdof_response(p, u, 0.0);
        const auto h1 = h1_estimate(u, y, blocks, Window::hann);
        const auto truth = frf_complex(p, h1.frequencies());
        double peak = 0.0, err = 0.0;
        const auto f = h1.frequencies().values();
        for (std::size_t k = 0; k < f.size(); ++k) {
            if (f[k] < 20.0 || f[k] > 40.0)
                continue;
            peak = std::max(peak, std::abs(truth[k]));
            err = std::max(err, std::abs(h1.frf[k] - truth[k]));
        }
        EXPECT_LT(err / peak, previous) << "df=" << df;
        previous = err / peak;
    }
}

TEST(Decimate, KeepAllIsIdentity)
{
    const auto obs = ramp_observations(50);
    EXPECT_EQ(decimate_spectral_lines(obs, 50, 1), obs);
}

TEST(Decimate, SingleLineComesFromInput)
{
    const auto obs = ramp_observations(50);
    const auto one = decimate_spectral_lines(obs, 1, 99);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_NE(std::find(obs.begin(), obs.end(), one[0]), obs.end());
}

TEST(Decimate, DeterministicUnderSeedAndPreservesPairs)
{
    const auto obs = ramp_observations(758);
    const auto a = decimate_spectral_lines(obs, 100, 5);
    const auto b = decimate_spectral_lines(obs, 100, 5);
    const auto c = decimate_spectral_lines(obs, 100, 6);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (const auto& o : a)
        EXPECT_EQ(o.value, std::sin(0.01 * o.omega));
    for (std::size_t i = 1; i < a.size(); ++i)
        EXPECT_LT(a[i - 1].omega, a[i].omega);
}

TEST(Decimate, RejectsOutOfRangeKeep)
{
    const auto obs = ramp_observations(5);
    EXPECT_THROW(decimate_spectral_lines(obs, 0, 1), InvalidArgument);
    EXPECT_THROW(decimate_spectral_lines(obs, 6, 1), InvalidArgument);
}

TEST(TrainingNoise, ZeroFractionIsIdentity)
{
    const auto obs = ramp_observations(20);
    EXPECT_EQ(add_training_noise(obs, 0.0, 3), obs);
}

TEST(TrainingNoise, StandardDeviationIsFractionOfPeak)
{
    const auto obs = ramp_observations(10000);
    const double peak = peak_abs_value(obs);
    const auto noisy = add_training_noise(obs, 0.05, 8);
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double d = noisy[i].value - obs[i].value;
        s += d;
        s2 += d * d;
        EXPECT_EQ(noisy[i].omega, obs[i].omega);
    }
    const double n = static_cast<double>(obs.size());
    const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
    EXPECT_NEAR(sd, 0.05 * peak, 0.05 * 0.05 * peak);
    EXPECT_EQ(add_training_noise(obs, 0.05, 8), noisy);
}

TEST(TrainingNoise, RejectsEmptyInput)
{
    EXPECT_THROW(add_training_noise(std::vector<FrfObservation>{}, 0.05, 1), InvalidArgument);
}
