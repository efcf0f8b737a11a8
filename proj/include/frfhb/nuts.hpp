#pragma once

// Multinomial No-U-Turn sampler with a diagonal metric, dual-averaging step
// size adaptation and windowed metric estimation during warm-up.
//
// A target is any type providing
//   std::size_t dimension() const;
//   double log_density(std::span<const double> u, std::span<double> grad) const;
// where log_density returns -inf for states it cannot evaluate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "frfhb/errors.hpp"
#include "frfhb/random.hpp"

namespace frfhb {

template <class T>
concept DensityTarget = requires(const T& t, std::span<const double> u, std::span<double> g) {
    { t.dimension() } -> std::convertible_to<std::size_t>;
    { t.log_density(u, g) } -> std::convertible_to<double>;
};

struct SamplerConfig {
    std::size_t chains = 4;
    std::size_t warmup_draws = 5000;
    std::size_t sampling_draws = 10000;
    double target_accept = 0.99;
    int max_tree_depth = 10;
    double divergence_energy_threshold = 1000.0;
    std::uint64_t seed = 0;

    // dual averaging
    double gamma = 0.05;
    double t0 = 10.0;
    double kappa = 0.75;
    /// Starting step size; refined by a heuristic search when adapting.
    double initial_step_size = 1.0;
    bool adapt_step_size = true;

    // windowed diagonal metric estimation
    bool adapt_metric = true;
    double init_buffer_fraction = 0.15;
    double term_buffer_fraction = 0.10;
    std::size_t base_window = 25;

    /// Worker threads; 0 runs one thread per chain.
    std::size_t threads = 0;
    /// Keep warm-up draws in the trace (statistics are always kept).
    bool keep_warmup_draws = false;

    void validate() const
    {
        if (chains < 1)
            throw InvalidArgument("at least one chain is required");
        if (sampling_draws < 1)
            throw InvalidArgument("sampling draws must be positive");
        if (!(target_accept > 0.0 && target_accept < 1.0))
            throw InvalidArgument("target acceptance must lie in (0, 1)");
        if (max_tree_depth < 1)
            throw InvalidArgument("max tree depth must be at least 1");
        if (!(divergence_energy_threshold > 0.0))
            throw InvalidArgument("divergence threshold must be positive");
        if (!(initial_step_size > 0.0) || !std::isfinite(initial_step_size))
            throw InvalidArgument("initial step size must be positive");
        if (!(gamma > 0.0 && t0 >= 0.0 && kappa > 0.0 && kappa <= 1.0))
            throw InvalidArgument("invalid dual-averaging constants");
        if (!(init_buffer_fraction >= 0.0 && term_buffer_fraction >= 0.0 &&
              init_buffer_fraction + term_buffer_fraction < 1.0))
            throw InvalidArgument("invalid warm-up buffer fractions");
        if (base_window < 1)
            throw InvalidArgument("base window must be positive");
    }
};

/// Per-transition diagnostics.
struct TransitionStats {
    double accept_stat = 0.0;
    int tree_depth = 0;
    int n_leapfrog = 0;
    bool divergent = false;
    double energy = 0.0;
    double log_density = 0.0;
    double step_size = 0.0;
};

struct ChainTrace {
    std::size_t dimension = 0;
    /// Post-warm-up draws, row-major (draw x dimension), unconstrained.
    std::vector<double> draws;
    std::vector<TransitionStats> stats;
    /// Warm-up record: statistics always, draws only when requested.
    std::vector<double> warmup_draws;
    std::vector<TransitionStats> warmup_stats;
    double step_size = 0.0;
    std::vector<double> inv_metric;
    std::vector<double> initial_point;

    [[nodiscard]] std::size_t size() const noexcept { return stats.size(); }

    [[nodiscard]] std::span<const double> draw(std::size_t i) const
    {
        return std::span<const double>(draws).subspan(i * dimension, dimension);
    }

    [[nodiscard]] std::size_t divergences() const noexcept
    {
        return static_cast<std::size_t>(
            std::count_if(stats.begin(), stats.end(), [](const TransitionStats& s) { return s.divergent; }));
    }

    [[nodiscard]] double mean_accept_stat() const noexcept
    {
        double s = 0.0;
        for (const auto& t : stats)
            s += t.accept_stat;
        return stats.empty() ? 0.0 : s / static_cast<double>(stats.size());
    }
};

struct Trace {
    std::size_t dimension = 0;
    std::vector<ChainTrace> chains;

    [[nodiscard]] std::size_t draws_per_chain() const noexcept { return chains.empty() ? 0 : chains[0].size(); }
    [[nodiscard]] std::size_t total_draws() const noexcept
    {
        std::size_t n = 0;
        for (const auto& c : chains)
            n += c.size();
        return n;
    }

    /// Draws of coordinate i, one vector per chain.
    [[nodiscard]] std::vector<std::vector<double>> coordinate(std::size_t i) const
    {
        std::vector<std::vector<double>> out;
        for (const auto& c : chains) {
            std::vector<double> v(c.size());
            for (std::size_t d = 0; d < c.size(); ++d)
                v[d] = c.draws[d * dimension + i];
            out.push_back(std::move(v));
        }
        return out;
    }

    [[nodiscard]] std::size_t divergences() const noexcept
    {
        std::size_t n = 0;
        for (const auto& c : chains)
            n += c.divergences();
        return n;
    }
};

/// Phase-space point of the Hamiltonian system.
struct PhasePoint {
    std::vector<double> q;
    std::vector<double> p;
    std::vector<double> grad; // gradient of the log density at q
    double log_density = 0.0;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double log_sum_exp(double a, double b) noexcept
{
    if (a == -std::numeric_limits<double>::infinity())
        return b;
    if (b == -std::numeric_limits<double>::infinity())
        return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

} // namespace detail

/// Kinetic energy 0.5 p' M^{-1} p for a diagonal inverse metric.
inline double kinetic_energy(std::span<const double> p, std::span<const double> inv_metric) noexcept
{
    double k = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        k += p[i] * p[i] * inv_metric[i];
    return 0.5 * k;
}

/// Total energy H = -log pi(q) + kinetic; +inf when the density is not finite.
inline double hamiltonian(const PhasePoint& z, std::span<const double> inv_metric) noexcept
{
    const double h = -z.log_density + kinetic_energy(z.p, inv_metric);
    return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
}

template <DensityTarget Target>
void evaluate_point(const Target& target, PhasePoint& z)
{
    z.log_density = target.log_density(z.q, z.grad);
}

/// One velocity-Verlet step of signed size `eps`.
template <DensityTarget Target>
void leapfrog(const Target& target, PhasePoint& z, double eps, std::span<const double> inv_metric)
{
    const std::size_t n = z.q.size();
    for (std::size_t i = 0; i < n; ++i)
        z.p[i] += 0.5 * eps * z.grad[i];
    for (std::size_t i = 0; i < n; ++i)
        z.q[i] += eps * inv_metric[i] * z.p[i];
    evaluate_point(target, z);
    for (std::size_t i = 0; i < n; ++i)
        z.p[i] += 0.5 * eps * z.grad[i];
}

/// Dual-averaging step size adaptation.
class StepSizeAdaptation {
public:
    StepSizeAdaptation(double delta, double gamma, double t0, double kappa)
        : delta_(delta), gamma_(gamma), t0_(t0), kappa_(kappa)
    {
    }

    void restart(double step_size)
    {
        counter_ = 0.0;
        s_bar_ = 0.0;
        x_bar_ = 0.0;
        mu_ = std::log(10.0 * step_size);
    }

    /// Updates and returns the next step size.
    double learn(double accept_stat)
    {
        counter_ += 1.0;
        accept_stat = std::min(1.0, accept_stat);
        const double eta = 1.0 / (counter_ + t0_);
        s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
        const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
        const double x_eta = std::pow(counter_, -kappa_);
        x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
        return std::exp(x);
    }

    [[nodiscard]] double final_step_size() const { return std::exp(x_bar_); }

private:
    double delta_, gamma_, t0_, kappa_;
    double counter_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0, mu_ = 0.0;
};

/// Warm-up schedule: an initial fast buffer, doubling slow windows in which
/// the metric is estimated, and a terminal fast buffer.
class WarmupSchedule {
public:
    WarmupSchedule(std::size_t num_warmup, double init_fraction, double term_fraction, std::size_t base_window)
        : num_warmup_(num_warmup)
    {
        init_buffer_ = static_cast<std::size_t>(std::lround(init_fraction * static_cast<double>(num_warmup)));
        term_buffer_ = static_cast<std::size_t>(std::lround(term_fraction * static_cast<double>(num_warmup)));
        const std::size_t slow = num_warmup > init_buffer_ + term_buffer_ ? num_warmup - init_buffer_ - term_buffer_ : 0;
        enabled_ = num_warmup >= 20 && slow > 0;
        window_size_ = std::min(base_window, slow);
        next_window_ = init_buffer_ + window_size_ - 1;
        if (enabled_)
            stretch_last_window();
    }

    [[nodiscard]] bool enabled() const noexcept { return enabled_; }

    /// True when iteration `i` (0-based) contributes to the metric estimate.
    [[nodiscard]] bool in_window(std::size_t i) const noexcept
    {
        return enabled_ && i >= init_buffer_ && i < num_warmup_ - term_buffer_;
    }

    /// True when iteration `i` closes a slow window; advances the schedule.
    bool end_of_window(std::size_t i)
    {
        if (!enabled_ || i != next_window_)
            return false;
        if (next_window_ + 1 < num_warmup_ - term_buffer_) {
            window_size_ *= 2;
            next_window_ = i + window_size_;
            stretch_last_window();
        }
        return true;
    }

    [[nodiscard]] std::vector<std::size_t> window_ends() const
    {
        WarmupSchedule copy = *this;
        std::vector<std::size_t> ends;
        for (std::size_t i = 0; i < num_warmup_; ++i)
            if (copy.end_of_window(i))
                ends.push_back(i);
        return ends;
    }

private:
    void stretch_last_window()
    {
        const std::size_t last = num_warmup_ - term_buffer_ - 1;
        if (next_window_ >= last || next_window_ + 2 * window_size_ > last)
            next_window_ = last;
    }

    std::size_t num_warmup_;
    std::size_t init_buffer_ = 0, term_buffer_ = 0;
    std::size_t window_size_ = 0, next_window_ = 0;
    bool enabled_ = false;
};

/// Running per-coordinate variance (Welford).
class VarianceEstimator {
public:
    explicit VarianceEstimator(std::size_t n) : mean_(n, 0.0), m2_(n, 0.0) {}

    void restart()
    {
        count_ = 0;
        std::fill(mean_.begin(), mean_.end(), 0.0);
        std::fill(m2_.begin(), m2_.end(), 0.0);
    }

    void add(std::span<const double> q)
    {
        ++count_;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double d = q[i] - mean_[i];
            mean_[i] += d / static_cast<double>(count_);
            m2_[i] += d * (q[i] - mean_[i]);
        }
    }

    [[nodiscard]] std::size_t count() const noexcept { return count_; }

    /// Sample variance shrunk towards 1e-3 times the previous metric entry.
    /// Scaling the shrinkage target by the previous estimate keeps it from
    /// swamping coordinates whose posterior variance is far below 1e-3.
    [[nodiscard]] std::vector<double> regularised_variance(std::span<const double> previous) const
    {
        const auto n = static_cast<double>(count_);
        std::vector<double> v(mean_.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double var = count_ > 1 ? m2_[i] / (n - 1.0) : previous[i];
            v[i] = (n / (n + 5.0)) * var + 1e-3 * previous[i] * (5.0 / (n + 5.0));
        }
        return v;
    }

private:
    std::size_t count_ = 0;
    std::vector<double> mean_, m2_;
};

/// NUTS kernel for one chain.
template <DensityTarget Target>
class NutsChain {
public:
    NutsChain(const Target& target, Rng rng, int max_depth, double max_delta_h)
        : target_(target), rng_(std::move(rng)), max_depth_(max_depth), max_delta_h_(max_delta_h),
          n_(target.dimension()), inv_metric_(n_, 1.0)
    {
        z_ = make_point();
    }

    void set_position(std::span<const double> q)
    {
        z_.q.assign(q.begin(), q.end());
        evaluate_point(target_, z_);
    }

    [[nodiscard]] const PhasePoint& point() const noexcept { return z_; }
    [[nodiscard]] double step_size() const noexcept { return eps_; }
    void set_step_size(double eps) { eps_ = eps; }
    [[nodiscard]] const std::vector<double>& inv_metric() const noexcept { return inv_metric_; }
    void set_inv_metric(std::vector<double> m) { inv_metric_ = std::move(m); }

    /// Doubles or halves the step size until one leapfrog step crosses an
    /// acceptance probability of 0.8.
    void init_step_size()
    {
        const PhasePoint start = z_;
        auto trial = [&]() {
            z_ = start;
            sample_momentum();
            const double h0 = hamiltonian(z_, inv_metric_);
            leapfrog(target_, z_, eps_, inv_metric_);
            return h0 - hamiltonian(z_, inv_metric_);
        };
        const double log_target = std::log(0.8);
        const double first = trial();
        const int direction = first > log_target ? 1 : -1;
        for (int it = 0; it < 200; ++it) {
            const double delta_h = trial();
            if (direction == 1 && !(delta_h > log_target))
                break;
            if (direction == -1 && !(delta_h < log_target))
                break;
            eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
            if (eps_ > 1e7)
                throw SamplerError("step size search diverged: posterior may be improper");
            if (eps_ < 1e-300)
                throw SamplerError("step size search collapsed to zero: no finite neighbourhood");
        }
        z_ = start;
    }

    /// One NUTS transition from the current position.
    TransitionStats transition()
    {
        sample_momentum();
        const double h0 = hamiltonian(z_, inv_metric_);

        PhasePoint z_fwd = z_, z_bck = z_;
        PhasePoint z_sample = z_;
        PhasePoint z_propose = z_;

        std::vector<double> p_sharp_fwd_fwd = sharp(z_.p), p_sharp_fwd_bck = p_sharp_fwd_fwd;
        std::vector<double> p_sharp_bck_fwd = p_sharp_fwd_fwd, p_sharp_bck_bck = p_sharp_fwd_fwd;
        std::vector<double> p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
        std::vector<double> rho = z_.p;

        double log_sum_weight = 0.0;
        int depth = 0;
        int n_leapfrog = 0;
        double sum_metro_prob = 0.0;
        divergent_ = false;

        std::vector<double> rho_fwd(n_), rho_bck(n_);
        while (depth < max_depth_) {
            std::fill(rho_fwd.begin(), rho_fwd.end(), 0.0);
            std::fill(rho_bck.begin(), rho_bck.end(), 0.0);
            bool valid_subtree = false;
            double log_sum_weight_subtree = -std::numeric_limits<double>::infinity();

            if (uniform01(rng_) > 0.5) {
                z_ = z_fwd;
                rho_bck = rho;
                p_bck_fwd = p_fwd_bck;
                p_sharp_bck_fwd = p_sharp_fwd_bck;
                valid_subtree = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                                           p_fwd_fwd, h0, 1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
                z_fwd = z_;
            }
            else {
                z_ = z_bck;
                rho_fwd = rho;
                p_fwd_bck = p_bck_fwd;
                p_sharp_fwd_bck = p_sharp_bck_fwd;
                valid_subtree = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                                           p_bck_bck, h0, -1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
                z_bck = z_;
            }
            if (!valid_subtree)
                break;
            ++depth;

            // biased progressive sampling favours the new subtree
            if (log_sum_weight_subtree > log_sum_weight) {
                z_sample = z_propose;
            }
            else {
                const double accept_prob = std::exp(log_sum_weight_subtree - log_sum_weight);
                if (uniform01(rng_) < accept_prob)
                    z_sample = z_propose;
            }
            log_sum_weight = detail::log_sum_exp(log_sum_weight, log_sum_weight_subtree);

            for (std::size_t i = 0; i < n_; ++i)
                rho[i] = rho_bck[i] + rho_fwd[i];
            bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
            std::vector<double> rho_ext(n_);
            for (std::size_t i = 0; i < n_; ++i)
                rho_ext[i] = rho_bck[i] + p_fwd_bck[i];
            persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_ext);
            for (std::size_t i = 0; i < n_; ++i)
                rho_ext[i] = rho_fwd[i] + p_bck_fwd[i];
            persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_ext);
            if (!persist)
                break;
        }

        z_ = z_sample;
        TransitionStats s;
        s.n_leapfrog = n_leapfrog;
        s.tree_depth = depth;
        s.divergent = divergent_;
        s.accept_stat = n_leapfrog > 0 ? sum_metro_prob / static_cast<double>(n_leapfrog) : 0.0;
        s.energy = hamiltonian(z_, inv_metric_);
        s.log_density = z_.log_density;
        s.step_size = eps_;
        return s;
    }

private:
    PhasePoint make_point() const
    {
        PhasePoint z;
        z.q.assign(n_, 0.0);
        z.p.assign(n_, 0.0);
        z.grad.assign(n_, 0.0);
        return z;
    }

    void sample_momentum()
    {
        for (std::size_t i = 0; i < n_; ++i)
            z_.p[i] = standard_normal(rng_) / std::sqrt(inv_metric_[i]);
    }

    [[nodiscard]] std::vector<double> sharp(std::span<const double> p) const
    {
        std::vector<double> out(n_);
        for (std::size_t i = 0; i < n_; ++i)
            out[i] = inv_metric_[i] * p[i];
        return out;
    }

    static bool criterion(std::span<const double> p_sharp_minus, std::span<const double> p_sharp_plus,
                          std::span<const double> rho)
    {
        return detail::dot(p_sharp_plus, rho) > 0.0 && detail::dot(p_sharp_minus, rho) > 0.0;
    }

    bool build_tree(int depth, PhasePoint& z_propose, std::vector<double>& p_sharp_beg,
                    std::vector<double>& p_sharp_end, std::vector<double>& rho, std::vector<double>& p_beg,
                    std::vector<double>& p_end, double h0, double sign, int& n_leapfrog, double& log_sum_weight,
                    double& sum_metro_prob)
    {
        if (depth == 0) {
            leapfrog(target_, z_, sign * eps_, inv_metric_);
            ++n_leapfrog;
            const double h = hamiltonian(z_, inv_metric_);
            if (!std::isfinite(h) || h - h0 > max_delta_h_)
                divergent_ = true;
            const double w = h0 - h; // -inf when h is +inf
            log_sum_weight = detail::log_sum_exp(log_sum_weight, w);
            sum_metro_prob += w > 0.0 ? 1.0 : std::exp(w);
            z_propose = z_;
            p_sharp_beg = sharp(z_.p);
            p_sharp_end = p_sharp_beg;
            for (std::size_t i = 0; i < n_; ++i)
                rho[i] += z_.p[i];
            p_beg = z_.p;
            p_end = p_beg;
            return !divergent_;
        }

        // left subtree
        std::vector<double> p_sharp_left(n_), p_left(n_), rho_left(n_, 0.0);
        double log_sum_weight_left = -std::numeric_limits<double>::infinity();
        const bool valid_left = build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_left, rho_left, p_beg, p_left,
                                           h0, sign, n_leapfrog, log_sum_weight_left, sum_metro_prob);
        if (!valid_left)
            return false;

        // right subtree
        PhasePoint z_propose_right = z_;
        std::vector<double> p_sharp_right(n_), p_right(n_), rho_right(n_, 0.0);
        double log_sum_weight_right = -std::numeric_limits<double>::infinity();
        const bool valid_right = build_tree(depth - 1, z_propose_right, p_sharp_right, p_sharp_end, rho_right,
                                            p_right, p_end, h0, sign, n_leapfrog, log_sum_weight_right,
                                            sum_metro_prob);
        if (!valid_right)
            return false;

        // multinomial sample from the merged subtree
        const double log_sum_weight_subtree = detail::log_sum_exp(log_sum_weight_left, log_sum_weight_right);
        log_sum_weight = detail::log_sum_exp(log_sum_weight, log_sum_weight_subtree);
        if (log_sum_weight_right > log_sum_weight_subtree) {
            z_propose = z_propose_right;
        }
        else {
            const double accept_prob = std::exp(log_sum_weight_right - log_sum_weight_subtree);
            if (uniform01(rng_) < accept_prob)
                z_propose = z_propose_right;
        }

        std::vector<double> rho_subtree(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            rho_subtree[i] = rho_left[i] + rho_right[i];
            rho[i] += rho_subtree[i];
        }
        bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
        std::vector<double> rho_ext(n_);
        for (std::size_t i = 0; i < n_; ++i)
            rho_ext[i] = rho_left[i] + p_right[i];
        persist = persist && criterion(p_sharp_beg, p_sharp_right, rho_ext);
        for (std::size_t i = 0; i < n_; ++i)
            rho_ext[i] = rho_right[i] + p_left[i];
        persist = persist && criterion(p_sharp_left, p_sharp_end, rho_ext);
        return persist;
    }

    const Target& target_;
    Rng rng_;
    int max_depth_;
    double max_delta_h_;
    std::size_t n_;
    std::vector<double> inv_metric_;
    double eps_ = 1.0;
    PhasePoint z_;
    bool divergent_ = false;
};

/// Runs warm-up and sampling for one chain starting at `init` (unconstrained).
template <DensityTarget Target>
ChainTrace run_chain(const Target& target, const SamplerConfig& config, std::size_t chain,
                     std::span<const double> init)
{
    const std::size_t n = target.dimension();
    if (init.size() != n)
        throw InvalidArgument("initial point has the wrong dimension");
    NutsChain<Target> kernel(target, make_stream(config.seed, 2 * chain + 1), config.max_tree_depth,
                             config.divergence_energy_threshold);
    kernel.set_position(init);
    if (!std::isfinite(kernel.point().log_density))
        throw SamplerError("chain " + std::to_string(chain) + ": log density is not finite at the initial point");
    kernel.set_step_size(config.initial_step_size);

    ChainTrace out;
    out.dimension = n;
    out.initial_point.assign(init.begin(), init.end());

    const std::size_t W = config.warmup_draws;
    StepSizeAdaptation da(config.target_accept, config.gamma, config.t0, config.kappa);
    WarmupSchedule schedule(W, config.init_buffer_fraction, config.term_buffer_fraction, config.base_window);
    VarianceEstimator var(n);
    if (W > 0 && config.adapt_step_size) {
        kernel.init_step_size();
        da.restart(kernel.step_size());
    }

    out.warmup_stats.reserve(W);
    if (config.keep_warmup_draws)
        out.warmup_draws.reserve(W * n);
    std::size_t warmup_divergent = 0;
    for (std::size_t i = 0; i < W; ++i) {
        const auto s = kernel.transition();
        out.warmup_stats.push_back(s);
        warmup_divergent += s.divergent;
        if (config.keep_warmup_draws)
            out.warmup_draws.insert(out.warmup_draws.end(), kernel.point().q.begin(), kernel.point().q.end());
        if (config.adapt_step_size)
            kernel.set_step_size(da.learn(s.accept_stat));
        if (config.adapt_metric) {
            if (schedule.in_window(i))
                var.add(kernel.point().q);
            if (schedule.end_of_window(i)) {
                kernel.set_inv_metric(var.regularised_variance(kernel.inv_metric()));
                var.restart();
                if (config.adapt_step_size) {
                    kernel.init_step_size();
                    da.restart(kernel.step_size());
                }
            }
        }
    }
    if (W > 0 && warmup_divergent == W)
        throw SamplerError("chain " + std::to_string(chain) + ": every one of " + std::to_string(W) +
                           " warm-up transitions diverged (final step size " + std::to_string(kernel.step_size()) +
                           ")");
    if (W > 0 && config.adapt_step_size)
        kernel.set_step_size(da.final_step_size());

    out.step_size = kernel.step_size();
    out.inv_metric = kernel.inv_metric();
    out.draws.reserve(config.sampling_draws * n);
    out.stats.reserve(config.sampling_draws);
    for (std::size_t i = 0; i < config.sampling_draws; ++i) {
        out.stats.push_back(kernel.transition());
        out.draws.insert(out.draws.end(), kernel.point().q.begin(), kernel.point().q.end());
    }
    return out;
}

/// Runs all chains (in parallel threads) from the given initial points.
template <DensityTarget Target>
Trace adapt_and_sample(const Target& target, const SamplerConfig& config,
                       const std::vector<std::vector<double>>& inits)
{
    config.validate();
    if (inits.size() != config.chains)
        throw InvalidArgument("expected one initial point per chain");
    Trace trace;
    trace.dimension = target.dimension();
    trace.chains.resize(config.chains);
    std::vector<std::exception_ptr> errors(config.chains);

    const std::size_t threads = config.threads == 0 ? config.chains : std::min(config.threads, config.chains);
    auto work = [&](std::size_t first) {
        for (std::size_t c = first; c < config.chains; c += threads) {
            try {
                trace.chains[c] = run_chain(target, config, c, inits[c]);
            }
            catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        work(0);
    }
    else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(work, t);
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return trace;
}

/// As above, drawing initial points with `init(rng)` from per-chain streams.
template <DensityTarget Target>
Trace adapt_and_sample(const Target& target, const SamplerConfig& config,
                       const std::function<std::vector<double>(Rng&)>& init)
{
    std::vector<std::vector<double>> inits;
    for (std::size_t c = 0; c < config.chains; ++c) {
        auto rng = make_stream(config.seed, 2 * c + 2);
        inits.push_back(init(rng));
    }
    return adapt_and_sample(target, config, inits);
}

} // namespace frfhb
