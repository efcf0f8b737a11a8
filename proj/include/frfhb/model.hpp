#pragma once

// Hierarchical probabilistic models of real FRF parts for a population of
// domains. Two structures are provided:
//
//  * PopulationModel: domain-level natural frequencies and damping ratios
//    drawn from population-level distributions (truncated normal / beta) with
//    hyperpriors, shared residues and shared noise variance. Supports no,
//    partial and complete pooling.
//  * TemperatureModel: a single structure observed at several temperatures,
//    with natural frequency polynomial and damping linear in temperature.
//
// Both expose the log-posterior and its exact gradient in unconstrained space.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "frfhb/data.hpp"
#include "frfhb/distributions.hpp"
#include "frfhb/errors.hpp"
#include "frfhb/modal.hpp"
#include "frfhb/random.hpp"
#include "frfhb/transforms.hpp"

namespace frfhb {

enum class PoolingMode { none, partial, complete };

inline std::string to_string(PoolingMode p)
{
    switch (p) {
    case PoolingMode::none:
        return "none";
    case PoolingMode::partial:
        return "partial";
    case PoolingMode::complete:
        return "complete";
    }
    return "?";
}

inline PoolingMode parse_pooling(const std::string& s)
{
    if (s == "none" || s == "no_pooling")
        return PoolingMode::none;
    if (s == "partial" || s == "partial_pooling")
        return PoolingMode::partial;
    if (s == "complete" || s == "complete_pooling")
        return PoolingMode::complete;
    throw InvalidArgument("unknown pooling mode '" + s + "'");
}

/// Priors of the multi-structure model. Vectors hold one entry per mode.
struct HierarchySpec {
    std::size_t modes = 2;
    std::vector<PriorSpec> mu_omega;
    std::vector<PriorSpec> sigma2_omega;
    std::vector<PriorSpec> alpha_zeta;
    std::vector<PriorSpec> beta_zeta;
    std::vector<PriorSpec> mu_A;
    std::vector<PriorSpec> sigma2_A;
    PriorSpec mu_sigma2 = PriorSpec::truncated_normal(0.0, 100.0 * 100.0);
    PriorSpec sigma2_sigma2 = PriorSpec::truncated_normal(100.0, 100.0 * 100.0);
    bool share_residues = true;
    bool share_noise = true;
    bool ordered_frequencies = true;

    /// Two-mode hyperpriors used for the helicopter-blade population (rad/s).
    static HierarchySpec defaults()
    {
        HierarchySpec s;
        s.modes = 2;
        s.mu_omega = {PriorSpec::truncated_normal(190.0, 25.0), PriorSpec::truncated_normal(335.0, 25.0)};
        s.sigma2_omega.assign(2, PriorSpec::truncated_normal(5.0, 25.0));
        s.alpha_zeta.assign(2, PriorSpec::truncated_normal(6.0, 0.25));
        s.beta_zeta.assign(2, PriorSpec::truncated_normal(1000.0, 100.0));
        s.mu_A.assign(2, PriorSpec::normal(-0.004, 0.003 * 0.003));
        s.sigma2_A.assign(2, PriorSpec::truncated_normal(0.003, 0.003 * 0.003));
        return s;
    }

    void validate() const
    {
        if (modes < 1)
            throw InvalidArgument("hierarchy needs at least one mode");
        const auto check = [&](const std::vector<PriorSpec>& v, const char* what) {
            if (v.size() != modes)
                throw InvalidArgument(std::string(what) + ": expected one prior per mode");
            for (const auto& p : v)
                p.validate(what);
        };
        check(mu_omega, "mu_omega");
        check(sigma2_omega, "sigma2_omega");
        check(alpha_zeta, "alpha_zeta");
        check(beta_zeta, "beta_zeta");
        check(mu_A, "mu_A");
        check(sigma2_A, "sigma2_A");
        mu_sigma2.validate("mu_sigma2");
        sigma2_sigma2.validate("sigma2_sigma2");
    }
};

/// Priors of the temperature-conditioned single-mode model.
struct TemperatureSpec {
    std::size_t frequency_order = 2;
    std::size_t damping_order = 1;
    PriorSpec mu_omega = PriorSpec::truncated_normal(910.0, 100.0);
    PriorSpec mu_zeta = PriorSpec::truncated_normal(0.01, 1.0);
    std::vector<PriorSpec> a = {PriorSpec::normal(-0.01, 1.0), PriorSpec::normal(0.001, 1.0)};
    std::vector<PriorSpec> b = {PriorSpec::normal(-5e-6, 1.0)};
    PriorSpec mu_A = PriorSpec::normal(-0.008, 0.002 * 0.002);
    PriorSpec sigma2_A = PriorSpec::truncated_normal(0.002, 0.002 * 0.002);
    PriorSpec sigma2_H = PriorSpec::truncated_normal(0.3, 1.0);
    /// Sample mu_A and sigma2_A; otherwise A ~ N(mu_A.p1, sigma2_A.p1) with fixed constants.
    bool sample_residue_hyper = true;

    static TemperatureSpec defaults() { return {}; }

    void validate() const
    {
        if (frequency_order < 1 || damping_order < 1)
            throw InvalidArgument("temperature polynomial orders must be at least 1");
        if (a.size() != frequency_order)
            throw InvalidArgument("expected one frequency coefficient prior per polynomial order");
        if (b.size() != damping_order)
            throw InvalidArgument("expected one damping coefficient prior per polynomial order");
        mu_omega.validate("mu_omega");
        mu_zeta.validate("mu_zeta");
        for (const auto& p : a)
            p.validate("a");
        for (const auto& p : b)
            p.validate("b");
        mu_A.validate("mu_A");
        sigma2_A.validate("sigma2_A");
        sigma2_H.validate("sigma2_H");
    }
};

using ModelSpec = std::variant<HierarchySpec, TemperatureSpec>;

/// Common interface consumed by the sampler and the analysis routines.
class HierarchicalModel {
public:
    virtual ~HierarchicalModel() = default;

    [[nodiscard]] const Layout& layout() const noexcept { return layout_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return layout_.size(); }
    [[nodiscard]] const FrfDataset& data() const noexcept { return data_; }
    [[nodiscard]] std::size_t domain_count() const noexcept { return data_.size(); }

    /// log p(data | x) for constrained x.
    [[nodiscard]] double log_likelihood(std::span<const double> x) const { return evaluate(x, {}, true, false); }

    /// log p(x) for constrained x.
    [[nodiscard]] double log_prior(std::span<const double> x) const { return evaluate(x, {}, false, true); }

    /// Unnormalised log posterior in unconstrained space, including the
    /// log-Jacobian, and its gradient. Returns -inf and a zero gradient for
    /// states where the density cannot be evaluated.
    double log_density(std::span<const double> u, std::span<double> grad) const
    {
        const std::size_t n = dimension();
        std::vector<double> x(n), grad_x(n, 0.0);
        constrain_into(layout_, u, x);
        double lp = evaluate(x, grad_x, true, true);
        if (std::isfinite(lp)) {
            lp += log_jacobian(layout_, u);
            pull_back_gradient(layout_, u, x, grad_x, grad);
            bool finite = std::isfinite(lp);
            for (double g : grad)
                finite = finite && std::isfinite(g);
            if (finite)
                return lp;
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        return neg_inf;
    }

    [[nodiscard]] std::pair<double, std::vector<double>> log_posterior_and_gradient(std::span<const double> u) const
    {
        if (u.size() != dimension())
            throw InvalidArgument("parameter vector length does not match layout");
        for (double v : u)
            if (!std::isfinite(v))
                throw InvalidArgument("unconstrained parameters must be finite");
        std::vector<double> g(dimension());
        const double lp = log_density(u, g);
        return {lp, std::move(g)};
    }

    /// Modal parameters of data domain k implied by constrained x.
    [[nodiscard]] virtual std::vector<Mode> domain_modes(std::span<const double> x, std::size_t k) const = 0;

    /// Noise variance applying to data domain k.
    [[nodiscard]] virtual double noise_variance(std::span<const double> x, std::size_t k) const = 0;

    /// Constrained starting point built from prior means.
    [[nodiscard]] virtual std::vector<double> prior_mean_point() const = 0;

    /// Prior-mean point jittered uniformly by +-10% in unconstrained space.
    /// Prior-mean start perturbed by up to 10%: multiplicatively for positive
    /// and bounded parameters, relatively for unbounded ones. Perturbations
    /// that leave the support are redrawn.
    [[nodiscard]] std::vector<double> initial_point(Rng& rng) const
    {
        const auto base = unconstrain(layout_, prior_mean_point());
        std::uniform_real_distribution<double> jitter(-0.1, 0.1);
        std::vector<double> grad(base.size());
        for (int attempt = 0; attempt < 100; ++attempt) {
            auto u = base;
            for (std::size_t i = 0; i < u.size(); ++i)
                u[i] += layout_[i].transform == Transform::identity ? jitter(rng) * u[i] : jitter(rng);
            if (std::isfinite(log_density(u, grad)))
                return u;
        }
        return base;
    }

protected:
    explicit HierarchicalModel(FrfDataset data) : data_(std::move(data)) { data_.validate(); }

    // Adds d/dx of the selected terms into grad_x when non-empty.
    virtual double evaluate(std::span<const double> x, std::span<double> grad_x, bool likelihood,
                            bool prior) const = 0;

    /// Gaussian log-likelihood of one domain given its modes; accumulates
    /// partials into the per-mode (wn, zeta, A) slots and d/dvar.
    double domain_log_likelihood(const FrfDomain& domain, std::span<const Mode> modes, double var,
                                 std::span<ModePartials> mode_grad, double* d_var) const
    {
        if (!(var > 0.0) || !std::isfinite(var))
            return neg_inf;
        const double inv_var = 1.0 / var;
        const double log_norm = -half_log_two_pi - 0.5 * std::log(var);
        double lp = 0.0;
        double sum_r2 = 0.0;
        const bool want_grad = !mode_grad.empty();
        for (const auto& obs : domain.points) {
            const double w = obs.omega;
            const double f = frf_real_at(modes, w);
            const double r = obs.value - f;
            sum_r2 += r * r;
            if (want_grad) {
                const double df = r * inv_var;
                for (std::size_t m = 0; m < modes.size(); ++m) {
                    const auto p = frf_real_partials_at(modes[m], w);
                    mode_grad[m].natural_frequency += df * p.natural_frequency;
                    mode_grad[m].damping_ratio += df * p.damping_ratio;
                    mode_grad[m].residue += df * p.residue;
                }
            }
        }
        const auto n = static_cast<double>(domain.points.size());
        lp = n * log_norm - 0.5 * sum_r2 * inv_var;
        if (d_var)
            *d_var += -0.5 * n * inv_var + 0.5 * sum_r2 * inv_var * inv_var;
        return lp;
    }

    static void add_prior(double& lp, std::span<double> grad_x, std::size_t idx, const PriorSpec& prior, double x)
    {
        const auto [v, d] = prior.lpdf(x);
        lp += v;
        if (!grad_x.empty())
            grad_x[idx] += d;
    }

    Layout layout_;
    FrfDataset data_;
};

/// Multi-structure model with optional partial pooling.
class PopulationModel final : public HierarchicalModel {
public:
    PopulationModel(FrfDataset data, HierarchySpec spec, PoolingMode pooling)
        : HierarchicalModel(std::move(data)), spec_(std::move(spec)), pooling_(pooling)
    {
        spec_.validate();
        const std::size_t K = data_.size();
        const std::size_t M = spec_.modes;

        const bool none = pooling_ == PoolingMode::none;
        const bool complete = pooling_ == PoolingMode::complete;
        const std::size_t n_param_domains = complete ? 1 : K;
        const std::size_t n_residue_groups = complete ? 1 : ((none || !spec_.share_residues) ? K : 1);
        const std::size_t n_noise_groups = complete ? 1 : ((none || !spec_.share_noise) ? K : 1);
        const std::size_t n_hyper_groups = none ? K : 1;

        for (std::size_t k = 0; k < K; ++k) {
            param_domain_.push_back(complete ? 0 : k);
            residue_group_.push_back(n_residue_groups == 1 ? 0 : k);
            noise_group_.push_back(n_noise_groups == 1 ? 0 : k);
        }
        const auto hyper_of = [&](std::size_t g) { return n_hyper_groups == 1 ? std::size_t{0} : g; };

        const auto tag = [](std::size_t count, std::size_t idx) {
            return count > 1 ? std::to_string(idx + 1) + "," : std::string{};
        };
        const auto tag_only = [](std::size_t count, std::size_t idx) {
            return count > 1 ? "[" + std::to_string(idx + 1) + "]" : std::string{};
        };

        omega_idx_.assign(n_param_domains, std::vector<std::size_t>(M));
        zeta_idx_.assign(n_param_domains, std::vector<std::size_t>(M));
        for (std::size_t p = 0; p < n_param_domains; ++p) {
            for (std::size_t m = 0; m < M; ++m) {
                Transform t = Transform::log;
                if (spec_.ordered_frequencies)
                    t = (m == 0) ? Transform::ordered_head : Transform::ordered_tail;
                omega_idx_[p][m] = layout_.add({"omega[" + tag(n_param_domains, p) + std::to_string(m + 1) + "]",
                                                "omega", static_cast<int>(p), static_cast<int>(m), t});
            }
        }
        for (std::size_t p = 0; p < n_param_domains; ++p)
            for (std::size_t m = 0; m < M; ++m)
                zeta_idx_[p][m] = layout_.add({"zeta[" + tag(n_param_domains, p) + std::to_string(m + 1) + "]",
                                               "zeta", static_cast<int>(p), static_cast<int>(m), Transform::logit});
        residue_idx_.assign(n_residue_groups, std::vector<std::size_t>(M));
        for (std::size_t r = 0; r < n_residue_groups; ++r)
            for (std::size_t m = 0; m < M; ++m)
                residue_idx_[r][m] = layout_.add({"A[" + tag(n_residue_groups, r) + std::to_string(m + 1) + "]", "A",
                                                  n_residue_groups > 1 ? static_cast<int>(r) : -1,
                                                  static_cast<int>(m), Transform::identity});
        for (std::size_t g = 0; g < n_noise_groups; ++g)
            noise_idx_.push_back(layout_.add({"sigma2_H" + tag_only(n_noise_groups, g), "sigma2_H",
                                              n_noise_groups > 1 ? static_cast<int>(g) : -1, -1, Transform::log}));

        hyper_.resize(n_hyper_groups);
        for (std::size_t h = 0; h < n_hyper_groups; ++h) {
            auto& hy = hyper_[h];
            const auto add_modal = [&](const char* role, Transform t, std::vector<std::size_t>& dst) {
                for (std::size_t m = 0; m < M; ++m)
                    dst.push_back(layout_.add({std::string(role) + "[" + tag(n_hyper_groups, h) +
                                                   std::to_string(m + 1) + "]",
                                               role, n_hyper_groups > 1 ? static_cast<int>(h) : -1,
                                               static_cast<int>(m), t}));
            };
            add_modal("mu_omega", Transform::log, hy.mu_omega);
            add_modal("sigma2_omega", Transform::log, hy.sigma2_omega);
            add_modal("alpha_zeta", Transform::log, hy.alpha_zeta);
            add_modal("beta_zeta", Transform::log, hy.beta_zeta);
            add_modal("mu_A", Transform::identity, hy.mu_A);
            add_modal("sigma2_A", Transform::log, hy.sigma2_A);
        }
        for (std::size_t h = 0; h < n_hyper_groups; ++h) {
            hyper_[h].mu_sigma2 = layout_.add({"mu_sigma2" + tag_only(n_hyper_groups, h), "mu_sigma2",
                                               n_hyper_groups > 1 ? static_cast<int>(h) : -1, -1, Transform::log});
            hyper_[h].sigma2_sigma2 =
                layout_.add({"sigma2_sigma2" + tag_only(n_hyper_groups, h), "sigma2_sigma2",
                             n_hyper_groups > 1 ? static_cast<int>(h) : -1, -1, Transform::log});
        }
        for (std::size_t p = 0; p < n_param_domains; ++p)
            param_domain_hyper_.push_back(hyper_of(p));
        for (std::size_t r = 0; r < n_residue_groups; ++r)
            residue_hyper_.push_back(hyper_of(r));
        for (std::size_t g = 0; g < n_noise_groups; ++g)
            noise_hyper_.push_back(hyper_of(g));
    }

    [[nodiscard]] const HierarchySpec& spec() const noexcept { return spec_; }
    [[nodiscard]] PoolingMode pooling() const noexcept { return pooling_; }
    [[nodiscard]] std::size_t modes() const noexcept { return spec_.modes; }

    [[nodiscard]] std::vector<Mode> domain_modes(std::span<const double> x, std::size_t k) const override
    {
        const std::size_t p = param_domain_.at(k);
        const std::size_t r = residue_group_.at(k);
        std::vector<Mode> out(spec_.modes);
        for (std::size_t m = 0; m < spec_.modes; ++m)
            out[m] = {x[omega_idx_[p][m]], x[zeta_idx_[p][m]], x[residue_idx_[r][m]]};
        return out;
    }

    [[nodiscard]] double noise_variance(std::span<const double> x, std::size_t k) const override
    {
        return x[noise_idx_[noise_group_.at(k)]];
    }

    [[nodiscard]] std::vector<double> prior_mean_point() const override
    {
        std::vector<double> x(dimension());
        for (std::size_t h = 0; h < hyper_.size(); ++h) {
            const auto& hy = hyper_[h];
            for (std::size_t m = 0; m < spec_.modes; ++m) {
                x[hy.mu_omega[m]] = spec_.mu_omega[m].mean();
                x[hy.sigma2_omega[m]] = spec_.sigma2_omega[m].mean();
                x[hy.alpha_zeta[m]] = spec_.alpha_zeta[m].mean();
                x[hy.beta_zeta[m]] = spec_.beta_zeta[m].mean();
                x[hy.mu_A[m]] = spec_.mu_A[m].mean();
                x[hy.sigma2_A[m]] = spec_.sigma2_A[m].mean();
            }
            x[hy.mu_sigma2] = spec_.mu_sigma2.mean();
            x[hy.sigma2_sigma2] = spec_.sigma2_sigma2.mean();
        }
        for (std::size_t p = 0; p < omega_idx_.size(); ++p) {
            const auto& hy = hyper_[param_domain_hyper_[p]];
            for (std::size_t m = 0; m < spec_.modes; ++m) {
                const double mu = PriorSpec::truncated_normal(x[hy.mu_omega[m]], x[hy.sigma2_omega[m]]).mean();
                x[omega_idx_[p][m]] = (m > 0) ? std::max(mu, x[omega_idx_[p][m - 1]] * 1.01) : mu;
                x[zeta_idx_[p][m]] = x[hy.alpha_zeta[m]] / (x[hy.alpha_zeta[m]] + x[hy.beta_zeta[m]]);
            }
        }
        for (std::size_t r = 0; r < residue_idx_.size(); ++r)
            for (std::size_t m = 0; m < spec_.modes; ++m)
                x[residue_idx_[r][m]] = x[hyper_[residue_hyper_[r]].mu_A[m]];
        for (std::size_t g = 0; g < noise_idx_.size(); ++g) {
            const auto& hy = hyper_[noise_hyper_[g]];
            x[noise_idx_[g]] = PriorSpec::truncated_normal(x[hy.mu_sigma2], x[hy.sigma2_sigma2]).mean();
        }
        return x;
    }

protected:
    double evaluate(std::span<const double> x, std::span<double> grad_x, bool likelihood, bool prior) const override
    {
        const bool want_grad = !grad_x.empty();
        double lp = 0.0;
        const std::size_t M = spec_.modes;

        if (prior) {
            for (std::size_t h = 0; h < hyper_.size(); ++h) {
                const auto& hy = hyper_[h];
                for (std::size_t m = 0; m < M; ++m) {
                    add_prior(lp, grad_x, hy.mu_omega[m], spec_.mu_omega[m], x[hy.mu_omega[m]]);
                    add_prior(lp, grad_x, hy.sigma2_omega[m], spec_.sigma2_omega[m], x[hy.sigma2_omega[m]]);
                    add_prior(lp, grad_x, hy.alpha_zeta[m], spec_.alpha_zeta[m], x[hy.alpha_zeta[m]]);
                    add_prior(lp, grad_x, hy.beta_zeta[m], spec_.beta_zeta[m], x[hy.beta_zeta[m]]);
                    add_prior(lp, grad_x, hy.mu_A[m], spec_.mu_A[m], x[hy.mu_A[m]]);
                    add_prior(lp, grad_x, hy.sigma2_A[m], spec_.sigma2_A[m], x[hy.sigma2_A[m]]);
                }
                add_prior(lp, grad_x, hy.mu_sigma2, spec_.mu_sigma2, x[hy.mu_sigma2]);
                add_prior(lp, grad_x, hy.sigma2_sigma2, spec_.sigma2_sigma2, x[hy.sigma2_sigma2]);
            }
            // parameter-only normalisers, shared by the domains of a hyper group
            std::vector<TruncationTerm> omega_norm(hyper_.size() * M);
            std::vector<BetaNormaliser> zeta_norm(hyper_.size() * M);
            for (std::size_t h = 0; h < hyper_.size(); ++h)
                for (std::size_t m = 0; m < M; ++m) {
                    const auto& hy = hyper_[h];
                    omega_norm[h * M + m] = truncation_term(x[hy.mu_omega[m]], x[hy.sigma2_omega[m]]);
                    zeta_norm[h * M + m] = beta_normaliser(x[hy.alpha_zeta[m]], x[hy.beta_zeta[m]]);
                }
            for (std::size_t p = 0; p < omega_idx_.size(); ++p) {
                const std::size_t h = param_domain_hyper_[p];
                const auto& hy = hyper_[h];
                for (std::size_t m = 0; m < M; ++m) {
                    const std::size_t iw = omega_idx_[p][m];
                    const auto g = truncated_normal_lpdf(x[iw], x[hy.mu_omega[m]], x[hy.sigma2_omega[m]],
                                                         omega_norm[h * M + m]);
                    lp += g.value;
                    const std::size_t iz = zeta_idx_[p][m];
                    const auto bz = beta_lpdf(x[iz], x[hy.alpha_zeta[m]], x[hy.beta_zeta[m]], zeta_norm[h * M + m]);
                    lp += bz.value;
                    if (want_grad) {
                        grad_x[iw] += g.d_x;
                        grad_x[hy.mu_omega[m]] += g.d_mean;
                        grad_x[hy.sigma2_omega[m]] += g.d_var;
                        grad_x[iz] += bz.d_x;
                        grad_x[hy.alpha_zeta[m]] += bz.d_alpha;
                        grad_x[hy.beta_zeta[m]] += bz.d_beta;
                    }
                }
            }
            for (std::size_t r = 0; r < residue_idx_.size(); ++r) {
                const auto& hy = hyper_[residue_hyper_[r]];
                for (std::size_t m = 0; m < M; ++m) {
                    const std::size_t ia = residue_idx_[r][m];
                    const auto g = normal_lpdf(x[ia], x[hy.mu_A[m]], x[hy.sigma2_A[m]]);
                    lp += g.value;
                    if (want_grad) {
                        grad_x[ia] += g.d_x;
                        grad_x[hy.mu_A[m]] += g.d_mean;
                        grad_x[hy.sigma2_A[m]] += g.d_var;
                    }
                }
            }
            for (std::size_t gi = 0; gi < noise_idx_.size(); ++gi) {
                const auto& hy = hyper_[noise_hyper_[gi]];
                const std::size_t in = noise_idx_[gi];
                const auto g = truncated_normal_lpdf(x[in], x[hy.mu_sigma2], x[hy.sigma2_sigma2]);
                lp += g.value;
                if (want_grad) {
                    grad_x[in] += g.d_x;
                    grad_x[hy.mu_sigma2] += g.d_mean;
                    grad_x[hy.sigma2_sigma2] += g.d_var;
                }
            }
            if (!std::isfinite(lp))
                return neg_inf;
        }

        if (likelihood) {
            std::vector<Mode> modes(M);
            std::vector<ModePartials> mg(want_grad ? M : 0);
            for (std::size_t k = 0; k < data_.size(); ++k) {
                const std::size_t p = param_domain_[k];
                const std::size_t r = residue_group_[k];
                const std::size_t in = noise_idx_[noise_group_[k]];
                for (std::size_t m = 0; m < M; ++m)
                    modes[m] = {x[omega_idx_[p][m]], x[zeta_idx_[p][m]], x[residue_idx_[r][m]]};
                std::fill(mg.begin(), mg.end(), ModePartials{0.0, 0.0, 0.0});
                double d_var = 0.0;
                lp += domain_log_likelihood(data_.domains[k], modes, x[in], mg, want_grad ? &d_var : nullptr);
                if (want_grad) {
                    for (std::size_t m = 0; m < M; ++m) {
                        grad_x[omega_idx_[p][m]] += mg[m].natural_frequency;
                        grad_x[zeta_idx_[p][m]] += mg[m].damping_ratio;
                        grad_x[residue_idx_[r][m]] += mg[m].residue;
                    }
                    grad_x[in] += d_var;
                }
            }
        }
        return std::isfinite(lp) ? lp : neg_inf;
    }

private:
    struct HyperIndices {
        std::vector<std::size_t> mu_omega, sigma2_omega, alpha_zeta, beta_zeta, mu_A, sigma2_A;
        std::size_t mu_sigma2 = 0;
        std::size_t sigma2_sigma2 = 0;
    };

    HierarchySpec spec_;
    PoolingMode pooling_;
    std::vector<std::size_t> param_domain_, residue_group_, noise_group_;
    std::vector<std::size_t> param_domain_hyper_, residue_hyper_, noise_hyper_;
    std::vector<std::vector<std::size_t>> omega_idx_, zeta_idx_, residue_idx_;
    std::vector<std::size_t> noise_idx_;
    std::vector<HyperIndices> hyper_;
};

/// Coefficients of the temperature laws, in the units of the model (rad/s).
struct TemperatureLaw {
    double mu_omega = 0.0;
    std::vector<double> a; // a[j] multiplies T^(j+1)
    double mu_zeta = 0.0;
    std::vector<double> b;

    [[nodiscard]] double natural_frequency(double t) const noexcept { return mu_omega + polynomial(a, t); }
    [[nodiscard]] double damping_ratio(double t) const noexcept { return mu_zeta + polynomial(b, t); }

    static double polynomial(std::span<const double> c, double t) noexcept
    {
        double acc = 0.0;
        double tp = t;
        for (double cj : c) {
            acc += cj * tp;
            tp *= t;
        }
        return acc;
    }
};

/// Single-mode model whose natural frequency and damping follow polynomial
/// laws in temperature, with a temperature-invariant residue.
class TemperatureModel final : public HierarchicalModel {
public:
    TemperatureModel(FrfDataset data, TemperatureSpec spec) : HierarchicalModel(std::move(data)), spec_(std::move(spec))
    {
        spec_.validate();
        for (const auto& d : data_.domains) {
            if (!d.temperature_c)
                throw DataError("domain '" + d.name + "' has no temperature tag");
            if (!std::isfinite(*d.temperature_c))
                throw DataError("domain '" + d.name + "' has a non-finite temperature");
            temperatures_.push_back(*d.temperature_c);
        }
        mu_omega_ = layout_.add({"mu_omega", "mu_omega", -1, 0, Transform::log});
        mu_zeta_ = layout_.add({"mu_zeta", "mu_zeta", -1, 0, Transform::log});
        for (std::size_t j = 0; j < spec_.frequency_order; ++j)
            a_.push_back(layout_.add({"a" + std::to_string(j + 1), "a", -1, 0, Transform::identity}));
        for (std::size_t j = 0; j < spec_.damping_order; ++j)
            b_.push_back(layout_.add({spec_.damping_order == 1 ? std::string("b") : "b" + std::to_string(j + 1), "b",
                                      -1, 0, Transform::identity}));
        residue_ = layout_.add({"A", "A", -1, 0, Transform::identity});
        noise_ = layout_.add({"sigma2_H", "sigma2_H", -1, -1, Transform::log});
        if (spec_.sample_residue_hyper) {
            mu_A_ = layout_.add({"mu_A", "mu_A", -1, 0, Transform::identity});
            sigma2_A_ = layout_.add({"sigma2_A", "sigma2_A", -1, 0, Transform::log});
        }
    }

    [[nodiscard]] const TemperatureSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] std::span<const double> temperatures() const noexcept { return temperatures_; }

    [[nodiscard]] TemperatureLaw law(std::span<const double> x) const
    {
        TemperatureLaw l;
        l.mu_omega = x[mu_omega_];
        l.mu_zeta = x[mu_zeta_];
        for (auto i : a_)
            l.a.push_back(x[i]);
        for (auto i : b_)
            l.b.push_back(x[i]);
        return l;
    }

    [[nodiscard]] double residue(std::span<const double> x) const { return x[residue_]; }

    [[nodiscard]] std::vector<Mode> modes_at(std::span<const double> x, double temperature_c) const
    {
        const auto l = law(x);
        return {Mode{l.natural_frequency(temperature_c), l.damping_ratio(temperature_c), x[residue_]}};
    }

    [[nodiscard]] std::vector<Mode> domain_modes(std::span<const double> x, std::size_t k) const override
    {
        return modes_at(x, temperatures_.at(k));
    }

    [[nodiscard]] double noise_variance(std::span<const double> x, std::size_t) const override { return x[noise_]; }

    [[nodiscard]] std::vector<double> prior_mean_point() const override
    {
        std::vector<double> x(dimension());
        x[mu_omega_] = spec_.mu_omega.mean();
        x[mu_zeta_] = spec_.mu_zeta.p1 > 0.0 ? spec_.mu_zeta.p1 : spec_.mu_zeta.mean();
        for (std::size_t j = 0; j < a_.size(); ++j)
            x[a_[j]] = spec_.a[j].mean();
        for (std::size_t j = 0; j < b_.size(); ++j)
            x[b_[j]] = spec_.b[j].mean();
        x[residue_] = spec_.mu_A.mean();
        x[noise_] = spec_.sigma2_H.mean();
        if (spec_.sample_residue_hyper) {
            x[mu_A_] = spec_.mu_A.mean();
            x[sigma2_A_] = spec_.sigma2_A.mean();
        }
        // keep the starting damping inside (0, 1) at every training temperature
        const auto l = law(x);
        for (double t : temperatures_) {
            if (!(l.damping_ratio(t) > 0.0 && l.damping_ratio(t) < 1.0)) {
                for (auto i : b_)
                    x[i] = 0.0;
                break;
            }
        }
        return x;
    }

protected:
    double evaluate(std::span<const double> x, std::span<double> grad_x, bool likelihood, bool prior) const override
    {
        const bool want_grad = !grad_x.empty();
        double lp = 0.0;
        if (prior) {
            add_prior(lp, grad_x, mu_omega_, spec_.mu_omega, x[mu_omega_]);
            add_prior(lp, grad_x, mu_zeta_, spec_.mu_zeta, x[mu_zeta_]);
            for (std::size_t j = 0; j < a_.size(); ++j)
                add_prior(lp, grad_x, a_[j], spec_.a[j], x[a_[j]]);
            for (std::size_t j = 0; j < b_.size(); ++j)
                add_prior(lp, grad_x, b_[j], spec_.b[j], x[b_[j]]);
            add_prior(lp, grad_x, noise_, spec_.sigma2_H, x[noise_]);
            if (spec_.sample_residue_hyper) {
                add_prior(lp, grad_x, mu_A_, spec_.mu_A, x[mu_A_]);
                add_prior(lp, grad_x, sigma2_A_, spec_.sigma2_A, x[sigma2_A_]);
                const auto g = normal_lpdf(x[residue_], x[mu_A_], x[sigma2_A_]);
                lp += g.value;
                if (want_grad) {
                    grad_x[residue_] += g.d_x;
                    grad_x[mu_A_] += g.d_mean;
                    grad_x[sigma2_A_] += g.d_var;
                }
            }
            else {
                const auto g = normal_lpdf(x[residue_], spec_.mu_A.p1, spec_.sigma2_A.p1);
                lp += g.value;
                if (want_grad)
                    grad_x[residue_] += g.d_x;
            }
            if (!std::isfinite(lp))
                return neg_inf;
        }

        if (likelihood) {
            const auto l = law(x);
            std::vector<ModePartials> mg(want_grad ? 1 : 0);
            for (std::size_t k = 0; k < data_.size(); ++k) {
                const double t = temperatures_[k];
                const Mode mode{l.natural_frequency(t), l.damping_ratio(t), x[residue_]};
                if (!(mode.natural_frequency > 0.0) || !(mode.damping_ratio > 0.0 && mode.damping_ratio < 1.0))
                    return neg_inf;
                std::fill(mg.begin(), mg.end(), ModePartials{0.0, 0.0, 0.0});
                double d_var = 0.0;
                lp += domain_log_likelihood(data_.domains[k], std::span<const Mode>(&mode, 1), x[noise_], mg,
                                            want_grad ? &d_var : nullptr);
                if (want_grad) {
                    const double dw = mg[0].natural_frequency;
                    const double dz = mg[0].damping_ratio;
                    grad_x[mu_omega_] += dw;
                    grad_x[mu_zeta_] += dz;
                    double tp = t;
                    for (auto i : a_) {
                        grad_x[i] += dw * tp;
                        tp *= t;
                    }
                    tp = t;
                    for (auto i : b_) {
                        grad_x[i] += dz * tp;
                        tp *= t;
                    }
                    grad_x[residue_] += mg[0].residue;
                    grad_x[noise_] += d_var;
                }
            }
        }
        return std::isfinite(lp) ? lp : neg_inf;
    }

private:
    TemperatureSpec spec_;
    std::vector<double> temperatures_;
    std::size_t mu_omega_ = 0, mu_zeta_ = 0, residue_ = 0, noise_ = 0, mu_A_ = 0, sigma2_A_ = 0;
    std::vector<std::size_t> a_, b_;
};

/// Builds the model for `data` under `spec` and `pooling`.
inline std::unique_ptr<HierarchicalModel> build_model(FrfDataset data, const ModelSpec& spec, PoolingMode pooling)
{
    if (const auto* h = std::get_if<HierarchySpec>(&spec))
        return std::make_unique<PopulationModel>(std::move(data), *h, pooling);
    if (pooling != PoolingMode::partial)
        throw InvalidArgument("the temperature model supports partial pooling only");
    return std::make_unique<TemperatureModel>(std::move(data), std::get<TemperatureSpec>(spec));
}

} // namespace frfhb
