#pragma once

// Parameter layouts and the maps between unconstrained sampler coordinates
// and constrained model parameters.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "frfhb/errors.hpp"

namespace frfhb {

enum class Transform {
    identity,     // x = u
    log,          // x = exp(u), x > 0
    logit,        // x = 1 / (1 + exp(-u)), 0 < x < 1
    ordered_head, // x = exp(u), first element of a positive increasing run
    ordered_tail, // x = x_prev + exp(u), subsequent elements of that run
};

struct ParameterInfo {
    std::string name;
    std::string role; // e.g. "omega", "zeta", "A", "sigma2_H", "mu_omega"
    int domain = -1;  // -1: not domain-specific
    int mode = -1;    // -1: not mode-specific
    Transform transform = Transform::identity;
};

class Layout {
public:
    std::size_t add(ParameterInfo info)
    {
        if (index_.contains(info.name))
            throw InvalidArgument("duplicate parameter name '" + info.name + "'");
        if (info.transform == Transform::ordered_tail &&
            (entries_.empty() || (entries_.back().transform != Transform::ordered_head &&
                                  entries_.back().transform != Transform::ordered_tail)))
            throw InvalidArgument("ordered_tail must follow an ordered run");
        index_.emplace(info.name, entries_.size());
        entries_.push_back(std::move(info));
        return entries_.size() - 1;
    }

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] const ParameterInfo& operator[](std::size_t i) const { return entries_[i]; }
    [[nodiscard]] std::span<const ParameterInfo> entries() const noexcept { return entries_; }

    [[nodiscard]] bool contains(const std::string& name) const { return index_.contains(name); }

    [[nodiscard]] std::size_t index_of(const std::string& name) const
    {
        auto it = index_.find(name);
        if (it == index_.end())
            throw InvalidArgument("unknown parameter '" + name + "'");
        return it->second;
    }

    [[nodiscard]] std::vector<std::string> names() const
    {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_)
            out.push_back(e.name);
        return out;
    }

private:
    std::vector<ParameterInfo> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline double log1p_exp(double v) noexcept
{
    return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

inline double inv_logit(double u) noexcept
{
    if (u >= 0.0)
        return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

} // namespace detail

inline void constrain_into(const Layout& layout, std::span<const double> u, std::span<double> x)
{
    for (std::size_t i = 0; i < layout.size(); ++i) {
        switch (layout[i].transform) {
        case Transform::identity:
            x[i] = u[i];
            break;
        case Transform::log:
        case Transform::ordered_head:
            x[i] = std::exp(u[i]);
            break;
        case Transform::logit:
            x[i] = detail::inv_logit(u[i]);
            break;
        case Transform::ordered_tail:
            x[i] = x[i - 1] + std::exp(u[i]);
            break;
        }
    }
}

inline std::vector<double> constrain(const Layout& layout, std::span<const double> u)
{
    if (u.size() != layout.size())
        throw InvalidArgument("parameter vector length does not match layout");
    std::vector<double> x(u.size());
    constrain_into(layout, u, x);
    return x;
}

inline std::vector<double> unconstrain(const Layout& layout, std::span<const double> x)
{
    if (x.size() != layout.size())
        throw InvalidArgument("parameter vector length does not match layout");
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& e = layout[i];
        switch (e.transform) {
        case Transform::identity:
            u[i] = x[i];
            break;
        case Transform::log:
        case Transform::ordered_head:
            if (!(x[i] > 0.0))
                throw InvalidArgument(e.name + " must be positive");
            u[i] = std::log(x[i]);
            break;
        case Transform::logit:
            if (!(x[i] > 0.0 && x[i] < 1.0))
                throw InvalidArgument(e.name + " must lie in (0, 1)");
            u[i] = std::log(x[i]) - std::log1p(-x[i]);
            break;
        case Transform::ordered_tail:
            if (!(x[i] > x[i - 1]))
                throw InvalidArgument(e.name + " must exceed the preceding ordered value");
            u[i] = std::log(x[i] - x[i - 1]);
            break;
        }
    }
    return u;
}

/// log |d x / d u|.
inline double log_jacobian(const Layout& layout, std::span<const double> u)
{
    double lj = 0.0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        switch (layout[i].transform) {
        case Transform::identity:
            break;
        case Transform::log:
        case Transform::ordered_head:
        case Transform::ordered_tail:
            lj += u[i];
            break;
        case Transform::logit:
            lj -= detail::log1p_exp(-u[i]) + detail::log1p_exp(u[i]);
            break;
        }
    }
    return lj;
}

/// Maps a gradient w.r.t. constrained values to one w.r.t. unconstrained
/// coordinates and adds the gradient of the log-Jacobian.
inline void pull_back_gradient(const Layout& layout, std::span<const double> u, std::span<const double> x,
                               std::span<const double> grad_x, std::span<double> grad_u)
{
    // Ordered runs: x_j = exp(u_head) + sum_{i<=j, tail} exp(u_i), so
    // d/du_i = exp(u_i) * sum_{j >= i in run} grad_x_j. Walk backwards.
    double run_sum = 0.0;
    for (std::size_t r = layout.size(); r-- > 0;) {
        const Transform t = layout[r].transform;
        switch (t) {
        case Transform::identity:
            grad_u[r] = grad_x[r];
            break;
        case Transform::log:
            grad_u[r] = grad_x[r] * x[r] + 1.0;
            break;
        case Transform::logit:
            grad_u[r] = grad_x[r] * x[r] * (1.0 - x[r]) + (1.0 - 2.0 * x[r]);
            break;
        case Transform::ordered_tail: {
            const bool run_end = (r + 1 == layout.size()) || layout[r + 1].transform != Transform::ordered_tail;
            if (run_end)
                run_sum = 0.0;
            run_sum += grad_x[r];
            grad_u[r] = std::exp(u[r]) * run_sum + 1.0;
            break;
        }
        case Transform::ordered_head: {
            const bool run_end = (r + 1 == layout.size()) || layout[r + 1].transform != Transform::ordered_tail;
            if (run_end)
                run_sum = 0.0;
            run_sum += grad_x[r];
            grad_u[r] = x[r] * run_sum + 1.0;
            run_sum = 0.0;
            break;
        }
        }
    }
}

} // namespace frfhb
