#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "frfhb/errors.hpp"

namespace frfhb {

/// One spectral line: frequency in rad/s and the real FRF value.
struct FrfObservation {
    double omega = 0.0;
    double value = 0.0;

    friend bool operator==(const FrfObservation&, const FrfObservation&) = default;
};

/// Observations from one domain (one structure, or one temperature state).
struct FrfDomain {
    std::string name;
    std::vector<FrfObservation> points;
    std::optional<double> temperature_c;
};

/// A population of K domains.
struct FrfDataset {
    std::vector<FrfDomain> domains;

    [[nodiscard]] std::size_t size() const noexcept { return domains.size(); }

    [[nodiscard]] std::size_t total_points() const noexcept
    {
        std::size_t n = 0;
        for (const auto& d : domains)
            n += d.points.size();
        return n;
    }

    void validate() const
    {
        if (domains.empty())
            throw DataError("dataset has no domains");
        for (const auto& d : domains) {
            if (d.points.empty())
                throw DataError("domain '" + d.name + "' has no observations");
        }
    }
};

} // namespace frfhb
