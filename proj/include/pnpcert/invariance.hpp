// Sampled invariance check p(T_g x) == p(x) for a mixture prior.
#pragma once

#include "groups.hpp"
#include "priors.hpp"

#include <cmath>
#include <cstdint>

namespace pnpcert {

struct ViolationReport {
    double max_violation = 0.0;
    bool pass = true;
    std::size_t worst_element = 0;  // group index attaining max_violation
};

/// max over sampled x ~ prior and all g of |log p(T_g x) - log p(x)|.
inline ViolationReport check_invariance(const GmmPrior& prior, const GroupAction& group, std::size_t samples,
                                        double tol, std::uint64_t seed = 0) {
    if (samples < 1) throw InvalidParameter("check_invariance: samples must be at least 1");
    if (group.dim() != prior.dim()) throw ShapeError("check_invariance: group and prior dimensions differ");
    ViolationReport report;
    for (const auto& x : prior.sample(seed, samples)) {
        const double base = prior.log_density(x);
        for (std::size_t g = 0; g < group.size(); ++g) {
            const double v = std::abs(prior.log_density(group[g].apply(x)) - base);
            if (!(v <= report.max_violation)) {
                report.max_violation = v;
                report.worst_element = g;
            }
        }
    }
    report.pass = report.max_violation <= tol;
    return report;
}

}  // namespace pnpcert
