// PnP proximal gradient iterations
//   z_{k+1} = x_k - lambda grad f(x_k),  x_{k+1} = D_run(z_{k+1})
// instrumented against the target denoiser D = prox_phi. Every iterate
// records the re-targeted objective F = lambda f + phi, its gradient, the
// exact prox gap eps_k and the Lemma-2 residual delta_k.
#pragma once

#include "core.hpp"
#include "denoisers.hpp"
#include "equivariance.hpp"
#include "fidelity.hpp"
#include "invariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pnpcert {

struct ProblemSpec {
    Fidelity fidelity;
    Denoiser target_denoiser;
    Denoiser run_denoiser;
    double lambda = 0.0;
    double sigma = 0.0;
    Vector x0;
    int iterations = 1;
};

struct IterationRecord {
    int k = 0;
    Vector x;
    Vector z;
    double F = 0.0;
    double grad_F_sq = 0.0;
    double eps = 0.0;
    std::optional<double> eps_hat;  // group-averaged plain PnP gap (equivariant runs)
    double delta_norm = 0.0;
    double x_norm = 0.0;
    double step_sq = 0.0;   // ||x_k - x_{k-1}||^2
    double prox_gap = 0.0;  // ||x_k - D(z_k)||
    std::optional<double> anisotropy;  // max_g ||V_z(g) - V_z(e)|| at z_k (equivariant runs)
};

struct TraceConstants {
    double L = 0.0;
    double L_f = 0.0;
    double lambda = 0.0;
    double F0 = 0.0;
    double F_star_lower = 0.0;
};

enum class Scheme { pgd_exact, pnp_pgd, epnp_pgd };

inline std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::pgd_exact: return "pgd_exact";
        case Scheme::pnp_pgd: return "pnp_pgd";
        case Scheme::epnp_pgd: return "epnp_pgd";
    }
    return "pnp_pgd";
}

struct SolverTrace {
    Scheme scheme = Scheme::pnp_pgd;
    Vector x0;
    double sigma = 0.0;
    int iterations = 0;
    std::vector<IterationRecord> records;
    TraceConstants constants;
};

struct RunOptions {
    double invert_tol = 1e-12;          // relative to max(1, ||x||)
    bool estimate_floor = true;         // F* from prox-point minimization of phi
    int floor_iterations = 2000;
    int floor_random_starts = 2;
    std::uint64_t floor_seed = 0;
    double floor_margin = 1e-6;
    double divergence_factor = 1e6;
};

inline void validate_problem(const ProblemSpec& spec) {
    const Index n = spec.target_denoiser.dim();
    if (spec.run_denoiser.dim() != n || spec.fidelity.dim() != n) throw ShapeError("problem: dimension mismatch");
    require_dim(spec.x0, n, "x0");
    if (!(spec.sigma > 0.0)) throw InvalidParameter("problem: sigma must be positive");
    if (!(spec.lambda > 0.0)) throw InvalidParameter("problem: lambda must be positive");
    if (spec.iterations < 1) throw InvalidParameter("problem: iterations must be at least 1");
    const double step = spec.lambda * spec.fidelity.lipschitz_grad();
    if (!(step < 1.0)) {
        throw InvalidParameter("problem: lambda * L_f = " + format_double(step) + " violates lambda * L_f < 1");
    }
    if (!(spec.target_denoiser.lipschitz() < 1.0)) {
        throw InvalidParameter("problem: target residual Lipschitz constant L = " +
                               format_double(spec.target_denoiser.lipschitz()) + " is not < 1; relax the denoiser");
    }
}

/// Prox objective gap H_z(x_hat) - min H_z, H_z(u) = 1/2||u - z||^2 + phi(u),
/// with y = D^{-1}(x_hat). The minimizer is D(z) and min H_z = g(z).
inline double prox_gap(const Denoiser& target, const Vector& z, const Vector& x_hat, const Vector& y) {
    return potential_difference(target, z, y) + 0.5 * (x_hat - z).squaredNorm() - 0.5 * (y - x_hat).squaredNorm();
}

/// phi(x) = g(y) - 1/2 ||y - x||^2 given the preimage y = D^{-1}(x).
inline double phi_from_preimage(const Denoiser& target, const Vector& x, const Vector& y) {
    return potential_g(target, y) - 0.5 * (y - x).squaredNorm();
}

/// Objective value of F = lambda f + phi at x (inverts the target).
inline double objective_value(const ProblemSpec& spec, const Vector& x, double tol_rel = 1e-12) {
    const Vector y = invert(spec.target_denoiser, x, tol_rel * std::max(1.0, x.norm()));
    return spec.lambda * spec.fidelity.value(x) + phi_from_preimage(spec.target_denoiser, x, y);
}

/// Estimate of inf phi by the prox-point iteration x <- D(x) from several
/// starts; phi(D(w)) = g(w) - 1/2 ||w - D(w)||^2 needs no inversion.
inline double estimate_phi_min(const Denoiser& target, const std::vector<Vector>& starts, int iterations) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        Vector w = s;
        for (int it = 0; it < iterations; ++it) {
            const Vector x = target.apply(w);
            best = std::min(best, potential_g(target, w) - 0.5 * (w - x).squaredNorm());
            if ((x - w).norm() <= 1e-14 * (1.0 + w.norm())) break;
            w = x;
        }
    }
    return best;
}

namespace detail {

inline const GmmPrior* underlying_prior(const Denoiser& d) {
    if (const auto* m = d.as<MmseModel>()) return &m->prior();
    if (const auto* r = d.as<RelaxedModel>()) return underlying_prior(r->base());
    return nullptr;
}

inline SolverTrace run_scheme(const ProblemSpec& spec, Scheme scheme, const RunOptions& opt) {
    validate_problem(spec);
    const Denoiser& target = spec.target_denoiser;
    const Denoiser& run = spec.run_denoiser;
    const EquivariantModel* eq = scheme == Scheme::epnp_pgd ? run.as<EquivariantModel>() : nullptr;
    const double lambda = spec.lambda;
    const auto tol_for = [&](const Vector& x) { return opt.invert_tol * std::max(1.0, x.norm()); };

    SolverTrace trace;
    trace.scheme = scheme;
    trace.x0 = spec.x0;
    trace.sigma = spec.sigma;
    trace.iterations = spec.iterations;
    trace.constants.L = target.lipschitz();
    trace.constants.L_f = spec.fidelity.lipschitz_grad();
    trace.constants.lambda = lambda;
    trace.constants.F0 = objective_value(spec, spec.x0, opt.invert_tol);
    trace.records.reserve(static_cast<std::size_t>(spec.iterations));

    const double blowup = opt.divergence_factor * (spec.x0.norm() + 1.0);
    Vector x = spec.x0;
    for (int k = 1; k <= spec.iterations; ++k) {
        IterationRecord rec;
        rec.k = k;
        try {
            const Vector z = x - lambda * spec.fidelity.gradient(x);
            const Vector xn = run.apply(z);
            if (!xn.allFinite() || xn.norm() > blowup) {
                throw DivergenceError("iterate norm exceeded " + format_double(blowup));
            }
            const Vector y = invert(target, xn, tol_for(xn), &z);
            rec.F = lambda * spec.fidelity.value(xn) + phi_from_preimage(target, xn, y);
            rec.grad_F_sq = (lambda * spec.fidelity.gradient(xn) + (y - xn)).squaredNorm();
            rec.eps = scheme == Scheme::pgd_exact ? 0.0 : prox_gap(target, z, xn, y);
            rec.delta_norm = (z - y).norm();
            rec.step_sq = (xn - x).squaredNorm();
            rec.prox_gap = (xn - target.apply(z)).norm();
            rec.x_norm = xn.norm();
            if (eq) {
                const Denoiser& plain = eq->base();
                const GroupAction& group = eq->group();
                double acc = 0.0;
                for (const auto& g : group.elements()) {
                    const Vector zg = g.apply(z);
                    const Vector xg = plain.apply(zg);
                    const Vector yg = invert(target, xg, tol_for(xg), &zg);
                    acc += prox_gap(target, zg, xg, yg);
                }
                rec.eps_hat = acc * group.weight();
                rec.anisotropy = anisotropy_witness(plain, target, group, z);
            }
            rec.z = z;
            rec.x = xn;
            x = xn;
        } catch (const NonConvergence& e) {
            throw NonConvergence("iteration " + std::to_string(k) + ": " + e.what());
        } catch (const DivergenceError& e) {
            throw DivergenceError("iteration " + std::to_string(k) + ": " + e.what());
        }
        trace.records.push_back(std::move(rec));
    }

    double observed = trace.constants.F0;
    for (const auto& r : trace.records) observed = std::min(observed, r.F);
    double floor = observed;
    if (opt.estimate_floor) {
        std::vector<Vector> starts{spec.x0, Vector::Zero(spec.x0.size()), x};
        Rng rng(opt.floor_seed);
        for (int s = 0; s < opt.floor_random_starts; ++s) {
            starts.push_back(spec.x0 + (1.0 + spec.x0.norm()) * standard_normal(rng, spec.x0.size()));
        }
        const double phi_min = estimate_phi_min(target, starts, opt.floor_iterations);
        floor = std::min(floor, lambda * spec.fidelity.lower_bound() + phi_min);
    }
    trace.constants.F_star_lower = floor - opt.floor_margin;
    return trace;
}

}  // namespace detail

/// PnP-PGD with spec.run_denoiser (matched or mismatched).
inline SolverTrace pnp_pgd_run(const ProblemSpec& spec, const RunOptions& opt = {}) {
    return detail::run_scheme(spec, Scheme::pnp_pgd, opt);
}

/// PGD with the exact prox; requires run_denoiser to be the target itself.
inline SolverTrace pgd_exact_run(const ProblemSpec& spec, const RunOptions& opt = {}) {
    if (!spec.run_denoiser.same_as(spec.target_denoiser)) {
        throw PreconditionError("pgd_exact_run: run_denoiser must be the target denoiser");
    }
    return detail::run_scheme(spec, Scheme::pgd_exact, opt);
}

/// Equivariant PnP-PGD. run_denoiser must be an exact group average over
/// `group`, and the target must be equivariant (checked through prior
/// invariance for MMSE targets).
inline SolverTrace epnp_pgd_run(const ProblemSpec& spec, const GroupAction& group, const RunOptions& opt = {},
                                double invariance_tol = 1e-9) {
    const auto* eq = spec.run_denoiser.as<EquivariantModel>();
    if (!eq) throw PreconditionError("epnp_pgd_run: run_denoiser is not an equivariant wrapper");
    if (!eq->mode().exact) throw PreconditionError("epnp_pgd_run: the wrapper must use exact group averaging");
    if (eq->group().size() != group.size() || eq->group().dim() != group.dim()) {
        throw PreconditionError("epnp_pgd_run: wrapper group differs from the supplied group");
    }
    if (const GmmPrior* prior = detail::underlying_prior(spec.target_denoiser)) {
        const auto rep = check_invariance(*prior, group, 64, invariance_tol);
        if (!rep.pass) {
            throw PreconditionError("epnp_pgd_run: prior is not invariant under group element " +
                                    std::to_string(rep.worst_element) + " (|log p(T_g x) - log p(x)| = " +
                                    format_double(rep.max_violation) + ")");
        }
    } else {
        const auto rep = check_equivariance(spec.target_denoiser, group, 64, 1e-8);
        if (!rep.pass) throw PreconditionError("epnp_pgd_run: target denoiser is not equivariant");
    }
    return detail::run_scheme(spec, Scheme::epnp_pgd, opt);
}

}  // namespace pnpcert
