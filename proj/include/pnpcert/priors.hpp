// Gaussian mixture priors on R^n: density, Gaussian smoothing, score,
// Hessian of the log-density, sampling and group symmetrization.
//
// Everything downstream (the MMSE denoiser, its residual Jacobian, the
// potential g) is expressed through these closed forms.
#pragma once

#include "core.hpp"
#include "groups.hpp"

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace pnpcert {

struct GaussianComponent {
    double weight = 0.0;
    Vector mean;
    Matrix cov;
};

class GmmPrior {
public:
    static constexpr double kWeightTol = 1e-12;
    static constexpr double kSymmetryTol = 1e-12;

    GmmPrior(Index dim, std::vector<GaussianComponent> components) : dim_(dim), components_(std::move(components)) {
        if (dim_ < 1) throw InvalidParameter("GmmPrior: dimension must be positive");
        if (components_.empty()) throw InvalidParameter("GmmPrior: at least one component required");
        double total = 0.0;
        const double log2pi = std::log(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < components_.size(); ++i) {
            const auto& c = components_[i];
            const std::string tag = "GmmPrior component " + std::to_string(i);
            if (!(c.weight > 0.0)) throw InvalidParameter(tag + ": weight must be positive");
            if (c.mean.size() != dim_) throw ShapeError(tag + ": mean has wrong dimension");
            if (c.cov.rows() != dim_ || c.cov.cols() != dim_) throw ShapeError(tag + ": covariance has wrong shape");
            if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
                throw InvalidParameter(tag + ": covariance is not symmetric");
            }
            Eigen::SelfAdjointEigenSolver<Matrix> es(c.cov, Eigen::EigenvaluesOnly);
            if (!(es.eigenvalues().minCoeff() > 0.0)) {
                throw InvalidParameter(tag + ": covariance is not positive definite");
            }
            total += c.weight;

            Cache cache;
            cache.chol.compute(c.cov);
            cache.precision = cache.chol.solve(Matrix::Identity(dim_, dim_));
            cache.precision = 0.5 * (cache.precision + cache.precision.transpose());
            const Vector diag = cache.chol.matrixLLT().diagonal();
            const double logdet = 2.0 * diag.array().log().sum();
            cache.log_norm = std::log(c.weight) - 0.5 * (static_cast<double>(dim_) * log2pi + logdet);
            cache.max_precision_eig = 1.0 / es.eigenvalues().minCoeff();
            caches_.push_back(std::move(cache));
        }
        if (std::abs(total - 1.0) > kWeightTol) {
            throw InvalidParameter("GmmPrior: weights sum to " + format_double(total) + ", expected 1");
        }
    }

    Index dim() const { return dim_; }
    std::size_t size() const { return components_.size(); }
    const std::vector<GaussianComponent>& components() const { return components_; }
    const GaussianComponent& component(std::size_t i) const { return components_[i]; }
    const Matrix& precision(std::size_t i) const { return caches_[i].precision; }
    /// Largest eigenvalue of the component precision, i.e. 1 / lambda_min(cov).
    double max_precision_eigenvalue(std::size_t i) const { return caches_[i].max_precision_eig; }

    /// True when every component carries the same covariance.
    bool shared_covariance(double tol = 1e-12) const {
        const Matrix& c0 = components_.front().cov;
        const double scale = std::max(1.0, c0.cwiseAbs().maxCoeff());
        for (const auto& c : components_) {
            if ((c.cov - c0).cwiseAbs().maxCoeff() > tol * scale) return false;
        }
        return true;
    }

    /// log(w_i N(x; mu_i, Sigma_i)) for every component.
    Vector component_log_terms(const Vector& x) const {
        require_dim(x, dim_, "GmmPrior");
        Vector terms(static_cast<Index>(components_.size()));
        for (std::size_t i = 0; i < components_.size(); ++i) {
            const Vector d = caches_[i].chol.matrixL().solve(x - components_[i].mean);
            terms(static_cast<Index>(i)) = caches_[i].log_norm - 0.5 * d.squaredNorm();
        }
        return terms;
    }

    double log_density(const Vector& x) const { return log_sum_exp(component_log_terms(x)); }

    /// Posterior component probabilities r_i(x).
    Vector responsibilities(const Vector& x) const {
        const Vector terms = component_log_terms(x);
        const double lse = log_sum_exp(terms);
        return (terms.array() - lse).exp().matrix();
    }

    /// grad log p(x) = sum_i r_i P_i (mu_i - x)
    Vector score(const Vector& x) const {
        const Vector r = responsibilities(x);
        Vector s = Vector::Zero(dim_);
        for (std::size_t i = 0; i < components_.size(); ++i) {
            s.noalias() += r(static_cast<Index>(i)) * (caches_[i].precision * (components_[i].mean - x));
        }
        return s;
    }

    /// Hessian of log p: sum_i r_i (s_i s_i^T - P_i) - sbar sbar^T with s_i = P_i (mu_i - x).
    Matrix hessian_log_density(const Vector& x) const {
        const Vector r = responsibilities(x);
        Matrix hess = Matrix::Zero(dim_, dim_);
        Vector sbar = Vector::Zero(dim_);
        for (std::size_t i = 0; i < components_.size(); ++i) {
            const double ri = r(static_cast<Index>(i));
            if (ri == 0.0) continue;
            const Vector si = caches_[i].precision * (components_[i].mean - x);
            hess.noalias() += ri * (si * si.transpose() - caches_[i].precision);
            sbar.noalias() += ri * si;
        }
        hess.noalias() -= sbar * sbar.transpose();
        return 0.5 * (hess + hess.transpose());
    }

    /// i.i.d. draws; deterministic for a fixed seed.
    std::vector<Vector> sample(std::uint64_t seed, std::size_t count) const {
        if (count < 1) throw InvalidParameter("sample: count must be at least 1");
        Rng rng(seed);
        std::vector<double> weights;
        for (const auto& c : components_) weights.push_back(c.weight);
        std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
        std::vector<Vector> out;
        out.reserve(count);
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t i = pick(rng);
            out.push_back(components_[i].mean + caches_[i].chol.matrixL() * standard_normal(rng, dim_));
        }
        return out;
    }

private:
    struct Cache {
        Eigen::LLT<Matrix> chol;
        Matrix precision;
        double log_norm = 0.0;
        double max_precision_eig = 0.0;
    };

    Index dim_;
    std::vector<GaussianComponent> components_;
    std::vector<Cache> caches_;
};

/// Exact Gaussian convolution: every covariance gains sigma^2 I.
inline GmmPrior smooth(const GmmPrior& prior, double sigma) {
    if (!(sigma > 0.0)) throw InvalidParameter("smooth: sigma must be positive");
    auto comps = prior.components();
    const Matrix shift = (sigma * sigma) * Matrix::Identity(prior.dim(), prior.dim());
    for (auto& c : comps) c.cov += shift;
    return GmmPrior(prior.dim(), std::move(comps));
}

inline double log_density(const GmmPrior& prior, const Vector& x) { return prior.log_density(x); }
inline Vector score(const GmmPrior& prior, const Vector& x) { return prior.score(x); }

inline std::vector<Vector> sample(const GmmPrior& prior, std::uint64_t seed, std::size_t count) {
    return prior.sample(seed, count);
}

/// Orbit closure: component (w, mu, S) becomes {(w/|G|, a mu + c, a S a^T)} over the group.
inline GmmPrior symmetrize(const GmmPrior& prior, const GroupAction& group) {
    if (group.dim() != prior.dim()) throw ShapeError("symmetrize: group and prior dimensions differ");
    std::vector<GaussianComponent> comps;
    comps.reserve(prior.size() * group.size());
    const double w = group.weight();
    for (const auto& g : group.elements()) {
        for (const auto& c : prior.components()) {
            Matrix cov = g.a * c.cov * g.a.transpose();
            cov = 0.5 * (cov + cov.transpose());
            comps.push_back({c.weight * w, g.apply(c.mean), std::move(cov)});
        }
    }
    return GmmPrior(prior.dim(), std::move(comps));
}

/// Single Gaussian N(mean, cov).
inline GmmPrior gaussian_prior(Vector mean, Matrix cov) {
    const auto n = mean.size();
    return GmmPrior(n, {{1.0, std::move(mean), std::move(cov)}});
}

}  // namespace pnpcert
