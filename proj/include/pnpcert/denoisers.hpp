// Denoisers of gradient-step form D = Id - grad g, and the calculus built on
// them: residual, Jacobian, inverse, the potential g (gauge g(0) = 0), the
// prox potential phi with grad phi = D^{-1} - Id, relaxation and bias
// injection.
//
// A Denoiser is an immutable handle around a DenoiserModel. Composite kinds
// (relaxed, mismatched, equivariant) hold their base as a Denoiser, so models
// form a tree that is shared, never copied.
#pragma once

#include "core.hpp"
#include "priors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pnpcert {

/// D(v) = m v + b
struct Affine {
    Matrix m;
    Vector b;
};

/// Central finite-difference Jacobian of a vector field.
template <class F>
Matrix finite_difference_jacobian(const F& f, const Vector& v, double step = 1e-6) {
    const Index n = v.size();
    Matrix j(n, n);
    Vector p = v;
    for (Index k = 0; k < n; ++k) {
        const double h = step * (1.0 + std::abs(v(k)));
        p(k) = v(k) + h;
        const Vector up = f(p);
        p(k) = v(k) - h;
        const Vector dn = f(p);
        p(k) = v(k);
        j.col(k) = (up - dn) / (2.0 * h);
    }
    return j;
}

class DenoiserModel {
public:
    virtual ~DenoiserModel() = default;

    virtual std::string kind() const = 0;
    virtual Index dim() const = 0;
    virtual double sigma() const = 0;
    virtual Vector apply(const Vector& v) const = 0;

    /// Jacobian of apply. Black-box kinds fall back to finite differences.
    virtual Matrix jacobian(const Vector& v) const {
        return finite_difference_jacobian([this](const Vector& p) { return apply(p); }, v);
    }

    /// g(v) with g(0) = 0 when a closed form exists.
    virtual std::optional<double> closed_form_potential(const Vector&) const { return std::nullopt; }

    virtual std::optional<Affine> affine() const { return std::nullopt; }

    /// Points where the residual Jacobian is probed to estimate L.
    virtual std::vector<Vector> probe_points() const { return {}; }

    /// L known without probing (e.g. relaxation of a base with cached L).
    virtual std::optional<double> known_lipschitz() const { return std::nullopt; }

    /// A proven lower bound on sup ||J_residual|| that probing may miss.
    virtual double lipschitz_floor() const { return 0.0; }
};

/// Spectral norm of the residual Jacobian, maximized over probe points.
inline double estimate_residual_lipschitz(const DenoiserModel& model, const std::vector<Vector>& probes) {
    if (probes.empty()) throw InvalidParameter("lipschitz_residual: empty probe set");
    const Matrix id = Matrix::Identity(model.dim(), model.dim());
    double best = 0.0;
    for (const auto& p : probes) {
        require_dim(p, model.dim(), "lipschitz_residual probe");
        best = std::max(best, spectral_norm(id - model.jacobian(p)));
    }
    return best;
}

class Denoiser {
public:
    explicit Denoiser(std::shared_ptr<const DenoiserModel> model) : model_(std::move(model)) {
        if (!model_) throw InvalidParameter("Denoiser: null model");
        if (const auto aff = model_->affine()) {
            lipschitz_ = spectral_norm(Matrix::Identity(dim(), dim()) - aff->m);
        } else if (const auto known = model_->known_lipschitz()) {
            lipschitz_ = *known;
        } else {
            const auto probes = model_->probe_points();
            lipschitz_ = probes.empty() ? model_->lipschitz_floor()
                                        : std::max(model_->lipschitz_floor(), estimate_residual_lipschitz(*model_, probes));
        }
    }

    std::string kind() const { return model_->kind(); }
    Index dim() const { return model_->dim(); }
    double sigma() const { return model_->sigma(); }
    /// Cached Lipschitz constant of the residual Id - D.
    double lipschitz() const { return lipschitz_; }

    Vector apply(const Vector& v) const {
        require_dim(v, dim(), "denoiser input");
        return model_->apply(v);
    }
    Vector operator()(const Vector& v) const { return apply(v); }
    Vector residual(const Vector& v) const { return v - apply(v); }
    Matrix jacobian(const Vector& v) const {
        require_dim(v, dim(), "denoiser input");
        return model_->jacobian(v);
    }
    Matrix residual_jacobian(const Vector& v) const { return Matrix::Identity(dim(), dim()) - jacobian(v); }

    std::optional<Affine> affine() const { return model_->affine(); }
    std::vector<Vector> probe_points() const { return model_->probe_points(); }

    const DenoiserModel& model() const { return *model_; }
    std::shared_ptr<const DenoiserModel> model_ptr() const { return model_; }
    bool same_as(const Denoiser& other) const { return model_ == other.model_; }

    template <class M>
    const M* as() const {
        return dynamic_cast<const M*>(model_.get());
    }

private:
    std::shared_ptr<const DenoiserModel> model_;
    double lipschitz_ = 0.0;
};

// ----- models -----

/// Exact MMSE denoiser of a Gaussian mixture, via Tweedie: D(v) = v + sigma^2 grad log p_sigma(v).
class MmseModel final : public DenoiserModel {
public:
    static constexpr std::uint64_t kProbeSeed = 1234567;
    static constexpr std::size_t kProbeSamples = 256;
    static constexpr std::size_t kSegmentBudget = 4096;

    MmseModel(GmmPrior prior, double sigma) : prior_(std::move(prior)), sigma_(sigma), smoothed_(smooth(prior_, sigma)) {
        const double s2 = sigma_ * sigma_;
        log_p0_ = smoothed_.log_density(Vector::Zero(prior_.dim()));
        for (std::size_t i = 0; i < smoothed_.size(); ++i) {
            floor_ = std::max(floor_, s2 * smoothed_.max_precision_eigenvalue(i));
        }
        if (smoothed_.shared_covariance()) {
            // J_res = sigma^2 (P - C) with C the posterior covariance of
            // s_i = P (mu_i - v). The s_i differ by x-independent shifts, so
            // 0 <= C <= d^2 / 4 with d = max ||P (mu_i - mu_j)|| (Popoviciu).
            const Matrix& p = smoothed_.precision(0);
            Eigen::SelfAdjointEigenSolver<Matrix> es(p, Eigen::EigenvaluesOnly);
            const auto& comps = smoothed_.components();
            double d2 = 0.0;
            for (std::size_t i = 0; i < comps.size(); ++i) {
                for (std::size_t j = i + 1; j < comps.size(); ++j) {
                    d2 = std::max(d2, (p * (comps[i].mean - comps[j].mean)).squaredNorm());
                }
            }
            bound_ = s2 * std::max(es.eigenvalues().maxCoeff(), 0.25 * d2 - es.eigenvalues().minCoeff());
        }
    }

    std::string kind() const override { return "mmse"; }
    Index dim() const override { return prior_.dim(); }
    double sigma() const override { return sigma_; }
    const GmmPrior& prior() const { return prior_; }
    const GmmPrior& smoothed_prior() const { return smoothed_; }

    Vector apply(const Vector& v) const override { return v + (sigma_ * sigma_) * smoothed_.score(v); }

    Matrix jacobian(const Vector& v) const override {
        return Matrix::Identity(dim(), dim()) + (sigma_ * sigma_) * smoothed_.hessian_log_density(v);
    }

    /// g(v) = -sigma^2 (log p_sigma(v) - log p_sigma(0)), since grad g = Id - D.
    std::optional<double> closed_form_potential(const Vector& v) const override {
        return -(sigma_ * sigma_) * (smoothed_.log_density(v) - log_p0_);
    }

    std::optional<Affine> affine() const override {
        if (prior_.size() != 1) return std::nullopt;
        const Matrix sp = (sigma_ * sigma_) * smoothed_.precision(0);
        return Affine{Matrix::Identity(dim(), dim()) - sp, sp * prior_.component(0).mean};
    }

    /// Samples of p_sigma plus points along the segments joining component
    /// means, where the posterior-covariance term of the Jacobian peaks.
    std::vector<Vector> probe_points() const override {
        auto probes = smoothed_.sample(kProbeSeed, kProbeSamples);
        const auto& comps = smoothed_.components();
        const std::size_t k = comps.size();
        const std::size_t pairs = k * (k - 1) / 2;
        if (pairs == 0) return probes;
        const std::size_t per_pair = std::clamp<std::size_t>(kSegmentBudget / pairs, 5, 33);
        auto add_segment = [&](std::size_t i, std::size_t j) {
            for (std::size_t s = 0; s < per_pair; ++s) {
                const double t = -0.25 + 1.5 * static_cast<double>(s) / static_cast<double>(per_pair - 1);
                probes.push_back(comps[i].mean + t * (comps[j].mean - comps[i].mean));
            }
        };
        if (pairs * per_pair <= kSegmentBudget) {
            for (std::size_t i = 0; i < k; ++i) {
                for (std::size_t j = i + 1; j < k; ++j) add_segment(i, j);
            }
        } else {
            // too many pairs: a seeded random subset
            Rng rng(kProbeSeed + 1);
            std::uniform_int_distribution<std::size_t> pick(0, k - 1);
            for (std::size_t s = 0; s < kSegmentBudget / per_pair; ++s) {
                const std::size_t i = pick(rng);
                std::size_t j = pick(rng);
                if (i == j) j = (j + 1) % k;
                add_segment(i, j);
            }
        }
        return probes;
    }

    /// sigma^2 max_i lambda_max((Sigma_i + sigma^2 I)^{-1}) bounds the positive
    /// side of the residual Jacobian spectrum everywhere.
    double lipschitz_floor() const override { return floor_; }

    /// Certified global bound, available for shared-covariance mixtures. With
    /// distinct covariances the residual Jacobian is unbounded in the tails
    /// and L is only a probe estimate over the region the probes cover.
    std::optional<double> known_lipschitz() const override { return bound_; }

private:
    GmmPrior prior_;
    double sigma_;
    GmmPrior smoothed_;
    double log_p0_ = 0.0;
    double floor_ = 0.0;
    std::optional<double> bound_;
};

/// D(v) = M v + b. Gradient-step form requires M symmetric.
class LinearModel final : public DenoiserModel {
public:
    LinearModel(Matrix m, Vector b, double sigma = 1.0) : m_(std::move(m)), b_(std::move(b)), sigma_(sigma) {
        if (m_.rows() != m_.cols() || b_.size() != m_.rows()) throw ShapeError("LinearModel: shape mismatch");
    }

    std::string kind() const override { return "linear"; }
    Index dim() const override { return m_.rows(); }
    double sigma() const override { return sigma_; }
    const Matrix& matrix() const { return m_; }
    const Vector& offset() const { return b_; }

    Vector apply(const Vector& v) const override { return m_ * v + b_; }
    Matrix jacobian(const Vector&) const override { return m_; }
    std::optional<Affine> affine() const override { return Affine{m_, b_}; }

    std::optional<double> closed_form_potential(const Vector& v) const override {
        if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-14) return std::nullopt;
        const Matrix r = Matrix::Identity(dim(), dim()) - m_;
        return 0.5 * v.dot(r * v) - b_.dot(v);
    }

private:
    Matrix m_;
    Vector b_;
    double sigma_;
};

/// D^alpha = alpha D + (1 - alpha) Id; residual Lipschitz constant alpha L.
class RelaxedModel final : public DenoiserModel {
public:
    RelaxedModel(Denoiser base, double alpha) : base_(std::move(base)), alpha_(alpha) {}

    std::string kind() const override { return "relaxed"; }
    Index dim() const override { return base_.dim(); }
    double sigma() const override { return base_.sigma(); }
    const Denoiser& base() const { return base_; }
    double alpha() const { return alpha_; }

    Vector apply(const Vector& v) const override { return alpha_ * base_.apply(v) + (1.0 - alpha_) * v; }
    Matrix jacobian(const Vector& v) const override {
        return alpha_ * base_.jacobian(v) + (1.0 - alpha_) * Matrix::Identity(dim(), dim());
    }
    std::optional<double> closed_form_potential(const Vector& v) const override {
        const auto g = base_.model().closed_form_potential(v);
        if (!g) return std::nullopt;
        return alpha_ * *g;
    }
    std::optional<Affine> affine() const override {
        auto aff = base_.affine();
        if (!aff) return std::nullopt;
        aff->m = alpha_ * aff->m + (1.0 - alpha_) * Matrix::Identity(dim(), dim());
        aff->b *= alpha_;
        return aff;
    }
    std::vector<Vector> probe_points() const override { return base_.probe_points(); }
    std::optional<double> known_lipschitz() const override { return alpha_ * base_.lipschitz(); }

private:
    Denoiser base_;
    double alpha_;
};

// ----- bias injection -----

enum class BiasKind { constant, linear, wrong_prior };

inline std::string to_string(BiasKind k) {
    switch (k) {
        case BiasKind::constant: return "constant";
        case BiasKind::linear: return "linear";
        case BiasKind::wrong_prior: return "wrong_prior";
    }
    return "constant";
}

struct BiasModel {
    BiasKind kind = BiasKind::constant;
    Vector c;                               // constant
    Matrix b;                               // linear
    std::optional<GmmPrior> wrong_prior;    // wrong_prior
    double scale = 1.0;

    static BiasModel constant(Vector c, double scale = 1.0) {
        BiasModel m;
        m.kind = BiasKind::constant;
        m.c = std::move(c);
        m.scale = scale;
        return m;
    }
    static BiasModel linear(Matrix b, double scale = 1.0) {
        BiasModel m;
        m.kind = BiasKind::linear;
        m.b = std::move(b);
        m.scale = scale;
        return m;
    }
    static BiasModel wrong(GmmPrior p, double scale) {
        BiasModel m;
        m.kind = BiasKind::wrong_prior;
        m.wrong_prior = std::move(p);
        m.scale = scale;
        return m;
    }
};

inline Denoiser make_mmse(GmmPrior prior, double sigma);
inline Denoiser relax(const Denoiser& d, double alpha);

/// D_hat(v) = D(v) + E(v).
class MismatchedModel final : public DenoiserModel {
public:
    MismatchedModel(Denoiser base, BiasModel bias) : base_(std::move(base)), bias_(std::move(bias)) {
        const Index n = base_.dim();
        switch (bias_.kind) {
            case BiasKind::constant:
                if (bias_.c.size() != n) throw ShapeError("constant bias has wrong dimension");
                break;
            case BiasKind::linear:
                if (bias_.b.rows() != n || bias_.b.cols() != n) throw ShapeError("linear bias has wrong shape");
                break;
            case BiasKind::wrong_prior: {
                if (!bias_.wrong_prior) throw InvalidParameter("wrong_prior bias without a prior");
                if (bias_.wrong_prior->dim() != n) throw ShapeError("wrong prior has wrong dimension");
                Denoiser wrong = make_mmse(*bias_.wrong_prior, base_.sigma());
                if (const auto* rel = base_.as<RelaxedModel>()) wrong = relax(wrong, rel->alpha());
                double sup = 0.0;
                for (const auto& p : base_.probe_points()) sup = std::max(sup, (wrong.apply(p) - base_.apply(p)).norm());
                factor_ = sup > 0.0 ? bias_.scale / sup : 0.0;
                wrong_.emplace(std::move(wrong));
                break;
            }
        }
    }

    std::string kind() const override { return "mismatched"; }
    Index dim() const override { return base_.dim(); }
    double sigma() const override { return base_.sigma(); }
    const Denoiser& base() const { return base_; }
    const BiasModel& bias_model() const { return bias_; }
    /// Normalization applied to D_wrong - D for the wrong_prior kind.
    double wrong_prior_factor() const { return factor_; }

    Vector bias(const Vector& v) const {
        switch (bias_.kind) {
            case BiasKind::constant: return bias_.scale * bias_.c;
            case BiasKind::linear: return bias_.scale * (bias_.b * v);
            case BiasKind::wrong_prior:
                if (factor_ == 0.0) return Vector::Zero(dim());
                return factor_ * (wrong_->apply(v) - base_.apply(v));
        }
        return Vector::Zero(dim());
    }

    Vector apply(const Vector& v) const override {
        if (bias_.kind == BiasKind::wrong_prior) {
            const Vector d = base_.apply(v);
            if (factor_ == 0.0) return d;
            return d + factor_ * (wrong_->apply(v) - d);
        }
        return base_.apply(v) + bias(v);
    }

    Matrix jacobian(const Vector& v) const override {
        switch (bias_.kind) {
            case BiasKind::constant: return base_.jacobian(v);
            case BiasKind::linear: return base_.jacobian(v) + bias_.scale * bias_.b;
            case BiasKind::wrong_prior: {
                const Matrix jb = base_.jacobian(v);
                if (factor_ == 0.0) return jb;
                return jb + factor_ * (wrong_->jacobian(v) - jb);
            }
        }
        return base_.jacobian(v);
    }

    std::optional<double> closed_form_potential(const Vector& v) const override {
        const auto gb = base_.model().closed_form_potential(v);
        if (!gb) return std::nullopt;
        switch (bias_.kind) {
            case BiasKind::constant: return *gb - bias_.scale * bias_.c.dot(v);
            case BiasKind::linear:
                if ((bias_.b - bias_.b.transpose()).cwiseAbs().maxCoeff() > 1e-14) return std::nullopt;
                return *gb - 0.5 * bias_.scale * v.dot(bias_.b * v);
            case BiasKind::wrong_prior: {
                if (factor_ == 0.0) return gb;
                const auto gw = wrong_->model().closed_form_potential(v);
                if (!gw) return std::nullopt;
                return (1.0 - factor_) * *gb + factor_ * *gw;
            }
        }
        return std::nullopt;
    }

    std::optional<Affine> affine() const override {
        auto aff = base_.affine();
        if (!aff) return std::nullopt;
        switch (bias_.kind) {
            case BiasKind::constant: aff->b += bias_.scale * bias_.c; return aff;
            case BiasKind::linear: aff->m += bias_.scale * bias_.b; return aff;
            case BiasKind::wrong_prior: {
                if (factor_ == 0.0) return aff;
                const auto w = wrong_->affine();
                if (!w) return std::nullopt;
                aff->m += factor_ * (w->m - aff->m);
                aff->b += factor_ * (w->b - aff->b);
                return aff;
            }
        }
        return std::nullopt;
    }

    std::vector<Vector> probe_points() const override { return base_.probe_points(); }

    /// Triangle inequality on the residual Jacobian, from the constituents' constants.
    std::optional<double> known_lipschitz() const override {
        switch (bias_.kind) {
            case BiasKind::constant: return base_.lipschitz();
            case BiasKind::linear: return base_.lipschitz() + std::abs(bias_.scale) * spectral_norm(bias_.b);
            case BiasKind::wrong_prior:
                if (factor_ == 0.0) return base_.lipschitz();
                return std::abs(1.0 - factor_) * base_.lipschitz() + std::abs(factor_) * wrong_->lipschitz();
        }
        return std::nullopt;
    }

private:
    Denoiser base_;
    BiasModel bias_;
    std::optional<Denoiser> wrong_;
    double factor_ = 0.0;
};

// ----- construction -----

inline Denoiser make_mmse(GmmPrior prior, double sigma) {
    if (!(sigma > 0.0)) throw InvalidParameter("mmse denoiser: sigma must be positive");
    return Denoiser(std::make_shared<MmseModel>(std::move(prior), sigma));
}

inline Denoiser make_linear(Matrix m, Vector b, double sigma = 1.0) {
    return Denoiser(std::make_shared<LinearModel>(std::move(m), std::move(b), sigma));
}

/// D(v) = s v, the scalar linear denoiser.
inline Denoiser make_scalar(Index n, double s, double sigma = 1.0) {
    return make_linear(s * Matrix::Identity(n, n), Vector::Zero(n), sigma);
}

inline Denoiser relax(const Denoiser& d, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidParameter("relax: alpha must lie in (0, 1]");
    return Denoiser(std::make_shared<RelaxedModel>(d, alpha));
}

inline Denoiser perturb(const Denoiser& d, BiasModel bias) {
    return Denoiser(std::make_shared<MismatchedModel>(d, std::move(bias)));
}

// ----- operations -----

inline Vector mmse_apply(const Denoiser& d, const Vector& v) {
    if (!d.as<MmseModel>()) throw InvalidParameter("mmse_apply: denoiser is not of kind mmse");
    return d.apply(v);
}

inline Vector residual(const Denoiser& d, const Vector& v) { return d.residual(v); }

/// Exact for affine denoisers, otherwise the max over probe points.
inline double lipschitz_residual(const Denoiser& d, const std::vector<Vector>& probe_points) {
    if (probe_points.empty()) throw InvalidParameter("lipschitz_residual: empty probe set");
    if (const auto aff = d.affine()) return spectral_norm(Matrix::Identity(d.dim(), d.dim()) - aff->m);
    return std::max(d.model().lipschitz_floor(), estimate_residual_lipschitz(d.model(), probe_points));
}

inline constexpr int kNewtonSteps = 30;

/// z with ||D(z) - x|| <= tol. Affine denoisers are solved directly; others
/// by Newton steps, then the contraction z <- x + residual(z), started at
/// `hint` when given.
inline Vector invert(const Denoiser& d, const Vector& x, double tol, const Vector* hint = nullptr) {
    require_dim(x, d.dim(), "invert");
    if (!(tol > 0.0)) throw InvalidParameter("invert: tol must be positive");
    Vector z;
    Vector defect;
    if (hint) {
        require_dim(*hint, d.dim(), "invert hint");
        z = *hint;
        defect = d.apply(z) - x;
        if (defect.norm() <= tol) return z;
    }
    if (const auto aff = d.affine()) {
        Vector direct = aff->m.partialPivLu().solve(x - aff->b);
        Vector ddef = d.apply(direct) - x;
        if (!hint || ddef.norm() < defect.norm()) {
            z = std::move(direct);
            defect = std::move(ddef);
        }
        if (defect.norm() <= tol) return z;
    }
    if (z.size() == 0) {
        z = x;
        defect = d.apply(z) - x;
        if (defect.norm() <= tol) return z;
    }
    // Newton on D(z) = x while it keeps reducing the defect; D' = I - J_res is
    // invertible when L < 1.
    for (int it = 0; it < kNewtonSteps; ++it) {
        Vector trial = z - d.jacobian(z).partialPivLu().solve(defect);
        Vector tdef = d.apply(trial) - x;
        if (!tdef.allFinite() || !(tdef.norm() < defect.norm())) break;
        z = std::move(trial);
        defect = std::move(tdef);
        if (defect.norm() <= tol) return z;
    }
    const double lip = d.lipschitz();
    long budget = 10000;
    if (lip < 1.0) {
        budget = 64;
        if (lip > 0.0) budget += static_cast<long>(std::ceil(std::log(tol / defect.norm()) / std::log(lip)));
    }
    for (long it = 0; it < budget; ++it) {
        z -= defect;
        defect = d.apply(z) - x;
        if (!defect.allFinite()) break;
        if (defect.norm() <= tol) return z;
    }
    throw NonConvergence("invert: no preimage within tol after " + std::to_string(budget) +
                         " iterations (residual " + format_double(defect.norm()) + ", L = " + format_double(lip) +
                         "); the point may lie outside the denoiser image");
}

namespace detail {

/// Adaptive bisection over Gauss-Kronrod 31 panels. A panel is accepted once
/// its error estimate is below tol |estimate| or below `noise` per unit
/// length, the roundoff level of the integrand; the second test stops futile
/// refinement of integrals that are small through cancellation.
template <class F>
double adaptive_gk31(const F& f, double lo, double hi, double tol, double noise, int depth) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double err = 0.0;
    const double est = GK::integrate(f, lo, hi, 0, tol, &err);
    if (depth == 0 || err <= tol * std::abs(est) || err <= noise * (hi - lo)) return est;
    const double mid = 0.5 * (lo + hi);
    return adaptive_gk31(f, lo, mid, tol, noise, depth - 1) + adaptive_gk31(f, mid, hi, tol, noise, depth - 1);
}

inline double segment_integral(const Denoiser& d, const Vector& a, const Vector& b, double tol) {
    const Vector dir = b - a;
    if (dir.squaredNorm() == 0.0) return 0.0;
    auto integrand = [&](double t) { return d.residual(a + t * dir).dot(dir); };
    // residual(v) = v - D(v) carries an absolute error of a few ulps of |v|
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * dir.norm() *
                         (1.0 + std::max(a.norm(), b.norm()));
    return adaptive_gk31(integrand, 0.0, 1.0, tol, noise, 12);
}

}  // namespace detail

/// g(v) by adaptive Gauss-Kronrod integration of grad g along 0 -> v.
inline double potential_by_quadrature(const Denoiser& d, const Vector& v, double tol = 1e-10) {
    require_dim(v, d.dim(), "potential");
    return detail::segment_integral(d, Vector::Zero(d.dim()), v, tol);
}

/// g(v), gauge g(0) = 0. Closed form when available, quadrature otherwise.
inline double potential_g(const Denoiser& d, const Vector& v) {
    require_dim(v, d.dim(), "potential");
    if (const auto g = d.model().closed_form_potential(v)) return *g;
    return potential_by_quadrature(d, v);
}

/// g(b) - g(a) by quadrature along the segment; accurate relative to the
/// difference itself rather than to |g|.
inline double potential_difference(const Denoiser& d, const Vector& a, const Vector& b, double tol = 1e-13) {
    require_dim(a, d.dim(), "potential_difference");
    require_dim(b, d.dim(), "potential_difference");
    return detail::segment_integral(d, a, b, tol);
}

/// phi(x) = g(y) - 1/2 ||y - x||^2 with y = D^{-1}(x).
inline double potential_phi(const Denoiser& d, const Vector& x, double tol, const Vector* hint = nullptr) {
    const Vector y = invert(d, x, tol, hint);
    return potential_g(d, y) - 0.5 * (y - x).squaredNorm();
}

/// grad phi(x) = D^{-1}(x) - x
inline Vector grad_phi(const Denoiser& d, const Vector& x, double tol, const Vector* hint = nullptr) {
    return invert(d, x, tol, hint) - x;
}

}  // namespace pnpcert
