// Group-averaged (equivariant) denoisers and the bias decomposition
//   ||mean_g V(g)||^2 = mean_g ||E(T_g x)||^2 - Var_g V(g),  V(g) = a_g^T E(T_g x),
// where E = D_hat - D_target.
#pragma once

#include "denoisers.hpp"
#include "groups.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace pnpcert {

struct EquivarianceMode {
    bool exact = true;
    std::size_t count = 0;     // sampled mode only
    std::uint64_t seed = 0;    // sampled mode only

    static EquivarianceMode exact_mode() { return {}; }
    static EquivarianceMode sampled(std::size_t count, std::uint64_t seed) { return {false, count, seed}; }
};

/// D_tilde(v) = mean_g T_g^{-1}(D(T_g v)) over the whole group (exact) or a
/// fixed seeded draw of elements (sampled).
class EquivariantModel final : public DenoiserModel {
public:
    EquivariantModel(Denoiser base, GroupAction group, EquivarianceMode mode)
        : base_(std::move(base)), group_(std::move(group)), mode_(mode) {
        if (group_.dim() != base_.dim()) throw ShapeError("wrap_equivariant: group and denoiser dimensions differ");
        if (mode_.exact) {
            for (std::size_t i = 0; i < group_.size(); ++i) picks_.push_back(i);
        } else {
            if (mode_.count < 1) throw InvalidParameter("wrap_equivariant: sampled mode needs count >= 1");
            Rng rng(mode_.seed);
            std::uniform_int_distribution<std::size_t> pick(0, group_.size() - 1);
            for (std::size_t k = 0; k < mode_.count; ++k) picks_.push_back(pick(rng));
        }
        const Vector zero = Vector::Zero(base_.dim());
        double offset = 0.0;
        bool closed = true;
        for (const auto i : picks_) {
            const auto g = base_.model().closed_form_potential(group_[i].apply(zero));
            if (!g) {
                closed = false;
                break;
            }
            offset += *g;
        }
        if (closed) potential_offset_ = offset / static_cast<double>(picks_.size());
    }

    std::string kind() const override { return "equivariant"; }
    Index dim() const override { return base_.dim(); }
    double sigma() const override { return base_.sigma(); }
    const Denoiser& base() const { return base_; }
    const GroupAction& group() const { return group_; }
    const EquivarianceMode& mode() const { return mode_; }

    Vector apply(const Vector& v) const override {
        Vector acc = Vector::Zero(dim());
        for (const auto i : picks_) {
            const auto& g = group_[i];
            acc.noalias() += g.apply_inverse(base_.apply(g.apply(v)));
        }
        return acc / static_cast<double>(picks_.size());
    }

    Matrix jacobian(const Vector& v) const override {
        Matrix acc = Matrix::Zero(dim(), dim());
        for (const auto i : picks_) {
            const auto& g = group_[i];
            acc.noalias() += g.a.transpose() * base_.jacobian(g.apply(v)) * g.a;
        }
        return acc / static_cast<double>(picks_.size());
    }

    /// mean_g g_base(T_g v) - mean_g g_base(T_g 0)
    std::optional<double> closed_form_potential(const Vector& v) const override {
        if (!potential_offset_) return std::nullopt;
        double acc = 0.0;
        for (const auto i : picks_) acc += *base_.model().closed_form_potential(group_[i].apply(v));
        return acc / static_cast<double>(picks_.size()) - *potential_offset_;
    }

    std::optional<Affine> affine() const override {
        const auto aff = base_.affine();
        if (!aff) return std::nullopt;
        Affine out{Matrix::Zero(dim(), dim()), Vector::Zero(dim())};
        for (const auto i : picks_) {
            const auto& g = group_[i];
            out.m.noalias() += g.a.transpose() * aff->m * g.a;
            out.b.noalias() += g.a.transpose() * (aff->m * g.c + aff->b - g.c);
        }
        out.m /= static_cast<double>(picks_.size());
        out.b /= static_cast<double>(picks_.size());
        return out;
    }

    std::vector<Vector> probe_points() const override { return base_.probe_points(); }

    /// The residual Jacobian is a mean of conjugates a^T J_res a, so its norm
    /// never exceeds the base constant.
    std::optional<double> known_lipschitz() const override { return base_.lipschitz(); }

private:
    Denoiser base_;
    GroupAction group_;
    EquivarianceMode mode_;
    std::vector<std::size_t> picks_;
    std::optional<double> potential_offset_;
};

inline Denoiser wrap_equivariant(const Denoiser& d, const GroupAction& group,
                                 EquivarianceMode mode = EquivarianceMode::exact_mode()) {
    return Denoiser(std::make_shared<EquivariantModel>(d, group, mode));
}

struct EquivarianceReport {
    double max_violation = 0.0;
    bool pass = true;
};

/// max over sampled x and all g of ||T_g^{-1}(D(T_g x)) - D(x)||, x ~ N(0, scale^2 I).
inline EquivarianceReport check_equivariance(const Denoiser& d, const GroupAction& group, std::size_t samples,
                                             double tol, std::uint64_t seed = 0, double scale = 2.0) {
    if (samples < 1) throw InvalidParameter("check_equivariance: samples must be at least 1");
    if (group.dim() != d.dim()) throw ShapeError("check_equivariance: group and denoiser dimensions differ");
    Rng rng(seed);
    EquivarianceReport report;
    for (std::size_t s = 0; s < samples; ++s) {
        const Vector x = scale * standard_normal(rng, d.dim());
        const Vector dx = d.apply(x);
        for (const auto& g : group.elements()) {
            const double v = (g.apply_inverse(d.apply(g.apply(x))) - dx).norm();
            report.max_violation = std::max(report.max_violation, v);
        }
    }
    report.pass = report.max_violation <= tol;
    return report;
}

struct BiasDecomposition {
    double mean_sq_bias = 0.0;   // ||mean_g V(g)||^2
    double avg_sq_bias = 0.0;    // mean_g ||E(T_g x)||^2
    double variance_gain = 0.0;  // mean_g ||V(g) - mean V||^2
};

namespace detail {

/// V_x(g) = a_g^T E(T_g x) for every group element.
inline std::vector<Vector> bias_orbit(const Denoiser& d_hat, const Denoiser& d_target, const GroupAction& group,
                                      const Vector& x, std::vector<double>* raw_sq = nullptr) {
    if (d_hat.dim() != d_target.dim() || group.dim() != d_hat.dim()) throw ShapeError("bias: dimension mismatch");
    require_dim(x, d_hat.dim(), "bias point");
    std::vector<Vector> orbit;
    orbit.reserve(group.size());
    for (const auto& g : group.elements()) {
        const Vector tx = g.apply(x);
        const Vector e = d_hat.apply(tx) - d_target.apply(tx);
        if (raw_sq) raw_sq->push_back(e.squaredNorm());
        orbit.push_back(g.rotate_inverse(e));
    }
    return orbit;
}

}  // namespace detail

inline BiasDecomposition bias_decompose(const Denoiser& d_hat, const Denoiser& d_target, const GroupAction& group,
                                        const Vector& x) {
    std::vector<double> raw_sq;
    const auto orbit = detail::bias_orbit(d_hat, d_target, group, x, &raw_sq);
    const double w = group.weight();
    Vector mean = Vector::Zero(x.size());
    for (const auto& v : orbit) mean += v;
    mean *= w;
    BiasDecomposition out;
    out.mean_sq_bias = mean.squaredNorm();
    for (std::size_t i = 0; i < orbit.size(); ++i) {
        out.avg_sq_bias += w * raw_sq[i];
        out.variance_gain += w * (orbit[i] - mean).squaredNorm();
    }
    return out;
}

/// max_g ||V_x(g) - V_x(e)||; positive iff the bias is anisotropic at x.
inline double anisotropy_witness(const Denoiser& d_hat, const Denoiser& d_target, const GroupAction& group,
                                 const Vector& x) {
    const auto orbit = detail::bias_orbit(d_hat, d_target, group, x);
    const Vector& ve = orbit[group.identity_index()];
    double best = 0.0;
    for (const auto& v : orbit) best = std::max(best, (v - ve).norm());
    return best;
}

}  // namespace pnpcert
