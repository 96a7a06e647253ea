// Smooth data-fidelity terms f(x) with gradient and gradient-Lipschitz
// constant: least squares 1/2 ||Ax - y||^2 and the (nonconvex, bounded)
// Welsch loss sum_j c^2 (1 - exp(-r_j^2 / (2 c^2))), r = Ax - y.
#pragma once

#include "core.hpp"

#include <cmath>
#include <string>

namespace pnpcert {

enum class FidelityKind { least_squares, welsch };

inline std::string to_string(FidelityKind k) { return k == FidelityKind::welsch ? "welsch" : "least_squares"; }

class Fidelity {
public:
    static Fidelity least_squares(Matrix a, Vector y) { return Fidelity(FidelityKind::least_squares, std::move(a), std::move(y), 1.0); }

    static Fidelity welsch(Matrix a, Vector y, double c) {
        if (!(c > 0.0)) throw InvalidParameter("welsch: c must be positive");
        return Fidelity(FidelityKind::welsch, std::move(a), std::move(y), c);
    }

    FidelityKind kind() const { return kind_; }
    const Matrix& a() const { return a_; }
    const Vector& y() const { return y_; }
    double c() const { return c_; }
    Index dim() const { return a_.cols(); }

    double value(const Vector& x) const {
        const Vector r = residual(x);
        if (kind_ == FidelityKind::least_squares) return 0.5 * r.squaredNorm();
        const double c2 = c_ * c_;
        double acc = 0.0;
        for (Index j = 0; j < r.size(); ++j) acc += c2 * -std::expm1(-r(j) * r(j) / (2.0 * c2));
        return acc;
    }

    Vector gradient(const Vector& x) const {
        Vector r = residual(x);
        if (kind_ == FidelityKind::welsch) {
            const double c2 = c_ * c_;
            for (Index j = 0; j < r.size(); ++j) r(j) *= std::exp(-r(j) * r(j) / (2.0 * c2));
        }
        return a_.transpose() * r;
    }

    /// ||A||_2^2 sup|rho''|; sup|rho''| = 1 for both losses.
    double lipschitz_grad() const { return lipschitz_; }

    /// Both losses are nonnegative.
    double lower_bound() const { return 0.0; }

private:
    Fidelity(FidelityKind kind, Matrix a, Vector y, double c) : kind_(kind), a_(std::move(a)), y_(std::move(y)), c_(c) {
        if (a_.rows() != y_.size()) throw ShapeError("fidelity: A has " + std::to_string(a_.rows()) + " rows but y has " +
                                                     std::to_string(y_.size()) + " entries");
        if (a_.cols() < 1) throw ShapeError("fidelity: A has no columns");
        const Matrix ata = a_.transpose() * a_;
        Eigen::SelfAdjointEigenSolver<Matrix> es(ata, Eigen::EigenvaluesOnly);
        lipschitz_ = std::max(0.0, es.eigenvalues().maxCoeff());
    }

    Vector residual(const Vector& x) const {
        require_dim(x, a_.cols(), "fidelity");
        return a_ * x - y_;
    }

    FidelityKind kind_;
    Matrix a_;
    Vector y_;
    double c_;
    double lipschitz_ = 0.0;
};

inline double f_value(const Fidelity& fid, const Vector& x) { return fid.value(x); }
inline Vector f_grad(const Fidelity& fid, const Vector& x) { return fid.gradient(x); }
inline double f_lipschitz(const Fidelity& fid) { return fid.lipschitz_grad(); }

}  // namespace pnpcert
