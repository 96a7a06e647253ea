// Independent reference computations for the test suite. Nothing here calls
// the library's numerics; mixtures are re-implemented with explicit inverses
// and determinants, derivatives come from finite differences, and
// minimizers from BFGS on finite-difference gradients.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Component {
    double w;
    Vec mu;
    Mat cov;
};

/// Gaussian mixture density via explicit inverse/determinant.
class Mixture {
public:
    explicit Mixture(std::vector<Component> comps) : comps_(std::move(comps)) {
        for (const auto& c : comps_) {
            inv_.push_back(c.cov.inverse());
            const double n = static_cast<double>(c.mu.size());
            lognorm_.push_back(std::log(c.w) - 0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(c.cov.determinant()));
        }
    }

    Mixture smoothed(double sigma) const {
        auto comps = comps_;
        for (auto& c : comps) c.cov += sigma * sigma * Mat::Identity(c.mu.size(), c.mu.size());
        return Mixture(comps);
    }

    double logpdf(const Vec& x) const {
        double m = -INFINITY;
        std::vector<double> t;
        for (std::size_t i = 0; i < comps_.size(); ++i) {
            const Vec d = x - comps_[i].mu;
            t.push_back(lognorm_[i] - 0.5 * d.dot(inv_[i] * d));
            m = std::max(m, t.back());
        }
        double s = 0.0;
        for (const double v : t) s += std::exp(v - m);
        return m + std::log(s);
    }

    Vec score(const Vec& x) const {
        const double lp = logpdf(x);
        Vec s = Vec::Zero(x.size());
        for (std::size_t i = 0; i < comps_.size(); ++i) {
            const Vec d = x - comps_[i].mu;
            const double r = std::exp(lognorm_[i] - 0.5 * d.dot(inv_[i] * d) - lp);
            s -= r * (inv_[i] * d);
        }
        return s;
    }

    const std::vector<Component>& components() const { return comps_; }

private:
    std::vector<Component> comps_;
    std::vector<Mat> inv_;
    std::vector<double> lognorm_;
};

/// Tweedie MMSE denoiser and its potential g(v) = -sigma^2 (log p_sigma(v) - log p_sigma(0)).
struct MmseOracle {
    Mixture smooth;
    double sigma;

    MmseOracle(const Mixture& prior, double s) : smooth(prior.smoothed(s)), sigma(s) {}

    Vec denoise(const Vec& v) const { return v + sigma * sigma * smooth.score(v); }
    double g(const Vec& v) const {
        return -sigma * sigma * (smooth.logpdf(v) - smooth.logpdf(Vec::Zero(v.size())));
    }
};

/// Central difference gradient with a 5-point stencil per coordinate.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vec p = x;
        auto at = [&](double t) {
            p(i) = x(i) + t;
            return f(p);
        };
        g(i) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    }
    return g;
}

/// BFGS with backtracking on a smooth function, gradients by finite differences.
inline Vec minimize(const std::function<double(const Vec&)>& f, Vec x, int max_iter = 500, double gtol = 1e-11) {
    const Eigen::Index n = x.size();
    Mat hinv = Mat::Identity(n, n);
    double fx = f(x);
    Vec g = fd_gradient(f, x, 1e-4);
    for (int it = 0; it < max_iter && g.norm() > gtol; ++it) {
        Vec p = -hinv * g;
        if (p.dot(g) >= 0) {
            hinv = Mat::Identity(n, n);
            p = -g;
        }
        double step = 1.0;
        Vec xn = x + step * p;
        double fn = f(xn);
        while (fn > fx + 1e-4 * step * p.dot(g) && step > 1e-12) {
            step *= 0.5;
            xn = x + step * p;
            fn = f(xn);
        }
        const Vec gn = fd_gradient(f, xn, 1e-4);
        const Vec s = xn - x;
        const Vec yv = gn - g;
        const double sy = s.dot(yv);
        if (sy > 1e-300) {
            const Mat I = Mat::Identity(n, n);
            const double rho = 1.0 / sy;
            hinv = (I - rho * s * yv.transpose()) * hinv * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        if (s.norm() < 1e-15 * (1.0 + x.norm())) {
            x = xn;
            break;
        }
        x = xn;
        fx = fn;
        g = gn;
    }
    return x;
}

/// argmin_u 1/2 ||u - v||^2 + phi(u) for a gradient-step denoiser D with potential g,
/// searched over u = D(w): K(w) = 1/2 ||D(w) - v||^2 + g(w) - 1/2 ||w - D(w)||^2.
/// The map w -> D(w) is a diffeomorphism, so every critical point of K is the minimizer.
inline Vec prox_by_minimization(const std::function<Vec(const Vec&)>& denoise, const std::function<double(const Vec&)>& g,
                                const Vec& v, const Vec& start) {
    auto K = [&](const Vec& w) {
        const Vec u = denoise(w);
        return 0.5 * (u - v).squaredNorm() + g(w) - 0.5 * (w - u).squaredNorm();
    };
    return denoise(minimize(K, start));
}

/// Preimage of x under a smooth vector field by damped Newton with a
/// finite-difference Jacobian.
inline Vec newton_inverse(const std::function<Vec(const Vec&)>& denoise, const Vec& x, Vec z, double tol = 1e-13) {
    const Eigen::Index n = x.size();
    Vec r = denoise(z) - x;
    for (int it = 0; it < 100 && r.norm() > tol * (1.0 + x.norm()); ++it) {
        Mat j(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            Vec p = z;
            const double h = 1e-6 * (1.0 + std::abs(z(k)));
            p(k) = z(k) + h;
            const Vec up = denoise(p);
            p(k) = z(k) - h;
            j.col(k) = (up - denoise(p)) / (2 * h);
        }
        const Vec step = j.fullPivLu().solve(r);
        double t = 1.0;
        Vec zn = z - step;
        Vec rn = denoise(zn) - x;
        while (rn.norm() >= r.norm() && t > 1e-8) {
            t *= 0.5;
            zn = z - t * step;
            rn = denoise(zn) - x;
        }
        if (rn.norm() >= r.norm()) break;
        z = zn;
        r = rn;
    }
    return z;
}

/// Inverse of a strictly increasing scalar map by bisection.
inline double bisect_inverse(const std::function<double(double)>& f, double target, double lo, double hi) {
    while (f(lo) > target) lo -= (hi - lo);
    while (f(hi) < target) hi += (hi - lo);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < target) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace oracle
