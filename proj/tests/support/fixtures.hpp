// Twenty denoiser configurations shared by the unit tests and the acceptance
// binary. Each carries the library denoiser and an oracle pair (D, g) built
// from the same raw numbers through tests/support/oracles.hpp.
#pragma once

#include "oracles.hpp"

#include <pnpcert/pnpcert.hpp>

#include <memory>
#include <string>
#include <vector>

namespace fixtures {

using oracle::Mat;
using oracle::Vec;

struct Fixture {
    std::string name;
    pnpcert::Denoiser d;
    std::function<Vec(const Vec&)> D;
    std::function<double(const Vec&)> g;
};

struct OraclePair {
    std::function<Vec(const Vec&)> D;
    std::function<double(const Vec&)> g;
};

inline std::vector<oracle::Component> symmetrized(const std::vector<oracle::Component>& comps, const std::vector<Mat>& mats) {
    std::vector<oracle::Component> out;
    for (const auto& a : mats) {
        for (const auto& c : comps) out.push_back({c.w / static_cast<double>(mats.size()), a * c.mu, a * c.cov * a.transpose()});
    }
    return out;
}

inline pnpcert::GmmPrior to_prior(const std::vector<oracle::Component>& comps) {
    std::vector<pnpcert::GaussianComponent> out;
    for (const auto& c : comps) out.push_back({c.w, c.mu, c.cov});
    return pnpcert::GmmPrior(comps.front().mu.size(), out);
}

inline OraclePair mmse_pair(const std::vector<oracle::Component>& comps, double sigma) {
    auto m = std::make_shared<oracle::MmseOracle>(oracle::Mixture(comps), sigma);
    return {[m](const Vec& v) { return m->denoise(v); }, [m](const Vec& v) { return m->g(v); }};
}

inline OraclePair relaxed_pair(OraclePair p, double alpha) {
    return {[p, alpha](const Vec& v) { return Vec(alpha * p.D(v) + (1 - alpha) * v); },
            [p, alpha](const Vec& v) { return alpha * p.g(v); }};
}

inline OraclePair constant_bias_pair(OraclePair p, Vec c) {
    return {[p, c](const Vec& v) { return Vec(p.D(v) + c); }, [p, c](const Vec& v) { return p.g(v) - c.dot(v); }};
}

inline OraclePair linear_bias_pair(OraclePair p, Mat b) {
    return {[p, b](const Vec& v) { return Vec(p.D(v) + b * v); },
            [p, b](const Vec& v) { return p.g(v) - 0.5 * v.dot(b * v); }};
}

inline OraclePair blend_pair(OraclePair p, OraclePair q, double f) {
    return {[p, q, f](const Vec& v) { return Vec((1 - f) * p.D(v) + f * q.D(v)); },
            [p, q, f](const Vec& v) { return (1 - f) * p.g(v) + f * q.g(v); }};
}

inline OraclePair averaged_pair(OraclePair p, std::vector<Mat> mats) {
    return {[p, mats](const Vec& v) {
                Vec acc = Vec::Zero(v.size());
                for (const auto& a : mats) acc += a.transpose() * p.D(a * v);
                return Vec(acc / static_cast<double>(mats.size()));
            },
            [p, mats](const Vec& v) {
                double acc = 0.0;
                const Vec zero = Vec::Zero(v.size());
                for (const auto& a : mats) acc += p.g(a * v) - p.g(a * zero);
                return acc / static_cast<double>(mats.size());
            }};
}

// ----- group matrices, written out independently of the library -----

inline std::vector<Mat> sign_flip_mats(int n) { return {Mat::Identity(n, n), -Mat::Identity(n, n)}; }

inline Mat from_source(const std::vector<int>& src) {
    const int n = static_cast<int>(src.size());
    Mat p = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) p(i, src[static_cast<std::size_t>(i)]) = 1.0;
    return p;
}

inline std::vector<Mat> cyclic_mats(int n) {
    std::vector<Mat> out;
    for (int s = 0; s < n; ++s) {
        std::vector<int> src(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) src[static_cast<std::size_t>(i)] = ((i - s) % n + n) % n;
        out.push_back(from_source(src));
    }
    return out;
}

/// Symmetries of the square acting on a 2x2 image stored row-major as [0 1; 2 3].
inline std::vector<Mat> square_mats() {
    return {from_source({0, 1, 2, 3}), from_source({1, 3, 0, 2}), from_source({3, 2, 1, 0}), from_source({2, 0, 3, 1}),
            from_source({1, 0, 3, 2}), from_source({2, 3, 0, 1}), from_source({0, 2, 1, 3}), from_source({3, 1, 2, 0})};
}

// ----- configuration helpers -----

inline Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (const double x : xs) v(i++) = x;
    return v;
}

inline Mat spd(int n, std::uint64_t seed, double lo, double hi) {
    pnpcert::Rng rng(seed);
    const Mat q = pnpcert::random_orthogonal(rng, n);
    std::uniform_real_distribution<double> u(lo, hi);
    Vec e(n);
    for (int i = 0; i < n; ++i) e(i) = u(rng);
    Mat s = q * e.asDiagonal() * q.transpose();
    return 0.5 * (s + s.transpose());
}

inline std::vector<oracle::Component> shared(std::vector<double> w, std::vector<Vec> mu, const Mat& cov) {
    std::vector<oracle::Component> out;
    for (std::size_t i = 0; i < w.size(); ++i) out.push_back({w[i], mu[i], cov});
    return out;
}

/// MMSE fixture; relaxed when the certified L would exceed 0.95.
inline Fixture mmse_fixture(std::string name, const std::vector<oracle::Component>& comps, double sigma) {
    auto d = pnpcert::make_mmse(to_prior(comps), sigma);
    auto pair = mmse_pair(comps, sigma);
    if (d.lipschitz() >= 0.95) {
        const double alpha = 0.9 / d.lipschitz();
        d = pnpcert::relax(d, alpha);
        pair = relaxed_pair(pair, alpha);
    }
    return {std::move(name), d, pair.D, pair.g};
}

inline std::vector<Fixture> all() {
    using pnpcert::Matrix;
    std::vector<Fixture> out;

    out.push_back({"scalar_half_1d", pnpcert::make_scalar(1, 0.5), [](const Vec& v) { return Vec(0.5 * v); },
                   [](const Vec& v) { return 0.25 * v.squaredNorm(); }});
    out.push_back({"scalar_3d", pnpcert::make_scalar(3, 0.7), [](const Vec& v) { return Vec(0.7 * v); },
                   [](const Vec& v) { return 0.15 * v.squaredNorm(); }});
    {
        Mat m(2, 2);
        m << 0.6, 0.1, 0.1, 0.5;
        const Vec b = vec({0.2, -0.1});
        out.push_back({"linear_symmetric_2d", pnpcert::make_linear(m, b), [m, b](const Vec& v) { return Vec(m * v + b); },
                       [m, b](const Vec& v) { return 0.5 * v.dot((Mat::Identity(2, 2) - m) * v) - b.dot(v); }});
    }
    out.push_back(mmse_fixture("gaussian_1d", shared({1.0}, {vec({0.5})}, Mat::Constant(1, 1, 1.0)), 0.8));
    out.push_back(mmse_fixture("gaussian_3d", shared({1.0}, {vec({0.3, -0.2, 1.0})}, spd(3, 11, 0.4, 2.0)), 0.6));
    out.push_back(mmse_fixture("gmm_1d_two", shared({0.5, 0.5}, {vec({-1.0}), vec({1.0})}, Mat::Constant(1, 1, 0.5)), 0.7));
    out.push_back(mmse_fixture("gmm_2d_three",
                               shared({0.2, 0.3, 0.5}, {vec({1.0, 0.0}), vec({-0.5, 0.8}), vec({0.0, -1.0})}, spd(2, 12, 0.5, 1.2)),
                               0.6));
    out.push_back(mmse_fixture("gmm_4d_two", shared({0.4, 0.6}, {vec({1, 0, -1, 0.5}), vec({-0.5, 0.5, 0.5, 0})}, spd(4, 13, 0.6, 1.5)),
                               0.9));
    {
        const auto base = shared({0.7, 0.3}, {vec({1.2, 0.3}), vec({-0.2, 0.9})}, spd(2, 14, 0.5, 1.0));
        auto d = pnpcert::make_mmse(pnpcert::symmetrize(to_prior(base), pnpcert::sign_flip_group(2)), 0.7);
        const auto p = mmse_pair(symmetrized(base, sign_flip_mats(2)), 0.7);
        out.push_back({"gmm_2d_sign_flip", d, p.D, p.g});
    }
    {
        const auto base = shared({0.5, 0.5}, {vec({1, 0, 0, 0}), vec({0, -0.5, 0.5, 0})}, 0.8 * Mat::Identity(4, 4));
        auto d = pnpcert::make_mmse(pnpcert::symmetrize(to_prior(base), pnpcert::cyclic_shift_group(4)), 0.6);
        const auto p = mmse_pair(symmetrized(base, cyclic_mats(4)), 0.6);
        out.push_back({"gmm_4d_cyclic", d, p.D, p.g});
    }
    out.push_back(mmse_fixture("gmm_3d_three",
                               shared({0.3, 0.3, 0.4}, {vec({1, 1, 0}), vec({-1, 0, 1}), vec({0, -1, -1})}, spd(3, 15, 0.8, 1.6)),
                               1.0));
    out.push_back(mmse_fixture("gmm_1d_three",
                               shared({0.25, 0.5, 0.25}, {vec({-1.5}), vec({0.0}), vec({1.5})}, Mat::Constant(1, 1, 0.3)), 0.5));
    {
        const auto comps = shared({0.5, 0.5}, {vec({0.8, -0.3}), vec({-0.6, 0.4})}, spd(2, 16, 0.4, 1.0));
        const double alpha = 0.6;
        out.push_back({"relaxed_gmm_2d", pnpcert::relax(pnpcert::make_mmse(to_prior(comps), 0.8), alpha),
                       relaxed_pair(mmse_pair(comps, 0.8), alpha).D, relaxed_pair(mmse_pair(comps, 0.8), alpha).g});
    }
    {
        const auto comps = shared({0.5, 0.5}, {vec({1.0, 0.0}), vec({0.0, 1.0})}, spd(2, 17, 0.5, 1.0));
        const Vec c = vec({0.03, -0.04});
        auto d = pnpcert::perturb(pnpcert::make_mmse(to_prior(comps), 0.6), pnpcert::BiasModel::constant(c));
        const auto p = constant_bias_pair(mmse_pair(comps, 0.6), c);
        out.push_back({"gmm_2d_constant_bias", d, p.D, p.g});
    }
    {
        const auto comps = shared({0.6, 0.4}, {vec({0.5, 0.5, -0.5}), vec({-0.5, 0.0, 0.5})}, spd(3, 18, 0.6, 1.2));
        Mat b(3, 3);
        b << 0.02, 0.01, 0.0, 0.01, -0.03, 0.005, 0.0, 0.005, 0.01;
        auto d = pnpcert::perturb(pnpcert::make_mmse(to_prior(comps), 0.6), pnpcert::BiasModel::linear(b));
        const auto p = linear_bias_pair(mmse_pair(comps, 0.6), b);
        out.push_back({"gmm_3d_linear_bias", d, p.D, p.g});
    }
    {
        const auto comps = shared({0.5, 0.5}, {vec({1.0, -0.5}), vec({-1.0, 0.5})}, spd(2, 19, 0.5, 1.0));
        const auto wrong = shared({0.5, 0.5}, {vec({1.2, -0.3}), vec({-0.9, 0.6})}, spd(2, 19, 0.5, 1.0));
        auto d = pnpcert::perturb(pnpcert::make_mmse(to_prior(comps), 0.6), pnpcert::BiasModel::wrong(to_prior(wrong), 0.05));
        const double f = d.as<pnpcert::MismatchedModel>()->wrong_prior_factor();
        const auto p = blend_pair(mmse_pair(comps, 0.6), mmse_pair(wrong, 0.6), f);
        out.push_back({"gmm_2d_wrong_prior", d, p.D, p.g});
    }
    {
        const auto base = shared({0.5, 0.5}, {vec({1.0, 0.2}), vec({-0.3, 0.7})}, spd(2, 20, 0.5, 1.0));
        const auto sym = symmetrized(base, sign_flip_mats(2));
        const Vec c = vec({0.04, 0.02});
        auto mis = pnpcert::perturb(pnpcert::make_mmse(to_prior(sym), 0.7), pnpcert::BiasModel::constant(c));
        auto d = pnpcert::wrap_equivariant(mis, pnpcert::sign_flip_group(2));
        const auto p = averaged_pair(constant_bias_pair(mmse_pair(sym, 0.7), c), sign_flip_mats(2));
        out.push_back({"equivariant_constant_bias_2d", d, p.D, p.g});
    }
    {
        Mat circulant = Mat::Constant(3, 3, 0.2);
        circulant.diagonal().setConstant(1.0);
        const auto base = shared({1.0}, {vec({0.5, -0.5, 0.0})}, circulant);
        const auto sym = symmetrized(base, cyclic_mats(3));
        Mat b = Mat::Zero(3, 3);
        b(0, 0) = 0.04;
        b(1, 2) = b(2, 1) = -0.02;
        auto mis = pnpcert::perturb(pnpcert::make_mmse(to_prior(sym), 0.6), pnpcert::BiasModel::linear(b));
        auto d = pnpcert::wrap_equivariant(mis, pnpcert::cyclic_shift_group(3));
        const auto p = averaged_pair(linear_bias_pair(mmse_pair(sym, 0.6), b), cyclic_mats(3));
        out.push_back({"equivariant_linear_bias_3d", d, p.D, p.g});
    }
    {
        const auto base = shared({0.5, 0.5}, {vec({1.0, 0.0, 0.0, -0.5}), vec({0.0, 0.6, -0.4, 0.0})}, 0.7 * Mat::Identity(4, 4));
        auto d = pnpcert::make_mmse(pnpcert::symmetrize(to_prior(base), pnpcert::dihedral_image_group(2, 2)), 0.6);
        const auto p = mmse_pair(symmetrized(base, square_mats()), 0.6);
        out.push_back({"gmm_2x2_dihedral", d, p.D, p.g});
    }
    {
        Vec m1 = Vec::Zero(8);
        Vec m2 = Vec::Zero(8);
        m1(0) = 1.0;
        m1(3) = -0.5;
        m2(5) = 0.8;
        m2(7) = 0.4;
        out.push_back(mmse_fixture("gmm_8d_two", shared({0.5, 0.5}, {m1, m2}, spd(8, 22, 0.5, 1.5)), 0.8));
    }
    return out;
}

}  // namespace fixtures
