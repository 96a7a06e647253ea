#include "fixtures.hpp"

#include <pnpcert/certify.hpp>
#include <pnpcert/solver.hpp>

#include <gtest/gtest.h>

using namespace pnpcert;
using fixtures::vec;

namespace {

ProblemSpec closed_form_problem(int iterations) {
    const auto d = make_scalar(1, 0.5);
    return ProblemSpec{Fidelity::least_squares(Matrix::Identity(1, 1), vec({3.0})), d, d, 0.5, 1.0, vec({0.0}), iterations};
}

struct TwoDim {
    GmmPrior prior;
    Denoiser target;
    Fidelity fid;
};

TwoDim two_dim() {
    const Matrix cov = fixtures::spd(2, 40, 0.5, 1.0);
    GmmPrior p(2, {{0.5, vec({1.0, 0.0}), cov}, {0.5, vec({-1.0, 0.5}), cov}});
    Matrix a(2, 2);
    a << 0.8, 0.2, 0.1, 0.6;
    auto t = make_mmse(p, 0.7);
    return {p, t, Fidelity::least_squares(a, vec({0.5, -0.3}))};
}

}  // namespace

TEST(Solver, ClosedFormScalarProblemConverges) {
    // x <- (x - 0.5 (x - 3)) / 2 has fixed point 1
    const auto tr = pnp_pgd_run(closed_form_problem(100));
    ASSERT_EQ(tr.records.size(), 100u);
    EXPECT_NEAR(tr.records.back().x(0), 1.0, 1e-12);
    EXPECT_LE(std::sqrt(tr.records.back().grad_F_sq), 1e-12);
    // F(x) = 0.5 * 0.5 (x - 3)^2 + x^2 / 2
    EXPECT_NEAR(tr.constants.F0, 2.25, 1e-14);
    EXPECT_NEAR(tr.records.back().F, 0.25 * 4.0 + 0.5, 1e-12);
    for (const auto& r : tr.records) EXPECT_LE(std::abs(r.eps), 1e-14);
    EXPECT_DOUBLE_EQ(tr.constants.L, 0.5);
    EXPECT_DOUBLE_EQ(tr.constants.L_f, 1.0);
    EXPECT_LE(tr.constants.F_star_lower, 1.5);
}

TEST(Solver, TraceFieldsAreConsistent) {
    const auto p = two_dim();
    ProblemSpec spec{p.fid, p.target, p.target, 0.8, 0.7, vec({2.0, -1.0}), 50};
    const auto tr = pnp_pgd_run(spec);
    Vector prev = spec.x0;
    for (const auto& r : tr.records) {
        const Vector z = prev - spec.lambda * p.fid.gradient(prev);
        EXPECT_LE((r.z - z).norm(), 1e-15);
        EXPECT_LE((r.x - p.target.apply(z)).norm(), 1e-15);
        EXPECT_NEAR(r.x_norm, r.x.norm(), 1e-15);
        EXPECT_NEAR(r.step_sq, (r.x - prev).squaredNorm(), 1e-15);
        EXPECT_LE(std::abs(r.eps), 1e-12);
        prev = r.x;
    }
    EXPECT_TRUE(check_descent(tr).pass_derived);
}

TEST(Solver, ObjectiveMatchesOracle) {
    const auto p = two_dim();
    std::vector<oracle::Component> comps;
    for (const auto& c : p.prior.components()) comps.push_back({c.weight, c.mean, c.cov});
    const auto ref = fixtures::mmse_pair(comps, 0.7);
    ProblemSpec spec{p.fid, p.target, p.target, 0.8, 0.7, vec({2.0, -1.0}), 5};
    const auto tr = pnp_pgd_run(spec);
    for (const auto& r : tr.records) {
        const Vector y = oracle::newton_inverse(ref.D, r.x, r.x);
        const double F = 0.8 * p.fid.value(r.x) + ref.g(y) - 0.5 * (y - r.x).squaredNorm();
        EXPECT_NEAR(r.F, F, 1e-10);
        const Vector grad = 0.8 * p.fid.gradient(r.x) + (y - r.x);
        EXPECT_NEAR(r.grad_F_sq, grad.squaredNorm(), 1e-10 * (1.0 + grad.squaredNorm()));
    }
}

TEST(Solver, ProxGapMatchesOracleObjective) {
    const auto p = two_dim();
    std::vector<oracle::Component> comps;
    for (const auto& c : p.prior.components()) comps.push_back({c.weight, c.mean, c.cov});
    const auto ref = fixtures::mmse_pair(comps, 0.7);
    auto H = [&](const Vector& u, const Vector& z) {
        const Vector y = oracle::newton_inverse(ref.D, u, u);
        return 0.5 * (u - z).squaredNorm() + ref.g(y) - 0.5 * (y - u).squaredNorm();
    };
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        const Vector z = 1.5 * standard_normal(rng, 2);
        const Vector xhat = p.target.apply(z) + 0.05 * standard_normal(rng, 2);
        const Vector y = invert(p.target, xhat, 1e-13);
        const double expected = H(xhat, z) - H(ref.D(z), z);
        EXPECT_NEAR(prox_gap(p.target, z, xhat, y), expected, 1e-10);
        EXPECT_GT(expected, 0.0);
    }
}

TEST(Solver, MismatchedRunSatisfiesLemmaChecks) {
    const auto p = two_dim();
    const auto run = perturb(p.target, BiasModel::constant(vec({0.03, -0.02})));
    ProblemSpec spec{p.fid, p.target, run, 0.8, 0.7, vec({2.0, -1.0}), 100};
    const auto tr = pnp_pgd_run(spec);
    for (const auto& r : tr.records) EXPECT_GT(r.eps, 0.0);
    EXPECT_TRUE(check_delta_bound(tr).pass);
    EXPECT_TRUE(check_prox_distance(tr).pass);
    EXPECT_TRUE(check_descent(tr).pass_derived);
}

TEST(Solver, RunsAreDeterministic) {
    const auto p = two_dim();
    const auto run = perturb(p.target, BiasModel::constant(vec({0.03, -0.02})));
    ProblemSpec spec{p.fid, p.target, run, 0.8, 0.7, vec({2.0, -1.0}), 30};
    const auto a = pnp_pgd_run(spec);
    const auto b = pnp_pgd_run(spec);
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        EXPECT_EQ(a.records[k].F, b.records[k].F);
        EXPECT_EQ(a.records[k].eps, b.records[k].eps);
    }
    EXPECT_EQ(a.constants.F_star_lower, b.constants.F_star_lower);
}

TEST(Solver, RejectsStepAndLipschitzViolations) {
    auto spec = closed_form_problem(10);
    spec.lambda = 1.5;
    try {
        pnp_pgd_run(spec);
        FAIL() << "expected InvalidParameter";
    } catch (const InvalidParameter& e) {
        EXPECT_NE(std::string(e.what()).find("lambda * L_f < 1"), std::string::npos);
    }
    spec = closed_form_problem(10);
    spec.target_denoiser = spec.run_denoiser = make_scalar(1, -0.5);  // residual 1.5 v
    EXPECT_THROW(pnp_pgd_run(spec), InvalidParameter);
    spec = closed_form_problem(10);
    spec.x0 = Vector::Zero(2);
    EXPECT_THROW(pnp_pgd_run(spec), ShapeError);
    spec = closed_form_problem(0);
    EXPECT_THROW(pnp_pgd_run(spec), InvalidParameter);
}

TEST(Solver, ExpandingRunDenoiserDiverges) {
    auto spec = closed_form_problem(200);
    spec.run_denoiser = perturb(spec.target_denoiser, BiasModel::linear(Matrix::Constant(1, 1, 10.0)));
    spec.x0 = vec({1.0});
    EXPECT_THROW(pnp_pgd_run(spec), DivergenceError);
}

TEST(Solver, ExactSchemeNeedsTargetAsRunDenoiser) {
    auto spec = closed_form_problem(10);
    spec.run_denoiser = make_scalar(1, 0.5);
    EXPECT_THROW(pgd_exact_run(spec), PreconditionError);
    spec.run_denoiser = spec.target_denoiser;
    const auto tr = pgd_exact_run(spec);
    EXPECT_EQ(tr.scheme, Scheme::pgd_exact);
    for (const auto& r : tr.records) EXPECT_EQ(r.eps, 0.0);
}

TEST(Solver, EquivariantRunChecksPreconditions) {
    const auto p = two_dim();
    const auto g = sign_flip_group(2);
    ProblemSpec spec{p.fid, p.target, wrap_equivariant(p.target, g), 0.8, 0.7, vec({1.0, 1.0}), 5};
    // the two-component prior is not symmetric under x -> -x
    EXPECT_THROW(epnp_pgd_run(spec, g), PreconditionError);
    spec.run_denoiser = p.target;
    EXPECT_THROW(epnp_pgd_run(spec, g), PreconditionError);

    const auto sym_target = make_mmse(symmetrize(p.prior, g), 0.7);
    spec.target_denoiser = sym_target;
    spec.run_denoiser = wrap_equivariant(sym_target, g, EquivarianceMode::sampled(3, 1));
    EXPECT_THROW(epnp_pgd_run(spec, g), PreconditionError);
    spec.run_denoiser = wrap_equivariant(perturb(sym_target, BiasModel::constant(vec({0.02, 0.01}))), g);
    const auto tr = epnp_pgd_run(spec, g);
    for (const auto& r : tr.records) {
        ASSERT_TRUE(r.eps_hat.has_value());
        ASSERT_TRUE(r.anisotropy.has_value());
        EXPECT_LE(r.eps, *r.eps_hat + 1e-12);
    }
}

TEST(Solver, PhiMinimumEstimateIsAttainedValue) {
    // phi(x) = x^2 / 2 for D(v) = v/2, minimum 0 at the origin
    const auto d = make_scalar(1, 0.5);
    EXPECT_NEAR(estimate_phi_min(d, {vec({3.0})}, 200), 0.0, 1e-12);
}
