// Experiment configs: parsing, per-instance problem generation, batch
// execution with a worker pool, and artifact output.
//
// Instance i of a config with seed s draws all of its randomness from
// Rng(s + i), in a fixed order: prior, sigma, fidelity, lambda, x0, bias.
// List-valued choices (dim, group kind, fidelity kind, bias kind) cycle
// with i.
#pragma once

#include "certify.hpp"
#include "equivariance.hpp"
#include "invariance.hpp"
#include "io.hpp"
#include "solver.hpp"

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace pnpcert {

/// A scalar given either as a number or as a [lo, hi] range drawn uniformly.
struct Draw {
    double lo = 0.0;
    double hi = 0.0;

    double sample(Rng& rng) const {
        if (lo == hi) return lo;
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    }
};

struct ExperimentConfig {
    std::string name;
    std::uint64_t seed = 0;
    int instances = 1;
    std::vector<Index> dims;
    json prior;
    json group;  // null when absent
    json fidelity;
    Draw sigma;
    std::optional<Draw> lambda;
    std::optional<Draw> lambda_Lf;
    std::optional<double> alpha;  // unset: "auto"
    double alpha_auto_target = 0.9;
    json bias;  // null when absent
    int iterations = 1;
    std::vector<std::string> theorems;
    std::string out_dir;
    json x0;  // null: zeros
};

namespace detail {

inline Draw parse_draw(const json& v, const std::string& path) {
    if (v.is_number()) {
        const double x = v.get<double>();
        return {x, x};
    }
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
        const double lo = v[0].get<double>();
        const double hi = v[1].get<double>();
        if (!(lo <= hi)) throw ConfigError(path, "range must satisfy lo <= hi");
        return {lo, hi};
    }
    throw ConfigError(path, "expected a number or a [lo, hi] range");
}

/// A string, or a list of strings cycled by instance index.
inline std::string pick_choice(const json& v, int instance, const std::string& path) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array() && !v.empty()) {
        const auto& c = v[static_cast<std::size_t>(instance) % v.size()];
        return io::text(c, path);
    }
    throw ConfigError(path, "expected a string or a non-empty list of strings");
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
    ExperimentConfig c;
    c.name = io::has(doc, "name") ? io::text(doc["name"], "name") : std::string("experiment");
    const long long seed = io::integer(io::field(doc, "seed", ""), "seed");
    if (seed < 0) throw ConfigError("seed", "must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.instances = static_cast<int>(io::has(doc, "instances") ? io::integer(doc["instances"], "instances") : 1);
    if (c.instances < 1) throw ConfigError("instances", "must be at least 1");

    const json& dim = io::field(doc, "dim", "");
    if (dim.is_array()) {
        if (dim.empty()) throw ConfigError("dim", "expected a positive integer or a non-empty list");
        for (std::size_t i = 0; i < dim.size(); ++i) c.dims.push_back(io::integer(dim[i], "dim[" + std::to_string(i) + "]"));
    } else {
        c.dims.push_back(io::integer(dim, "dim"));
    }
    for (const auto n : c.dims) {
        if (n < 1) throw ConfigError("dim", "dimensions must be positive");
    }

    c.prior = io::field(doc, "prior", "");
    if (!c.prior.is_object()) throw ConfigError("prior", "expected an object");
    c.group = io::has(doc, "group") ? doc["group"] : json();
    c.fidelity = io::field(doc, "fidelity", "");
    if (!c.fidelity.is_object()) throw ConfigError("fidelity", "expected an object");

    c.sigma = detail::parse_draw(io::field(doc, "sigma", ""), "sigma");
    if (!(c.sigma.lo > 0.0)) throw ConfigError("sigma", "must be positive");

    if (io::has(doc, "lambda")) c.lambda = detail::parse_draw(doc["lambda"], "lambda");
    if (io::has(doc, "lambda_Lf")) c.lambda_Lf = detail::parse_draw(doc["lambda_Lf"], "lambda_Lf");
    if (c.lambda.has_value() == c.lambda_Lf.has_value()) {
        throw ConfigError("lambda", "give exactly one of 'lambda' and 'lambda_Lf'");
    }
    if (c.lambda && !(c.lambda->lo > 0.0)) throw ConfigError("lambda", "must be positive");
    if (c.lambda_Lf && !(c.lambda_Lf->lo > 0.0)) throw ConfigError("lambda_Lf", "must be positive");

    if (io::has(doc, "alpha")) {
        const json& a = doc["alpha"];
        if (a.is_string() && a.get<std::string>() == "auto") {
            c.alpha.reset();
        } else {
            c.alpha = io::number(a, "alpha");
            if (!(*c.alpha > 0.0 && *c.alpha <= 1.0)) throw ConfigError("alpha", "must lie in (0, 1] or be \"auto\"");
        }
    } else {
        c.alpha = 1.0;
    }
    if (io::has(doc, "alpha_target")) {
        c.alpha_auto_target = io::number(doc["alpha_target"], "alpha_target");
        if (!(c.alpha_auto_target > 0.0 && c.alpha_auto_target < 1.0)) {
            throw ConfigError("alpha_target", "must lie in (0, 1)");
        }
    }

    c.bias = io::has(doc, "bias") ? doc["bias"] : json();
    c.iterations = static_cast<int>(io::integer(io::field(doc, "iterations", ""), "iterations"));
    if (c.iterations < 1) throw ConfigError("iterations", "must be at least 1");

    const json& th = io::field(doc, "theorems", "");
    if (!th.is_array() || th.empty()) throw ConfigError("theorems", "expected a non-empty list drawn from T1, T2, T3");
    for (std::size_t i = 0; i < th.size(); ++i) {
        const std::string t = io::text(th[i], "theorems[" + std::to_string(i) + "]");
        if (t != "T1" && t != "T2" && t != "T3") {
            throw ConfigError("theorems[" + std::to_string(i) + "]", "unknown theorem '" + t + "'");
        }
        c.theorems.push_back(t);
    }
    c.out_dir = io::has(doc, "out_dir") ? io::text(doc["out_dir"], "out_dir") : "out/" + c.name;
    c.x0 = io::has(doc, "x0") ? doc["x0"] : json();

    const bool wants_t3 = std::find(c.theorems.begin(), c.theorems.end(), "T3") != c.theorems.end();
    if (wants_t3 && c.group.is_null()) throw ConfigError("group", "T3 requires a group");
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(path.string(), e.what());
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string(), e.what());
    }
    return parse_config(doc);
}

// ----- instance generation -----

struct Instance {
    int id = 0;
    std::uint64_t seed = 0;
    Index dim = 0;
    GmmPrior prior;
    std::optional<GroupAction> group;
    Fidelity fidelity;
    double sigma = 0.0;
    double lambda = 0.0;
    double alpha = 1.0;
    Denoiser target;
    Denoiser run;  // target itself when no bias is configured
    std::optional<BiasModel> bias;
    Vector x0;

    ProblemSpec spec(const Denoiser& run_denoiser) const {
        return ProblemSpec{fidelity, target, run_denoiser, lambda, sigma, x0, 0};
    }
};

namespace detail {

inline GmmPrior random_prior(const json& r, Index n, Rng& rng, const std::string& path) {
    Draw k{1, 1};
    if (io::has(r, "components")) k = parse_draw(r["components"], io::join(path, "components"));
    const double mean_scale = io::has(r, "mean_scale") ? io::number(r["mean_scale"], io::join(path, "mean_scale")) : 1.5;
    Draw eig{0.3, 1.5};
    if (io::has(r, "cov_eig")) eig = parse_draw(r["cov_eig"], io::join(path, "cov_eig"));
    if (!(eig.lo > 0.0)) throw ConfigError(io::join(path, "cov_eig"), "eigenvalues must be positive");
    const bool shared = io::has(r, "shared_cov") && r["shared_cov"].get<bool>();
    const int count = static_cast<int>(std::llround(std::floor(k.sample(rng) + (k.lo == k.hi ? 0.0 : 0.5))));
    if (count < 1) throw ConfigError(io::join(path, "components"), "need at least one component");
    std::vector<GaussianComponent> comps;
    std::uniform_real_distribution<double> w(0.5, 1.5);
    double total = 0.0;
    for (int i = 0; i < count; ++i) {
        GaussianComponent c;
        c.weight = w(rng);
        total += c.weight;
        c.mean = mean_scale * standard_normal(rng, n);
        if (shared && i > 0) {
            c.cov = comps.front().cov;
            comps.push_back(std::move(c));
            continue;
        }
        const Matrix q = random_orthogonal(rng, n);
        Vector ev(n);
        for (Index j = 0; j < n; ++j) ev(j) = eig.sample(rng);
        c.cov = q * ev.asDiagonal() * q.transpose();
        c.cov = 0.5 * (c.cov + c.cov.transpose());
        comps.push_back(std::move(c));
    }
    for (auto& c : comps) c.weight /= total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < comps.size(); ++i) acc += comps[i].weight;
    comps.back().weight = 1.0 - acc;
    return GmmPrior(n, std::move(comps));
}

/// Matrix with singular values drawn log-uniformly from [lo, hi].
inline Matrix random_operator(Index m, Index n, Draw sv, Rng& rng) {
    const Matrix u = random_orthogonal(rng, m);
    const Matrix v = random_orthogonal(rng, n);
    const Index r = std::min(m, n);
    Matrix s = Matrix::Zero(m, n);
    const Draw logs{std::log(sv.lo), std::log(sv.hi)};
    for (Index i = 0; i < r; ++i) s(i, i) = std::exp(logs.sample(rng));
    return u * s * v.transpose();
}

inline Fidelity build_fidelity(const json& doc, const GmmPrior& prior, int instance, Rng& rng) {
    const std::string path = "fidelity";
    const std::string kind = pick_choice(io::field(doc, "kind", path), instance, io::join(path, "kind"));
    if (kind != "least_squares" && kind != "welsch") {
        throw ConfigError(io::join(path, "kind"), "unknown fidelity kind '" + kind + "'");
    }
    const Index n = prior.dim();
    if (!io::has(doc, "random")) {
        json explicit_doc = doc;
        explicit_doc["kind"] = kind;
        if (kind == "welsch" && io::has(doc, "c") && doc["c"].is_array()) {
            explicit_doc["c"] = parse_draw(doc["c"], io::join(path, "c")).sample(rng);
        }
        Fidelity f = fidelity_from_json(explicit_doc, path);
        if (f.dim() != n) throw ConfigError(io::join(path, "A"), "column count does not match the dimension");
        return f;
    }
    const json& r = doc["random"];
    const std::string rp = io::join(path, "random");
    const Index m = io::has(r, "rows") ? io::integer(r["rows"], io::join(rp, "rows")) : n;
    if (m < 1) throw ConfigError(io::join(rp, "rows"), "must be positive");
    Draw sv{1.0, 1.0};
    if (io::has(r, "sv")) sv = parse_draw(r["sv"], io::join(rp, "sv"));
    if (!(sv.lo > 0.0)) throw ConfigError(io::join(rp, "sv"), "singular values must be positive");
    const double noise = io::has(r, "noise") ? io::number(r["noise"], io::join(rp, "noise")) : 0.1;
    const Matrix a = random_operator(m, n, sv, rng);
    const Vector x_true = prior.sample(rng(), 1).front();
    const Vector y = a * x_true + noise * standard_normal(rng, m);
    if (kind == "least_squares") return Fidelity::least_squares(a, y);
    Draw c{1.0, 1.0};
    if (io::has(doc, "c")) c = parse_draw(doc["c"], io::join(path, "c"));
    if (!(c.lo > 0.0)) throw ConfigError(io::join(path, "c"), "must be positive");
    return Fidelity::welsch(a, y, c.sample(rng));
}

inline std::optional<BiasModel> build_bias(const json& doc, const GmmPrior& prior, const Vector& x0, int instance,
                                           Rng& rng) {
    if (doc.is_null()) return std::nullopt;
    const std::string path = "bias";
    if (!doc.is_object()) throw ConfigError(path, "expected an object or null");
    const Index n = prior.dim();
    if (!io::has(doc, "random")) {
        BiasModel b = bias_from_json(doc, path);
        if ((b.kind == BiasKind::constant && b.c.size() != n) ||
            (b.kind == BiasKind::linear && (b.b.rows() != n || b.b.cols() != n)) ||
            (b.kind == BiasKind::wrong_prior && b.wrong_prior->dim() != n)) {
            throw ConfigError(path, "bias dimension does not match the problem dimension");
        }
        return b;
    }
    const json& r = doc["random"];
    const std::string rp = io::join(path, "random");
    const std::string kind = pick_choice(io::field(r, "kind", rp), instance, io::join(rp, "kind"));
    const Draw norm = parse_draw(io::field(r, "norm", rp), io::join(rp, "norm"));
    if (!(norm.lo >= 0.0)) throw ConfigError(io::join(rp, "norm"), "must be non-negative");
    const double size = norm.sample(rng);
    if (kind == "constant") {
        Vector dir = standard_normal(rng, n);
        return BiasModel::constant(size * dir / dir.norm());
    }
    if (kind == "linear") {
        // ||B v|| <= size for ||v|| <= radius
        const double radius = io::has(r, "radius") ? io::number(r["radius"], io::join(rp, "radius"))
                                                   : 2.0 * std::max(1.0, x0.norm());
        Matrix b(n, n);
        for (Index j = 0; j < n; ++j) b.col(j) = standard_normal(rng, n);
        return BiasModel::linear(b / spectral_norm(b), size / radius);
    }
    if (kind == "wrong_prior") {
        const double shift = io::has(r, "shift") ? io::number(r["shift"], io::join(rp, "shift")) : 1.0;
        auto comps = prior.components();
        for (auto& c : comps) c.mean += shift * standard_normal(rng, n);
        return BiasModel::wrong(GmmPrior(n, std::move(comps)), size);
    }
    throw ConfigError(io::join(rp, "kind"), "unknown bias kind '" + kind + "'");
}

}  // namespace detail

/// Builds instance `i` deterministically from Rng(seed + i). Violations of
/// the run preconditions are reported as ConfigError naming the field.
inline Instance build_instance(const ExperimentConfig& c, int i) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
    Rng rng(seed);
    const Index n = c.dims[static_cast<std::size_t>(i) % c.dims.size()];
    std::optional<GroupAction> group;

    if (!c.group.is_null()) {
        json gdoc = c.group;
        if (!gdoc.is_object()) throw ConfigError("group", "expected an object or null");
        gdoc["kind"] = detail::pick_choice(io::field(gdoc, "kind", "group"), i, "group.kind");
        group = group_from_json(gdoc, "group", n);
        if (group->dim() != n) {
            throw ConfigError("group", "group dimension " + std::to_string(group->dim()) + " does not match dim " +
                                           std::to_string(n));
        }
    }

    const bool symmetrize_prior = io::has(c.prior, "symmetrize") && c.prior["symmetrize"].get<bool>();
    GmmPrior prior = io::has(c.prior, "random") ? io::guarded("prior", [&] {
        return detail::random_prior(c.prior["random"], n, rng, "prior.random");
    })
                                                : prior_from_json(c.prior, "prior");
    if (prior.dim() != n) throw ConfigError("prior.dim", "prior dimension does not match dim");
    if (symmetrize_prior) {
        if (!group) throw ConfigError("prior.symmetrize", "symmetrization needs a group");
        if (prior.shared_covariance()) {
            // keep the covariance shared: replace it by its group average first
            Matrix avg = Matrix::Zero(n, n);
            for (const auto& g : group->elements()) avg += g.a * prior.component(0).cov * g.a.transpose();
            avg *= group->weight();
            avg = 0.5 * (avg + avg.transpose());
            auto comps = prior.components();
            for (auto& comp : comps) comp.cov = avg;
            prior = GmmPrior(n, std::move(comps));
        }
        prior = symmetrize(prior, *group);
    }

    const double sigma = c.sigma.sample(rng);
    const Denoiser base = make_mmse(prior, sigma);
    const double alpha = c.alpha ? *c.alpha : std::min(1.0, c.alpha_auto_target / std::max(base.lipschitz(), 1e-300));
    const Denoiser target = alpha == 1.0 ? base : relax(base, alpha);
    if (!(target.lipschitz() < 1.0)) {
        throw ConfigError("alpha", "residual Lipschitz constant L = " + format_double(target.lipschitz()) +
                                       " of the target denoiser is not < 1 (instance " + std::to_string(i) + ")");
    }

    Fidelity fidelity = detail::build_fidelity(c.fidelity, prior, i, rng);
    const double lf = fidelity.lipschitz_grad();
    double lambda = 0.0;
    if (c.lambda) {
        lambda = c.lambda->sample(rng);
    } else {
        if (!(lf > 0.0)) throw ConfigError("lambda_Lf", "L_f is zero; give lambda directly");
        lambda = c.lambda_Lf->sample(rng) / lf;
    }
    if (!(lambda * lf < 1.0)) {
        throw ConfigError("lambda", "lambda * L_f = " + format_double(lambda * lf) +
                                        " violates lambda * L_f < 1 (instance " + std::to_string(i) + ")");
    }

    Vector x0;
    if (c.x0.is_null()) {
        x0 = Vector::Zero(n);
    } else if (c.x0.is_array()) {
        x0 = io::vector(c.x0, "x0");
        if (x0.size() != n) throw ConfigError("x0", "length does not match dim");
    } else if (io::has(c.x0, "random_scale")) {
        x0 = io::number(c.x0["random_scale"], "x0.random_scale") * standard_normal(rng, n);
    } else {
        throw ConfigError("x0", "expected an array or {\"random_scale\": s}");
    }

    auto bias = detail::build_bias(c.bias, prior, x0, i, rng);
    Denoiser run = bias ? io::guarded("bias", [&] { return perturb(target, *bias); }) : target;

    const bool wants_t3 = std::find(c.theorems.begin(), c.theorems.end(), "T3") != c.theorems.end();
    if (wants_t3) {
        const auto rep = check_invariance(prior, *group, 64, 1e-9, seed);
        if (!rep.pass) {
            throw ConfigError("prior", "T3 needs a group-invariant prior; invariance fails for group element " +
                                           std::to_string(rep.worst_element) + " (|log p(T_g x) - log p(x)| = " +
                                           format_double(rep.max_violation) + ", instance " + std::to_string(i) + ")");
        }
    }
    return Instance{i,      seed,   n,      std::move(prior), std::move(group), std::move(fidelity), sigma,
                    lambda, alpha,  target, std::move(run),   std::move(bias),  std::move(x0)};
}

// ----- execution -----

struct InstanceOutcome {
    int id = 0;
    bool aborted = false;
    std::string abort_message;
    std::vector<CertificateReport> certificates;
    std::vector<std::string> failures;  // "instance i theorem T: reason"
    json document;
};

/// Tolerance for the bias decomposition identity.
inline constexpr double kDecompositionTol = 1e-10;
/// An anisotropy witness above this value requires strict reduction.
inline constexpr double kAnisotropyThreshold = 1e-8;

namespace detail {

inline json run_to_json(const SolverTrace& tr) {
    return {{"scheme", to_string(tr.scheme)},
            {"iterations", tr.iterations},
            {"final_x", io::to_json(tr.records.back().x)},
            {"F_final", tr.records.back().F},
            {"grad_F_sq_final", tr.records.back().grad_F_sq}};
}

inline std::string instance_stem(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "instance_%04d", id);
    return buf;
}

}  // namespace detail

inline InstanceOutcome run_instance(const ExperimentConfig& c, const Instance& inst, const std::filesystem::path& out) {
    InstanceOutcome res;
    res.id = inst.id;
    const std::string stem = detail::instance_stem(inst.id);
    RunOptions opt;
    opt.floor_seed = inst.seed;
    ProblemSpec spec = inst.spec(inst.run);
    spec.iterations = c.iterations;

    json doc{{"instance_id", inst.id},
             {"seed", inst.seed},
             {"dim", inst.dim},
             {"sigma", inst.sigma},
             {"lambda", inst.lambda},
             {"alpha", inst.alpha},
             {"L", inst.target.lipschitz()},
             {"L_f", inst.fidelity.lipschitz_grad()},
             {"x0", io::to_json(inst.x0)},
             {"denoiser", denoiser_to_json(inst.run)},
             {"fidelity", fidelity_to_json(inst.fidelity)}};
    if (inst.group) doc["group"] = group_to_json(*inst.group);
    json certs = json::array();
    json runs = json::array();

    auto fail = [&](const std::string& theorem, const std::string& why) {
        res.failures.push_back("instance " + std::to_string(inst.id) + " theorem " + theorem + ": " + why);
    };
    auto bound_failure = [](const CertificateReport& r) {
        return "derived bound violated (lhs_avg = " + format_double(r.lhs_avg) +
               ", rhs_derived = " + format_double(r.rhs_derived) + ")";
    };
    auto write_trace = [&](const SolverTrace& tr) {
        write_file_atomic(out / "traces" / (stem + "_" + to_string(tr.scheme) + ".csv"), trace_to_csv(tr));
        runs.push_back(detail::run_to_json(tr));
    };

    try {
        std::optional<SolverTrace> plain;
        auto plain_trace = [&]() -> const SolverTrace& {
            if (!plain) {
                plain = pnp_pgd_run(spec, opt);
                write_trace(*plain);
            }
            return *plain;
        };
        for (const auto& th : c.theorems) {
            if (th == "T1") {
                auto r = certify_theorem1(plain_trace());
                if (!r.pass_derived) fail(th, bound_failure(r));
                certs.push_back(certificate_to_json(r));
                res.certificates.push_back(std::move(r));
            } else if (th == "T2") {
                ProblemSpec exact = spec;
                exact.run_denoiser = inst.target;
                const auto tr = pgd_exact_run(exact, opt);
                write_trace(tr);
                auto r = certify_theorem2(tr);
                if (!r.pass_derived) fail(th, bound_failure(r));
                certs.push_back(certificate_to_json(r));
                res.certificates.push_back(std::move(r));
            } else {
                ProblemSpec eq = spec;
                eq.run_denoiser = wrap_equivariant(inst.run, *inst.group);
                const auto tr = epnp_pgd_run(eq, *inst.group, opt);
                write_trace(tr);
                auto r = certify_theorem3(tr, plain_trace());
                double witness = 0.0;
                double identity_err = 0.0;
                for (const auto& rec : tr.records) {
                    witness = std::max(witness, rec.anisotropy.value_or(0.0));
                    const auto dec = bias_decompose(inst.run, inst.target, *inst.group, rec.z);
                    identity_err = std::max(identity_err,
                                            std::abs(dec.mean_sq_bias + dec.variance_gain - dec.avg_sq_bias));
                }
                const bool anisotropic = witness > kAnisotropyThreshold;
                const bool strict = r.eps_sum < *r.eps_hat_sum;
                json cj = certificate_to_json(r);
                cj["anisotropy_witness"] = witness;
                cj["strict_reduction"] = strict;
                cj["decomposition_max_error"] = identity_err;
                certs.push_back(cj);
                if (!r.pass_derived) {
                    fail(th, *r.reduction_pass ? bound_failure(r)
                                               : "sum eps_tilde = " + format_double(r.eps_sum) +
                                                     " exceeds sum eps_hat = " + format_double(*r.eps_hat_sum));
                }
                if (anisotropic && !strict) {
                    fail(th, "anisotropic bias (witness " + format_double(witness) + ") without strict reduction");
                }
                if (identity_err > kDecompositionTol) {
                    fail(th, "bias decomposition identity off by " + format_double(identity_err));
                }
                res.certificates.push_back(std::move(r));
            }
        }
    } catch (const NonConvergence& e) {
        res.aborted = true;
        res.abort_message = "instance " + std::to_string(inst.id) + ": " + e.what();
    } catch (const DivergenceError& e) {
        res.aborted = true;
        res.abort_message = "instance " + std::to_string(inst.id) + ": " + e.what();
    }
    doc["certificates"] = certs;
    doc["runs"] = runs;
    if (res.aborted) doc["abort"] = res.abort_message;
    write_file_atomic(out / "certificates" / (stem + ".json"), doc.dump(2) + "\n");
    res.document = std::move(doc);
    return res;
}

struct ExperimentOutcome {
    int exit_code = 0;  // 0 pass, 1 assertion failure, 3 runtime abort
    std::vector<InstanceOutcome> instances;
    std::filesystem::path out_dir;
};

/// Runs every instance with `jobs` workers and writes summary.csv. Config
/// errors surface as ConfigError before anything runs.
inline ExperimentOutcome run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir, int jobs,
                                        std::ostream& log = std::cerr) {
    std::vector<Instance> instances;
    instances.reserve(static_cast<std::size_t>(c.instances));
    for (int i = 0; i < c.instances; ++i) instances.push_back(build_instance(c, i));

    ExperimentOutcome outcome;
    outcome.out_dir = out_dir;
    outcome.instances.resize(instances.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::exception_ptr fatal;
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= instances.size()) return;
            try {
                outcome.instances[k] = run_instance(c, instances[k], out_dir);
            } catch (...) {
                std::lock_guard<std::mutex> lock(log_mutex);
                if (!fatal) fatal = std::current_exception();
                next = instances.size();
                return;
            }
            const auto& r = outcome.instances[k];
            std::lock_guard<std::mutex> lock(log_mutex);
            for (const auto& f : r.failures) log << "FAIL " << f << "\n";
            if (r.aborted) log << "ABORT " << r.abort_message << "\n";
        }
    };
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(instances.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    std::string summary = std::string(kSummaryHeader) + "\n";
    bool any_fail = false;
    bool any_abort = false;
    for (const auto& r : outcome.instances) {
        for (const auto& cert : r.certificates) summary += summary_row(r.id, cert);
        any_fail = any_fail || !r.failures.empty();
        any_abort = any_abort || r.aborted;
    }
    write_file_atomic(out_dir / "summary.csv", summary);
    outcome.exit_code = any_abort ? 3 : (any_fail ? 1 : 0);
    return outcome;
}

struct ValidationLine {
    int instance = 0;
    double L_f = 0.0;
    double lambda = 0.0;
    double lambda_Lf = 0.0;
    double L = 0.0;
};

/// Builds every instance without running; throws ConfigError on violations.
inline std::vector<ValidationLine> validate_config(const ExperimentConfig& c) {
    std::vector<ValidationLine> out;
    for (int i = 0; i < c.instances; ++i) {
        const Instance inst = build_instance(c, i);
        const double lf = inst.fidelity.lipschitz_grad();
        out.push_back({i, lf, inst.lambda, inst.lambda * lf, inst.target.lipschitz()});
    }
    return out;
}

}  // namespace pnpcert
