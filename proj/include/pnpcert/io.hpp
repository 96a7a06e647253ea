// JSON documents for priors, groups, fidelities, biases, denoisers and
// certificates; CSV export of traces and batch summaries.
#pragma once

#include "certify.hpp"
#include "denoisers.hpp"
#include "equivariance.hpp"
#include "fidelity.hpp"
#include "groups.hpp"
#include "priors.hpp"
#include "solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace pnpcert {

using json = nlohmann::json;

/// Malformed document; `field` is a dotted path to the offending entry.
class ConfigError : public InvalidInput {
public:
    ConfigError(std::string field, const std::string& message)
        : InvalidInput("config error at '" + field + "': " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

namespace io {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline const json& field(const json& doc, const std::string& key, const std::string& path) {
    if (!doc.is_object()) throw ConfigError(path, "expected an object");
    const auto it = doc.find(key);
    if (it == doc.end()) throw ConfigError(join(path, key), "missing required field");
    return *it;
}

inline bool has(const json& doc, const std::string& key) {
    return doc.is_object() && doc.contains(key) && !doc.at(key).is_null();
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

inline long long integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<long long>();
}

inline std::string text(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

inline Vector vector(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    Vector out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = number(v[i], path + "[" + std::to_string(i) + "]");
    return out;
}

inline Matrix matrix(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of rows");
    const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
    if (cols == 0) throw ConfigError(path, "rows must be non-empty arrays");
    Matrix out(static_cast<Index>(v.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string rp = path + "[" + std::to_string(i) + "]";
        if (!v[i].is_array() || v[i].size() != cols) throw ConfigError(rp, "ragged matrix row");
        for (std::size_t j = 0; j < cols; ++j) {
            out(static_cast<Index>(i), static_cast<Index>(j)) = number(v[i][j], rp + "[" + std::to_string(j) + "]");
        }
    }
    return out;
}

inline json to_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline json to_json(const Matrix& m) {
    json out = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

/// Runs a library constructor and reports its validation failures against `path`.
template <class F>
auto guarded(const std::string& path, F&& build) -> decltype(build()) {
    try {
        return build();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace io

// ----- priors -----

inline json prior_to_json(const GmmPrior& prior) {
    json comps = json::array();
    for (const auto& c : prior.components()) {
        comps.push_back({{"weight", c.weight}, {"mean", io::to_json(c.mean)}, {"cov", io::to_json(c.cov)}});
    }
    return {{"dim", prior.dim()}, {"components", comps}};
}

inline GmmPrior prior_from_json(const json& doc, const std::string& path = "prior") {
    const Index dim = io::integer(io::field(doc, "dim", path), io::join(path, "dim"));
    const json& comps = io::field(doc, "components", path);
    if (!comps.is_array()) throw ConfigError(io::join(path, "components"), "expected an array");
    std::vector<GaussianComponent> out;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const std::string cp = io::join(path, "components[" + std::to_string(i) + "]");
        GaussianComponent c;
        c.weight = io::number(io::field(comps[i], "weight", cp), io::join(cp, "weight"));
        c.mean = io::vector(io::field(comps[i], "mean", cp), io::join(cp, "mean"));
        c.cov = io::matrix(io::field(comps[i], "cov", cp), io::join(cp, "cov"));
        out.push_back(std::move(c));
    }
    return io::guarded(path, [&] { return GmmPrior(dim, std::move(out)); });
}

// ----- groups -----

inline GroupKind group_kind_from_string(const std::string& s, const std::string& path) {
    if (s == "sign_flip") return GroupKind::sign_flip;
    if (s == "coordinate_permutations") return GroupKind::coordinate_permutations;
    if (s == "dihedral_image") return GroupKind::dihedral_image;
    if (s == "cyclic_shift") return GroupKind::cyclic_shift;
    if (s == "custom") return GroupKind::custom;
    throw ConfigError(path, "unknown group kind '" + s + "'");
}

inline json group_to_json(const GroupAction& group) {
    json out{{"kind", to_string(group.kind())}, {"dim", group.dim()}};
    if (group.kind() == GroupKind::dihedral_image) {
        out["h"] = group.image_height();
        out["w"] = group.image_width();
    } else if (group.kind() == GroupKind::custom) {
        json elems = json::array();
        for (const auto& g : group.elements()) elems.push_back({{"a", io::to_json(g.a)}, {"c", io::to_json(g.c)}});
        out["elements"] = elems;
    }
    return out;
}

/// `default_dim` fills in "dim" when the document omits it.
inline GroupAction group_from_json(const json& doc, const std::string& path = "group", Index default_dim = 0) {
    const GroupKind kind = group_kind_from_string(io::text(io::field(doc, "kind", path), io::join(path, "kind")),
                                                  io::join(path, "kind"));
    if (kind == GroupKind::dihedral_image) {
        const Index h = io::integer(io::field(doc, "h", path), io::join(path, "h"));
        const Index w = io::integer(io::field(doc, "w", path), io::join(path, "w"));
        return io::guarded(path, [&] { return dihedral_image_group(h, w); });
    }
    if (kind == GroupKind::custom) {
        const json& elems = io::field(doc, "elements", path);
        if (!elems.is_array() || elems.empty()) throw ConfigError(io::join(path, "elements"), "expected a non-empty array");
        std::vector<GroupElement> out;
        for (std::size_t i = 0; i < elems.size(); ++i) {
            const std::string ep = io::join(path, "elements[" + std::to_string(i) + "]");
            GroupElement g;
            g.a = io::matrix(io::field(elems[i], "a", ep), io::join(ep, "a"));
            g.c = io::has(elems[i], "c") ? io::vector(elems[i]["c"], io::join(ep, "c")) : Vector::Zero(g.a.rows());
            out.push_back(std::move(g));
        }
        const Index n = out.front().a.rows();
        return io::guarded(path, [&] { return GroupAction(n, std::move(out), GroupKind::custom); });
    }
    Index n = default_dim;
    if (io::has(doc, "dim")) n = io::integer(doc["dim"], io::join(path, "dim"));
    if (n < 1) throw ConfigError(io::join(path, "dim"), "missing required field");
    return io::guarded(path, [&] { return make_group({kind, n, 0, 0}); });
}

// ----- fidelities -----

inline json fidelity_to_json(const Fidelity& f) {
    json out{{"kind", to_string(f.kind())}, {"A", io::to_json(f.a())}, {"y", io::to_json(f.y())}};
    if (f.kind() == FidelityKind::welsch) out["c"] = f.c();
    return out;
}

inline Fidelity fidelity_from_json(const json& doc, const std::string& path = "fidelity") {
    const std::string kind = io::text(io::field(doc, "kind", path), io::join(path, "kind"));
    Matrix a = io::matrix(io::field(doc, "A", path), io::join(path, "A"));
    Vector y = io::vector(io::field(doc, "y", path), io::join(path, "y"));
    if (kind == "least_squares") return io::guarded(path, [&] { return Fidelity::least_squares(a, y); });
    if (kind == "welsch") {
        const double c = io::number(io::field(doc, "c", path), io::join(path, "c"));
        return io::guarded(path, [&] { return Fidelity::welsch(a, y, c); });
    }
    throw ConfigError(io::join(path, "kind"), "unknown fidelity kind '" + kind + "'");
}

// ----- biases -----

inline json bias_to_json(const BiasModel& b) {
    json out{{"kind", to_string(b.kind)}, {"scale", b.scale}};
    switch (b.kind) {
        case BiasKind::constant: out["c"] = io::to_json(b.c); break;
        case BiasKind::linear: out["B"] = io::to_json(b.b); break;
        case BiasKind::wrong_prior: out["prior"] = prior_to_json(*b.wrong_prior); break;
    }
    return out;
}

inline BiasModel bias_from_json(const json& doc, const std::string& path = "bias") {
    const std::string kind = io::text(io::field(doc, "kind", path), io::join(path, "kind"));
    const double scale = io::has(doc, "scale") ? io::number(doc["scale"], io::join(path, "scale")) : 1.0;
    if (kind == "constant") return BiasModel::constant(io::vector(io::field(doc, "c", path), io::join(path, "c")), scale);
    if (kind == "linear") return BiasModel::linear(io::matrix(io::field(doc, "B", path), io::join(path, "B")), scale);
    if (kind == "wrong_prior") {
        if (!io::has(doc, "scale")) throw ConfigError(io::join(path, "scale"), "missing required field");
        return BiasModel::wrong(prior_from_json(io::field(doc, "prior", path), io::join(path, "prior")), scale);
    }
    throw ConfigError(io::join(path, "kind"), "unknown bias kind '" + kind + "'");
}

// ----- denoisers -----

/// MMSE-derived chains serialize flat ({"kind", "sigma", "prior", "alpha", "bias"});
/// anything else nests its base under "base".
inline json denoiser_to_json(const Denoiser& d) {
    const Denoiser* cur = &d;
    const BiasModel* bias = nullptr;
    double alpha = 1.0;
    if (const auto* m = cur->as<MismatchedModel>()) {
        bias = &m->bias_model();
        cur = &m->base();
    }
    if (const auto* r = cur->as<RelaxedModel>()) {
        alpha = r->alpha();
        cur = &r->base();
    }
    if (const auto* mm = cur->as<MmseModel>()) {
        json out{{"kind", bias ? "mismatched" : "mmse"}, {"sigma", mm->sigma()}, {"prior", prior_to_json(mm->prior())}};
        if (alpha != 1.0) out["alpha"] = alpha;
        if (bias) out["bias"] = bias_to_json(*bias);
        return out;
    }
    if (const auto* m = d.as<MismatchedModel>()) {
        return {{"kind", "mismatched"}, {"base", denoiser_to_json(m->base())}, {"bias", bias_to_json(m->bias_model())}};
    }
    if (const auto* r = d.as<RelaxedModel>()) {
        return {{"kind", "relaxed"}, {"alpha", r->alpha()}, {"base", denoiser_to_json(r->base())}};
    }
    if (const auto* l = d.as<LinearModel>()) {
        return {{"kind", "linear"}, {"sigma", l->sigma()}, {"M", io::to_json(l->matrix())}, {"b", io::to_json(l->offset())}};
    }
    if (const auto* e = d.as<EquivariantModel>()) {
        json out{{"kind", "equivariant"}, {"base", denoiser_to_json(e->base())}, {"group", group_to_json(e->group())}};
        if (e->mode().exact) {
            out["mode"] = {{"exact", true}};
        } else {
            out["mode"] = {{"exact", false}, {"count", e->mode().count}, {"seed", e->mode().seed}};
        }
        return out;
    }
    throw InvalidInput("denoiser_to_json: unsupported denoiser kind '" + d.kind() + "'");
}

inline Denoiser denoiser_from_json(const json& doc, const std::string& path = "denoiser") {
    const std::string kind = io::text(io::field(doc, "kind", path), io::join(path, "kind"));
    auto finish = [&](Denoiser d) {
        if (io::has(doc, "alpha")) {
            const double alpha = io::number(doc["alpha"], io::join(path, "alpha"));
            if (alpha != 1.0) d = io::guarded(io::join(path, "alpha"), [&] { return relax(d, alpha); });
        }
        if (io::has(doc, "bias")) {
            const auto b = bias_from_json(doc["bias"], io::join(path, "bias"));
            d = io::guarded(io::join(path, "bias"), [&] { return perturb(d, b); });
        }
        return d;
    };
    if (kind == "equivariant") {
        const Denoiser base = denoiser_from_json(io::field(doc, "base", path), io::join(path, "base"));
        const GroupAction group = group_from_json(io::field(doc, "group", path), io::join(path, "group"), base.dim());
        EquivarianceMode mode;
        if (io::has(doc, "mode")) {
            const json& m = doc["mode"];
            const std::string mp = io::join(path, "mode");
            if (io::has(m, "exact") && !m["exact"].get<bool>()) {
                mode = EquivarianceMode::sampled(
                    static_cast<std::size_t>(io::integer(io::field(m, "count", mp), io::join(mp, "count"))),
                    static_cast<std::uint64_t>(io::has(m, "seed") ? io::integer(m["seed"], io::join(mp, "seed")) : 0));
            }
        }
        return io::guarded(path, [&] { return wrap_equivariant(base, group, mode); });
    }
    if (io::has(doc, "base")) {
        if (kind != "relaxed" && kind != "mismatched") {
            throw ConfigError(io::join(path, "kind"), "kind '" + kind + "' does not take a base denoiser");
        }
        return finish(denoiser_from_json(doc["base"], io::join(path, "base")));
    }
    if (kind == "mmse" || kind == "mismatched") {
        const double sigma = io::number(io::field(doc, "sigma", path), io::join(path, "sigma"));
        GmmPrior prior = prior_from_json(io::field(doc, "prior", path), io::join(path, "prior"));
        return finish(io::guarded(path, [&] { return make_mmse(std::move(prior), sigma); }));
    }
    if (kind == "linear") {
        const double sigma = io::has(doc, "sigma") ? io::number(doc["sigma"], io::join(path, "sigma")) : 1.0;
        Matrix m = io::matrix(io::field(doc, "M", path), io::join(path, "M"));
        Vector b = io::has(doc, "b") ? io::vector(doc["b"], io::join(path, "b")) : Vector::Zero(m.rows());
        return finish(io::guarded(path, [&] { return make_linear(m, b, sigma); }));
    }
    throw ConfigError(io::join(path, "kind"), "unknown denoiser kind '" + kind + "'");
}

// ----- certificates -----

inline json certificate_to_json(const CertificateReport& r) {
    json out{{"theorem", r.theorem},
             {"t", r.t},
             {"lhs_min", r.lhs_min},
             {"lhs_avg", r.lhs_avg},
             {"rhs_paper", r.rhs_paper},
             {"rhs_derived", r.rhs_derived},
             {"eps_sum", r.eps_sum},
             {"pass_paper", r.pass_paper},
             {"pass_derived", r.pass_derived},
             {"constants_used",
              {{"L", r.constants.L},
               {"L_f", r.constants.L_f},
               {"lambda", r.constants.lambda},
               {"F0", r.constants.F0},
               {"F_star", r.constants.F_star}}}};
    if (r.eps_hat_sum) out["eps_hat_sum"] = *r.eps_hat_sum;
    if (r.plain_eps_sum) out["plain_eps_sum"] = *r.plain_eps_sum;
    if (r.reduction_gap) out["reduction_gap"] = *r.reduction_gap;
    if (r.reduction_pass) out["reduction_pass"] = *r.reduction_pass;
    return out;
}

// ----- CSV -----

inline constexpr const char* kTraceHeader = "k,F,grad_F_sq,eps,eps_hat,delta_norm,x_norm";
inline constexpr const char* kSummaryHeader =
    "instance_id,theorem,lhs_avg,rhs_paper,rhs_derived,eps_sum,pass_paper,pass_derived";

inline std::string trace_to_csv(const SolverTrace& trace) {
    std::string out = kTraceHeader;
    out += '\n';
    for (const auto& r : trace.records) {
        out += std::to_string(r.k);
        for (const double v : {r.F, r.grad_F_sq, r.eps}) {
            out += ',';
            out += format_double(v);
        }
        out += ',';
        if (r.eps_hat) out += format_double(*r.eps_hat);
        for (const double v : {r.delta_norm, r.x_norm}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

struct TraceRow {
    int k = 0;
    double F = 0.0;
    double grad_F_sq = 0.0;
    double eps = 0.0;
    std::optional<double> eps_hat;
    double delta_norm = 0.0;
    double x_norm = 0.0;
};

inline std::vector<TraceRow> trace_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader) throw InvalidInput("trace CSV: unexpected header");
    std::vector<TraceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const auto pos = line.find(',', start);
            cells.push_back(line.substr(start, pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (cells.size() != 7) throw InvalidInput("trace CSV: expected 7 columns in '" + line + "'");
        TraceRow r;
        try {
            r.k = std::stoi(cells[0]);
            r.F = std::stod(cells[1]);
            r.grad_F_sq = std::stod(cells[2]);
            r.eps = std::stod(cells[3]);
            if (!cells[4].empty()) r.eps_hat = std::stod(cells[4]);
            r.delta_norm = std::stod(cells[5]);
            r.x_norm = std::stod(cells[6]);
        } catch (const std::logic_error&) {
            throw InvalidInput("trace CSV: unparsable row '" + line + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

inline std::string summary_row(int instance_id, const CertificateReport& r) {
    std::string out = std::to_string(instance_id) + "," + r.theorem;
    for (const double v : {r.lhs_avg, r.rhs_paper, r.rhs_derived, r.eps_sum}) {
        out += ',';
        out += format_double(v);
    }
    out += r.pass_paper ? ",true" : ",false";
    out += r.pass_derived ? ",true" : ",false";
    out += '\n';
    return out;
}

// ----- files -----

/// Writes through a temporary sibling and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace pnpcert
