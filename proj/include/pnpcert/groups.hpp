// Finite groups of affine isometries T(x) = a x + c acting on R^n, with the
// uniform (Haar) weight. Built-in groups are signed permutation matrices with
// zero offset; custom groups may carry offsets.
#pragma once

#include "core.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace pnpcert {

struct GroupElement {
    Matrix a;  // orthogonal linear part
    Vector c;  // offset

    Vector apply(const Vector& x) const { return a * x + c; }
    /// T^{-1}(u) = a^T (u - c)
    Vector apply_inverse(const Vector& u) const { return a.transpose() * (u - c); }
    /// Linear part only, for displacements (bias vectors, gradients).
    Vector rotate(const Vector& v) const { return a * v; }
    Vector rotate_inverse(const Vector& v) const { return a.transpose() * v; }

    GroupElement compose(const GroupElement& inner) const {
        return {a * inner.a, a * inner.c + c};
    }
};

inline Vector apply_transform(const GroupElement& g, const Vector& x) {
    require_dim(x, g.a.cols(), "apply_transform");
    return g.apply(x);
}

enum class GroupKind { sign_flip, coordinate_permutations, dihedral_image, cyclic_shift, custom };

inline std::string to_string(GroupKind k) {
    switch (k) {
        case GroupKind::sign_flip: return "sign_flip";
        case GroupKind::coordinate_permutations: return "coordinate_permutations";
        case GroupKind::dihedral_image: return "dihedral_image";
        case GroupKind::cyclic_shift: return "cyclic_shift";
        case GroupKind::custom: return "custom";
    }
    return "custom";
}

class GroupAction {
public:
    static constexpr double kOrthogonalityTol = 1e-12;
    static constexpr double kTableTol = 1e-10;

    /// Validates orthogonality, identity, closure and inverses.
    GroupAction(Index dim, std::vector<GroupElement> elements, GroupKind kind = GroupKind::custom,
                Index height = 0, Index width = 0)
        : dim_(dim), elements_(std::move(elements)), kind_(kind), height_(height), width_(width) {
        if (dim_ < 1) throw InvalidParameter("group dimension must be positive");
        if (elements_.empty()) throw InvalidParameter("group must contain at least one element");
        const Matrix id = Matrix::Identity(dim_, dim_);
        for (std::size_t i = 0; i < elements_.size(); ++i) {
            const auto& g = elements_[i];
            if (g.a.rows() != dim_ || g.a.cols() != dim_ || g.c.size() != dim_) {
                throw ShapeError("group element " + std::to_string(i) + " has wrong shape");
            }
            const double orth = (g.a.transpose() * g.a - id).cwiseAbs().maxCoeff();
            if (orth > kOrthogonalityTol) {
                throw InvalidParameter("group element " + std::to_string(i) +
                                       " is not an isometry (|a^T a - I|_max = " + format_double(orth) + ")");
            }
        }
        build_index();
        const auto e = find({id, Vector::Zero(dim_)});
        if (!e) throw InvalidParameter("group does not contain the identity");
        identity_ = *e;
        inverse_.assign(elements_.size(), 0);
        for (std::size_t i = 0; i < elements_.size(); ++i) {
            const auto& g = elements_[i];
            const auto inv = find({g.a.transpose(), -(g.a.transpose() * g.c)});
            if (!inv) throw InvalidParameter("group is not closed under inversion (element " + std::to_string(i) + ")");
            inverse_[i] = *inv;
            for (std::size_t j = 0; j < elements_.size(); ++j) {
                if (!find(g.compose(elements_[j]))) {
                    throw InvalidParameter("group is not closed under composition (" + std::to_string(i) + " o " +
                                           std::to_string(j) + ")");
                }
            }
        }
    }

    Index dim() const { return dim_; }
    std::size_t size() const { return elements_.size(); }
    const std::vector<GroupElement>& elements() const { return elements_; }
    const GroupElement& operator[](std::size_t i) const { return elements_[i]; }
    double weight() const { return 1.0 / static_cast<double>(elements_.size()); }
    std::size_t identity_index() const { return identity_; }
    std::size_t inverse_index(std::size_t i) const { return inverse_[i]; }
    GroupKind kind() const { return kind_; }
    Index image_height() const { return height_; }
    Index image_width() const { return width_; }

    /// Index of the element equal to g within kTableTol, if any.
    std::optional<std::size_t> find(const GroupElement& g) const {
        const auto it = index_.find(key(g));
        if (it != index_.end() && close(elements_[it->second], g)) return it->second;
        for (std::size_t i = 0; i < elements_.size(); ++i) {
            if (close(elements_[i], g)) return i;
        }
        return std::nullopt;
    }

private:
    static bool close(const GroupElement& x, const GroupElement& y) {
        return (x.a - y.a).cwiseAbs().maxCoeff() <= kTableTol && (x.c - y.c).cwiseAbs().maxCoeff() <= kTableTol;
    }

    static std::string key(const GroupElement& g) {
        std::string k;
        k.reserve(static_cast<std::size_t>(g.a.size() + g.c.size()) * 3);
        auto push = [&k](double x) {
            k += std::to_string(std::llround(x * 1e6));
            k += ',';
        };
        for (Index i = 0; i < g.a.size(); ++i) push(g.a.data()[i]);
        for (Index i = 0; i < g.c.size(); ++i) push(g.c(i));
        return k;
    }

    void build_index() {
        index_.clear();
        for (std::size_t i = 0; i < elements_.size(); ++i) index_.emplace(key(elements_[i]), i);
    }

    Index dim_;
    std::vector<GroupElement> elements_;
    GroupKind kind_;
    Index height_;
    Index width_;
    std::size_t identity_ = 0;
    std::vector<std::size_t> inverse_;
    std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline Matrix permutation_matrix(const std::vector<Index>& source_of) {
    // (P x)[i] = x[source_of[i]]
    const auto n = static_cast<Index>(source_of.size());
    Matrix p = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) p(i, source_of[static_cast<std::size_t>(i)]) = 1.0;
    return p;
}

inline GroupElement linear_element(Matrix a) {
    const auto n = a.rows();
    return {std::move(a), Vector::Zero(n)};
}

}  // namespace detail

/// {Id, -Id}
inline GroupAction sign_flip_group(Index n) {
    if (n < 1) throw InvalidParameter("sign_flip: dimension must be positive");
    const Matrix id = Matrix::Identity(n, n);
    return GroupAction(n, {detail::linear_element(id), detail::linear_element(-id)}, GroupKind::sign_flip);
}

/// All n! coordinate permutations. Capped at n = 6 (720 elements).
inline GroupAction coordinate_permutation_group(Index n) {
    if (n < 1) throw InvalidParameter("coordinate_permutations: dimension must be positive");
    if (n > 6) throw InvalidParameter("coordinate_permutations: n > 6 is not supported (n! elements)");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::vector<GroupElement> elements;
    do {
        elements.push_back(detail::linear_element(detail::permutation_matrix(perm)));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return GroupAction(n, std::move(elements), GroupKind::coordinate_permutations);
}

/// Cyclic shifts x -> x[(i - s) mod n], s = 0..n-1.
inline GroupAction cyclic_shift_group(Index n) {
    if (n < 1) throw InvalidParameter("cyclic_shift: dimension must be positive");
    std::vector<GroupElement> elements;
    for (Index s = 0; s < n; ++s) {
        std::vector<Index> src(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) src[static_cast<std::size_t>(i)] = ((i - s) % n + n) % n;
        elements.push_back(detail::linear_element(detail::permutation_matrix(src)));
    }
    return GroupAction(n, std::move(elements), GroupKind::cyclic_shift);
}

/// The 8 rotations/reflections of a square h x h image, acting on the
/// row-major flattening (pixel (i, j) at index i * w + j).
inline GroupAction dihedral_image_group(Index h, Index w) {
    if (h < 1 || w < 1) throw InvalidParameter("dihedral_image: grid must be non-empty");
    if (h != w) throw InvalidParameter("dihedral_image: rotations by 90 degrees need a square grid (h == w)");
    const Index n = h * w;
    std::vector<GroupElement> elements;
    for (int flip = 0; flip < 2; ++flip) {
        for (int rot = 0; rot < 4; ++rot) {
            std::vector<Index> src(static_cast<std::size_t>(n));
            for (Index i = 0; i < h; ++i) {
                for (Index j = 0; j < w; ++j) {
                    Index si = i;
                    Index sj = flip ? (w - 1 - j) : j;
                    for (int r = 0; r < rot; ++r) {
                        const Index ti = sj;
                        const Index tj = h - 1 - si;
                        si = ti;
                        sj = tj;
                    }
                    src[static_cast<std::size_t>(i * w + j)] = si * w + sj;
                }
            }
            elements.push_back(detail::linear_element(detail::permutation_matrix(src)));
        }
    }
    return GroupAction(n, std::move(elements), GroupKind::dihedral_image, h, w);
}

struct GroupSpec {
    GroupKind kind = GroupKind::sign_flip;
    Index dim = 1;
    Index height = 0;
    Index width = 0;
};

inline GroupAction make_group(const GroupSpec& spec) {
    switch (spec.kind) {
        case GroupKind::sign_flip: return sign_flip_group(spec.dim);
        case GroupKind::coordinate_permutations: return coordinate_permutation_group(spec.dim);
        case GroupKind::dihedral_image: return dihedral_image_group(spec.height, spec.width);
        case GroupKind::cyclic_shift: return cyclic_shift_group(spec.dim);
        case GroupKind::custom: break;
    }
    throw InvalidParameter("make_group: custom groups are built from explicit elements");
}

inline GroupAction trivial_group(Index n) {
    return GroupAction(n, {detail::linear_element(Matrix::Identity(n, n))}, GroupKind::custom);
}

}  // namespace pnpcert
