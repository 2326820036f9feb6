#pragma once

#include <gencrit/densela.hpp>
#include <gencrit/exprdsl.hpp>
#include <gencrit/rng.hpp>
#include <gencrit/types.hpp>

#include <cmath>
#include <cstdint>
#include <iterator>
#include <optional>
#include <vector>

namespace gencrit {

/// A constrained problem: minimize/criticalize f on S = g^{-1}(y0), with f and
/// the m components of g given as expressions in x1..xn.
struct Problem {
    int n = 0;
    int m = 0;
    std::vector<Expr> g;
    Vec y0;
    Expr f;

    void validate() const {
        if (n < 1 || m < 1) throw Error("Problem: dimensions must be positive");
        if (static_cast<int>(g.size()) != m) throw Error("Problem: g component count != m");
        if (y0.size() != m) throw Error("Problem: y0 length != m");
        if (f.dim() != n) throw Error("Problem: f dimension != n");
        for (const Expr& gi : g)
            if (gi.dim() != n) throw Error("Problem: g component dimension != n");
    }
};

inline Vec eval_constraint(const Problem& p, const Vec& x) {
    Vec out(p.m);
    for (int i = 0; i < p.m; ++i) out(i) = eval(p.g[i], x);
    return out;
}

/// m x n Jacobian of g at x, each row an exact forward-mode gradient.
inline Mat jacobian(const Problem& p, const Vec& x) {
    Mat j(p.m, p.n);
    for (int i = 0; i < p.m; ++i) j.row(i) = grad(p.g[i], x).transpose();
    return j;
}

enum class GenRegVerdict { Confirmed, Refuted, Unknown };

/// Result of point classification. `regular` means the Jacobian is surjective;
/// the generalized-regular verdict reports whether the range of the Jacobian
/// stayed clear of the base complement at every probe point. Confirmed is
/// sampling evidence, not proof.
struct RegularityReport {
    Vec point;
    bool on_constraint = false;
    Index rank = 0;
    bool regular = false;
    GenRegVerdict verdict = GenRegVerdict::Unknown;
    int samples = 0;
    std::optional<Vec> refuted_witness;
    SubspaceBasis tangent_basis;  // null space of the Jacobian at `point`
};

namespace detail {

inline double radical_inverse(std::uint64_t index, std::uint64_t base) {
    double result = 0.0, f = 1.0 / static_cast<double>(base);
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= static_cast<double>(base);
    }
    return result;
}

constexpr int kProbePrimes[] = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,
                                41,  43,  47,  53,  59,  61,  67,  71,  73,  79,  83,  89,
                                97,  101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
                                157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
                                227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281};

/// Deterministic unit directions: Halton points pushed through Box-Muller and
/// normalized. Falls back to a hash stream when the prime table runs out.
inline Mat probe_directions(int dim, int count, std::uint64_t seed) {
    const int pairs = (dim + 1) / 2;
    const bool halton_ok = pairs * 2 <= static_cast<int>(std::size(kProbePrimes));
    Mat dirs(dim, count);
    std::uint64_t hash_state = seed * 0x9e3779b97f4a7c15ull + 0x243f6a8885a308d3ull;
    for (int c = 0; c < count; ++c) {
        const std::uint64_t idx = seed * static_cast<std::uint64_t>(count) + c + 1;
        Vec v(dim);
        for (int p = 0; p < pairs; ++p) {
            double u1, u2;
            if (halton_ok) {
                u1 = radical_inverse(idx, kProbePrimes[2 * p]);
                u2 = radical_inverse(idx, kProbePrimes[2 * p + 1]);
            } else {
                u1 = uniform01(hash_state);
                u2 = uniform01(hash_state);
            }
            u1 = std::max(u1, 1e-12);
            const double r = std::sqrt(-2.0 * std::log(u1));
            const double z0 = r * std::cos(2.0 * EIGEN_PI * u2);
            const double z1 = r * std::sin(2.0 * EIGEN_PI * u2);
            v(2 * p) = z0;
            if (2 * p + 1 < dim) v(2 * p + 1) = z1;
        }
        const double norm = v.norm();
        dirs.col(c) = norm > 0.0 ? Vec(v / norm) : Vec(Vec::Unit(dim, 0));
    }
    return dirs;
}

}  // namespace detail

/// Classify x for the constraint g = y0: feasibility, Jacobian rank,
/// regularity, and a sampled generalized-regularity verdict over `probes`
/// points in a ball of `radius` around x. probes = 0 leaves the verdict
/// Unknown.
inline RegularityReport classify(const Problem& p, const Vec& x, const Tolerances& tol = {},
                                 int probes = 64, double radius = 1e-3,
                                 std::uint64_t seed = 0) {
    p.validate();
    if (x.size() != p.n) throw Error("classify: point dimension mismatch");
    if (probes < 0 || !(radius > 0.0)) throw Error("classify: bad probe parameters");

    RegularityReport rep;
    rep.point = x;
    rep.on_constraint = (eval_constraint(p, x) - p.y0).norm() < tol.residual_abs;

    const Mat jac = jacobian(p, x);
    const FundamentalSubspaces spaces = fundamental_subspaces(jac, tol);
    rep.rank = spaces.range.count();
    rep.regular = rep.rank == p.m;
    rep.tangent_basis = spaces.null_space;

    if (probes == 0) {
        rep.verdict = GenRegVerdict::Unknown;
        return rep;
    }

    // R(g'(x')) must meet the base complement of R(g'(x)) only at 0 for every
    // probe; a nontrivial intersection refutes generalized regularity.
    const SubspaceBasis& complement = spaces.left_null_space;
    const Index comp_dim = complement.count();
    const Mat dirs = detail::probe_directions(p.n, probes, seed);
    for (int i = 0; i < probes; ++i) {
        const Vec probe_x = x + radius * dirs.col(i);
        const Mat probe_jac = jacobian(p, probe_x);
        const FundamentalSubspaces probe_spaces = fundamental_subspaces(probe_jac, tol);
        const Index probe_rank = probe_spaces.range.count();
        bool trivial;
        if (probe_rank + comp_dim > p.m) {
            trivial = false;  // dimension count forces a nontrivial intersection
        } else {
            Mat stacked(p.m, probe_rank + comp_dim);
            stacked.leftCols(probe_rank) = probe_spaces.range.columns;
            stacked.rightCols(comp_dim) = complement.columns;
            trivial = numerical_rank(stacked, tol) == probe_rank + comp_dim;
        }
        if (!trivial) {
            rep.verdict = GenRegVerdict::Refuted;
            rep.refuted_witness = probe_x;
            return rep;
        }
    }
    rep.verdict = GenRegVerdict::Confirmed;
    rep.samples = probes;
    return rep;
}

/// Orthonormal basis of the tangent space N(g'(x)) at a feasible point.
inline SubspaceBasis tangent_basis(const Problem& p, const Vec& x, const Tolerances& tol = {}) {
    p.validate();
    if (x.size() != p.n) throw Error("tangent_basis: point dimension mismatch");
    const double residual = (eval_constraint(p, x) - p.y0).norm();
    if (!(residual < tol.residual_abs))
        throw NotOnConstraint("tangent_basis: constraint residual " + std::to_string(residual));
    return fundamental_subspaces(jacobian(p, x), tol).null_space;
}

}  // namespace gencrit
