#pragma once

#include <gencrit/densela.hpp>
#include <gencrit/rng.hpp>
#include <gencrit/types.hpp>

#include <cstdint>
#include <utility>

namespace gencrit {

/// Global coordinates of a generalized inverse of A. `alpha` and `beta` are
/// coordinate matrices of linear maps relative to the stored orthonormal
/// bases:
///   alpha : row_space -> null_space,      shape dim N(A) x dim R0+
///   beta  : left_null_space -> range,     shape dim R(A) x dim N0+
/// The base inverse is the chart origin (alpha = beta = 0).
struct GenInverseChart {
    Mat A;
    Mat base_inverse;  // satisfies Penrose 1 and 2 for A
    FundamentalSubspaces bases;
    Mat alpha;
    Mat beta;

    Index null_dim() const { return bases.null_space.count(); }
    Index range_dim() const { return bases.range.count(); }
    Index row_dim() const { return bases.row_space.count(); }
    Index coker_dim() const { return bases.left_null_space.count(); }

    /// Map alpha coordinates to an ambient operator that acts as alpha on the
    /// row space and annihilates the null space.
    Mat alpha_ambient() const {
        return bases.null_space.columns * alpha * bases.row_space.columns.transpose();
    }

    Mat beta_ambient() const {
        return bases.range.columns * beta * bases.left_null_space.columns.transpose();
    }
};

/// A member B of GI(A) with orthonormal bases of its range and null space.
struct GenInverse {
    Mat B;
    SubspaceBasis range_basis;
    SubspaceBasis null_basis;
};

/// Chart centered at the Moore-Penrose inverse with zero coordinates.
inline GenInverseChart chart_origin(const Mat& a, const Tolerances& tol = {}) {
    GenInverseChart c;
    c.A = a;
    c.base_inverse = mp_inverse(a, tol);
    c.bases = fundamental_subspaces(a, tol);
    c.alpha = Mat::Zero(c.null_dim(), c.row_dim());
    c.beta = Mat::Zero(c.range_dim(), c.coker_dim());
    return c;
}

/// Projector onto the complement of R(A) along R(A), in the codomain. The
/// base splitting here is orthogonal, but we build the projector obliquely so
/// the formulas stay valid for any direct-sum splitting.
inline Mat corange_projector(const GenInverseChart& chart, const Tolerances& tol = {}) {
    return oblique_projector(chart.bases.left_null_space, chart.bases.range, tol);
}

/// Evaluate the chart map: B = (I + alpha) A0+ (I - beta P), where P projects
/// onto the complement of R(A) along R(A). The range and null space of B are
/// the graphs {e + alpha(e)} and {d + beta(d)} over the base complements.
inline GenInverse build(const GenInverseChart& chart, const Tolerances& tol = {}) {
    const Index n = chart.A.cols(), m = chart.A.rows();
    const Mat alpha_amb = chart.alpha_ambient();
    const Mat beta_amb = chart.beta_ambient();
    const Mat proj = corange_projector(chart, tol);

    GenInverse out;
    out.B = (Mat::Identity(n, n) + alpha_amb) * chart.base_inverse *
            (Mat::Identity(m, m) - beta_amb * proj);

    const Mat& row_cols = chart.bases.row_space.columns;
    const Mat& coker_cols = chart.bases.left_null_space.columns;
    out.range_basis = orthonormalize(row_cols + alpha_amb * row_cols);
    out.null_basis = orthonormalize(coker_cols + beta_amb * coker_cols);
    return out;
}

/// Invert the chart map: given B in GI(A), recover the unique (alpha, beta)
/// with build(chart) == B. alpha is read off as the composition of the
/// projection onto R(B) along N(A) followed by the projection onto N(A) along
/// the row space; beta symmetrically on the codomain side.
inline GenInverseChart recover_chart(const Mat& a, const Mat& b, const Tolerances& tol = {}) {
    const double res1 = (a * b * a - a).norm();
    const double res2 = (b * a * b - b).norm();
    if (!(res1 <= tol.residual_abs) || !(res2 <= tol.residual_abs))
        throw NotAGeneralizedInverse("recover_chart: Penrose conditions 1/2 fail (residuals " +
                                     std::to_string(res1) + ", " + std::to_string(res2) + ")");

    GenInverseChart chart = chart_origin(a, tol);
    const FundamentalSubspaces b_spaces = fundamental_subspaces(b, tol);

    // Domain side: E = N(A) (+) R(B).
    const Mat onto_rb = oblique_projector(b_spaces.range, chart.bases.null_space, tol);
    const Mat onto_na = oblique_projector(chart.bases.null_space, chart.bases.row_space, tol);
    chart.alpha = chart.bases.null_space.columns.transpose() * (onto_na * onto_rb) *
                  chart.bases.row_space.columns;

    // Codomain side: F = R(A) (+) N(B).
    const Mat onto_nb = oblique_projector(b_spaces.null_space, chart.bases.range, tol);
    const Mat onto_ra = oblique_projector(chart.bases.range, chart.bases.left_null_space, tol);
    chart.beta = chart.bases.range.columns.transpose() * (onto_ra * onto_nb) *
                 chart.bases.left_null_space.columns;
    return chart;
}

/// First derivative of the chart map at `chart` applied to the increment
/// (d_alpha, d_beta), given in chart coordinates.
inline Mat dM(const GenInverseChart& chart, const Mat& d_alpha, const Mat& d_beta,
              const Tolerances& tol = {}) {
    if (d_alpha.rows() != chart.alpha.rows() || d_alpha.cols() != chart.alpha.cols() ||
        d_beta.rows() != chart.beta.rows() || d_beta.cols() != chart.beta.cols())
        throw Error("dM: increment shape mismatch");
    const Index n = chart.A.cols(), m = chart.A.rows();
    const Mat da = chart.bases.null_space.columns * d_alpha *
                   chart.bases.row_space.columns.transpose();
    const Mat db = chart.bases.range.columns * d_beta *
                   chart.bases.left_null_space.columns.transpose();
    const Mat proj = corange_projector(chart, tol);
    return da * chart.base_inverse * (Mat::Identity(m, m) - chart.beta_ambient() * proj) -
           (Mat::Identity(n, n) + chart.alpha_ambient()) * chart.base_inverse * db * proj;
}

/// Second derivative of the chart map: bilinear in the two increment pairs and
/// independent of the chart point, which is why `base` contributes only its
/// base inverse and bases.
inline Mat d2M(const Mat& d_alpha, const Mat& d_beta, const Mat& d_alpha1, const Mat& d_beta1,
               const GenInverseChart& base, const Tolerances& tol = {}) {
    const auto ambient_alpha = [&base](const Mat& c) {
        return base.bases.null_space.columns * c * base.bases.row_space.columns.transpose();
    };
    const auto ambient_beta = [&base](const Mat& c) {
        return base.bases.range.columns * c * base.bases.left_null_space.columns.transpose();
    };
    const Mat proj = corange_projector(base, tol);
    return -ambient_alpha(d_alpha) * base.base_inverse * ambient_beta(d_beta1) * proj -
           ambient_alpha(d_alpha1) * base.base_inverse * ambient_beta(d_beta) * proj;
}

/// Largest entry of the third-order mixed central difference of `build_fn`
/// over `trials` sampled increment triples. For the exact chart map this is
/// pure rounding noise; a cubic corruption shows up immediately.
template <typename BuildFn>
double max_third_difference(BuildFn&& build_fn, const GenInverseChart& base, int trials,
                            double step = 1e-3, std::uint64_t seed = 0) {
    std::uint64_t state = seed * 0x9e3779b97f4a7c15ull + 1;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Mat da[3], db[3];
        for (int k = 0; k < 3; ++k) {
            da[k] = detail::random_matrix(base.alpha.rows(), base.alpha.cols(), 0.5, state);
            db[k] = detail::random_matrix(base.beta.rows(), base.beta.cols(), 0.5, state);
        }
        Mat acc;
        bool first = true;
        for (int s0 : {-1, 1})
            for (int s1 : {-1, 1})
                for (int s2 : {-1, 1}) {
                    GenInverseChart shifted = base;
                    shifted.alpha += step * (s0 * da[0] + s1 * da[1] + s2 * da[2]);
                    shifted.beta += step * (s0 * db[0] + s1 * db[1] + s2 * db[2]);
                    const double sign = static_cast<double>(s0 * s1 * s2);
                    const Mat value = build_fn(shifted);
                    if (first) {
                        acc = sign * value;
                        first = false;
                    } else {
                        acc += sign * value;
                    }
                }
        acc /= 8.0 * step * step * step;
        worst = std::max(worst, acc.cwiseAbs().maxCoeff());
    }
    return worst;
}

/// True when every sampled third-order difference of the chart map stays at
/// rounding level, i.e. the map is exactly quadratic in (alpha, beta).
inline bool third_derivative_is_zero(const GenInverseChart& base, int trials,
                                     std::uint64_t seed = 0, const Tolerances& tol = {}) {
    if (trials < 1) throw Error("third_derivative_is_zero: trials must be >= 1");
    const double worst = max_third_difference(
        [&tol](const GenInverseChart& c) { return build(c, tol).B; }, base, trials, 1e-3, seed);
    return worst < 1e-6;
}

}  // namespace gencrit
