#pragma once

#include <gencrit/types.hpp>

#include <Eigen/Dense>

#include <utility>

namespace gencrit {

/// Orthonormal column set spanning a subspace of R^ambient_dim.
/// `columns` is ambient_dim x count; count may be zero.
struct SubspaceBasis {
    Mat columns;

    SubspaceBasis() = default;
    explicit SubspaceBasis(Mat cols) : columns(std::move(cols)) {}

    Index ambient_dim() const { return columns.rows(); }
    Index count() const { return columns.cols(); }

    bool is_orthonormal(double tol = 1e-12) const {
        if (count() == 0) return true;
        Mat gram = columns.transpose() * columns;
        return (gram - Mat::Identity(count(), count())).cwiseAbs().maxCoeff() <= tol;
    }
};

/// The Moore-Penrose splitting of the domain and codomain of A:
///   domain  = null_space  (+) row_space        (orthogonal)
///   codomain = range      (+) left_null_space  (orthogonal)
/// row_space plays the role of the complement of N(A), left_null_space the
/// complement of R(A).
struct FundamentalSubspaces {
    SubspaceBasis null_space;       // subset of the domain
    SubspaceBasis range;            // subset of the codomain
    SubspaceBasis row_space;        // complement of null_space in the domain
    SubspaceBasis left_null_space;  // complement of range in the codomain
};

/// Number of singular values above rank_rel * sigma_max. Zero matrices have
/// rank 0; the cutoff is scale-invariant.
inline Index numerical_rank(const Mat& a, const Tolerances& tol = {}) {
    if (a.rows() == 0 || a.cols() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(a);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    if (smax <= 0.0) return 0;
    const double cutoff = tol.rank_rel * smax;
    Index r = 0;
    while (r < sv.size() && sv(r) > cutoff) ++r;
    return r;
}

/// Orthonormal bases of all four fundamental subspaces from one full SVD.
inline FundamentalSubspaces fundamental_subspaces(const Mat& a, const Tolerances& tol = {}) {
    const Index m = a.rows(), n = a.cols();
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    const double cutoff = tol.rank_rel * smax;
    Index r = 0;
    while (r < sv.size() && sv(r) > cutoff) ++r;

    FundamentalSubspaces out;
    out.range = SubspaceBasis(svd.matrixU().leftCols(r));
    out.left_null_space = SubspaceBasis(svd.matrixU().rightCols(m - r));
    out.row_space = SubspaceBasis(svd.matrixV().leftCols(r));
    out.null_space = SubspaceBasis(svd.matrixV().rightCols(n - r));
    return out;
}

/// Moore-Penrose pseudoinverse via SVD with the same relative rank cutoff as
/// numerical_rank, so the two always agree on the rank decision.
inline Mat mp_inverse(const Mat& a, const Tolerances& tol = {}) {
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    const double cutoff = tol.rank_rel * smax;
    Vec inv = Vec::Zero(sv.size());
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Idempotent P with P v = v on `onto` and P v = 0 on `along`. Requires
/// onto (+) along = ambient space; throws DegenerateSplit otherwise.
inline Mat oblique_projector(const SubspaceBasis& onto, const SubspaceBasis& along,
                             const Tolerances& tol = {}) {
    const Index n = onto.ambient_dim() > 0 ? onto.ambient_dim() : along.ambient_dim();
    const Index k = onto.count(), l = along.count();
    if (onto.ambient_dim() > 0 && along.ambient_dim() > 0 &&
        onto.ambient_dim() != along.ambient_dim())
        throw DegenerateSplit("oblique_projector: ambient dimensions differ");
    if (k + l != n)
        throw DegenerateSplit("oblique_projector: basis counts do not sum to ambient dimension");
    if (k == 0) return Mat::Zero(n, n);
    if (l == 0) return Mat::Identity(n, n);

    Mat combined(n, n);
    combined.leftCols(k) = onto.columns;
    combined.rightCols(l) = along.columns;

    Eigen::JacobiSVD<Mat> svd(combined, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) <= tol.rank_rel * sv(0))
        throw DegenerateSplit("oblique_projector: onto and along overlap or fail to span");

    Mat inv_combined = svd.solve(Mat::Identity(n, n));
    return onto.columns * inv_combined.topRows(k);
}

/// Thin-QR orthonormalization of the column span of `cols` (rank assumed full).
inline SubspaceBasis orthonormalize(const Mat& cols) {
    if (cols.cols() == 0) return SubspaceBasis(Mat(cols.rows(), 0));
    Eigen::HouseholderQR<Mat> qr(cols);
    Mat q = qr.householderQ() * Mat::Identity(cols.rows(), cols.cols());
    return SubspaceBasis(q);
}

}  // namespace gencrit
