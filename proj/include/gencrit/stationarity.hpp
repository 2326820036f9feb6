#pragma once

#include <gencrit/densela.hpp>
#include <gencrit/exprdsl.hpp>
#include <gencrit/geometry.hpp>
#include <gencrit/gifamily.hpp>
#include <gencrit/types.hpp>

#include <cmath>
#include <optional>
#include <string>

namespace gencrit {

/// Raw residuals of the multiplier-free first-order condition at a point:
/// feasibility plus vanishing of the objective gradient on the tangent space.
/// `is_critical` is the tolerance decision; the residuals let callers
/// re-decide with their own thresholds.
struct StationarityCheck {
    Vec point;
    double constraint_residual = 0.0;
    double tangent_residual = 0.0;
    bool is_critical = false;
};

enum class CertificateKind { UniqueRegular, IllPosed };

/// Multiplier evidence at a critical point. Regular constraints carry the
/// unique functional L; rank-deficient ones carry a second valid multiplier
/// L1 and a codomain witness on which the two disagree.
struct MultiplierCertificate {
    CertificateKind kind = CertificateKind::UniqueRegular;
    Vec L;
    std::optional<Vec> L1;
    std::optional<Vec> witness;
    std::optional<double> gap;
};

/// Unit vector orthogonal to both the constraint tangent space and the
/// null space of f'(x).
struct OrthogonalWitness {
    Vec e_star;
};

/// Evaluate the multiplier-free criticality condition at x. The tangent
/// residual is ||f'(x) (I - J+ J)|| with the Moore-Penrose inverse; its zero
/// set is the same for every generalized inverse of the Jacobian.
inline StationarityCheck check(const Problem& p, const Vec& x, const Tolerances& tol = {}) {
    p.validate();
    if (x.size() != p.n) throw Error("check: point dimension mismatch");
    StationarityCheck out;
    out.point = x;
    out.constraint_residual = (eval_constraint(p, x) - p.y0).norm();
    const Mat jac = jacobian(p, x);
    const Mat pinv = mp_inverse(jac, tol);
    const Vec grad_f = grad(p.f, x);
    out.tangent_residual =
        (grad_f.transpose() * (Mat::Identity(p.n, p.n) - pinv * jac)).norm();
    out.is_critical = out.constraint_residual < tol.residual_abs &&
                      out.tangent_residual < tol.residual_abs;
    return out;
}

/// Coordinates of the Lagrange multiplier L = f'(x) o ginv, for any member
/// ginv of GI(g'(x)). Throws unless ginv passes Penrose conditions 1 and 2.
inline Vec multiplier(const Problem& p, const Vec& x, const Mat& ginv,
                      const Tolerances& tol = {}) {
    p.validate();
    if (x.size() != p.n) throw Error("multiplier: point dimension mismatch");
    const Mat jac = jacobian(p, x);
    if (ginv.rows() != p.n || ginv.cols() != p.m)
        throw NotAGeneralizedInverse("multiplier: ginv has wrong shape");
    const double res1 = (jac * ginv * jac - jac).norm();
    const double res2 = (ginv * jac * ginv - ginv).norm();
    if (!(res1 <= tol.residual_abs) || !(res2 <= tol.residual_abs))
        throw NotAGeneralizedInverse("multiplier: Penrose conditions 1/2 fail (residuals " +
                                     std::to_string(res1) + ", " + std::to_string(res2) + ")");
    return (grad(p.f, x).transpose() * ginv).transpose();
}

/// At a critical point, either certify the unique multiplier (full-rank
/// Jacobian) or construct the ill-posedness certificate: a second generalized
/// inverse whose multiplier disagrees with the Moore-Penrose one on an
/// explicit witness vector. The construction picks e0 as the least-norm
/// solution of f'(x) e = 1, routes y1 = g'(x) e0 through a rank-one beta on
/// the first complement direction, and yields gap |L(v) - L1(v)| = 1.
inline MultiplierCertificate certify_multiplier(const Problem& p, const Vec& x,
                                                const Tolerances& tol = {}) {
    const StationarityCheck sc = check(p, x, tol);
    if (!sc.is_critical)
        throw NotCritical("certify_multiplier: point fails the criticality check (residuals " +
                          std::to_string(sc.constraint_residual) + ", " +
                          std::to_string(sc.tangent_residual) + ")");

    const Mat jac = jacobian(p, x);
    const Vec grad_f = grad(p.f, x);
    GenInverseChart chart = chart_origin(jac, tol);

    MultiplierCertificate cert;
    cert.L = (grad_f.transpose() * chart.base_inverse).transpose();

    const Index rank = chart.range_dim();
    if (rank == p.m) {
        cert.kind = CertificateKind::UniqueRegular;
        return cert;
    }

    if (grad_f.norm() <= tol.residual_abs)
        throw ZeroGradient(
            "certify_multiplier: f'(x) = 0, every functional satisfies the Euler equation on "
            "R(g'(x)); no discriminating certificate exists");

    cert.kind = CertificateKind::IllPosed;

    // e0: least-norm vector with f'(x) e0 = 1.
    const Vec e0 = grad_f / grad_f.squaredNorm();
    const Vec y1 = jac * e0;

    // beta sends the first complement direction to y1 and kills the rest.
    const Vec y_plus = chart.bases.left_null_space.columns.col(0);
    chart.beta = Mat::Zero(chart.range_dim(), chart.coker_dim());
    chart.beta.col(0) = chart.bases.range.columns.transpose() * y1;

    const GenInverse alt = build(chart, tol);
    cert.L1 = (grad_f.transpose() * alt.B).transpose();
    cert.witness = Vec(y_plus + y1);
    cert.gap = std::abs((cert.L - *cert.L1).dot(*cert.witness));
    return cert;
}

/// Normalized gradient direction at a critical point with f'(x) != 0;
/// orthogonal to the tangent space and to N(f'(x)).
inline OrthogonalWitness orthogonal_witness(const Problem& p, const Vec& x,
                                            const Tolerances& tol = {}) {
    const StationarityCheck sc = check(p, x, tol);
    const Vec grad_f = grad(p.f, x);
    if (grad_f.norm() <= tol.residual_abs)
        throw ZeroGradient("orthogonal_witness: f'(x) = 0");
    if (!sc.is_critical)
        throw NotCritical("orthogonal_witness: orthogonality to the tangent space needs a "
                          "critical point");
    return OrthogonalWitness{Vec(grad_f / grad_f.norm())};
}

enum class SolveStatus { Converged, MaxIterExceeded };

struct SolveResult {
    StationarityCheck check;
    SolveStatus status = SolveStatus::MaxIterExceeded;
    int iterations = 0;
};

namespace detail {

// Stacked first-order residual [g(x) - y0 ; (I - J+ J) grad f(x)]. The
// tangent block is the objective gradient projected onto N(J); its norm
// equals ||B^T grad f|| for any orthonormal tangent basis B, but unlike the
// basis form it varies smoothly with x wherever the rank is locally constant,
// which is what a Newton model needs.
struct SolverResidual {
    Vec r;
    double merit = 0.0;
};

inline Vec projected_gradient(const Problem& p, const Vec& x, const Tolerances& tol) {
    const Mat jac = jacobian(p, x);
    const Mat pinv = mp_inverse(jac, tol);
    const Vec grad_f = grad(p.f, x);
    return grad_f - pinv * (jac * grad_f);
}

inline SolverResidual stacked_residual(const Problem& p, const Vec& x, const Tolerances& tol) {
    SolverResidual out;
    const Vec top = eval_constraint(p, x) - p.y0;
    const Vec bottom = projected_gradient(p, x, tol);
    out.r.resize(top.size() + bottom.size());
    out.r << top, bottom;
    out.merit = out.r.squaredNorm();
    return out;
}

// Jacobian of the stacked residual: the constraint block is the exact
// forward-mode Jacobian; the projected-gradient block is central-differenced
// because it contains the projector's derivative (a second-order quantity the
// expression layer deliberately does not provide).
inline Mat stacked_jacobian(const Problem& p, const Vec& x, const Tolerances& tol) {
    Mat jr(p.m + p.n, p.n);
    jr.topRows(p.m) = jacobian(p, x);
    for (int j = 0; j < p.n; ++j) {
        const double step = 1e-6 * std::max(1.0, std::abs(x(j)));
        Vec xp = x, xm = x;
        xp(j) += step;
        xm(j) -= step;
        jr.bottomRows(p.n).col(j) =
            (projected_gradient(p, xp, tol) - projected_gradient(p, xm, tol)) / (2.0 * step);
    }
    return jr;
}

}  // namespace detail

/// Damped Gauss-Newton on the stacked residual of feasibility and tangent
/// stationarity, with the tangent space recomputed at each iterate. Levenberg
/// damping keeps the step system solvable on the rank-deficient constraints
/// this library exists for; steps are accepted only when they reduce the
/// merit ||g - y0||^2 + ||B^T grad f||^2. Returns the last iterate flagged
/// not-critical when the budget runs out.
inline SolveResult solve(const Problem& p, const Vec& x_init, const Tolerances& tol = {},
                         int max_iter = 100) {
    p.validate();
    if (x_init.size() != p.n) throw Error("solve: start dimension mismatch");
    if (max_iter < 1) throw Error("solve: max_iter must be >= 1");

    Vec x = x_init;
    double lambda = 1e-3;

    // Feasibility warm start: a short damped Gauss-Newton run on the
    // constraint alone. Starting on (or near) the manifold keeps the main
    // iteration out of infeasible merit basins.
    for (int k = 0; k < 20; ++k) {
        Vec residual;
        try {
            residual = eval_constraint(p, x) - p.y0;
        } catch (const DomainError&) {
            break;
        }
        if (!residual.allFinite() || residual.norm() < tol.residual_abs) break;
        const Vec full_step = -(mp_inverse(jacobian(p, x), tol) * residual);
        if (!full_step.allFinite()) break;
        double scale = 1.0;
        bool moved = false;
        for (int cut = 0; cut < 12 && !moved; ++cut, scale *= 0.5) {
            const Vec x_new = x + scale * full_step;
            try {
                const Vec r_new = eval_constraint(p, x_new) - p.y0;
                if (r_new.allFinite() && r_new.norm() < residual.norm()) {
                    x = x_new;
                    moved = true;
                }
            } catch (const DomainError&) {
            }
        }
        if (!moved) break;
    }

    const auto try_step = [&p, &tol](const Vec& base, const Mat& normal_base, const Vec& rhs,
                                     double damping, double current_merit, Vec& out_x) {
        const Mat normal =
            normal_base + damping * Mat::Identity(normal_base.rows(), normal_base.cols());
        const Vec step = normal.ldlt().solve(rhs);
        if (!step.allFinite()) return false;
        const Vec x_new = base + step;
        try {
            const detail::SolverResidual res_new = detail::stacked_residual(p, x_new, tol);
            if (!res_new.r.allFinite() || !(res_new.merit < current_merit)) return false;
        } catch (const DomainError&) {
            return false;  // stepped outside the expression domain
        }
        out_x = x_new;
        return true;
    };

    for (int iter = 1; iter <= max_iter; ++iter) {
        StationarityCheck sc = check(p, x, tol);
        if (sc.is_critical) {
            // A few undamped polish steps sharpen the point well past the
            // acceptance threshold before returning.
            for (int polish = 0; polish < 3; ++polish) {
                const detail::SolverResidual res = detail::stacked_residual(p, x, tol);
                const Mat jr = detail::stacked_jacobian(p, x, tol);
                if (!jr.allFinite()) break;
                Vec x_next;
                if (!try_step(x, jr.transpose() * jr, -jr.transpose() * res.r, 1e-12, res.merit,
                              x_next))
                    break;
                x = x_next;
            }
            return {check(p, x, tol), SolveStatus::Converged, iter - 1};
        }

        const detail::SolverResidual res = detail::stacked_residual(p, x, tol);
        if (!res.r.allFinite())
            throw SingularStep("solve: residual is not finite at the current iterate");
        const Mat jr = detail::stacked_jacobian(p, x, tol);
        if (!jr.allFinite())
            throw SingularStep("solve: step system is not finite at the current iterate");

        const Mat normal_base = jr.transpose() * jr;
        const Vec rhs = -jr.transpose() * res.r;

        for (;;) {
            Vec x_next;
            if (try_step(x, normal_base, rhs, lambda, res.merit, x_next)) {
                x = x_next;
                lambda = std::max(lambda / 10.0, 1e-12);
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e12) return {check(p, x, tol), SolveStatus::MaxIterExceeded, iter};
        }
    }
    return {check(p, x, tol), SolveStatus::MaxIterExceeded, max_iter};
}

}  // namespace gencrit
