#include <gencrit/paper_suite.hpp>
#include <gencrit/stationarity.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>

using namespace gencrit;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Vec vec3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Random constrained problem with a known critical point. The constraint is
// linear (g = C x, y0 = C x_star) and f = |x - c|^2 with c = x_star + C^T u,
// so grad f at x_star is -2 C^T u, orthogonal to N(C): x_star is critical by
// construction. `rank` controls the Jacobian rank (duplicated rows).
struct ConstructedProblem {
    Problem problem;
    Vec x_star;
};

ConstructedProblem random_critical_problem(std::mt19937& rng, bool full_rank) {
    std::uniform_int_distribution<int> n_pick(3, 5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = n_pick(rng);
    std::uniform_int_distribution<int> m_pick(1, n - 1);
    const int rank = m_pick(rng);
    const int m = full_rank ? rank : rank + 1;  // deficient: duplicate one row

    Mat c(m, n);
    for (;;) {
        for (int i = 0; i < rank; ++i)
            for (int j = 0; j < n; ++j) c(i, j) = 2.0 * u(rng);
        if (numerical_rank(c.topRows(rank)) == rank &&
            Eigen::JacobiSVD<Mat>(c.topRows(rank)).singularValues().minCoeff() > 0.3)
            break;
    }
    if (!full_rank) c.row(rank) = c.row(0);  // duplicated component

    Vec x_star(n);
    for (int j = 0; j < n; ++j) x_star(j) = u(rng);
    Vec w = Vec::Zero(n);
    for (int i = 0; i < rank; ++i) w += u(rng) * c.row(i).transpose();
    const Vec center = x_star + w;

    ConstructedProblem out;
    out.problem.n = n;
    out.problem.m = m;
    for (int i = 0; i < m; ++i) {
        std::string src;
        for (int j = 0; j < n; ++j) {
            if (j > 0) src += " + ";
            src += "(" + fmt(c(i, j)) + ")*x" + std::to_string(j + 1);
        }
        out.problem.g.push_back(parse(src, n));
    }
    std::string fsrc;
    for (int j = 0; j < n; ++j) {
        if (j > 0) fsrc += " + ";
        fsrc += "(x" + std::to_string(j + 1) + " - (" + fmt(center(j)) + "))^2";
    }
    out.problem.f = parse(fsrc, n);
    out.problem.y0 = c * x_star;
    out.x_star = x_star;
    out.problem.validate();
    return out;
}

// Random member of GI(J(x)) via chart coordinates in [-1, 1].
Mat random_gi_member(const Mat& jac, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GenInverseChart chart = chart_origin(jac);
    for (Index i = 0; i < chart.alpha.rows(); ++i)
        for (Index j = 0; j < chart.alpha.cols(); ++j) chart.alpha(i, j) = u(rng);
    for (Index i = 0; i < chart.beta.rows(); ++i)
        for (Index j = 0; j < chart.beta.cols(); ++j) chart.beta(i, j) = u(rng);
    return build(chart).B;
}

}  // namespace

TEST_CASE("check on the circle problem") {
    const Problem p = builtin_circle(3.0, 4.0);

    const StationarityCheck near = check(p, vec2(0.6, 0.8));
    CHECK(near.constraint_residual < 1e-12);
    CHECK(near.tangent_residual < 1e-12);
    CHECK(near.is_critical);

    const StationarityCheck far = check(p, vec2(-0.6, -0.8));
    CHECK(far.is_critical);

    const StationarityCheck off = check(p, vec2(1.0, 0.0));
    CHECK(off.constraint_residual < 1e-15);
    CHECK(off.tangent_residual > 0.1);
    CHECK_FALSE(off.is_critical);
}

TEST_CASE("multiplier via the Moore-Penrose inverse of the circle Jacobian") {
    const Problem p = builtin_circle(3.0, 4.0);
    const Vec x = vec2(0.6, 0.8);
    const Mat jac = jacobian(p, x);
    const Vec L = multiplier(p, x, mp_inverse(jac));
    REQUIRE(L.size() == 1);
    CHECK(L(0) == Catch::Approx(-4.0).margin(1e-12));
}

TEST_CASE("multiplier of a zero gradient is zero") {
    // Center sits on the constraint, so grad f vanishes at it.
    const Problem p = builtin_circle(0.6, 0.8);
    const Vec x = vec2(0.6, 0.8);
    const Vec L = multiplier(p, x, mp_inverse(jacobian(p, x)));
    CHECK(L.norm() < 1e-14);
}

TEST_CASE("multiplier rejects matrices that are not generalized inverses") {
    const Problem p = builtin_circle(3.0, 4.0);
    const Vec x = vec2(0.6, 0.8);
    CHECK_THROWS_AS(multiplier(p, x, Mat(Mat::Zero(2, 1))), NotAGeneralizedInverse);
    CHECK_THROWS_AS(multiplier(p, x, Mat(Mat::Ones(2, 1))), NotAGeneralizedInverse);
    CHECK_THROWS_AS(multiplier(p, x, Mat(Mat::Zero(1, 2))), NotAGeneralizedInverse);
}

TEST_CASE("multiplier agrees across generalized inverses on regular problems") {
    const Problem p = builtin_circle(3.0, 4.0);
    const Vec x = vec2(0.6, 0.8);
    const Mat jac = jacobian(p, x);
    const Vec reference = multiplier(p, x, mp_inverse(jac));
    std::mt19937 rng(101);
    for (int i = 0; i < 20; ++i) {
        const Vec L = multiplier(p, x, random_gi_member(jac, rng));
        CHECK((L - reference).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("certify_multiplier on the regular circle") {
    const Problem p = builtin_circle(3.0, 4.0);
    const MultiplierCertificate cert = certify_multiplier(p, vec2(0.6, 0.8));
    CHECK(cert.kind == CertificateKind::UniqueRegular);
    REQUIRE(cert.L.size() == 1);
    CHECK(cert.L(0) == Catch::Approx(-4.0).margin(1e-12));
    CHECK_FALSE(cert.L1.has_value());
    CHECK_FALSE(cert.witness.has_value());
}

TEST_CASE("certify_multiplier on the rank-deficient constraint") {
    const Problem p = builtin_sphere_slice(3.0, 4.0, 7.0);
    const Vec x = vec3(0.6, 0.8, 0.0);
    const MultiplierCertificate cert = certify_multiplier(p, x);
    REQUIRE(cert.kind == CertificateKind::IllPosed);
    REQUIRE(cert.L1.has_value());
    REQUIRE(cert.witness.has_value());
    REQUIRE(cert.gap.has_value());
    CHECK(*cert.gap >= 1.0 - 1e-8);

    // Both functionals satisfy the Euler equation on R(g'(x)): they agree
    // composed with the Jacobian.
    const Mat jac = jacobian(p, x);
    const Vec grad_f = grad(p.f, x);
    CHECK(((cert.L.transpose() * jac).transpose() - grad_f).norm() < 1e-9);
    CHECK(((cert.L1->transpose() * jac).transpose() - grad_f).norm() < 1e-9);
}

TEST_CASE("certify_multiplier with a gradient orthogonal to the deficient direction") {
    // Center with zero third component: the gradient has no component along
    // the duplicated constraint direction, yet the generic construction still
    // produces a unit gap.
    const Problem p = builtin_sphere_slice(3.0, 4.0, 0.0);
    const Vec x = vec3(0.6, 0.8, 0.0);
    const MultiplierCertificate cert = certify_multiplier(p, x);
    REQUIRE(cert.kind == CertificateKind::IllPosed);
    CHECK(*cert.gap == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("certify_multiplier error paths") {
    const Problem p = builtin_sphere_slice(3.0, 4.0, 7.0);
    CHECK_THROWS_AS(certify_multiplier(p, vec3(1.0, 0.0, 0.0)), NotCritical);

    // f with zero gradient at the critical point of a deficient constraint.
    const Problem degenerate = builtin_sphere_slice(0.6, 0.8, 0.0);
    CHECK_THROWS_AS(certify_multiplier(degenerate, vec3(0.6, 0.8, 0.0)), ZeroGradient);
}

TEST_CASE("orthogonal_witness on the rank-deficient constraint") {
    const Problem p = builtin_sphere_slice(3.0, 4.0, 7.0);
    const Vec x = vec3(0.6, 0.8, 0.0);
    const OrthogonalWitness w = orthogonal_witness(p, x);
    CHECK(w.e_star.norm() == Catch::Approx(1.0).margin(1e-12));

    Vec expected = vec3(0.6 - 3.0, 0.8 - 4.0, -7.0).normalized();
    CHECK(std::abs(std::abs(w.e_star.dot(expected)) - 1.0) < 1e-12);

    // Orthogonal to the tangent space and to N(f'(x)).
    const SubspaceBasis tangent = tangent_basis(p, x);
    CHECK((tangent.columns.transpose() * w.e_star).cwiseAbs().maxCoeff() < 1e-8);
    const Mat grad_row = grad(p.f, x).transpose();
    const SubspaceBasis null_f = fundamental_subspaces(grad_row).null_space;
    CHECK((null_f.columns.transpose() * w.e_star).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("orthogonal_witness on the circle") {
    const Problem p = builtin_circle(3.0, 4.0);
    const OrthogonalWitness w = orthogonal_witness(p, vec2(0.6, 0.8));
    CHECK(std::abs(std::abs(w.e_star.dot(vec2(0.6, 0.8))) - 1.0) < 1e-12);
}

TEST_CASE("orthogonal_witness error paths") {
    const Problem degenerate = builtin_circle(0.6, 0.8);
    CHECK_THROWS_AS(orthogonal_witness(degenerate, vec2(0.6, 0.8)), ZeroGradient);

    const Problem p = builtin_circle(3.0, 4.0);
    CHECK_THROWS_AS(orthogonal_witness(p, vec2(1.0, 0.0)), NotCritical);
}

TEST_CASE("solve the circle problem from the axis start") {
    const Problem p = builtin_circle(3.0, 4.0);
    const SolveResult sr = solve(p, vec2(1.0, 0.0), {}, 50);
    REQUIRE(sr.status == SolveStatus::Converged);
    CHECK((sr.check.point - vec2(0.6, 0.8)).norm() < 1e-8);
    CHECK(sr.check.is_critical);
}

TEST_CASE("solve the rank-deficient problem") {
    const Problem p = builtin_sphere_slice(3.0, 4.0, 7.0);
    const SolveResult sr = solve(p, vec3(1.0, 0.0, 0.0), {}, 100);
    REQUIRE(sr.status == SolveStatus::Converged);
    CHECK((sr.check.point - vec3(0.6, 0.8, 0.0)).norm() < 1e-8);
}

TEST_CASE("solve reports non-convergence at an unreachable tolerance") {
    Tolerances tol;
    tol.residual_abs = 1e-30;
    const Problem p = builtin_circle(3.0, 4.0);
    const SolveResult sr = solve(p, vec2(1.0, 0.0), tol, 20);
    CHECK(sr.status == SolveStatus::MaxIterExceeded);
    CHECK_FALSE(sr.check.is_critical);
}

TEST_CASE("solve never claims criticality while infeasible") {
    std::mt19937 rng(103);
    const Problem p = builtin_ellipse(2.0, 1.0, 1.0, 0.5);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    Tolerances tol;
    for (int trial = 0; trial < 12; ++trial) {
        const SolveResult sr = solve(p, vec2(u(rng), u(rng)), tol, 25);
        if (sr.check.is_critical)
            CHECK(sr.check.constraint_residual < tol.residual_abs);
    }
}

TEST_CASE("ellipse solutions satisfy the angle equation") {
    const double a = 2.0, b = 1.0, cx = 1.0, cy = 0.5;
    const Problem p = builtin_ellipse(a, b, cx, cy);
    std::mt19937 rng(107);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * EIGEN_PI);
    int converged = 0;
    for (int trial = 0; trial < 8; ++trial) {
        const double theta = angle(rng);
        const SolveResult sr =
            solve(p, vec2(1.05 * a * std::cos(theta), 0.95 * b * std::sin(theta)), {}, 200);
        if (sr.status != SolveStatus::Converged) continue;
        ++converged;
        const double residual =
            ellipse_angle_residual(a, b, cx, cy, sr.check.point(0), sr.check.point(1));
        CHECK(std::abs(residual) < 1e-8);
    }
    CHECK(converged >= 1);
}

TEST_CASE("criticality decision is independent of the generalized inverse") {
    // At points that are exactly critical or bounded well away from critical,
    // the accept/reject decision must agree for every member of GI(J).
    std::mt19937 rng(109);
    Tolerances tol;
    int critical_trials = 0, away_trials = 0;
    while (critical_trials + away_trials < 50) {
        const bool want_critical = (critical_trials <= away_trials);
        const bool full_rank = rng() % 2 == 0;
        const ConstructedProblem cp = random_critical_problem(rng, full_rank);
        Vec x = cp.x_star;
        if (!want_critical) {
            Vec bump(cp.problem.n);
            std::uniform_real_distribution<double> u(0.3, 1.0);
            for (int j = 0; j < cp.problem.n; ++j) bump(j) = u(rng);
            x += bump;  // generic displacement: far from critical
        }
        const StationarityCheck sc = check(cp.problem, x, tol);
        const Vec grad_f = grad(cp.problem.f, x);
        const Mat jac = jacobian(cp.problem, x);
        if (want_critical) {
            REQUIRE(sc.is_critical);
            ++critical_trials;
        } else {
            // skip marginal samples: require a 10x margin in both residuals
            if (sc.tangent_residual < 10.0 * tol.residual_abs &&
                sc.constraint_residual < 10.0 * tol.residual_abs)
                continue;
            ++away_trials;
        }
        for (int k = 0; k < 20; ++k) {
            const Mat b = random_gi_member(jac, rng);
            const double tangent_b =
                (grad_f.transpose() * (Mat::Identity(cp.problem.n, cp.problem.n) - b * jac))
                    .norm();
            const bool decision =
                sc.constraint_residual < tol.residual_abs && tangent_b < tol.residual_abs;
            CHECK(decision == sc.is_critical);
        }
    }
}

TEST_CASE("multiplier uniqueness on random full-rank problems") {
    std::mt19937 rng(113);
    for (int trial = 0; trial < 20; ++trial) {
        const ConstructedProblem cp = random_critical_problem(rng, true);
        const StationarityCheck sc = check(cp.problem, cp.x_star);
        REQUIRE(sc.is_critical);
        const Mat jac = jacobian(cp.problem, cp.x_star);
        const Vec reference = multiplier(cp.problem, cp.x_star, mp_inverse(jac));
        for (int k = 0; k < 20; ++k) {
            const Vec L = multiplier(cp.problem, cp.x_star, random_gi_member(jac, rng));
            CHECK((L - reference).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("ill-posed gap on random rank-deficient problems") {
    std::mt19937 rng(127);
    int done = 0;
    while (done < 15) {
        const ConstructedProblem cp = random_critical_problem(rng, false);
        if (grad(cp.problem.f, cp.x_star).norm() <= 1e-4) continue;  // want f' != 0
        const MultiplierCertificate cert = certify_multiplier(cp.problem, cp.x_star);
        REQUIRE(cert.kind == CertificateKind::IllPosed);
        CHECK(*cert.gap >= 1.0 - 1e-8);
        ++done;
    }
}

TEST_CASE("tangent residual decision agrees with the basis formulation") {
    // ||f'(x)(I - J+ J)|| < tol iff every tangent basis vector v keeps
    // |f'(x) . v| below tol (up to a conditioning factor); both routes must
    // agree on clear-cut points.
    std::mt19937 rng(131);
    Tolerances tol;
    for (int trial = 0; trial < 30; ++trial) {
        const bool critical = rng() % 2 == 0;
        const ConstructedProblem cp = random_critical_problem(rng, rng() % 2 == 0);
        Vec x = cp.x_star;
        if (!critical) x.array() += 0.7;
        const StationarityCheck sc = check(cp.problem, x, tol);
        const Mat jac = jacobian(cp.problem, x);
        const SubspaceBasis tangent = fundamental_subspaces(jac).null_space;
        const Vec grad_f = grad(cp.problem.f, x);
        if (tangent.count() == 0) continue;
        const double max_inner = (tangent.columns.transpose() * grad_f).cwiseAbs().maxCoeff();
        const double scaled_tol =
            tol.residual_abs * std::max(1.0, grad_f.norm()) * std::sqrt(double(tangent.count()));
        if (sc.tangent_residual < tol.residual_abs) {
            CHECK(max_inner < scaled_tol);
        } else if (sc.tangent_residual > 10.0 * tol.residual_abs * std::max(1.0, grad_f.norm())) {
            CHECK(max_inner >= tol.residual_abs);
        }
    }
}
