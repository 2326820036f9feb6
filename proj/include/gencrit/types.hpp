#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace gencrit {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Numerical decision thresholds shared by every module. Rank decisions are
/// relative to the largest singular value; residual decisions are absolute.
struct Tolerances {
    double rank_rel = 1e-10;
    double residual_abs = 1e-8;
    double ortho = 1e-12;

    void validate() const {
        if (!(rank_rel > 0.0) || !(residual_abs > 0.0) || !(ortho > 0.0))
            throw std::invalid_argument("Tolerances must be strictly positive");
    }
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// `onto` and `along` do not form a direct sum of the ambient space.
struct DegenerateSplit : Error {
    using Error::Error;
};

/// Candidate matrix fails Penrose conditions 1 or 2.
struct NotAGeneralizedInverse : Error {
    using Error::Error;
};

struct NotOnConstraint : Error {
    using Error::Error;
};

struct NotCritical : Error {
    using Error::Error;
};

struct ZeroGradient : Error {
    using Error::Error;
};

/// Evaluation left the domain of sqrt/log/pow.
struct DomainError : Error {
    using Error::Error;
};

/// The damped step system could not be evaluated or solved.
struct SingularStep : Error {
    using Error::Error;
};

inline bool is_finite(const Mat& a) { return a.allFinite(); }

}  // namespace gencrit
