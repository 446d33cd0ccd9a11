#ifndef FAIRFIT_TYPES_HPP
#define FAIRFIT_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace fairfit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Thrown for malformed inputs: bad files, bad schemas, bad column contents.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a fit cannot be completed (rank deficiency, divergence, ...).
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

enum class Family { gaussian, binomial, poisson };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::binomial: return "binomial";
        case Family::poisson: return "poisson";
    }
    return "?";
}

inline Family family_from_name(const std::string& name) {
    if (name == "gaussian") return Family::gaussian;
    if (name == "binomial") return Family::binomial;
    if (name == "poisson") return Family::poisson;
    throw DataError("unknown family: " + name);
}

// Empirical moments of centred columns, denominator n throughout.
inline double var_of(const Vector& v) {
    return v.squaredNorm() / static_cast<double>(v.size());
}

inline double cov_of(const Vector& a, const Vector& b) {
    return a.dot(b) / static_cast<double>(a.size());
}

// Pearson correlation; centres both arguments.
inline double cor_of(const Vector& a, const Vector& b) {
    const Vector ac = a.array() - a.mean();
    const Vector bc = b.array() - b.mean();
    const double den = ac.norm() * bc.norm();
    if (den == 0.0) return 0.0;
    return ac.dot(bc) / den;
}

}  // namespace fairfit

#endif
