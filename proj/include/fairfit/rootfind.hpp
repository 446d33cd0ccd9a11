#ifndef FAIRFIT_ROOTFIND_HPP
#define FAIRFIT_ROOTFIND_HPP

#include <cmath>
#include <functional>
#include <string>

#include "fairfit/types.hpp"

namespace fairfit {

// Search interval for the ridge penalty plus the spectral quantities it
// came from. `target` is the constant the constraint must hit.
struct Bracket {
    double lo = 0.0;
    double hi = 0.0;
    double target = 0.0;
    // Populated on the statistical-parity path:
    double l_min = 0.0;
    double l_max = 0.0;
    double d = 0.0;           // ||S^T y||^2
    double weighted_d = 0.0;  // sum_j l_j w_j^2 with w = A^T S^T y
};

// Bracket for the equation  alpha(l)^T VAR(S) alpha(l) = c  where
// alpha(l) = (S^T S + l I)^{-1} S^T y. With S^T S = A diag(l_j) A^T and
// w = A^T S^T y the left side is (1/n) sum_j l_j w_j^2 / (l_j + l)^2.
// Replacing the denominator eigenvalues by l_min (resp. l_max) bounds it
// by (1/n) e / (l + l)^2 with e = sum_j l_j w_j^2; each bound equated to
// c is a quadratic in lambda with a single positive root, and the pair
// of roots encloses lambda(r). When l_min = l_max the two roots coincide
// with the exact solution.
inline Bracket lambda_bracket_from_spectrum(const Vector& eigenvalues, const Vector& w,
                                            Index n, double c) {
    if (c <= 0.0) throw SolverError("lambda_bracket: target constant must be positive");
    Bracket b;
    b.target = c;
    b.l_min = eigenvalues.minCoeff();
    b.l_max = eigenvalues.maxCoeff();
    b.d = w.squaredNorm();
    b.weighted_d = (eigenvalues.array() * w.array().square()).sum();
    if (b.l_min <= 0.0) throw SolverError("lambda_bracket: S^T S is singular");

    const double at_zero = (w.array().square() / eigenvalues.array()).sum() / static_cast<double>(n);
    if (at_zero < c)
        throw SolverError("lambda_bracket: constraint already satisfied at lambda = 0 "
                          "(value " + std::to_string(at_zero) + " vs target " + std::to_string(c) + ")");

    const double scale = std::sqrt(b.weighted_d / (static_cast<double>(n) * c));
    b.lo = std::max(0.0, scale - b.l_max);
    b.hi = scale - b.l_min;
    if (b.hi < 0.0)
        throw SolverError("lambda_bracket: no positive root; constraint inactive");
    return b;
}

inline Bracket lambda_bracket(const Matrix& s, const Vector& y, double c) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
    const Vector w = eig.eigenvectors().transpose() * (s.transpose() * y);
    return lambda_bracket_from_spectrum(eig.eigenvalues(), w, s.rows(), c);
}

struct RootResult {
    double lambda = 0.0;
    double value = 0.0;
    int iterations = 0;
};

// Finds lambda in [bracket.lo, bracket.hi] with
// |constraint(lambda) - target| <= tol * max(1, target), assuming the
// constraint is continuous and non-increasing. Secant steps with a
// bisection safeguard; at most 200 iterations.
inline RootResult solve_lambda(const std::function<double(double)>& constraint,
                               const Bracket& bracket, double tol = 1e-8) {
    const double target = bracket.target;
    const double tol_abs = tol * std::max(1.0, std::abs(target));
    constexpr int max_iterations = 200;

    double a = bracket.lo;
    double b = bracket.hi;
    if (b < a) throw SolverError("solve_lambda: empty bracket");
    double fa = constraint(a);
    if (std::abs(fa - target) <= tol_abs) return {a, fa, 0};
    if (fa < target) {
        if (a == 0.0) return {0.0, fa, 0};  // bound above the lambda = 0 value: inactive
        throw SolverError("solve_lambda: no sign change on bracket [" + std::to_string(a) + ", " +
                          std::to_string(b) + "], f(lo) = " + std::to_string(fa) +
                          " below target " + std::to_string(target));
    }
    double fb = constraint(b);
    if (std::abs(fb - target) <= tol_abs) return {b, fb, 1};
    if (fb > target)
        throw SolverError("solve_lambda: no sign change on bracket [" + std::to_string(a) + ", " +
                          std::to_string(b) + "], f(hi) = " + std::to_string(fb) +
                          " above target " + std::to_string(target));

    for (int it = 2; it <= max_iterations; ++it) {
        // Interpolate between the bracket endpoints; every other step is
        // a forced bisection so the interval provably halves.
        double candidate = 0.5 * (a + b);
        if (it % 2 != 0 && fb != fa) {
            const double secant = a + (target - fa) * (b - a) / (fb - fa);
            if (secant > a && secant < b) candidate = secant;
        }

        const double fc = constraint(candidate);
        if (std::abs(fc - target) <= tol_abs) return {candidate, fc, it};
        if (fc > target) {
            a = candidate;
            fa = fc;
        } else {
            b = candidate;
            fb = fc;
        }

        if (b - a <= 1e-15 * std::max(1.0, b)) {
            // Interval exhausted in double precision; report the better endpoint.
            const bool pick_a = std::abs(fa - target) < std::abs(fb - target);
            const double x = pick_a ? a : b;
            const double f = pick_a ? fa : fb;
            if (std::abs(f - target) <= tol_abs) return {x, f, it};
            throw SolverError("solve_lambda: bracket collapsed at lambda = " + std::to_string(x) +
                              " with residual " + std::to_string(f - target));
        }
    }
    throw SolverError("solve_lambda: iteration cap (200) reached");
}

}  // namespace fairfit

#endif
