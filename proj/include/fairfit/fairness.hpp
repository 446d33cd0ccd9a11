#ifndef FAIRFIT_FAIRNESS_HPP
#define FAIRFIT_FAIRNESS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "fairfit/types.hpp"

namespace fairfit {

enum class Definition { sp, eo, individual, composite };
enum class Combine { max_of, convex };
enum class IfDistance { abs_diff, squared_diff };

inline const char* definition_name(Definition d) {
    switch (d) {
        case Definition::sp: return "sp";
        case Definition::eo: return "eo";
        case Definition::individual: return "if";
        case Definition::composite: return "composite";
    }
    return "?";
}

// Which fairness functional bounds the fit, and at what level r.
struct FairnessSpec {
    Definition definition = Definition::sp;
    double r = 0.0;
    Combine combine = Combine::max_of;   // for composite
    double w = 0.5;                      // convex weight on the SP component
    IfDistance distance = IfDistance::abs_diff;

    void validate() const {
        if (!(r >= 0.0 && r <= 1.0)) throw DataError("fairness bound r must lie in [0, 1]");
        if (definition == Definition::composite && combine == Combine::convex &&
            !(w > 0.0 && w < 1.0))
            throw DataError("composite convex weight w must lie in (0, 1)");
    }
};

// Share of the model's explained variance attributable to S (statistical
// parity form): a^T VAR(S) a / (a^T VAR(S) a + b^T VAR(U) b), with the
// population covariance of the centred blocks.
inline double r2_sp(const Vector& alpha, const Vector& beta, const Matrix& s, const Matrix& uhat) {
    const double n = static_cast<double>(s.rows());
    const double qa = (s * alpha).squaredNorm() / n;
    const double qb = (uhat * beta).squaredNorm() / n;
    if (qa + qb == 0.0) throw SolverError("r2_sp: both quadratic forms are zero");
    return qa / (qa + qb);
}

// Auxiliary regression yhat = y psi + S phi + e underlying the
// equality-of-opportunity share.
struct EoFit {
    double psi = 0.0;
    Vector phi;
};

// Centres yhat and y, then regresses yhat on (y, S) without intercept;
// S is assumed centred already.
inline EoFit eo_fit(const Vector& yhat, const Vector& y, const Matrix& s) {
    const Vector yc = y.array() - y.mean();
    const Vector yhat_c = yhat.array() - yhat.mean();
    if (var_of(yc) == 0.0) throw DataError("r2_eo: response has zero variance");
    Matrix design(s.rows(), s.cols() + 1);
    design.col(0) = yc;
    design.rightCols(s.cols()) = s;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(design);
    cod.setThreshold(1e-8);
    if (cod.rank() < design.cols())
        throw SolverError("r2_eo: auxiliary design (y, S) is collinear");
    const Vector coef = cod.solve(yhat_c);
    EoFit fit;
    fit.psi = coef(0);
    fit.phi = coef.tail(s.cols());
    return fit;
}

// VAR(S phi) / VAR(y psi + S phi) from the auxiliary OLS fit.
inline double r2_eo(const Vector& yhat, const Vector& y, const Matrix& s) {
    const EoFit fit = eo_fit(yhat, y, s);
    const Vector yc = y.array() - y.mean();
    const Vector sphi = s * fit.phi;
    const Vector explained = fit.psi * yc + sphi;
    const double den = var_of(explained);
    if (den == 0.0) return 0.0;
    return var_of(sphi) / den;
}

// Quadratic representation of the pairwise individual-fairness penalty:
//   alpha^T M alpha = sum over unordered pairs of d(y_i, y_j) (s_i a - s_j a)^2,
// i.e. M = S^T L S with L the graph Laplacian of the weights d(y_i, y_j).
struct IfCache {
    Matrix m;             // q x q, symmetric PSD
    double f_ols = -1.0;  // f(alpha_ols); filled once the OLS alpha is known
    bool subsampled = false;

    double quad(const Vector& alpha) const { return alpha.dot(m * alpha); }
};

struct IfOptions {
    Index max_exact_n = 5000;
    bool allow_subsample = false;
    std::uint64_t subsample_seed = 20240901;
    std::int64_t subsample_pairs = 1000000;
};

namespace detail {

inline double if_distance(IfDistance d, double a, double b) {
    const double diff = std::abs(a - b);
    return d == IfDistance::abs_diff ? diff : diff * diff;
}

}  // namespace detail

inline IfCache laplacian_form(const Vector& y, const Matrix& s,
                              IfDistance distance = IfDistance::abs_diff,
                              const IfOptions& opts = {}) {
    const Index n = y.size();
    if (n < 2) throw DataError("laplacian_form: need at least 2 rows");
    IfCache cache;
    cache.m = Matrix::Zero(s.cols(), s.cols());
    Vector diff(s.cols());
    if (n <= opts.max_exact_n) {
        for (Index i = 0; i < n; ++i) {
            for (Index j = i + 1; j < n; ++j) {
                const double w = detail::if_distance(distance, y(i), y(j));
                if (w == 0.0) continue;
                diff = s.row(i) - s.row(j);
                cache.m.noalias() += w * diff * diff.transpose();
            }
        }
        return cache;
    }
    if (!opts.allow_subsample)
        throw DataError("laplacian_form: n = " + std::to_string(n) +
                        " exceeds the exact-computation threshold " +
                        std::to_string(opts.max_exact_n) + " and subsampling is disabled");
    // Uniform random pairs; the normalisation cancels in the D_IF ratio.
    std::mt19937_64 rng(opts.subsample_seed);
    cache.subsampled = true;
    for (std::int64_t k = 0; k < opts.subsample_pairs; ++k) {
        const Index i = static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
        Index j = static_cast<Index>(rng() % static_cast<std::uint64_t>(n - 1));
        if (j >= i) ++j;
        const double w = detail::if_distance(distance, y(i), y(j));
        if (w == 0.0) continue;
        diff = s.row(i) - s.row(j);
        cache.m.noalias() += w * diff * diff.transpose();
    }
    return cache;
}

// D_IF = f(alpha) / f(alpha_ols), both through the cached quadratic form.
inline double d_if(const Vector& alpha, const Vector& alpha_ols, const IfCache& cache) {
    const double f_ols = cache.f_ols >= 0.0 ? cache.f_ols : cache.quad(alpha_ols);
    if (f_ols <= 0.0)
        throw SolverError("d_if: f(alpha_ols) is zero, individual-fairness constraint undefined");
    return cache.quad(alpha) / f_ols;
}

// Combines per-definition values: max, or the convex mixture
// w * SP + (1 - w) * EO.
inline double composite(const FairnessSpec& spec, double sp_value, double eo_value) {
    if (spec.combine == Combine::max_of) return std::max(sp_value, eo_value);
    return spec.w * sp_value + (1.0 - spec.w) * eo_value;
}

}  // namespace fairfit

#endif
