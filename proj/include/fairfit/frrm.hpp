#ifndef FAIRFIT_FRRM_HPP
#define FAIRFIT_FRRM_HPP

#include <cmath>
#include <limits>
#include <string>

#include "fairfit/decorrelate.hpp"
#include "fairfit/fairness.hpp"
#include "fairfit/model.hpp"
#include "fairfit/model_matrix.hpp"
#include "fairfit/rootfind.hpp"
#include "fairfit/types.hpp"

namespace fairfit {

// beta solves the ridge problem on the decorrelated block only:
//   (U^T U + lambda2 I)^{-1} U^T y.
// It does not depend on S or on the fairness bound.
inline Vector beta_closed_form(const Matrix& uhat, const Vector& y, double lambda2 = 0.0) {
    if (lambda2 < 0.0) throw DataError("beta_closed_form: lambda2 must be nonnegative");
    if (lambda2 == 0.0) {
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(uhat);
        cod.setThreshold(1e-8);
        if (cod.rank() < uhat.cols())
            throw SolverError("beta_closed_form: U^T U is singular at lambda2 = 0; "
                              "raise lambda2 or drop collinear predictors");
        return cod.solve(y);
    }
    Matrix gram = uhat.transpose() * uhat;
    gram.diagonal().array() += lambda2;
    return gram.ldlt().solve(uhat.transpose() * y);
}

// Ridge coefficients of y on S at penalty lambda.
inline Vector alpha_ridge(const Matrix& s, const Vector& y, double lambda) {
    if (lambda < 0.0) throw DataError("alpha_ridge: lambda must be nonnegative");
    if (lambda == 0.0) {
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(s);
        cod.setThreshold(1e-8);
        if (cod.rank() < s.cols())
            throw SolverError("alpha_ridge: S^T S singular at lambda = 0");
        return cod.solve(y);
    }
    Matrix gram = s.transpose() * s;
    gram.diagonal().array() += lambda;
    return gram.ldlt().solve(s.transpose() * y);
}

struct ClosedFormResult {
    double lambda = 0.0;
    Vector alpha;
};

// Exact penalty for mutually independent sensitive attributes scaled so
// that S^T S = n I:
//   n + lambda = ||S^T y||_2 / (c sqrt(r / (1 - r))),  alpha = S^T y / (n + lambda),
// which makes alpha^T (S^T S / n) alpha = c^2 r / (1 - r) hold exactly.
// (The norm enters unsquared; the squared form some references print is
// inconsistent with the defining quadratic (n + lambda)^2 = ||S^T y||^2 / (c^2 r/(1-r))
// and with the numeric root of the constraint, which this function is
// validated against.)
inline ClosedFormResult closed_form_independent(const Matrix& s, const Vector& y, double c,
                                                double r) {
    const double n = static_cast<double>(s.rows());
    if (!(r > 0.0 && r < 1.0)) throw DataError("closed_form_independent: need 0 < r < 1");
    if (!(c > 0.0)) throw DataError("closed_form_independent: need c > 0");
    const Matrix gram = s.transpose() * s;
    const double dev = (gram - n * Matrix::Identity(s.cols(), s.cols())).cwiseAbs().maxCoeff();
    if (dev > 1e-8 * n)
        throw DataError("closed_form_independent: S is not orthonormalised (max |S^T S - nI| = " +
                        std::to_string(dev) + ")");

    const Vector sty = s.transpose() * y;
    const double n_plus_lambda = sty.norm() / (c * std::sqrt(r / (1.0 - r)));
    ClosedFormResult out;
    out.lambda = n_plus_lambda - n;
    if (out.lambda < 0.0)
        throw SolverError("closed_form_independent: constraint inactive at lambda = 0");
    out.alpha = sty / n_plus_lambda;
    return out;
}

namespace detail {

// Shared fitting state on already-decorrelated inputs. The bias module
// reuses this with ridge residuals in place of U.
struct FrrmCore {
    Vector alpha;
    Vector alpha_ols;
    Vector beta;
    double lambda = 0.0;
    double achieved = 0.0;
};

inline FrrmCore fit_frrm_core(const Matrix& s, const Matrix& u, const Vector& y,
                              const FairnessSpec& spec, double lambda2) {
    spec.validate();
    const Index n = s.rows();

    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
    const Vector& evals = eig.eigenvalues();
    if (evals.minCoeff() <= 0.0)
        throw SolverError("fit_frrm: S^T S is singular after decorrelation setup");
    const Vector w = eig.eigenvectors().transpose() * (s.transpose() * y);

    FrrmCore core;
    core.beta = beta_closed_form(u, y, lambda2);
    core.alpha_ols = eig.eigenvectors() * (w.array() / evals.array()).matrix();

    auto alpha_at = [&](double lambda) -> Vector {
        return eig.eigenvectors() * (w.array() / (evals.array() + lambda)).matrix();
    };
    // alpha(l)^T VAR(S) alpha(l), evaluated through the spectrum.
    auto sp_quadform = [&](double lambda) {
        return (evals.array() * w.array().square() / (evals.array() + lambda).square()).sum() /
               static_cast<double>(n);
    };

    IfCache if_cache;
    const bool wants_if = spec.definition == Definition::individual;
    if (wants_if) {
        IfOptions opts;
        opts.allow_subsample = true;
        if_cache = laplacian_form(y, s, spec.distance, opts);
        if_cache.f_ols = if_cache.quad(core.alpha_ols);
    }

    auto value_of = [&](const Vector& alpha) -> double {
        switch (spec.definition) {
            case Definition::sp:
                return r2_sp(alpha, core.beta, s, u);
            case Definition::eo:
                return r2_eo(s * alpha + u * core.beta, y, s);
            case Definition::individual:
                return d_if(alpha, core.alpha_ols, if_cache);
            case Definition::composite:
                return composite(spec, r2_sp(alpha, core.beta, s, u),
                                 r2_eo(s * alpha + u * core.beta, y, s));
        }
        throw SolverError("fit_frrm: unknown fairness definition");
    };

    const double r = spec.r;
    if (r >= 1.0) {
        core.alpha = core.alpha_ols;
        core.lambda = 0.0;
        core.achieved = value_of(core.alpha);
        return core;
    }
    if (r == 0.0) {
        core.alpha = Vector::Zero(s.cols());
        core.lambda = std::numeric_limits<double>::infinity();
        core.achieved = wants_if && if_cache.f_ols <= 0.0 ? 0.0 : value_of(core.alpha);
        return core;
    }
    if (wants_if && if_cache.f_ols <= 0.0) {
        // Degenerate normaliser: the OLS alpha already carries no
        // individual-fairness penalty, so the constraint is vacuous.
        core.alpha = core.alpha_ols;
        core.lambda = 0.0;
        core.achieved = 0.0;
        return core;
    }

    const double at_ols = value_of(core.alpha_ols);
    if (at_ols <= r) {
        core.alpha = core.alpha_ols;
        core.lambda = 0.0;
        core.achieved = at_ols;
        return core;
    }

    RootResult root;
    if (spec.definition == Definition::sp) {
        const double c = r / (1.0 - r) * (u * core.beta).squaredNorm() / static_cast<double>(n);
        const Bracket bracket = lambda_bracket_from_spectrum(evals, w, n, c);
        root = solve_lambda(sp_quadform, bracket, 1e-8);
    } else {
        // No eigenvalue bracket for these functionals: double the upper
        // end from n until the constraint drops below the bound.
        Bracket bracket;
        bracket.target = r;
        bracket.lo = 0.0;
        bracket.hi = static_cast<double>(n);
        const double cap = static_cast<double>(n) * 1152921504606846976.0;  // n * 2^60
        while (value_of(alpha_at(bracket.hi)) > r) {
            bracket.hi *= 2.0;
            if (bracket.hi > cap)
                throw SolverError("fit_frrm: constraint never drops below the bound on [0, n*2^60]");
        }
        root = solve_lambda([&](double lambda) { return value_of(alpha_at(lambda)); }, bracket, 1e-8);
    }
    core.lambda = root.lambda;
    core.alpha = alpha_at(root.lambda);
    core.achieved = value_of(core.alpha);
    return core;
}

// Applies the PCA fallback when VAR(S) is effectively rank deficient;
// the default tolerance mirrors the near-zero eigenvalues seen in real
// sensitive blocks.
inline Matrix reduce_if_needed(const Matrix& s, Matrix& rotation, double tol = 1e-6) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
    const Vector& evals = eig.eigenvalues();
    if (evals(0) > tol * evals(evals.size() - 1)) {
        rotation = Matrix::Identity(s.cols(), s.cols());
        return s;
    }
    return pca_reduce(s, tol, &rotation);
}

}  // namespace detail

// Fair ridge regression: decorrelate, estimate beta in closed form, then
// pick the ridge penalty on alpha so the chosen fairness functional
// equals the bound r whenever the constraint is active.
inline FittedModel fit_frrm(const ModelMatrices& mm, const FairnessSpec& spec,
                            double lambda2 = 0.0) {
    FittedModel model;
    model.spec = spec;
    model.family = Family::gaussian;
    model.lambda2 = lambda2;
    model.x_codec = mm.x_codec;
    model.s_codec = mm.s_codec;
    model.y_center = mm.y_center;

    const Matrix s = detail::reduce_if_needed(mm.S, model.s_rotation);
    const DecorrelatedDesign design = ols_decorrelate(s, mm.X);
    model.bhat = design.bhat;

    detail::FrrmCore core = detail::fit_frrm_core(s, design.uhat, mm.y, spec, lambda2);
    model.alpha = core.alpha;
    model.beta = core.beta;
    model.lambda_r = core.lambda;
    model.achieved = core.achieved;
    model.intercept = 0.0;

    const Vector eta = s * core.alpha + design.uhat * core.beta;
    model.fitted = eta.array() + mm.y_center;
    model.residuals = mm.y_raw - model.fitted;
    const double tss = mm.y.squaredNorm();
    const double rss = (mm.y - eta).squaredNorm();
    model.r2 = tss > 0.0 ? 1.0 - rss / tss : 0.0;
    model.deviance = rss;
    model.null_deviance = tss;
    model.alpha_zero_deviance = (mm.y - design.uhat * core.beta).squaredNorm();
    return model;
}

}  // namespace fairfit

#endif
