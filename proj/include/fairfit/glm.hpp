#ifndef FAIRFIT_GLM_HPP
#define FAIRFIT_GLM_HPP

#include <cmath>
#include <limits>
#include <string>

#include "fairfit/decorrelate.hpp"
#include "fairfit/frrm.hpp"
#include "fairfit/model.hpp"
#include "fairfit/model_matrix.hpp"
#include "fairfit/rootfind.hpp"
#include "fairfit/types.hpp"

namespace fairfit {

namespace glm {

constexpr double mu_floor = 1e-10;

// Canonical links only: identity, logit, log. For canonical links the
// IRLS weight V(mu) doubles as d mu / d eta.
inline double inverse_link(Family f, double eta) {
    switch (f) {
        case Family::gaussian: return eta;
        case Family::binomial: return 1.0 / (1.0 + std::exp(-eta));
        case Family::poisson: return std::exp(eta);
    }
    return eta;
}

inline double link(Family f, double mu) {
    switch (f) {
        case Family::gaussian: return mu;
        case Family::binomial: return std::log(mu / (1.0 - mu));
        case Family::poisson: return std::log(mu);
    }
    return mu;
}

inline double variance(Family f, double mu) {
    switch (f) {
        case Family::gaussian: return 1.0;
        case Family::binomial: return mu * (1.0 - mu);
        case Family::poisson: return mu;
    }
    return 1.0;
}

inline double clamp_mu(Family f, double mu, bool* clamped) {
    switch (f) {
        case Family::gaussian:
            return mu;
        case Family::binomial:
            if (mu < mu_floor || mu > 1.0 - mu_floor) {
                if (clamped) *clamped = true;
                return std::min(std::max(mu, mu_floor), 1.0 - mu_floor);
            }
            return mu;
        case Family::poisson:
            if (mu < mu_floor) {
                if (clamped) *clamped = true;
                return mu_floor;
            }
            return mu;
    }
    return mu;
}

inline double unit_deviance(Family f, double y, double mu) {
    switch (f) {
        case Family::gaussian: {
            const double d = y - mu;
            return d * d;
        }
        case Family::binomial: {
            double dev = 0.0;
            if (y > 0.0) dev += y * std::log(y / mu);
            if (y < 1.0) dev += (1.0 - y) * std::log((1.0 - y) / (1.0 - mu));
            return 2.0 * dev;
        }
        case Family::poisson: {
            if (y > 0.0) return 2.0 * (y * std::log(y / mu) - (y - mu));
            return 2.0 * mu;
        }
    }
    return 0.0;
}

}  // namespace glm

// -2 (loglik(mu) - loglik(saturated)); the gaussian case is the residual
// sum of squares. Out-of-range mu is clamped toward the valid interior
// and flagged.
inline double deviance(Family family, const Vector& y, const Vector& mu, bool* clamped = nullptr) {
    if (y.size() != mu.size()) throw DataError("deviance: y and mu lengths differ");
    double total = 0.0;
    for (Index i = 0; i < y.size(); ++i)
        total += glm::unit_deviance(family, y(i), glm::clamp_mu(family, mu(i), clamped));
    return total;
}

struct GlmFit {
    Vector alpha;
    Vector beta;
    double intercept = 0.0;
    double deviance = 0.0;             // D(alpha, beta)
    double null_deviance = 0.0;        // D(0, 0), intercept only
    double alpha_zero_deviance = 0.0;  // D(0, beta) at the fitted beta and intercept
    int iterations = 0;
    bool converged = false;
    bool separation = false;
    bool mu_clamped = false;
};

namespace detail {

struct IrlsOptions {
    double rel_tol = 1e-8;
    int max_iterations = 100;
    bool freeze_alpha = false;  // fit with alpha fixed at zero (the r = 0 model)
};

inline Vector initial_eta(Family family, const Vector& y) {
    Vector eta(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        switch (family) {
            case Family::gaussian: eta(i) = y(i); break;
            case Family::binomial: eta(i) = glm::link(family, (y(i) + 0.5) / 2.0); break;
            case Family::poisson: eta(i) = glm::link(family, y(i) + 0.1); break;
        }
    }
    return eta;
}

}  // namespace detail

// Penalised IRLS for eta = b0 + S alpha + U beta with a ridge term on
// alpha only. Each iteration solves the weighted least-squares problem
// through an orthogonal decomposition of the row-scaled design with
// sqrt(lambda) ridge rows appended on the alpha block.
inline GlmFit irls_penalized(const Matrix& s, const Matrix& uhat, const Vector& y, Family family,
                             double lambda, const detail::IrlsOptions& opts = {}) {
    if (lambda < 0.0) throw DataError("irls_penalized: lambda must be nonnegative");
    const Index n = y.size();
    const Index q = opts.freeze_alpha ? 0 : s.cols();
    const Index p = uhat.cols();
    const Index dim = 1 + q + p;

    Matrix z_design(n, dim);
    z_design.col(0).setOnes();
    if (q > 0) z_design.middleCols(1, q) = s;
    z_design.rightCols(p) = uhat;

    const Index ridge_rows = lambda > 0.0 && q > 0 ? q : 0;
    Matrix augmented(n + ridge_rows, dim);
    Vector rhs(n + ridge_rows);
    augmented.bottomRows(ridge_rows).setZero();
    rhs.tail(ridge_rows).setZero();
    if (ridge_rows > 0) {
        const double sqrt_lambda = std::sqrt(lambda);
        for (Index j = 0; j < q; ++j) augmented(n + j, 1 + j) = sqrt_lambda;
    }

    GlmFit fit;
    Vector theta = Vector::Zero(dim);
    Vector eta = detail::initial_eta(family, y);
    Vector mu(n), weights(n), working(n);

    auto mu_from_eta = [&](const Vector& e, Vector& out) {
        for (Index i = 0; i < n; ++i)
            out(i) = glm::clamp_mu(family, glm::inverse_link(family, e(i)), &fit.mu_clamped);
    };
    mu_from_eta(eta, mu);
    double dev = deviance(family, y, mu, &fit.mu_clamped);
    double objective = dev;  // theta = 0, no penalty contribution yet
    int consecutive_increases = 0;

    for (int it = 1; it <= opts.max_iterations; ++it) {
        fit.iterations = it;
        for (Index i = 0; i < n; ++i) {
            const double v = std::max(glm::variance(family, mu(i)), 1e-10);
            weights(i) = v;
            working(i) = eta(i) + (y(i) - mu(i)) / v;
        }
        const Vector sqrt_w = weights.cwiseSqrt();
        augmented.topRows(n) = sqrt_w.asDiagonal() * z_design;
        rhs.head(n) = sqrt_w.asDiagonal() * working;

        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(augmented);
        cod.setThreshold(1e-8);
        Vector theta_new = cod.solve(rhs);

        Vector eta_new = z_design * theta_new;
        Vector mu_new(n);
        mu_from_eta(eta_new, mu_new);
        double dev_new = deviance(family, y, mu_new, &fit.mu_clamped);
        double objective_new = dev_new;
        if (q > 0) objective_new += lambda * theta_new.segment(1, q).squaredNorm();

        // Step halving toward the previous iterate if the penalised
        // objective went up.
        int halvings = 0;
        while (objective_new > objective && halvings < 30) {
            theta_new = 0.5 * (theta_new + theta);
            eta_new = z_design * theta_new;
            mu_from_eta(eta_new, mu_new);
            dev_new = deviance(family, y, mu_new, &fit.mu_clamped);
            objective_new = dev_new;
            if (q > 0) objective_new += lambda * theta_new.segment(1, q).squaredNorm();
            ++halvings;
        }
        if (objective_new > objective) {
            if (++consecutive_increases >= 2) {
                fit.converged = false;
                break;
            }
        } else {
            consecutive_increases = 0;
        }

        const double change = std::abs(dev_new - dev);
        theta = theta_new;
        eta = eta_new;
        mu = mu_new;
        dev = dev_new;
        objective = objective_new;

        if (family == Family::binomial && eta.cwiseAbs().maxCoeff() > 30.0)
            fit.separation = true;
        if (change < opts.rel_tol * (std::abs(dev) + 0.1)) {
            fit.converged = true;
            break;
        }
    }

    fit.intercept = theta(0);
    fit.alpha = opts.freeze_alpha ? Vector::Zero(s.cols()) : Vector(theta.segment(1, q));
    fit.beta = theta.tail(p);
    fit.deviance = dev;

    // D(0, 0): intercept-only model, whose canonical-link MLE is mu = mean(y).
    Vector mu_null = Vector::Constant(n, glm::clamp_mu(family, y.mean(), nullptr));
    fit.null_deviance = deviance(family, y, mu_null);

    // D(0, beta): plug in the fitted beta and intercept, zero out alpha.
    Vector eta_nosens = z_design.rightCols(p) * fit.beta;
    eta_nosens.array() += fit.intercept;
    Vector mu_nosens(n);
    for (Index i = 0; i < n; ++i)
        mu_nosens(i) = glm::clamp_mu(family, glm::inverse_link(family, eta_nosens(i)), nullptr);
    fit.alpha_zero_deviance = deviance(family, y, mu_nosens);
    return fit;
}

// Share of explained deviance attributable to the sensitive attributes:
//   (D(alpha, beta) - D(0, beta)) / (D(alpha, beta) - D(0, 0)).
// Both differences are nonpositive, so the ratio lands in [0, 1].
inline double deviance_ratio(const GlmFit& fit) {
    const double num = fit.deviance - fit.alpha_zero_deviance;
    const double den = fit.deviance - fit.null_deviance;
    if (den == 0.0) return 0.0;
    const double ratio = num / den;
    return std::min(std::max(ratio, 0.0), 1.0);
}

namespace detail {

inline void check_family_support(Family family, const Vector& y) {
    if (family == Family::binomial) {
        for (Index i = 0; i < y.size(); ++i)
            if (y(i) != 0.0 && y(i) != 1.0)
                throw DataError("binomial family requires a 0/1 response; found " +
                                std::to_string(y(i)));
    } else if (family == Family::poisson) {
        for (Index i = 0; i < y.size(); ++i)
            if (y(i) < 0.0 || std::abs(y(i) - std::round(y(i))) > 1e-9)
                throw DataError("poisson family requires nonnegative integer counts; found " +
                                std::to_string(y(i)));
    }
}

}  // namespace detail

// Fairness-bounded GLM: root-find the ridge penalty on alpha so the
// deviance share of S equals r when the constraint is active. The
// gaussian family reduces to the linear solver exactly.
inline FittedModel fit_fgrrm(const ModelMatrices& mm, const FairnessSpec& spec, Family family,
                             double lambda2 = 0.0) {
    if (family == Family::gaussian) return fit_frrm(mm, spec, lambda2);
    spec.validate();
    if (spec.definition != Definition::sp)
        throw DataError("only the statistical-parity deviance bound is defined for family " +
                        std::string(family_name(family)));
    if (lambda2 != 0.0)
        throw DataError("lambda2 is only supported for the gaussian family");
    detail::check_family_support(family, mm.y_raw);

    FittedModel model;
    model.spec = spec;
    model.family = family;
    model.lambda2 = 0.0;
    model.x_codec = mm.x_codec;
    model.s_codec = mm.s_codec;
    model.y_center = mm.y_center;

    const Matrix s = detail::reduce_if_needed(mm.S, model.s_rotation);
    const DecorrelatedDesign design = ols_decorrelate(s, mm.X);
    model.bhat = design.bhat;
    const Vector& y = mm.y_raw;

    auto finish = [&](const GlmFit& fit, double lambda_r, double achieved) {
        if (!fit.converged)
            throw SolverError("fit_fgrrm: IRLS failed to converge at lambda = " +
                              std::to_string(lambda_r));
        model.alpha = fit.alpha;
        model.beta = fit.beta;
        model.intercept = fit.intercept;
        model.lambda_r = lambda_r;
        model.achieved = achieved;
        model.deviance = fit.deviance;
        model.null_deviance = fit.null_deviance;
        model.alpha_zero_deviance = fit.alpha_zero_deviance;
        model.irls_iterations = fit.iterations;
        model.converged = fit.converged;
        model.mu_clamped = fit.mu_clamped;
        model.separation = fit.separation;
        Vector eta = s * fit.alpha + design.uhat * fit.beta;
        eta.array() += fit.intercept;
        model.fitted.resize(eta.size());
        for (Index i = 0; i < eta.size(); ++i)
            model.fitted(i) = glm::inverse_link(family, eta(i));
        model.residuals = y - model.fitted;
        model.r2 = fit.null_deviance > 0.0 ? 1.0 - fit.deviance / fit.null_deviance : 0.0;
        return model;
    };

    if (spec.r == 0.0) {
        detail::IrlsOptions opts;
        opts.freeze_alpha = true;
        const GlmFit fit = irls_penalized(s, design.uhat, y, family, 0.0, opts);
        return finish(fit, std::numeric_limits<double>::infinity(), 0.0);
    }

    const GlmFit unpenalized = irls_penalized(s, design.uhat, y, family, 0.0);
    const double ratio0 = deviance_ratio(unpenalized);
    if (spec.r >= 1.0 || ratio0 <= spec.r) return finish(unpenalized, 0.0, ratio0);

    auto ratio_at = [&](double lambda) {
        const GlmFit fit = irls_penalized(s, design.uhat, y, family, lambda);
        if (!fit.converged)
            throw SolverError("fit_fgrrm: IRLS failed to converge while probing lambda = " +
                              std::to_string(lambda));
        return deviance_ratio(fit);
    };

    Bracket bracket;
    bracket.target = spec.r;
    bracket.lo = 0.0;
    bracket.hi = static_cast<double>(y.size());
    const double cap = static_cast<double>(y.size()) * 1152921504606846976.0;  // n * 2^60
    double prev_ratio = ratio0;
    double hi_ratio = ratio_at(bracket.hi);
    while (hi_ratio > spec.r) {
        if (hi_ratio > prev_ratio + 1e-9)
            throw SolverError("fit_fgrrm: deviance ratio is not monotone on the bracket (" +
                              std::to_string(prev_ratio) + " -> " + std::to_string(hi_ratio) +
                              " at lambda = " + std::to_string(bracket.hi) + ")");
        prev_ratio = hi_ratio;
        bracket.hi *= 2.0;
        if (bracket.hi > cap)
            throw SolverError("fit_fgrrm: deviance ratio never drops below r on [0, n*2^60]");
        hi_ratio = ratio_at(bracket.hi);
    }

    const RootResult root = solve_lambda(ratio_at, bracket, 1e-7);
    const GlmFit fit = irls_penalized(s, design.uhat, y, family, root.lambda);
    return finish(fit, root.lambda, deviance_ratio(fit));
}

}  // namespace fairfit

#endif
