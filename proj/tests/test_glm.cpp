#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "fairfit/decorrelate.hpp"
#include "fairfit/frrm.hpp"
#include "fairfit/glm.hpp"
#include "fairfit/synthetic.hpp"

using namespace fairfit;

namespace {

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
    return m;
}

Matrix centered(Matrix m) {
    for (Index j = 0; j < m.cols(); ++j) m.col(j).array() -= m.col(j).mean();
    return m;
}

FairnessSpec sp_spec(double r) {
    FairnessSpec spec;
    spec.definition = Definition::sp;
    spec.r = r;
    return spec;
}

// Independent penalized objective for the oracle: deviance of the
// logistic model plus lambda ||alpha||^2, written directly from the
// log-likelihood.
double logistic_objective(const Vector& theta, const Matrix& z, const Vector& y, Index q,
                          double lambda) {
    const Vector eta = z * theta;
    double loglik = 0.0;
    for (Index i = 0; i < y.size(); ++i)
        loglik += y(i) * eta(i) - std::log(1.0 + std::exp(eta(i)));
    return -2.0 * loglik + lambda * theta.segment(1, q).squaredNorm();
}

// Newton iteration with finite-difference gradient and Hessian; slow
// but entirely independent of the IRLS implementation.
Vector fd_newton_minimize(const std::function<double(const Vector&)>& f, Vector theta) {
    const Index d = theta.size();
    const double h = 1e-5;
    for (int it = 0; it < 60; ++it) {
        Vector grad(d);
        Matrix hess(d, d);
        for (Index i = 0; i < d; ++i) {
            Vector up = theta, dn = theta;
            up(i) += h;
            dn(i) -= h;
            grad(i) = (f(up) - f(dn)) / (2.0 * h);
        }
        for (Index i = 0; i < d; ++i) {
            for (Index j = i; j < d; ++j) {
                Vector pp = theta, pm = theta, mp = theta, mm = theta;
                pp(i) += h; pp(j) += h;
                pm(i) += h; pm(j) -= h;
                mp(i) -= h; mp(j) += h;
                mm(i) -= h; mm(j) -= h;
                hess(i, j) = hess(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
            }
        }
        const Vector step = hess.ldlt().solve(grad);
        theta -= step;
        if (step.cwiseAbs().maxCoeff() < 1e-10) break;
    }
    return theta;
}

}  // namespace

TEST(Deviance, SaturatedGaussianIsZero) {
    Vector y(3);
    y << 1.0, -2.0, 0.5;
    EXPECT_DOUBLE_EQ(deviance(Family::gaussian, y, y), 0.0);
}

TEST(Deviance, SinglePointBinomialAnalytic) {
    Vector y(1), mu(1);
    y << 1.0;
    mu << 0.5;
    EXPECT_NEAR(deviance(Family::binomial, y, mu), 2.0 * std::log(2.0), 1e-14);
}

TEST(Deviance, MatchesLogLikelihoodOracle) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ud(0.05, 0.95);
    const Index n = 40;

    {  // binomial: saturated loglik is 0 for a 0/1 response
        Vector y(n), mu(n);
        for (Index i = 0; i < n; ++i) {
            y(i) = rng() % 2 ? 1.0 : 0.0;
            mu(i) = ud(rng);
        }
        double loglik = 0.0;
        for (Index i = 0; i < n; ++i)
            loglik += y(i) * std::log(mu(i)) + (1.0 - y(i)) * std::log(1.0 - mu(i));
        EXPECT_NEAR(deviance(Family::binomial, y, mu), -2.0 * loglik, 1e-10);
    }
    {  // poisson: compare against -2 (loglik(mu) - loglik(y))
        Vector y(n), mu(n);
        for (Index i = 0; i < n; ++i) {
            y(i) = static_cast<double>(rng() % 6);
            mu(i) = ud(rng) * 5.0;
        }
        auto loglik = [&](const Vector& m) {
            double total = 0.0;
            for (Index i = 0; i < n; ++i) {
                const double mi = std::max(m(i), 1e-300);
                total += y(i) * std::log(mi) - mi - std::lgamma(y(i) + 1.0);
            }
            return total;
        };
        Vector sat = y;
        for (Index i = 0; i < n; ++i) sat(i) = std::max(sat(i), 1e-300);
        EXPECT_NEAR(deviance(Family::poisson, y, mu), -2.0 * (loglik(mu) - loglik(sat)), 1e-9);
    }
}

TEST(Deviance, BoundaryMuIsClampedAndFlagged) {
    Vector y(2), mu(2);
    y << 1.0, 0.0;
    mu << 1.0, 0.0;  // out of the open interval
    bool clamped = false;
    const double d = deviance(Family::binomial, y, mu, &clamped);
    EXPECT_TRUE(clamped);
    EXPECT_TRUE(std::isfinite(d));
}

TEST(IrlsPenalized, GaussianEqualsClosedForm) {
    const ModelMatrices mm = encode(synth_example(1, 300, 2), synth_schema());
    const DecorrelatedDesign d = ols_decorrelate(mm.S, mm.X);
    for (double lambda : {0.0, 3.0, 57.0, 1e4}) {
        const GlmFit fit = irls_penalized(mm.S, d.uhat, mm.y, Family::gaussian, lambda);
        const Vector alpha_ref = alpha_ridge(mm.S, mm.y, lambda);
        const Vector beta_ref = beta_closed_form(d.uhat, mm.y, 0.0);
        EXPECT_LT((fit.alpha - alpha_ref).cwiseAbs().maxCoeff(), 1e-8) << "lambda " << lambda;
        EXPECT_LT((fit.beta - beta_ref).cwiseAbs().maxCoeff(), 1e-8) << "lambda " << lambda;
        EXPECT_LT(std::abs(fit.intercept), 1e-10);
    }
}

TEST(IrlsPenalized, HugeLambdaMatchesAlphaFreeLogisticFit) {
    const ModelMatrices mm = encode(synth_example(2, 400, 3), synth_schema());
    const DecorrelatedDesign d = ols_decorrelate(mm.S, mm.X);
    const GlmFit big = irls_penalized(mm.S, d.uhat, mm.y_raw, Family::binomial, 1e14);
    detail::IrlsOptions frozen;
    frozen.freeze_alpha = true;
    const GlmFit no_alpha = irls_penalized(mm.S, d.uhat, mm.y_raw, Family::binomial, 0.0, frozen);
    EXPECT_LT(big.alpha.cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((big.beta - no_alpha.beta).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(big.intercept, no_alpha.intercept, 1e-6);
}

TEST(IrlsPenalized, MatchesIndependentNewtonOracle) {
    std::mt19937_64 rng(4);
    const Index n = 200, q = 2, p = 2;
    const Matrix s = centered(random_matrix(n, q, rng));
    const Matrix x = centered(random_matrix(n, p, rng));
    const DecorrelatedDesign d = ols_decorrelate(s, x);
    Vector y(n);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
        const double eta = 0.4 + 0.8 * s(i, 0) - 0.5 * s(i, 1) + 0.9 * d.uhat(i, 0);
        y(i) = ud(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    }
    const double lambda = 3.0;
    const GlmFit fit = irls_penalized(s, d.uhat, y, Family::binomial, lambda);

    Matrix z(n, 1 + q + p);
    z.col(0).setOnes();
    z.middleCols(1, q) = s;
    z.rightCols(p) = d.uhat;
    const Vector oracle = fd_newton_minimize(
        [&](const Vector& t) { return logistic_objective(t, z, y, q, lambda); },
        Vector::Zero(1 + q + p));

    Vector ours(1 + q + p);
    ours(0) = fit.intercept;
    ours.segment(1, q) = fit.alpha;
    ours.tail(p) = fit.beta;
    EXPECT_LT((ours - oracle).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(DevianceRatio, TrivialEndpoints) {
    const ModelMatrices mm = encode(synth_example(2, 300, 5), synth_schema());
    const DecorrelatedDesign d = ols_decorrelate(mm.S, mm.X);

    detail::IrlsOptions frozen;
    frozen.freeze_alpha = true;
    const GlmFit no_alpha = irls_penalized(mm.S, d.uhat, mm.y_raw, Family::binomial, 0.0, frozen);
    EXPECT_DOUBLE_EQ(deviance_ratio(no_alpha), 0.0);

    // no predictor block at all: D(0, beta) = D(0, 0), so the ratio is 1
    const Matrix empty_u(mm.S.rows(), 0);
    const GlmFit only_alpha = irls_penalized(mm.S, empty_u, mm.y_raw, Family::binomial, 0.0);
    EXPECT_GT(only_alpha.alpha.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NEAR(deviance_ratio(only_alpha), 1.0, 1e-10);
}

TEST(DevianceRatio, GaussianUnpenalizedEqualsR2Sp) {
    const ModelMatrices mm = encode(synth_example(1, 500, 6), synth_schema());
    const DecorrelatedDesign d = ols_decorrelate(mm.S, mm.X);
    const GlmFit fit = irls_penalized(mm.S, d.uhat, mm.y, Family::gaussian, 0.0);
    const double expected = r2_sp(fit.alpha, fit.beta, mm.S, d.uhat);
    EXPECT_NEAR(deviance_ratio(fit), expected, 1e-8);
}

TEST(DevianceRatio, OrderingHoldsOnConvergedFits) {
    const ModelMatrices mm = encode(synth_example(2, 500, 7), synth_schema());
    const DecorrelatedDesign d = ols_decorrelate(mm.S, mm.X);
    for (double lambda : {0.0, 10.0, 300.0, 1e5}) {
        const GlmFit fit = irls_penalized(mm.S, d.uhat, mm.y_raw, Family::binomial, lambda);
        ASSERT_TRUE(fit.converged);
        EXPECT_LE(fit.deviance, fit.alpha_zero_deviance + 1e-10);
        EXPECT_LE(fit.alpha_zero_deviance, fit.null_deviance + 1e-10);
        const double ratio = deviance_ratio(fit);
        EXPECT_GE(ratio, 0.0);
        EXPECT_LE(ratio, 1.0);
    }
}

TEST(FitFgrrm, ZeroBoundFreezesAlpha) {
    const ModelMatrices mm = encode(synth_example(2, 500, 8), synth_schema());
    const FittedModel model = fit_fgrrm(mm, sp_spec(0.0), Family::binomial);
    EXPECT_EQ(model.alpha.norm(), 0.0);
    EXPECT_DOUBLE_EQ(model.achieved, 0.0);
    EXPECT_TRUE(std::isinf(model.lambda_r));
}

TEST(FitFgrrm, BoundOneIsUnpenalized) {
    const ModelMatrices mm = encode(synth_example(2, 500, 9), synth_schema());
    const FittedModel free = fit_fgrrm(mm, sp_spec(1.0), Family::binomial);
    EXPECT_DOUBLE_EQ(free.lambda_r, 0.0);
    const DecorrelatedDesign d = ols_decorrelate(mm.S, mm.X);
    const GlmFit direct = irls_penalized(mm.S, d.uhat, mm.y_raw, Family::binomial, 0.0);
    EXPECT_LT((free.alpha - direct.alpha).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitFgrrm, ActiveConstraintHitsDevianceShare) {
    const ModelMatrices mm = encode(synth_example(2, 1000, 10), synth_schema());
    for (double r : {0.01, 0.05, 0.10}) {
        const FittedModel model = fit_fgrrm(mm, sp_spec(r), Family::binomial);
        ASSERT_GT(model.lambda_r, 0.0) << "r = " << r;
        EXPECT_NEAR(model.achieved, r, 1e-6) << "r = " << r;
    }
}

TEST(FitFgrrm, SweepPathsAndScaleFactorEffect) {
    const ModelMatrices mm = encode(synth_example(2, 1000, 11), synth_schema());
    const std::vector<double> grid = {0.0, 0.05, 0.1, 0.2, 0.5, 1.0};
    std::vector<FittedModel> fits;
    for (double r : grid) fits.push_back(fit_fgrrm(mm, sp_spec(r), Family::binomial));

    // alpha grows from zero toward the unpenalised fit
    EXPECT_EQ(fits.front().alpha.norm(), 0.0);
    for (std::size_t k = 1; k < fits.size(); ++k)
        EXPECT_GE(fits[k].alpha.norm(), fits[k - 1].alpha.norm() - 1e-10);
    EXPECT_LT((fits.back().alpha -
               fit_fgrrm(mm, sp_spec(1.0), Family::binomial).alpha).cwiseAbs().maxCoeff(), 1e-12);

    // beta is not constant across r (fixed scale factor), and moves
    // monotonically on the grid
    EXPECT_GT((fits.front().beta - fits.back().beta).cwiseAbs().maxCoeff(), 1e-4);
    for (Index j = 0; j < fits.front().beta.size(); ++j) {
        for (std::size_t k = 1; k < fits.size(); ++k) {
            const double lo = std::min(fits.front().beta(j), fits.back().beta(j)) - 1e-8;
            const double hi = std::max(fits.front().beta(j), fits.back().beta(j)) + 1e-8;
            EXPECT_GE(fits[k].beta(j), lo);
            EXPECT_LE(fits[k].beta(j), hi);
        }
    }
}

TEST(FitFgrrm, GaussianFamilyDelegatesToFrrm) {
    const ModelMatrices mm = encode(synth_example(1, 500, 12), synth_schema());
    for (double r : {0.0, 0.05, 0.5, 1.0}) {
        const FittedModel a = fit_fgrrm(mm, sp_spec(r), Family::gaussian, 1.5);
        const FittedModel b = fit_frrm(mm, sp_spec(r), 1.5);
        EXPECT_TRUE((a.alpha.array() == b.alpha.array()).all());
        EXPECT_TRUE((a.beta.array() == b.beta.array()).all());
        EXPECT_EQ(a.lambda_r, b.lambda_r);
    }
}

TEST(FitFgrrm, StationarityAgainstFiniteDifferences) {
    const ModelMatrices mm = encode(synth_example(2, 600, 13), synth_schema());
    const FittedModel model = fit_fgrrm(mm, sp_spec(0.05), Family::binomial);
    const DecorrelatedDesign d = ols_decorrelate(mm.S, mm.X);

    Matrix z(mm.S.rows(), 1 + mm.S.cols() + d.uhat.cols());
    z.col(0).setOnes();
    z.middleCols(1, mm.S.cols()) = mm.S;
    z.rightCols(d.uhat.cols()) = d.uhat;
    Vector theta(z.cols());
    theta(0) = model.intercept;
    theta.segment(1, mm.S.cols()) = model.alpha;
    theta.tail(d.uhat.cols()) = model.beta;

    ASSERT_TRUE(std::isfinite(model.lambda_r));
    auto objective = [&](const Vector& t) {
        Vector mu(z.rows());
        const Vector eta = z * t;
        for (Index i = 0; i < z.rows(); ++i) mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
        return deviance(Family::binomial, mm.y_raw, mu) +
               model.lambda_r * t.segment(1, mm.S.cols()).squaredNorm();
    };
    const double h = 1e-6;
    const double scale = 1e-6 * (1.0 + std::abs(model.deviance));
    for (Index i = 0; i < theta.size(); ++i) {
        Vector up = theta, dn = theta;
        up(i) += h;
        dn(i) -= h;
        const double grad = (objective(up) - objective(dn)) / (2.0 * h);
        EXPECT_LT(std::abs(grad), scale) << "component " << i;
    }
}

TEST(FitFgrrm, FamilySupportValidation) {
    const ModelMatrices mm = encode(synth_example(1, 200, 14), synth_schema());
    EXPECT_THROW(fit_fgrrm(mm, sp_spec(0.1), Family::binomial), DataError);  // y not 0/1
    EXPECT_THROW(fit_fgrrm(mm, sp_spec(0.1), Family::poisson), DataError);   // y not counts

    const ModelMatrices mm2 = encode(synth_example(2, 200, 15), synth_schema());
    FairnessSpec eo;
    eo.definition = Definition::eo;
    eo.r = 0.1;
    EXPECT_THROW(fit_fgrrm(mm2, eo, Family::binomial), DataError);
    EXPECT_THROW(fit_fgrrm(mm2, sp_spec(0.1), Family::binomial, 1.0), DataError);  // lambda2
}

TEST(FitFgrrm, PoissonFamilyWorks) {
    std::mt19937_64 rng(16);
    const Index n = 400;
    const Matrix s = centered(random_matrix(n, 2, rng));
    const Matrix x = centered(random_matrix(n, 2, rng));
    std::poisson_distribution<int> pois;
    RawDataset raw;
    raw.n = n;
    auto push = [&](const std::string& name, const Vector& v) {
        RawColumn c;
        c.name = name;
        c.values.assign(v.data(), v.data() + n);
        raw.columns.push_back(std::move(c));
    };
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
        const double eta = 0.5 + 0.3 * s(i, 0) + 0.2 * s(i, 1) + 0.25 * x(i, 0);
        y(i) = static_cast<double>(
            pois(rng, std::poisson_distribution<int>::param_type(std::exp(eta))));
    }
    push("y", y);
    push("X1", x.col(0));
    push("X2", x.col(1));
    push("S1", s.col(0));
    push("S2", s.col(1));
    Schema schema;
    schema.response = "y";
    schema.sensitive = {"S1", "S2"};
    schema.predictors = {"X1", "X2"};
    const ModelMatrices mm = encode(raw, schema);

    const FittedModel free = fit_fgrrm(mm, sp_spec(1.0), Family::poisson);
    ASSERT_TRUE(free.converged);
    const FittedModel bounded = fit_fgrrm(mm, sp_spec(0.02), Family::poisson);
    if (bounded.lambda_r > 0.0) EXPECT_NEAR(bounded.achieved, 0.02, 1e-6);
    EXPECT_LT(bounded.alpha.norm(), free.alpha.norm());
}
