#include <gtest/gtest.h>

#include <random>

#include "fairfit/decorrelate.hpp"
#include "fairfit/fairness.hpp"
#include "fairfit/model_matrix.hpp"
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

// Pairwise double sum over unordered pairs; the independent oracle for
// the Laplacian quadratic form.
double naive_if_penalty(const Vector& alpha, const Vector& y, const Matrix& s,
                        IfDistance distance) {
    double total = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        for (Index j = i + 1; j < y.size(); ++j) {
            const double d = distance == IfDistance::abs_diff
                                 ? std::abs(y(i) - y(j))
                                 : (y(i) - y(j)) * (y(i) - y(j));
            const double t = s.row(i).dot(alpha) - s.row(j).dot(alpha);
            total += d * t * t;
        }
    }
    return total;
}

}  // namespace

TEST(R2Sp, ZeroAlphaIsFair) {
    std::mt19937_64 rng(1);
    const Matrix s = centered(random_matrix(30, 2, rng));
    const Matrix u = centered(random_matrix(30, 3, rng));
    Vector beta(3);
    beta << 1, -2, 0.5;
    EXPECT_DOUBLE_EQ(r2_sp(Vector::Zero(2), beta, s, u), 0.0);
}

TEST(R2Sp, ZeroBetaIsMaximallyUnfair) {
    std::mt19937_64 rng(2);
    const Matrix s = centered(random_matrix(30, 2, rng));
    const Matrix u = centered(random_matrix(30, 3, rng));
    Vector alpha(2);
    alpha << 0.3, 1.1;
    EXPECT_DOUBLE_EQ(r2_sp(alpha, Vector::Zero(3), s, u), 1.0);
}

TEST(R2Sp, BothZeroThrows) {
    std::mt19937_64 rng(3);
    const Matrix s = centered(random_matrix(10, 1, rng));
    const Matrix u = centered(random_matrix(10, 1, rng));
    EXPECT_THROW(r2_sp(Vector::Zero(1), Vector::Zero(1), s, u), SolverError);
}

TEST(R2Sp, ScaleInvariant) {
    std::mt19937_64 rng(4);
    const Matrix s = centered(random_matrix(40, 3, rng));
    const Matrix u = centered(random_matrix(40, 2, rng));
    const Vector alpha = random_matrix(3, 1, rng);
    const Vector beta = random_matrix(2, 1, rng);
    const double base = r2_sp(alpha, beta, s, u);
    for (double k : {0.5, 3.0, 1e4}) {
        EXPECT_NEAR(r2_sp(k * alpha, k * beta, s, u), base, 1e-12);
    }
}

TEST(R2Eo, OrthogonalPredictionsScoreZero) {
    std::mt19937_64 rng(5);
    const Matrix s = centered(random_matrix(60, 2, rng));
    // project both y and yhat out of the span of S
    const Matrix proj = s * (s.transpose() * s).inverse() * s.transpose();
    Vector y = centered(random_matrix(60, 1, rng));
    y -= proj * y;
    Vector yhat = centered(random_matrix(60, 1, rng));
    yhat -= proj * yhat;
    EXPECT_NEAR(r2_eo(yhat, y, s), 0.0, 1e-16);
}

TEST(R2Eo, PureSensitivePredictionsScoreOne) {
    std::mt19937_64 rng(6);
    const Matrix s = centered(random_matrix(60, 2, rng));
    const Matrix proj = s * (s.transpose() * s).inverse() * s.transpose();
    Vector y = centered(random_matrix(60, 1, rng));
    y -= proj * y;  // y orthogonal to S in sample
    Vector phi0(2);
    phi0 << 1.5, -0.5;
    const Vector yhat = s * phi0;
    EXPECT_NEAR(r2_eo(yhat, y, s), 1.0, 1e-12);
}

TEST(R2Eo, CollinearAuxiliaryDesignThrows) {
    std::mt19937_64 rng(7);
    Matrix s = centered(random_matrix(30, 1, rng));
    const Vector y = s.col(0);  // y identical to the sensitive column
    const Vector yhat = centered(random_matrix(30, 1, rng));
    EXPECT_THROW(r2_eo(yhat, y, s), SolverError);
}

TEST(LaplacianForm, ConstantOutcomeGivesZeroMatrix) {
    std::mt19937_64 rng(8);
    const Matrix s = centered(random_matrix(20, 2, rng));
    const Vector y = Vector::Constant(20, 3.25);
    const IfCache cache = laplacian_form(y, s);
    EXPECT_LT(cache.m.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LaplacianForm, MatchesNaiveDoubleLoop) {
    std::mt19937_64 rng(9);
    const Matrix s = centered(random_matrix(50, 3, rng));
    const Vector y = random_matrix(50, 1, rng);
    const IfCache cache = laplacian_form(y, s);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector alpha = random_matrix(3, 1, rng);
        const double expected = naive_if_penalty(alpha, y, s, IfDistance::abs_diff);
        ASSERT_LT(std::abs(cache.quad(alpha) - expected) / expected, 1e-10);
    }
}

TEST(LaplacianForm, EqualOutcomePairsContributeNothing) {
    Matrix s(4, 1);
    s << 1, -1, 2, -2;
    Vector y(4);
    y << 5, 5, 5, 7;  // only pairs with row 3 carry weight
    const IfCache cache = laplacian_form(y, s);
    Vector alpha(1);
    alpha << 1.0;
    // only pairs (i, 3) have d > 0: |5-7| [(1+2)^2 + (-1+2)^2 + (2+2)^2]
    EXPECT_NEAR(cache.quad(alpha), 2.0 * (9.0 + 1.0 + 16.0), 1e-12);
}

TEST(LaplacianForm, SubsamplingGateAndDeterminism) {
    std::mt19937_64 rng(10);
    const Matrix s = centered(random_matrix(6000, 2, rng));
    const Vector y = random_matrix(6000, 1, rng);
    EXPECT_THROW(laplacian_form(y, s), DataError);
    IfOptions opts;
    opts.allow_subsample = true;
    opts.subsample_pairs = 20000;
    const IfCache a = laplacian_form(y, s, IfDistance::abs_diff, opts);
    const IfCache b = laplacian_form(y, s, IfDistance::abs_diff, opts);
    EXPECT_TRUE(a.subsampled);
    EXPECT_TRUE((a.m.array() == b.m.array()).all());
    EXPECT_GT(a.m.trace(), 0.0);
}

TEST(DIf, NormalisationAndScaling) {
    std::mt19937_64 rng(11);
    const Matrix s = centered(random_matrix(40, 2, rng));
    const Vector y = random_matrix(40, 1, rng);
    IfCache cache = laplacian_form(y, s);
    const Vector alpha_ols = random_matrix(2, 1, rng);
    cache.f_ols = cache.quad(alpha_ols);
    EXPECT_NEAR(d_if(alpha_ols, alpha_ols, cache), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(d_if(Vector::Zero(2), alpha_ols, cache), 0.0);
    EXPECT_NEAR(d_if(0.5 * alpha_ols, alpha_ols, cache), 0.25, 1e-12);
}

TEST(DIf, InvariantToDistanceRescaling) {
    std::mt19937_64 rng(12);
    const Matrix s = centered(random_matrix(35, 2, rng));
    const Vector y = random_matrix(35, 1, rng);
    // d(k y_i, k y_j) = k d(y_i, y_j) for the absolute difference
    const IfCache cache1 = laplacian_form(y, s);
    const IfCache cache3 = laplacian_form(3.0 * y, s);
    const Vector alpha = random_matrix(2, 1, rng);
    const Vector alpha_ols = random_matrix(2, 1, rng);
    EXPECT_NEAR(d_if(alpha, alpha_ols, cache1), d_if(alpha, alpha_ols, cache3), 1e-12);
}

TEST(DIf, ZeroNormaliserThrows) {
    IfCache cache;
    cache.m = Matrix::Zero(2, 2);
    Vector alpha(2);
    alpha << 1, 2;
    EXPECT_THROW(d_if(alpha, alpha, cache), SolverError);
}

TEST(Composite, MaxAndConvex) {
    FairnessSpec spec;
    spec.definition = Definition::composite;
    spec.combine = Combine::max_of;
    EXPECT_DOUBLE_EQ(composite(spec, 0.3, 0.1), 0.3);

    spec.combine = Combine::convex;
    spec.w = 0.5;
    EXPECT_DOUBLE_EQ(composite(spec, 0.2, 0.4), 0.3);

    spec.w = 1.0 - 1e-12;
    EXPECT_NEAR(composite(spec, 0.2, 0.4), 0.2, 1e-11);
}

TEST(FairnessSpec, Validation) {
    FairnessSpec spec;
    spec.r = 1.5;
    EXPECT_THROW(spec.validate(), DataError);
    spec.r = 0.5;
    spec.definition = Definition::composite;
    spec.combine = Combine::convex;
    spec.w = 1.0;
    EXPECT_THROW(spec.validate(), DataError);
    spec.w = 0.5;
    EXPECT_NO_THROW(spec.validate());
}
