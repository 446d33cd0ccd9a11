#include <gtest/gtest.h>

#include <random>

#include "fairfit/rootfind.hpp"
#include "fairfit/types.hpp"

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

// alpha(l)^T VAR(S) alpha(l) from the spectrum; the function the SP
// bracket is built for.
double sp_quadform(const Vector& evals, const Vector& w, Index n, double lambda) {
    return (evals.array() * w.array().square() / (evals.array() + lambda).square()).sum() /
           static_cast<double>(n);
}

}  // namespace

TEST(SolveLambda, LinearFunction) {
    Bracket bracket;
    bracket.lo = 0.0;
    bracket.hi = 2.0;
    bracket.target = 0.5;
    const RootResult root = solve_lambda([](double x) { return 1.0 - x; }, bracket, 1e-12);
    EXPECT_NEAR(root.lambda, 0.5, 1e-10);
}

TEST(SolveLambda, TargetAboveValueAtZeroReturnsZero) {
    Bracket bracket;
    bracket.lo = 0.0;
    bracket.hi = 10.0;
    bracket.target = 5.0;
    const RootResult root = solve_lambda([](double x) { return 1.0 / (1.0 + x); }, bracket, 1e-10);
    EXPECT_DOUBLE_EQ(root.lambda, 0.0);
}

TEST(SolveLambda, NoSignChangeThrows) {
    Bracket bracket;
    bracket.lo = 1.0;
    bracket.hi = 2.0;
    bracket.target = 10.0;
    EXPECT_THROW(solve_lambda([](double x) { return 1.0 / x; }, bracket, 1e-10), SolverError);
    bracket.target = 0.1;  // function stays above the target on [1, 2]
    EXPECT_THROW(solve_lambda([](double x) { return 1.0 / x; }, bracket, 1e-10), SolverError);
}

TEST(LambdaBracket, CollapsesToExactRootWhenEigenvaluesEqual) {
    std::mt19937_64 rng(1);
    const Index n = 200, q = 3;
    Eigen::HouseholderQR<Matrix> qr(random_matrix(n, q, rng));
    const Matrix s = (qr.householderQ() * Matrix::Identity(n, q)) *
                     std::sqrt(static_cast<double>(n));
    const Vector y = random_matrix(n, 1, rng);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
    const Vector w = eig.eigenvectors().transpose() * (s.transpose() * y);
    const double at_zero = sp_quadform(eig.eigenvalues(), w, n, 0.0);
    const double c = 0.25 * at_zero;
    const Bracket bracket = lambda_bracket_from_spectrum(eig.eigenvalues(), w, n, c);
    EXPECT_NEAR(bracket.lo, bracket.hi, 1e-6 * std::max(1.0, bracket.hi));
    EXPECT_NEAR(sp_quadform(eig.eigenvalues(), w, n, bracket.lo), c, 1e-8 * c);
}

TEST(LambdaBracket, ContainsRootOnRandomInstances) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> qd(1, 5);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    for (int rep = 0; rep < 100; ++rep) {
        const Index n = 80;
        const Index q = qd(rng);
        const Matrix s = centered(random_matrix(n, q, rng));
        const Vector y = random_matrix(n, 1, rng);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
        const Vector w = eig.eigenvectors().transpose() * (s.transpose() * y);
        const double at_zero = sp_quadform(eig.eigenvalues(), w, n, 0.0);
        const double c = frac(rng) * at_zero;

        const Bracket bracket = lambda_bracket_from_spectrum(eig.eigenvalues(), w, n, c);
        const RootResult root = solve_lambda(
            [&](double l) { return sp_quadform(eig.eigenvalues(), w, n, l); }, bracket, 1e-10);
        ASSERT_GE(root.lambda, bracket.lo) << "instance " << rep;
        ASSERT_LE(root.lambda, bracket.hi) << "instance " << rep;
        ASSERT_NEAR(sp_quadform(eig.eigenvalues(), w, n, root.lambda), c,
                    1e-8 * std::max(1.0, c));
    }
}

TEST(LambdaBracket, TargetEqualToValueAtZeroKeepsZeroInside) {
    std::mt19937_64 rng(3);
    const Matrix s = centered(random_matrix(50, 2, rng));
    const Vector y = random_matrix(50, 1, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
    const Vector w = eig.eigenvectors().transpose() * (s.transpose() * y);
    const double at_zero = sp_quadform(eig.eigenvalues(), w, 50, 0.0);
    const Bracket bracket = lambda_bracket_from_spectrum(eig.eigenvalues(), w, 50, at_zero);
    EXPECT_DOUBLE_EQ(bracket.lo, 0.0);
    EXPECT_GE(bracket.hi, 0.0);
}

TEST(LambdaBracket, InactiveConstraintThrows) {
    std::mt19937_64 rng(4);
    const Matrix s = centered(random_matrix(50, 2, rng));
    const Vector y = random_matrix(50, 1, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
    const Vector w = eig.eigenvectors().transpose() * (s.transpose() * y);
    const double at_zero = sp_quadform(eig.eigenvalues(), w, 50, 0.0);
    EXPECT_THROW(lambda_bracket_from_spectrum(eig.eigenvalues(), w, 50, 2.0 * at_zero),
                 SolverError);
}

TEST(LambdaBracket, MatrixOverloadAgrees) {
    std::mt19937_64 rng(5);
    const Matrix s = centered(random_matrix(60, 3, rng));
    const Vector y = random_matrix(60, 1, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
    const Vector w = eig.eigenvectors().transpose() * (s.transpose() * y);
    const double c = 0.5 * sp_quadform(eig.eigenvalues(), w, 60, 0.0);
    const Bracket a = lambda_bracket(s, y, c);
    const Bracket b = lambda_bracket_from_spectrum(eig.eigenvalues(), w, 60, c);
    EXPECT_NEAR(a.lo, b.lo, 1e-9 * std::max(1.0, b.lo));
    EXPECT_NEAR(a.hi, b.hi, 1e-9 * std::max(1.0, b.hi));
    EXPECT_DOUBLE_EQ(a.d, b.d);
}
