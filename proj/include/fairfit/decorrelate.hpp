#ifndef FAIRFIT_DECORRELATE_HPP
#define FAIRFIT_DECORRELATE_HPP

#include <string>

#include "fairfit/types.hpp"

namespace fairfit {

// Auxiliary regression of the predictors on the sensitive attributes.
// Uhat = X - S * bhat is orthogonal to S by construction; when S had to
// be replaced by principal-component scores, `rotation` maps centred S
// columns onto the reduced space (identity otherwise).
struct DecorrelatedDesign {
    Matrix bhat;      // q x p
    Matrix uhat;      // n x p
    Index s_rank = 0;
    Matrix rotation;  // q_original x q

    double max_abs_cross(const Matrix& s) const {
        if (uhat.size() == 0) return 0.0;
        return (s.transpose() * uhat).cwiseAbs().maxCoeff() / static_cast<double>(uhat.rows());
    }
};

// Least squares of each X column on S via complete orthogonal
// decomposition; singular values below 1e-8 of the largest are treated
// as zero. A rank-deficient S is an error so the caller can fall back
// to pca_reduce.
inline DecorrelatedDesign ols_decorrelate(const Matrix& s, const Matrix& x) {
    if (s.rows() != x.rows()) throw DataError("ols_decorrelate: S and X row counts differ");
    if (s.rows() <= s.cols()) throw DataError("ols_decorrelate: need n > q");

    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(s);
    cod.setThreshold(1e-8);
    if (cod.rank() < s.cols())
        throw SolverError("sensitive block is rank deficient (rank " + std::to_string(cod.rank()) +
                          " of " + std::to_string(s.cols()) + "); reduce it with pca_reduce");

    DecorrelatedDesign out;
    out.bhat = cod.solve(x);
    out.uhat = x - s * out.bhat;
    out.s_rank = s.cols();
    out.rotation = Matrix::Identity(s.cols(), s.cols());
    return out;
}

// Principal-component scores of S keeping eigenvalues above
// tol * (largest eigenvalue). The returned scores have orthogonal
// columns; the rotation applied is also returned for reuse on new data.
inline Matrix pca_reduce(const Matrix& s, double tol, Matrix* rotation_out = nullptr) {
    if (s.cols() < 1) throw DataError("pca_reduce: empty matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
    const Vector& evals = eig.eigenvalues();  // ascending
    const double cutoff = tol * evals(evals.size() - 1);
    if (evals(evals.size() - 1) <= 0.0 || cutoff <= 0.0)
        throw SolverError("pca_reduce: sensitive block is degenerate (no positive eigenvalues)");

    Index kept = 0;
    for (Index j = 0; j < evals.size(); ++j)
        if (evals(j) > cutoff) ++kept;
    if (kept == 0) throw SolverError("pca_reduce: all eigenvalues below threshold");

    Matrix rotation(s.cols(), kept);
    for (Index j = 0; j < kept; ++j)
        rotation.col(j) = eig.eigenvectors().col(evals.size() - 1 - j);  // descending order
    if (rotation_out) *rotation_out = rotation;
    return s * rotation;
}

// Ridge analogue of the auxiliary regression:
//   Utilde_i = X_i - S (S^T S + lambda I)^{-1} S^T X_i.
// Unlike the OLS residuals these are not orthogonal to S for lambda > 0.
inline Matrix ridge_decorrelate(const Matrix& s, const Matrix& x, double lambda) {
    if (lambda < 0.0) throw DataError("ridge_decorrelate: lambda must be nonnegative");
    Matrix gram = s.transpose() * s;
    gram.diagonal().array() += lambda;
    return x - s * gram.ldlt().solve(s.transpose() * x);
}

// S^T Utilde computed through the spectral decomposition S^T S = A L A^T:
//   S^T Utilde_i = A diag(1 - l_j / (l_j + lambda)) A^T S^T X_i.
// Equals the direct product; kept as the cheap route when the
// decomposition is already at hand and as a cross-check in tests.
inline Matrix residual_cross_covariance(const Matrix& s, const Matrix& x, double lambda) {
    if (lambda < 0.0) throw DataError("residual_cross_covariance: lambda must be nonnegative");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s);
    const Vector shrink = 1.0 - (eig.eigenvalues().array() / (eig.eigenvalues().array() + lambda));
    return eig.eigenvectors() * shrink.asDiagonal() * eig.eigenvectors().transpose() *
           (s.transpose() * x);
}

}  // namespace fairfit

#endif
