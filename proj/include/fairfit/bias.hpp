#ifndef FAIRFIT_BIAS_HPP
#define FAIRFIT_BIAS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <utility>
#include <vector>

#include "fairfit/csv.hpp"
#include "fairfit/decorrelate.hpp"
#include "fairfit/frrm.hpp"
#include "fairfit/model_matrix.hpp"
#include "fairfit/types.hpp"

namespace fairfit {

// Ratio between the two statistical-parity shares when the
// decorrelation step is done by ridge instead of OLS: the usual
// quadratic-form share ignores the cross-covariance COV(S a, U~ b) that
// ridge residuals reintroduce.
struct BiasCurve {
    std::vector<double> lambda_grid;
    std::vector<double> r_list;
    Matrix ratios;  // lambda_grid.size() x r_list.size()
    double cv_lambda_lo = 0.0;  // one-standard-error band over the X columns
    double cv_lambda_hi = 0.0;

    bool in_cv_band(double lambda) const {
        return lambda >= cv_lambda_lo && lambda <= cv_lambda_hi;
    }

    void to_csv(std::ostream& os) const {
        os << "lambda,r,ratio,in_cv_band\n";
        for (std::size_t i = 0; i < lambda_grid.size(); ++i)
            for (std::size_t j = 0; j < r_list.size(); ++j)
                os << format_double(lambda_grid[i]) << "," << format_double(r_list[j]) << ","
                   << format_double(ratios(static_cast<Index>(i), static_cast<Index>(j))) << ","
                   << (in_cv_band(lambda_grid[i]) ? 1 : 0) << "\n";
    }
};

namespace detail {

// 10-fold CV curve of the ridge regression X_col ~ S over the lambda
// grid; returns the one-standard-error choice, i.e. the largest grid
// lambda whose CV error stays within one standard error of the minimum.
inline double cv_one_se_lambda(const Matrix& s, const Vector& x_col,
                               const std::vector<double>& lambda_grid, std::uint64_t seed) {
    const Index n = s.rows();
    const int folds = 10;
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t grid = lambda_grid.size();
    Matrix fold_err(folds, static_cast<Index>(grid));
    for (int f = 0; f < folds; ++f) {
        const Index lo = n * f / folds;
        const Index hi = n * (f + 1) / folds;
        std::vector<Index> val(order.begin() + lo, order.begin() + hi);
        std::vector<Index> train;
        train.reserve(static_cast<std::size_t>(n - (hi - lo)));
        train.insert(train.end(), order.begin(), order.begin() + lo);
        train.insert(train.end(), order.begin() + hi, order.end());

        Matrix s_train(train.size(), s.cols());
        Vector x_train(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            s_train.row(static_cast<Index>(i)) = s.row(train[i]);
            x_train(static_cast<Index>(i)) = x_col(train[i]);
        }
        const Matrix gram = s_train.transpose() * s_train;
        const Vector moment = s_train.transpose() * x_train;
        for (std::size_t g = 0; g < grid; ++g) {
            Matrix reg = gram;
            reg.diagonal().array() += lambda_grid[g];
            const Vector coef = reg.ldlt().solve(moment);
            double sse = 0.0;
            for (Index i : val) {
                const double e = x_col(i) - s.row(i).dot(coef);
                sse += e * e;
            }
            fold_err(f, static_cast<Index>(g)) = sse / static_cast<double>(val.size());
        }
    }

    const Vector mean_err = fold_err.colwise().mean();
    Index best = 0;
    mean_err.minCoeff(&best);
    const double se = std::sqrt((fold_err.col(best).array() - mean_err(best)).square().sum() /
                                static_cast<double>(folds - 1)) /
                      std::sqrt(static_cast<double>(folds));
    const double cutoff = mean_err(best) + se;
    double chosen = lambda_grid[static_cast<std::size_t>(best)];
    for (std::size_t g = 0; g < grid; ++g)
        if (mean_err(static_cast<Index>(g)) <= cutoff) chosen = std::max(chosen, lambda_grid[g]);
    return chosen;
}

}  // namespace detail

// For each (lambda, r): decorrelate with ridge at lambda, fit the fair
// model at bound r on (S, U~), and compare the share computed without
// the cross-covariance term against the one with
// VAR(yhat) = VAR(S a) + VAR(U~ b) - 2 COV(S a, U~ b).
inline BiasCurve bias_ratio_curve(const ModelMatrices& mm, const std::vector<double>& r_list,
                                  const std::vector<double>& lambda_grid) {
    for (double r : r_list)
        if (!(r > 0.0 && r < 1.0)) throw DataError("bias_ratio_curve: r values must lie in (0, 1)");

    BiasCurve curve;
    curve.lambda_grid = lambda_grid;
    curve.r_list = r_list;
    curve.ratios.resize(static_cast<Index>(lambda_grid.size()), static_cast<Index>(r_list.size()));

    const double n = static_cast<double>(mm.S.rows());
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        const Matrix u_tilde = lambda_grid[i] == 0.0
                                   ? ols_decorrelate(mm.S, mm.X).uhat
                                   : ridge_decorrelate(mm.S, mm.X, lambda_grid[i]);
        for (std::size_t j = 0; j < r_list.size(); ++j) {
            FairnessSpec spec;
            spec.definition = Definition::sp;
            spec.r = r_list[j];
            const detail::FrrmCore core = detail::fit_frrm_core(mm.S, u_tilde, mm.y, spec, 0.0);
            const Vector sa = mm.S * core.alpha;
            const Vector ub = u_tilde * core.beta;
            const double var_sa = sa.squaredNorm() / n;
            const double var_ub = ub.squaredNorm() / n;
            const double cross = sa.dot(ub) / n;
            curve.ratios(static_cast<Index>(i), static_cast<Index>(j)) =
                (var_sa + var_ub - 2.0 * cross) / (var_sa + var_ub);
        }
    }

    // Per-column one-standard-error lambdas; the band is their range.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Index col = 0; col < mm.X.cols(); ++col) {
        const double chosen = detail::cv_one_se_lambda(mm.S, mm.X.col(col), lambda_grid, 271828u);
        lo = std::min(lo, chosen);
        hi = std::max(hi, chosen);
    }
    curve.cv_lambda_lo = lo;
    curve.cv_lambda_hi = hi;
    return curve;
}

}  // namespace fairfit

#endif
