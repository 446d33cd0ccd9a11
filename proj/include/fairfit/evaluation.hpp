#ifndef FAIRFIT_EVALUATION_HPP
#define FAIRFIT_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairfit/csv.hpp"
#include "fairfit/dataset.hpp"
#include "fairfit/fairness.hpp"
#include "fairfit/frrm.hpp"
#include "fairfit/glm.hpp"
#include "fairfit/model.hpp"
#include "fairfit/parallel.hpp"
#include "fairfit/types.hpp"

namespace fairfit {

inline double rmse(const Vector& y, const Vector& yhat) {
    if (y.size() != yhat.size()) throw DataError("rmse: length mismatch");
    if (y.size() == 0) throw DataError("rmse: empty vectors");
    return std::sqrt((y - yhat).squaredNorm() / static_cast<double>(y.size()));
}

// Harmonic mean of precision and recall at the given probability
// threshold; 0 when precision + recall is 0.
inline double f1(const Vector& y, const Vector& yhat_prob, double threshold = 0.5) {
    if (y.size() != yhat_prob.size()) throw DataError("f1: length mismatch");
    double tp = 0, fp = 0, fn = 0;
    for (Index i = 0; i < y.size(); ++i) {
        if (y(i) != 0.0 && y(i) != 1.0) throw DataError("f1: response must be 0/1");
        const bool pred = yhat_prob(i) >= threshold;
        if (pred && y(i) == 1.0) ++tp;
        else if (pred) ++fp;
        else if (y(i) == 1.0) ++fn;
    }
    if (tp + fp == 0.0 || tp + fn == 0.0) return 0.0;
    const double precision = tp / (tp + fp);
    const double recall = tp / (tp + fn);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

inline const std::vector<double>& default_r_grid() {
    static const std::vector<double> grid = {0.0, 0.01, 0.02, 0.05, 0.10, 0.20, 0.50};
    return grid;
}

struct CvConfig {
    int folds = 10;
    int runs = 10;  // the reference protocol uses 50; kept small for routine runs
    std::uint64_t seed = 0;
    std::vector<double> r_grid = default_r_grid();
    Family family = Family::gaussian;
    FairnessSpec spec;  // the r field is overridden per grid point
    double lambda2 = 0.0;
    int workers = 1;

    void validate(Index n) const {
        if (folds < 2) throw DataError("cv: folds must be at least 2");
        if (folds > n) throw DataError("cv: more folds than rows");
        if (runs < 1) throw DataError("cv: runs must be at least 1");
        if (r_grid.empty()) throw DataError("cv: empty r grid");
        for (double r : r_grid)
            if (!(r >= 0.0 && r <= 1.0)) throw DataError("cv: grid values must lie in [0, 1]");
    }
};

struct CvCell {
    int run = 0;
    int fold = 0;
    double r = 0.0;
    double lambda_r = 0.0;
    double train_metric = 0.0;
    double val_metric = 0.0;
    double achieved_train = 0.0;
    double achieved_val = 0.0;
    double max_abs_cov_train = 0.0;  // largest |COV(yhat, S_j)| on the split
    double max_abs_cov_val = 0.0;
    std::string status = "ok";
};

struct CvReport {
    std::string metric_name = "rmse";
    std::vector<CvCell> cells;  // fixed lexicographic (run, fold, r) order

    void to_csv(std::ostream& os) const {
        os << "run,fold,r,lambda_r,train_" << metric_name << ",val_" << metric_name
           << ",achieved_train,achieved_val,max_abs_cov_train,max_abs_cov_val,status\n";
        for (const auto& c : cells) {
            os << c.run << "," << c.fold << "," << format_double(c.r) << ","
               << format_double(c.lambda_r) << "," << format_double(c.train_metric) << ","
               << format_double(c.val_metric) << "," << format_double(c.achieved_train) << ","
               << format_double(c.achieved_val) << "," << format_double(c.max_abs_cov_train) << ","
               << format_double(c.max_abs_cov_val) << "," << csv_quote(c.status) << "\n";
        }
    }

    nlohmann::json aggregates() const;
};

namespace detail {

inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace detail

inline nlohmann::json CvReport::aggregates() const {
    std::vector<double> grid;
    for (const auto& c : cells)
        if (std::find(grid.begin(), grid.end(), c.r) == grid.end()) grid.push_back(c.r);
    std::sort(grid.begin(), grid.end());

    nlohmann::json out = nlohmann::json::array();
    for (double r : grid) {
        std::vector<double> train, val, ach_train, ach_val;
        int failures = 0;
        for (const auto& c : cells) {
            if (c.r != r) continue;
            if (c.status != "ok") {
                ++failures;
                continue;
            }
            train.push_back(c.train_metric);
            val.push_back(c.val_metric);
            ach_train.push_back(c.achieved_train);
            ach_val.push_back(c.achieved_val);
        }
        auto mean = [](const std::vector<double>& v) {
            return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        out.push_back({{"r", r},
                       {"cells", train.size()},
                       {"failures", failures},
                       {"train_metric_mean", mean(train)},
                       {"val_metric_mean", mean(val)},
                       {"val_metric_p05", detail::percentile(val, 0.05)},
                       {"val_metric_p95", detail::percentile(val, 0.95)},
                       {"achieved_train_mean", mean(ach_train)},
                       {"achieved_val_mean", mean(ach_val)}});
    }
    return {{"metric", metric_name}, {"per_r", out}};
}

namespace detail {

inline std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (int f = 0; f < folds; ++f) {
        const Index lo = n * f / folds;
        const Index hi = n * (f + 1) / folds;
        for (Index k = lo; k < hi; ++k) fold_of[static_cast<std::size_t>(order[k])] = f;
    }
    return fold_of;
}

// A partition is usable when, for every fold, the training side of each
// schema categorical covers the validation side's levels and keeps at
// least two levels of its own.
inline bool partition_ok(const RawDataset& raw, const Schema& schema,
                         const std::vector<int>& fold_of, int folds, std::string* why) {
    std::vector<std::string> names = schema.sensitive;
    const auto preds = schema.effective_predictors(raw.header());
    names.insert(names.end(), preds.begin(), preds.end());
    for (const auto& name : names) {
        const RawColumn& col = raw.column(name);
        if (col.numeric) continue;
        for (int f = 0; f < folds; ++f) {
            std::set<std::string> train_levels, val_levels;
            for (Index i = 0; i < raw.n; ++i) {
                if (fold_of[static_cast<std::size_t>(i)] == f)
                    val_levels.insert(col.labels[static_cast<std::size_t>(i)]);
                else
                    train_levels.insert(col.labels[static_cast<std::size_t>(i)]);
            }
            if (train_levels.size() < 2) {
                if (why) *why = "column '" + name + "' has fewer than 2 levels in a training fold";
                return false;
            }
            for (const auto& level : val_levels) {
                if (!train_levels.count(level)) {
                    if (why) *why = "column '" + name + "': level '" + level +
                                    "' appears only in a validation fold";
                    return false;
                }
            }
        }
    }
    return true;
}

inline FittedModel fit_dispatch(const ModelMatrices& mm, const FairnessSpec& spec, Family family,
                                double lambda2) {
    if (family == Family::gaussian) return fit_frrm(mm, spec, lambda2);
    return fit_fgrrm(mm, spec, family, lambda2);
}

inline double max_abs_cov_with_s(const Vector& yhat, const Matrix& s) {
    double worst = 0.0;
    const double n = static_cast<double>(yhat.size());
    const Vector yc = yhat.array() - yhat.mean();
    for (Index j = 0; j < s.cols(); ++j) {
        const Vector sc = s.col(j).array() - s.col(j).mean();
        worst = std::max(worst, std::abs(yc.dot(sc) / n));
    }
    return worst;
}

inline double centered_var(const Vector& v) {
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size());
}

inline double centered_cov(const Vector& a, const Vector& b) {
    return (a.array() - a.mean()).matrix().dot((b.array() - b.mean()).matrix()) /
           static_cast<double>(a.size());
}

}  // namespace detail

// Achieved fairness of a fitted model on an arbitrary split (training or
// validation), using the stored transforms and the split's own moments.
inline double achieved_fairness(const FittedModel& model, const RawDataset& split,
                                const std::string& response) {
    const Matrix s = model.s_codec.apply(split) * model.s_rotation;
    const Matrix x = model.x_codec.apply(split);
    const Matrix u = x - s * model.bhat;
    const Vector sa = s * model.alpha;
    const Vector ub = u * model.beta;

    const RawColumn& yc = split.column(response);
    if (!yc.numeric) throw DataError("response column '" + response + "' must be numeric");
    const Vector y_raw = Eigen::Map<const Vector>(yc.values.data(), split.n);

    if (model.family != Family::gaussian) {
        // Deviance-share analogue with plug-in coefficients; the null
        // model uses the training-set mean to avoid leakage.
        Vector eta = sa + ub;
        eta.array() += model.intercept;
        Vector mu(split.n), mu0(split.n);
        for (Index i = 0; i < split.n; ++i) {
            mu(i) = glm::clamp_mu(model.family, glm::inverse_link(model.family, eta(i)), nullptr);
            mu0(i) = glm::clamp_mu(model.family, glm::inverse_link(model.family,
                                                                   eta(i) - sa(i)), nullptr);
        }
        const double dev = deviance(model.family, y_raw, mu);
        const double dev_nosens = deviance(model.family, y_raw, mu0);
        const Vector mu_null = Vector::Constant(split.n,
                                                glm::clamp_mu(model.family, model.y_center, nullptr));
        const double dev_null = deviance(model.family, y_raw, mu_null);
        if (dev == dev_null) return 0.0;
        return std::min(std::max((dev - dev_nosens) / (dev - dev_null), 0.0), 1.0);
    }

    const Vector y = y_raw.array() - y_raw.mean();
    const double var_sa = detail::centered_var(sa);
    const double var_ub = detail::centered_var(ub);
    auto sp_value = [&] {
        if (var_sa + var_ub == 0.0) return 0.0;
        return var_sa / (var_sa + var_ub);
    };
    switch (model.spec.definition) {
        case Definition::sp:
            return sp_value();
        case Definition::eo:
            return r2_eo(sa + ub, y, s);
        case Definition::individual: {
            IfOptions opts;
            opts.allow_subsample = true;
            IfCache cache = laplacian_form(y, s, model.spec.distance, opts);
            const Vector alpha_ols = alpha_ridge(s, y, 0.0);
            const double f_ols = cache.quad(alpha_ols);
            if (f_ols <= 0.0) return 0.0;
            return cache.quad(model.alpha) / f_ols;
        }
        case Definition::composite:
            return composite(model.spec, sp_value(), r2_eo(sa + ub, y, s));
    }
    return sp_value();
}

// Repeated k-fold cross-validation over the r grid. Within one run the
// same fold partition is reused for every r; encoding and centring are
// fitted on the training folds only. Deterministic for a given seed,
// independent of the worker count.
inline CvReport kfold_cv(const RawDataset& raw, const Schema& schema, const CvConfig& config) {
    config.validate(raw.n);
    schema.validate(raw.header());

    // Partitions are drawn sequentially up front so that worker
    // scheduling cannot influence them. A partition that strands a
    // categorical level in a validation fold is redrawn once.
    std::vector<std::vector<int>> partitions;
    partitions.reserve(static_cast<std::size_t>(config.runs));
    for (int run = 0; run < config.runs; ++run) {
        std::vector<int> part = detail::fold_assignment(raw.n, config.folds,
                                                        config.seed + static_cast<std::uint64_t>(run));
        std::string why;
        if (!detail::partition_ok(raw, schema, part, config.folds, &why)) {
            part = detail::fold_assignment(raw.n, config.folds,
                                           config.seed + static_cast<std::uint64_t>(run) + 0x9e3779b97f4a7c15ull);
            if (!detail::partition_ok(raw, schema, part, config.folds, &why))
                throw DataError("cv: unusable fold partition after one resample: " + why);
        }
        partitions.push_back(std::move(part));
    }

    CvReport report;
    report.metric_name = config.family == Family::binomial ? "f1" : "rmse";
    const std::size_t grid_size = config.r_grid.size();
    report.cells.resize(static_cast<std::size_t>(config.runs * config.folds) * grid_size);

    auto run_task = [&](std::size_t task) {
        const int run = static_cast<int>(task) / config.folds;
        const int fold = static_cast<int>(task) % config.folds;
        const auto& fold_of = partitions[static_cast<std::size_t>(run)];

        std::vector<Index> train_rows, val_rows;
        for (Index i = 0; i < raw.n; ++i) {
            if (fold_of[static_cast<std::size_t>(i)] == fold) val_rows.push_back(i);
            else train_rows.push_back(i);
        }
        const RawDataset train = raw.subset(train_rows);
        const RawDataset val = raw.subset(val_rows);

        const Vector y_train = Eigen::Map<const Vector>(train.column(schema.response).values.data(),
                                                        train.n);
        const Vector y_val = Eigen::Map<const Vector>(val.column(schema.response).values.data(),
                                                      val.n);

        for (std::size_t g = 0; g < grid_size; ++g) {
            CvCell& cell = report.cells[task * grid_size + g];
            cell.run = run;
            cell.fold = fold;
            cell.r = config.r_grid[g];
            try {
                const ModelMatrices mm = encode(train, schema);
                FairnessSpec spec = config.spec;
                spec.r = config.r_grid[g];
                const FittedModel model = detail::fit_dispatch(mm, spec, config.family,
                                                               config.lambda2);
                const Vector val_pred = predict(model, val);

                cell.lambda_r = model.lambda_r;
                if (config.family == Family::binomial) {
                    cell.train_metric = f1(y_train, model.fitted);
                    cell.val_metric = f1(y_val, val_pred);
                } else {
                    cell.train_metric = rmse(y_train, model.fitted);
                    cell.val_metric = rmse(y_val, val_pred);
                }
                cell.achieved_train = model.achieved;
                cell.achieved_val = achieved_fairness(model, val, schema.response);
                cell.max_abs_cov_train = detail::max_abs_cov_with_s(
                    model.fitted, model.s_codec.apply(train) * model.s_rotation);
                cell.max_abs_cov_val = detail::max_abs_cov_with_s(
                    val_pred, model.s_codec.apply(val) * model.s_rotation);
            } catch (const std::exception& e) {
                cell.status = e.what();
                cell.lambda_r = cell.train_metric = cell.val_metric =
                    cell.achieved_train = cell.achieved_val =
                    cell.max_abs_cov_train = cell.max_abs_cov_val =
                    std::numeric_limits<double>::quiet_NaN();
            }
        }
    };

    parallel_for(static_cast<std::size_t>(config.runs * config.folds), config.workers, run_task);
    return report;
}

// Coefficient paths over the r grid on the full data set, with the
// achieved SP / EO / D_IF triple per grid point.
struct ProfileSweep {
    std::vector<double> r_grid;
    std::vector<std::string> alpha_names;
    std::vector<std::string> beta_names;
    Matrix alpha;   // grid x q
    Matrix beta;    // grid x p
    Vector lambda;
    Vector sp;
    Vector eo;
    Vector dif;

    void to_csv(std::ostream& os) const {
        os << "r,lambda_r";
        for (const auto& n : alpha_names) os << ",alpha_" << csv_quote(n);
        for (const auto& n : beta_names) os << ",beta_" << csv_quote(n);
        os << ",sp,eo,dif\n";
        for (std::size_t i = 0; i < r_grid.size(); ++i) {
            const Index row = static_cast<Index>(i);
            os << format_double(r_grid[i]) << "," << format_double(lambda(row));
            for (Index j = 0; j < alpha.cols(); ++j) os << "," << format_double(alpha(row, j));
            for (Index j = 0; j < beta.cols(); ++j) os << "," << format_double(beta(row, j));
            os << "," << format_double(sp(row)) << "," << format_double(eo(row)) << ","
               << format_double(dif(row)) << "\n";
        }
    }
};

inline ProfileSweep profile_sweep(const RawDataset& raw, const Schema& schema,
                                  std::vector<double> r_grid, const FairnessSpec& spec,
                                  Family family, double lambda2 = 0.0) {
    if (r_grid.empty()) throw DataError("profile_sweep: empty r grid");
    std::sort(r_grid.begin(), r_grid.end());
    const ModelMatrices mm = encode(raw, schema);

    ProfileSweep sweep;
    sweep.r_grid = r_grid;

    // Reference quantities for the per-point fairness triple.
    Matrix rotation;
    const Matrix s = detail::reduce_if_needed(mm.S, rotation);
    const Vector& y_for_if = family == Family::gaussian ? mm.y : mm.y_raw;
    IfOptions if_opts;
    if_opts.allow_subsample = true;
    const IfCache if_cache = laplacian_form(y_for_if, s, spec.distance, if_opts);
    Vector alpha_ref;  // unpenalised alpha, the D_IF normaliser
    if (family == Family::gaussian) {
        alpha_ref = alpha_ridge(s, mm.y, 0.0);
    } else {
        FairnessSpec unbounded = spec;
        unbounded.r = 1.0;
        alpha_ref = fit_fgrrm(mm, unbounded, family, lambda2).alpha;
    }
    const double f_ref = if_cache.quad(alpha_ref);

    const std::size_t m = r_grid.size();
    bool sized = false;
    for (std::size_t i = 0; i < m; ++i) {
        FairnessSpec point = spec;
        point.r = r_grid[i];
        const FittedModel model = detail::fit_dispatch(mm, point, family, lambda2);
        if (!sized) {
            sweep.alpha.resize(static_cast<Index>(m), model.alpha.size());
            sweep.beta.resize(static_cast<Index>(m), model.beta.size());
            sweep.lambda.resize(static_cast<Index>(m));
            sweep.sp.resize(static_cast<Index>(m));
            sweep.eo.resize(static_cast<Index>(m));
            sweep.dif.resize(static_cast<Index>(m));
            sweep.beta_names = mm.x_codec.encoded_names;
            if (model.alpha.size() == static_cast<Index>(mm.s_codec.encoded_names.size())) {
                sweep.alpha_names = mm.s_codec.encoded_names;
            } else {
                for (Index j = 0; j < model.alpha.size(); ++j)
                    sweep.alpha_names.push_back("pc" + std::to_string(j + 1));
            }
            sized = true;
        }
        const Index row = static_cast<Index>(i);
        sweep.alpha.row(row) = model.alpha.transpose();
        sweep.beta.row(row) = model.beta.transpose();
        sweep.lambda(row) = model.lambda_r;

        const Matrix u = mm.X - s * model.bhat;
        if (family == Family::gaussian) {
            const Vector yhat = s * model.alpha + u * model.beta;
            sweep.sp(row) = r2_sp(model.alpha, model.beta, s, u);
            sweep.eo(row) = r2_eo(yhat, mm.y, s);
        } else {
            const double den = model.deviance - model.null_deviance;
            sweep.sp(row) = den == 0.0 ? 0.0
                                       : std::min(std::max((model.deviance - model.alpha_zero_deviance) / den, 0.0), 1.0);
            sweep.eo(row) = r2_eo(model.fitted, mm.y_raw, s);
        }
        sweep.dif(row) = f_ref > 0.0 ? if_cache.quad(model.alpha) / f_ref
                                     : std::numeric_limits<double>::quiet_NaN();
    }
    return sweep;
}

}  // namespace fairfit

#endif
