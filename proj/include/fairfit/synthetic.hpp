#ifndef FAIRFIT_SYNTHETIC_HPP
#define FAIRFIT_SYNTHETIC_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "fairfit/dataset.hpp"
#include "fairfit/types.hpp"

namespace fairfit {

namespace detail {

// Box-Muller over explicit 53-bit uniforms so that draws are identical
// on every platform for a given seed (std::normal_distribution is not
// guaranteed to be).
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double uniform() {
        // in (0, 1]
        return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace detail

// Synthetic benchmark draws. Both examples share the same design:
// (X1..X3, S1..S3) multivariate normal with unit variances and all
// pairwise correlations 0.3.
//   id 1: y = 2 X1 + 3 X2 + 4 X3 + 5 S1 + 6 S2 + 7 S3 + e, e ~ N(0, 100)
//   id 2: binary y, logit(p) = 1 + 0.5 X1 + 0.6 X2 + 0.7 X3
//                                + 0.8 S1 + 0.9 S2 + 1.0 S3
inline RawDataset synth_example(int id, Index n, std::uint64_t seed) {
    if (id != 1 && id != 2) throw DataError("synth_example: unknown example id " + std::to_string(id));
    if (n < 10) throw DataError("synth_example: n must be at least 10");

    constexpr int dim = 6;
    Matrix sigma = Matrix::Constant(dim, dim, 0.3);
    sigma.diagonal().setOnes();
    const Matrix chol = sigma.llt().matrixL();

    detail::NormalSampler rng(seed);
    Matrix design(n, dim);
    Vector y(n);
    Vector z(dim);
    for (Index i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) z(j) = rng.normal();
        design.row(i) = (chol * z).transpose();
        if (id == 1) {
            y(i) = 2.0 * design(i, 0) + 3.0 * design(i, 1) + 4.0 * design(i, 2) +
                   5.0 * design(i, 3) + 6.0 * design(i, 4) + 7.0 * design(i, 5) +
                   10.0 * rng.normal();
        } else {
            const double eta = 1.0 + 0.5 * design(i, 0) + 0.6 * design(i, 1) +
                               0.7 * design(i, 2) + 0.8 * design(i, 3) +
                               0.9 * design(i, 4) + 1.0 * design(i, 5);
            const double p = 1.0 / (1.0 + std::exp(-eta));
            y(i) = rng.uniform() <= p ? 1.0 : 0.0;
        }
    }

    RawDataset out;
    out.n = n;
    const char* names[dim] = {"X1", "X2", "X3", "S1", "S2", "S3"};
    for (int j = 0; j < dim; ++j) {
        RawColumn col;
        col.name = names[j];
        col.values.assign(design.col(j).data(), design.col(j).data() + n);
        out.columns.push_back(std::move(col));
    }
    RawColumn yc;
    yc.name = "y";
    yc.values.assign(y.data(), y.data() + n);
    out.columns.push_back(std::move(yc));
    return out;
}

// The schema both examples are meant to be modelled under.
inline Schema synth_schema() {
    Schema s;
    s.response = "y";
    s.sensitive = {"S1", "S2", "S3"};
    s.predictors = {"X1", "X2", "X3"};
    return s;
}

}  // namespace fairfit

#endif
