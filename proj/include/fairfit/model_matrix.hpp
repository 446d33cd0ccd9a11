#ifndef FAIRFIT_MODEL_MATRIX_HPP
#define FAIRFIT_MODEL_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "fairfit/dataset.hpp"
#include "fairfit/types.hpp"

namespace fairfit {

// How one raw column maps into the design matrix. A categorical column
// with k levels contributes k-1 indicators; the first level in
// lexicographic order is the reference and is dropped, so the one-hot
// block keeps full column rank before centring.
struct ColumnCodec {
    std::string name;
    bool numeric = true;
    std::vector<std::string> levels;  // sorted; levels[0] is the reference

    Index width() const {
        return numeric ? 1 : static_cast<Index>(levels.size()) - 1;
    }
};

// Encoding, centring and scaling state for one block (X or S), enough
// to apply the identical transform to new data.
struct BlockCodec {
    std::vector<ColumnCodec> columns;
    std::vector<std::string> encoded_names;
    Vector centers;
    Vector scales;   // all ones when scaling is off
    bool scaled = false;

    Index width() const { return static_cast<Index>(encoded_names.size()); }

    // Raw (uncentred) design block for this codec.
    Matrix expand(const RawDataset& data) const {
        Matrix m(data.n, width());
        Index col = 0;
        for (const auto& codec : columns) {
            if (!data.has_column(codec.name))
                throw DataError("column '" + codec.name + "' missing from data");
            const RawColumn& raw = data.column(codec.name);
            if (codec.numeric) {
                if (!raw.numeric)
                    throw DataError("column '" + codec.name + "' was numeric in training but is not here");
                for (Index i = 0; i < data.n; ++i)
                    m(i, col) = raw.values[static_cast<std::size_t>(i)];
                ++col;
            } else {
                if (raw.numeric)
                    throw DataError("column '" + codec.name + "' was categorical in training but is numeric here");
                m.middleCols(col, codec.width()).setZero();
                for (Index i = 0; i < data.n; ++i) {
                    const std::string& level = raw.labels[static_cast<std::size_t>(i)];
                    auto it = std::lower_bound(codec.levels.begin(), codec.levels.end(), level);
                    if (it == codec.levels.end() || *it != level)
                        throw DataError("column '" + codec.name + "': unseen level '" + level + "'");
                    const Index k = static_cast<Index>(it - codec.levels.begin());
                    if (k > 0) m(i, col + k - 1) = 1.0;
                }
                col += codec.width();
            }
        }
        return m;
    }

    // Centred (and optionally scaled) block using the stored statistics.
    Matrix apply(const RawDataset& data) const {
        Matrix m = expand(data);
        for (Index j = 0; j < m.cols(); ++j)
            m.col(j) = (m.col(j).array() - centers(j)) / scales(j);
        return m;
    }
};

// Centred response and design blocks plus everything needed to map new
// raw data through the same transform.
struct ModelMatrices {
    Vector y;        // centred response
    Vector y_raw;    // as loaded; the GLM path fits on this
    double y_center = 0.0;
    Matrix X;
    Matrix S;
    BlockCodec x_codec;
    BlockCodec s_codec;
};

namespace detail {

inline ColumnCodec make_codec(const RawColumn& col) {
    ColumnCodec codec;
    codec.name = col.name;
    codec.numeric = col.numeric;
    if (!col.numeric) {
        std::set<std::string> levels(col.labels.begin(), col.labels.end());
        if (levels.size() < 2)
            throw DataError("categorical column '" + col.name + "' has fewer than 2 observed levels");
        codec.levels.assign(levels.begin(), levels.end());
    }
    return codec;
}

inline BlockCodec fit_block(const RawDataset& data, const std::vector<std::string>& names,
                            bool scale, const char* block_label) {
    BlockCodec block;
    block.scaled = scale;
    for (const auto& name : names) {
        ColumnCodec codec = make_codec(data.column(name));
        if (codec.numeric) {
            block.encoded_names.push_back(codec.name);
        } else {
            for (std::size_t k = 1; k < codec.levels.size(); ++k)
                block.encoded_names.push_back(codec.name + "=" + codec.levels[k]);
        }
        block.columns.push_back(std::move(codec));
    }
    Matrix m = block.expand(data);
    if (!m.allFinite())
        throw DataError(std::string(block_label) + " block contains non-finite values");

    const double n = static_cast<double>(data.n);
    block.centers = m.colwise().mean();
    block.scales = Vector::Ones(m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
        const double sd = std::sqrt((m.col(j).array() - block.centers(j)).square().sum() / n);
        if (sd == 0.0)
            throw DataError(std::string(block_label) + " column '" + block.encoded_names[j] +
                            "' is constant after encoding");
        if (scale) block.scales(j) = sd;
    }
    return block;
}

}  // namespace detail

// Builds the centred y/X/S matrices for a training set. Encoding and
// centring statistics are fitted here and stored in the codecs.
inline ModelMatrices encode(const RawDataset& raw, const Schema& schema) {
    schema.validate(raw.header());
    const std::vector<std::string> predictor_names = schema.effective_predictors(raw.header());
    if (predictor_names.empty()) throw DataError("schema: no predictor columns");

    ModelMatrices mm;
    mm.x_codec = detail::fit_block(raw, predictor_names, schema.scale, "predictor");
    mm.s_codec = detail::fit_block(raw, schema.sensitive, schema.scale, "sensitive");
    mm.X = mm.x_codec.apply(raw);
    mm.S = mm.s_codec.apply(raw);

    const RawColumn& yc = raw.column(schema.response);
    if (!yc.numeric) throw DataError("response column '" + schema.response + "' must be numeric");
    mm.y_raw = Eigen::Map<const Vector>(yc.values.data(), raw.n);
    if (!mm.y_raw.allFinite()) throw DataError("response column contains non-finite values");
    mm.y_center = mm.y_raw.mean();
    mm.y = mm.y_raw.array() - mm.y_center;

    if (raw.n <= mm.X.cols())
        throw DataError("n = " + std::to_string(raw.n) + " rows but p = " +
                        std::to_string(mm.X.cols()) + " predictor columns after encoding");
    if (raw.n <= mm.S.cols())
        throw DataError("n = " + std::to_string(raw.n) + " rows but q = " +
                        std::to_string(mm.S.cols()) + " sensitive columns after encoding");
    return mm;
}

}  // namespace fairfit

#endif
