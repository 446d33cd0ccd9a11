#ifndef FAIRFIT_MODEL_HPP
#define FAIRFIT_MODEL_HPP

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairfit/fairness.hpp"
#include "fairfit/model_matrix.hpp"
#include "fairfit/types.hpp"

namespace fairfit {

// A fitted fair (generalised) ridge regression model, carrying the
// decorrelation and encoding state needed to score new data.
struct FittedModel {
    FairnessSpec spec;
    Family family = Family::gaussian;

    Vector alpha;          // sensitive-attribute coefficients (reduced space)
    Vector beta;           // decorrelated-predictor coefficients
    double intercept = 0.0;
    double lambda_r = 0.0; // +inf when r = 0 forces alpha to zero exactly
    double lambda2 = 0.0;
    double achieved = 0.0;

    Matrix bhat;           // q x p auxiliary coefficients
    Matrix s_rotation;     // original q x reduced q PCA rotation (identity if unused)
    BlockCodec x_codec;
    BlockCodec s_codec;
    double y_center = 0.0;

    Vector fitted;         // in-sample, response scale
    Vector residuals;      // y_raw - fitted
    double r2 = 0.0;
    double deviance = 0.0;
    double null_deviance = 0.0;
    double alpha_zero_deviance = 0.0;
    int irls_iterations = 0;
    bool converged = true;
    bool mu_clamped = false;
    bool separation = false;
};

// Linear predictor on new data: intercept + S_new alpha + U_new beta,
// with U_new = X_new - S_new bhat built from the stored transforms.
inline Vector linear_predictor(const FittedModel& model, const RawDataset& raw) {
    const Matrix x_new = model.x_codec.apply(raw);
    const Matrix s_new = model.s_codec.apply(raw) * model.s_rotation;
    const Matrix u_new = x_new - s_new * model.bhat;
    return (s_new * model.alpha + u_new * model.beta).array() + model.intercept;
}

// Predictions on the response scale: identity link plus the stored
// response centre for gaussian models, inverse link otherwise.
inline Vector predict(const FittedModel& model, const RawDataset& raw) {
    Vector eta = linear_predictor(model, raw);
    switch (model.family) {
        case Family::gaussian:
            return eta.array() + model.y_center;
        case Family::binomial:
            return (1.0 / (1.0 + (-eta.array()).exp())).matrix();
        case Family::poisson:
            return eta.array().exp().matrix();
    }
    return eta;
}

namespace detail {

inline nlohmann::json vector_to_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector vector_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

inline nlohmann::json matrix_to_json_rowmajor(const Matrix& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
    j["data"] = data;
    return j;
}

inline Matrix matrix_from_json_rowmajor(const nlohmann::json& j) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != rows * cols)
        throw DataError("model file: matrix size mismatch");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)];
    return m;
}

// JSON has no infinity; lambda_r = +inf (the r = 0 fit) round-trips as null.
inline nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

inline double finite_or_inf(const nlohmann::json& j) {
    if (j.is_null()) return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

inline nlohmann::json codec_to_json(const BlockCodec& codec) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : codec.columns)
        cols.push_back({{"name", c.name}, {"numeric", c.numeric}, {"levels", c.levels}});
    return {{"columns", cols},
            {"encoded_names", codec.encoded_names},
            {"scaled", codec.scaled}};
}

inline BlockCodec codec_from_json(const nlohmann::json& j, const Vector& centers,
                                  const Vector& scales) {
    BlockCodec codec;
    for (const auto& c : j.at("columns")) {
        ColumnCodec cc;
        cc.name = c.at("name").get<std::string>();
        cc.numeric = c.at("numeric").get<bool>();
        cc.levels = c.at("levels").get<std::vector<std::string>>();
        codec.columns.push_back(std::move(cc));
    }
    codec.encoded_names = j.at("encoded_names").get<std::vector<std::string>>();
    codec.scaled = j.at("scaled").get<bool>();
    codec.centers = centers;
    codec.scales = scales;
    if (codec.centers.size() != codec.width())
        throw DataError("model file: centers do not match the encoded columns");
    return codec;
}

}  // namespace detail

inline nlohmann::json model_to_json(const FittedModel& m) {
    nlohmann::json j;
    j["alpha"] = detail::vector_to_json(m.alpha);
    j["beta"] = detail::vector_to_json(m.beta);
    j["intercept"] = m.intercept;
    j["lambda_r"] = detail::finite_or_null(m.lambda_r);
    j["lambda2"] = m.lambda2;
    j["r"] = m.spec.r;
    j["definition"] = definition_name(m.spec.definition);
    j["combine"] = m.spec.combine == Combine::max_of ? "max" : "convex";
    j["w"] = m.spec.w;
    j["achieved"] = m.achieved;
    j["family"] = family_name(m.family);
    j["bhat"] = detail::matrix_to_json_rowmajor(m.bhat);
    j["s_rotation"] = detail::matrix_to_json_rowmajor(m.s_rotation);
    j["centers"] = {{"x", detail::vector_to_json(m.x_codec.centers)},
                    {"s", detail::vector_to_json(m.s_codec.centers)},
                    {"y", m.y_center}};
    j["scales"] = {{"x", detail::vector_to_json(m.x_codec.scales)},
                   {"s", detail::vector_to_json(m.s_codec.scales)}};
    j["encoding"] = {{"x", detail::codec_to_json(m.x_codec)},
                     {"s", detail::codec_to_json(m.s_codec)}};
    j["fitted"] = detail::vector_to_json(m.fitted);
    j["r2"] = m.r2;
    j["deviance"] = m.deviance;
    j["null_deviance"] = m.null_deviance;
    j["alpha_zero_deviance"] = m.alpha_zero_deviance;
    j["converged"] = m.converged;
    j["irls_iterations"] = m.irls_iterations;
    return j;
}

inline FittedModel model_from_json(const nlohmann::json& j) {
    FittedModel m;
    m.alpha = detail::vector_from_json(j.at("alpha"));
    m.beta = detail::vector_from_json(j.at("beta"));
    m.intercept = j.at("intercept").get<double>();
    m.lambda_r = detail::finite_or_inf(j.at("lambda_r"));
    m.lambda2 = j.at("lambda2").get<double>();
    m.spec.r = j.at("r").get<double>();
    const std::string def = j.at("definition").get<std::string>();
    if (def == "sp") m.spec.definition = Definition::sp;
    else if (def == "eo") m.spec.definition = Definition::eo;
    else if (def == "if") m.spec.definition = Definition::individual;
    else if (def == "composite") m.spec.definition = Definition::composite;
    else throw DataError("model file: unknown definition '" + def + "'");
    m.spec.combine = j.at("combine").get<std::string>() == "max" ? Combine::max_of : Combine::convex;
    m.spec.w = j.at("w").get<double>();
    m.achieved = j.at("achieved").get<double>();
    m.family = family_from_name(j.at("family").get<std::string>());
    m.bhat = detail::matrix_from_json_rowmajor(j.at("bhat"));
    m.s_rotation = detail::matrix_from_json_rowmajor(j.at("s_rotation"));
    m.y_center = j.at("centers").at("y").get<double>();
    m.x_codec = detail::codec_from_json(j.at("encoding").at("x"),
                                        detail::vector_from_json(j.at("centers").at("x")),
                                        detail::vector_from_json(j.at("scales").at("x")));
    m.s_codec = detail::codec_from_json(j.at("encoding").at("s"),
                                        detail::vector_from_json(j.at("centers").at("s")),
                                        detail::vector_from_json(j.at("scales").at("s")));
    m.fitted = detail::vector_from_json(j.at("fitted"));
    m.r2 = j.at("r2").get<double>();
    m.deviance = j.at("deviance").get<double>();
    m.null_deviance = j.at("null_deviance").get<double>();
    m.alpha_zero_deviance = j.at("alpha_zero_deviance").get<double>();
    m.converged = j.at("converged").get<bool>();
    m.irls_iterations = j.at("irls_iterations").get<int>();
    return m;
}

inline void save_model(const FittedModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path);
    out << model_to_json(m).dump(2) << "\n";
}

inline FittedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file " + path + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace fairfit

#endif
