// fairfit: fit and evaluate fairness-bounded (generalised) linear
// regression models over CSV files.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairfit/bias.hpp"
#include "fairfit/dataset.hpp"
#include "fairfit/evaluation.hpp"
#include "fairfit/frrm.hpp"
#include "fairfit/glm.hpp"
#include "fairfit/model.hpp"
#include "fairfit/synthetic.hpp"

namespace {

using namespace fairfit;

std::vector<double> parse_double_list(const std::string& text, const std::string& option) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError(option, "'" + item + "' is not a number");
        }
    }
    if (out.empty()) throw CLI::ValidationError(option, "empty list");
    return out;
}

// Either a comma list of values or log:LO:HI:COUNT for a geometric grid.
std::vector<double> parse_lambda_grid(const std::string& text) {
    if (text.rfind("log:", 0) == 0) {
        std::stringstream ss(text.substr(4));
        std::string lo_s, hi_s, count_s;
        if (!std::getline(ss, lo_s, ':') || !std::getline(ss, hi_s, ':') ||
            !std::getline(ss, count_s, ':'))
            throw CLI::ValidationError("--lambda-grid", "expected log:LO:HI:COUNT");
        const double lo = std::stod(lo_s), hi = std::stod(hi_s);
        const int count = std::stoi(count_s);
        if (lo <= 0.0 || hi <= lo || count < 2)
            throw CLI::ValidationError("--lambda-grid", "need 0 < LO < HI and COUNT >= 2");
        std::vector<double> grid(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i)
            grid[static_cast<std::size_t>(i)] =
                lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
        return grid;
    }
    return parse_double_list(text, "--lambda-grid");
}

FairnessSpec spec_from_flags(const std::string& definition, double r, double w, bool w_given) {
    FairnessSpec spec;
    spec.r = r;
    if (definition == "sp") spec.definition = Definition::sp;
    else if (definition == "eo") spec.definition = Definition::eo;
    else if (definition == "if") spec.definition = Definition::individual;
    else if (definition == "max") {
        spec.definition = Definition::composite;
        spec.combine = Combine::max_of;
    } else if (definition == "convex") {
        spec.definition = Definition::composite;
        spec.combine = Combine::convex;
    } else {
        throw CLI::ValidationError("--definition", "must be one of sp|eo|if|max|convex");
    }
    if (definition == "convex") {
        if (!w_given) throw CLI::ValidationError("--w", "required when --definition convex");
        if (!(w > 0.0 && w < 1.0)) throw CLI::ValidationError("--w", "must lie in (0, 1)");
        spec.w = w;
    } else if (w_given) {
        throw CLI::ValidationError("--w", "only meaningful with --definition convex");
    }
    return spec;
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << contents;
}

// Loads a CSV for prediction, typing each column the way the model's
// codecs expect. Rows with missing values in required columns are
// dropped (and reported on stderr).
RawDataset load_for_model(const std::string& path, const FittedModel& model) {
    const CsvTable table = read_csv(path);
    std::vector<const ColumnCodec*> needed;
    for (const auto& c : model.s_codec.columns) needed.push_back(&c);
    for (const auto& c : model.x_codec.columns) needed.push_back(&c);

    std::vector<std::size_t> col_index(needed.size());
    for (std::size_t k = 0; k < needed.size(); ++k) {
        bool found = false;
        for (std::size_t j = 0; j < table.header.size(); ++j) {
            if (table.header[j] == needed[k]->name) {
                col_index[k] = j;
                found = true;
                break;
            }
        }
        if (!found) throw DataError(path + ": missing column '" + needed[k]->name + "'");
    }

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        bool missing = false;
        for (std::size_t j : col_index)
            if (table.rows[i][j].empty() || table.rows[i][j] == "NA") missing = true;
        if (!missing) kept.push_back(i);
    }
    if (kept.size() < table.rows.size())
        std::cerr << "fairfit: dropped " << table.rows.size() - kept.size()
                  << " rows with missing values\n";
    if (kept.empty()) throw DataError(path + ": no complete rows to predict on");

    RawDataset out;
    out.n = static_cast<Index>(kept.size());
    for (std::size_t k = 0; k < needed.size(); ++k) {
        RawColumn col;
        col.name = needed[k]->name;
        col.numeric = needed[k]->numeric;
        for (std::size_t i : kept) {
            const std::string& field = table.rows[i][col_index[k]];
            if (col.numeric) {
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(field, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != field.size())
                    throw DataError(path + ": column '" + col.name + "': cannot parse '" + field +
                                    "' as a number");
                col.values.push_back(v);
            } else {
                col.labels.push_back(field);
            }
        }
        out.columns.push_back(std::move(col));
    }
    return out;
}

struct FitFlags {
    std::string data, schema_path, out;
    std::string definition = "sp";
    std::string family = "gaussian";
    double r = 0.0;
    double w = 0.5;
    double lambda2 = 0.0;
};

void add_fit_flags(CLI::App* cmd, FitFlags& flags, bool with_r) {
    cmd->add_option("--data", flags.data, "input CSV file")->required();
    cmd->add_option("--schema", flags.schema_path, "schema JSON file")->required();
    if (with_r)
        cmd->add_option("--r", flags.r, "fairness bound in [0, 1]")
            ->required()
            ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--definition", flags.definition, "sp|eo|if|max|convex")
        ->check(CLI::IsMember({"sp", "eo", "if", "max", "convex"}));
    cmd->add_option("--w", flags.w, "convex combination weight on SP");
    cmd->add_option("--lambda2", flags.lambda2, "ridge penalty on the predictor block")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--family", flags.family, "gaussian|binomial|poisson")
        ->check(CLI::IsMember({"gaussian", "binomial", "poisson"}));
}

int run_cli(int argc, char** argv) {
    CLI::App app{"fairness-bounded ridge regression models"};
    app.require_subcommand(1);

    // fit
    FitFlags fit_flags;
    auto* fit_cmd = app.add_subcommand("fit", "fit one model at a fairness bound r");
    add_fit_flags(fit_cmd, fit_flags, true);
    fit_cmd->add_option("--out", fit_flags.out, "output model JSON")->required();

    // predict
    std::string predict_model, predict_data, predict_out;
    auto* predict_cmd = app.add_subcommand("predict", "score new data with a fitted model");
    predict_cmd->add_option("--model", predict_model, "model JSON from fit")->required();
    predict_cmd->add_option("--data", predict_data, "input CSV file")->required();
    predict_cmd->add_option("--out", predict_out, "output CSV of predictions")->required();

    // profile
    FitFlags profile_flags;
    std::string profile_grid = "0,0.01,0.02,0.05,0.1,0.2,0.5";
    auto* profile_cmd = app.add_subcommand("profile", "coefficient paths over an r grid");
    add_fit_flags(profile_cmd, profile_flags, false);
    profile_cmd->add_option("--r-grid", profile_grid, "comma-separated r values");
    profile_cmd->add_option("--out", profile_flags.out, "output CSV")->required();

    // cv
    FitFlags cv_flags;
    std::string cv_grid = "0,0.01,0.02,0.05,0.1,0.2,0.5";
    int cv_folds = 10, cv_runs = 10;
    std::uint64_t cv_seed = 0;
    std::string cv_json;
    auto* cv_cmd = app.add_subcommand("cv", "repeated k-fold cross-validation over an r grid");
    add_fit_flags(cv_cmd, cv_flags, false);
    cv_cmd->add_option("--r-grid", cv_grid, "comma-separated r values");
    cv_cmd->add_option("--folds", cv_folds, "folds per run")->check(CLI::Range(2, 1000000));
    cv_cmd->add_option("--runs", cv_runs, "repetitions")->check(CLI::PositiveNumber);
    cv_cmd->add_option("--seed", cv_seed, "RNG seed for fold assignment");
    cv_cmd->add_option("--out", cv_flags.out, "per-cell CSV report")->required();
    cv_cmd->add_option("--json", cv_json, "optional aggregate JSON report");

    // bias-demo
    Index bias_n = 1000;
    std::uint64_t bias_seed = 1;
    std::string bias_r_list = "0.01,0.02,0.05,0.1";
    std::string bias_lambda_grid = "log:1:10000:25";
    std::string bias_out;
    auto* bias_cmd = app.add_subcommand(
        "bias-demo", "ridge-decorrelation bias curve on the synthetic linear example");
    bias_cmd->add_option("--n", bias_n, "sample size")->check(CLI::Range(Index{10}, Index{10000000}));
    bias_cmd->add_option("--seed", bias_seed, "RNG seed");
    bias_cmd->add_option("--r-list", bias_r_list, "comma-separated r values in (0, 1)");
    bias_cmd->add_option("--lambda-grid", bias_lambda_grid,
                         "comma list or log:LO:HI:COUNT decorrelation penalties");
    bias_cmd->add_option("--out", bias_out, "output CSV")->required();

    // synth
    int synth_id = 1;
    Index synth_n = 1000;
    std::uint64_t synth_seed = 1;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "draw a synthetic benchmark data set");
    synth_cmd->add_option("--example", synth_id, "1 (linear) or 2 (logistic)")
        ->check(CLI::IsMember({1, 2}));
    synth_cmd->add_option("--n", synth_n, "sample size")->check(CLI::Range(Index{10}, Index{10000000}));
    synth_cmd->add_option("--seed", synth_seed, "RNG seed");
    synth_cmd->add_option("--out", synth_out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints the message (or help text)
        return code == 0 ? 0 : 1;
    }

    if (fit_cmd->parsed()) {
        const FairnessSpec spec = spec_from_flags(fit_flags.definition, fit_flags.r, fit_flags.w,
                                                  fit_cmd->count("--w") > 0);
        const Family family = family_from_name(fit_flags.family);
        if (family != Family::gaussian && spec.definition != Definition::sp)
            throw CLI::ValidationError("--definition",
                                       "only sp is available for family " + fit_flags.family);
        if (family != Family::gaussian && fit_flags.lambda2 != 0.0)
            throw CLI::ValidationError("--lambda2", "only available for --family gaussian");
        const Schema schema = load_schema(fit_flags.schema_path);
        const RawDataset raw = load_csv(fit_flags.data, schema);
        if (raw.dropped_rows > 0)
            std::cerr << "fairfit: dropped " << raw.dropped_rows << " rows with missing values\n";
        const ModelMatrices mm = encode(raw, schema);
        const FittedModel model = family == Family::gaussian
                                      ? fit_frrm(mm, spec, fit_flags.lambda2)
                                      : fit_fgrrm(mm, spec, family);
        save_model(model, fit_flags.out);
        std::cerr << "fairfit: lambda_r = " << model.lambda_r << ", achieved "
                  << definition_name(spec.definition) << " = " << model.achieved << "\n";
        return 0;
    }

    if (predict_cmd->parsed()) {
        const FittedModel model = load_model(predict_model);
        const RawDataset raw = load_for_model(predict_data, model);
        const Vector preds = predict(model, raw);
        std::ostringstream os;
        os << "prediction\n";
        for (Index i = 0; i < preds.size(); ++i) os << format_double(preds(i)) << "\n";
        write_file(predict_out, os.str());
        return 0;
    }

    if (profile_cmd->parsed()) {
        const FairnessSpec spec = spec_from_flags(profile_flags.definition, 0.0, profile_flags.w,
                                                  profile_cmd->count("--w") > 0);
        const Family family = family_from_name(profile_flags.family);
        if (family != Family::gaussian && spec.definition != Definition::sp)
            throw CLI::ValidationError("--definition",
                                       "only sp is available for family " + profile_flags.family);
        const Schema schema = load_schema(profile_flags.schema_path);
        const RawDataset raw = load_csv(profile_flags.data, schema);
        const auto grid = parse_double_list(profile_grid, "--r-grid");
        for (double r : grid)
            if (!(r >= 0.0 && r <= 1.0))
                throw CLI::ValidationError("--r-grid", "values must lie in [0, 1]");
        const ProfileSweep sweep =
            profile_sweep(raw, schema, grid, spec, family, profile_flags.lambda2);
        std::ostringstream os;
        sweep.to_csv(os);
        write_file(profile_flags.out, os.str());
        return 0;
    }

    if (cv_cmd->parsed()) {
        const FairnessSpec spec = spec_from_flags(cv_flags.definition, 0.0, cv_flags.w,
                                                  cv_cmd->count("--w") > 0);
        const Family family = family_from_name(cv_flags.family);
        if (family != Family::gaussian && spec.definition != Definition::sp)
            throw CLI::ValidationError("--definition",
                                       "only sp is available for family " + cv_flags.family);
        const Schema schema = load_schema(cv_flags.schema_path);
        const RawDataset raw = load_csv(cv_flags.data, schema);
        CvConfig config;
        config.folds = cv_folds;
        config.runs = cv_runs;
        config.seed = cv_seed;
        config.r_grid = parse_double_list(cv_grid, "--r-grid");
        config.family = family;
        config.spec = spec;
        config.lambda2 = cv_flags.lambda2;
        config.workers = env_worker_count();
        const CvReport report = kfold_cv(raw, schema, config);
        std::ostringstream os;
        report.to_csv(os);
        write_file(cv_flags.out, os.str());
        if (!cv_json.empty()) write_file(cv_json, report.aggregates().dump(2) + "\n");
        return 0;
    }

    if (bias_cmd->parsed()) {
        const auto r_list = parse_double_list(bias_r_list, "--r-list");
        for (double r : r_list)
            if (!(r > 0.0 && r < 1.0))
                throw CLI::ValidationError("--r-list", "values must lie strictly in (0, 1)");
        const auto lambda_grid = parse_lambda_grid(bias_lambda_grid);
        const RawDataset raw = synth_example(1, bias_n, bias_seed);
        const ModelMatrices mm = encode(raw, synth_schema());
        const BiasCurve curve = bias_ratio_curve(mm, r_list, lambda_grid);
        std::ostringstream os;
        curve.to_csv(os);
        write_file(bias_out, os.str());
        std::cerr << "fairfit: CV-optimal lambda band [" << curve.cv_lambda_lo << ", "
                  << curve.cv_lambda_hi << "]\n";
        return 0;
    }

    if (synth_cmd->parsed()) {
        const RawDataset raw = synth_example(synth_id, synth_n, synth_seed);
        std::ostringstream os;
        write_csv(raw, os);
        write_file(synth_out, os.str());
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const CLI::ParseError& e) {
        // option validation done after parsing (e.g. --w without convex)
        std::cerr << "fairfit: " << e.what() << "\n";
        return 1;
    } catch (const fairfit::DataError& e) {
        std::cerr << "fairfit: data error: " << e.what() << "\n";
        return 2;
    } catch (const fairfit::SolverError& e) {
        std::cerr << "fairfit: solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "fairfit: " << e.what() << "\n";
        return 3;
    }
}
