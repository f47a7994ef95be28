#include "bkmr/persistence.hpp"

#include "bkmr/csv.hpp"
#include "bkmr/errors.hpp"

#include <fstream>

namespace bkmr {

namespace {

Json vec(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd to_vec(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

// Column-major list of columns.
Json mat(const MatrixXd& m) {
    Json cols = Json::array();
    for (Index c = 0; c < m.cols(); ++c) cols.push_back(vec(m.col(c)));
    return cols;
}

MatrixXd to_mat(const Json& j, Index rows) {
    MatrixXd m(rows, static_cast<Index>(j.size()));
    for (Index c = 0; c < m.cols(); ++c) {
        const VectorXd col = to_vec(j.at(static_cast<std::size_t>(c)));
        if (col.size() != rows) throw Error(ErrorCode::schema, "matrix column has the wrong length");
        m.col(c) = col;
    }
    return m;
}

const char* mode_name(KernelMode m) {
    return m == KernelMode::single_smoothness ? "single_smoothness" : "component_weights";
}

KernelMode parse_mode(const std::string& s) {
    if (s == "single_smoothness") return KernelMode::single_smoothness;
    if (s == "component_weights") return KernelMode::component_weights;
    throw Error(ErrorCode::schema, "unknown kernel mode '" + s + "'");
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, const PosteriorDraws& draws) {
    CsvWriter out(path);
    const bool weights = draws.draws.empty() || draws.draws.front().kernel.mode == KernelMode::component_weights;
    std::vector<std::string> header = {"draw"};
    for (const auto& b : draws.beta_names) header.push_back("beta_" + b);
    header.push_back("sigma2");
    header.push_back("lambda");
    if (weights) {
        for (const auto& k : draws.kernel_names) header.push_back("r_" + k);
        for (const auto& k : draws.kernel_names) header.push_back("delta_" + k);
    } else {
        header.push_back("rho");
    }
    out.row(header);
    for (std::size_t j = 0; j < draws.draws.size(); ++j) {
        const Draw& d = draws.draws[j];
        std::vector<std::string> row = {std::to_string(j)};
        for (Index p = 0; p < d.beta.size(); ++p) row.push_back(format_double(d.beta(p)));
        row.push_back(format_double(d.sigma2));
        row.push_back(format_double(d.lambda));
        if (weights) {
            for (Index l = 0; l < d.kernel.r.size(); ++l) row.push_back(format_double(d.kernel.r(l)));
            for (bool b : d.kernel.delta) row.push_back(b ? "1" : "0");
        } else {
            row.push_back(format_double(d.kernel.rho));
        }
        out.row(row);
    }
    out.close();
}

Json dataset_to_json(const Dataset& data) {
    Json j;
    const auto& nm = data.names();
    j["n"] = data.n();
    j["y"] = vec(data.y());
    j["z"] = mat(data.z());
    j["c"] = mat(data.c());
    j["modifiers"] = mat(data.modifiers());
    j["m"] = data.has_mediator() ? vec(data.m()) : Json(nullptr);
    j["names"] = {{"outcome", nm.outcome},
                  {"exposures", nm.exposures},
                  {"mediator", nm.mediator},
                  {"covariates", nm.covariates},
                  {"modifiers", nm.modifiers}};
    return j;
}

Dataset dataset_from_json(const Json& j) {
    try {
        const Index n = j.at("n").get<Index>();
        ColumnNames nm;
        const Json& names = j.at("names");
        nm.outcome = names.at("outcome").get<std::string>();
        nm.exposures = names.at("exposures").get<std::vector<std::string>>();
        nm.mediator = names.at("mediator").get<std::string>();
        nm.covariates = names.at("covariates").get<std::vector<std::string>>();
        nm.modifiers = names.at("modifiers").get<std::vector<std::string>>();
        std::optional<VectorXd> m;
        if (!j.at("m").is_null()) m = to_vec(j.at("m"));
        return Dataset(to_vec(j.at("y")), to_mat(j.at("z"), n), to_mat(j.at("c"), n), m,
                       to_mat(j.at("modifiers"), n), nm);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::schema, std::string("malformed dataset: ") + e.what());
    }
}

Json model_to_json(const PosteriorDraws& draws) {
    Json j;
    j["format"] = "bkmrcma-model";
    j["format_version"] = 1;
    j["data"] = dataset_to_json(*draws.data);
    j["spec"] = {{"include_mediator", draws.spec.include_mediator},
                 {"modifiers", draws.spec.modifiers},
                 {"intercept", draws.spec.intercept}};
    j["kernel_names"] = draws.kernel_names;
    j["beta_names"] = draws.beta_names;
    Json list = Json::array();
    for (const Draw& d : draws.draws) {
        Json e;
        e["beta"] = vec(d.beta);
        e["sigma2"] = d.sigma2;
        e["lambda"] = d.lambda;
        e["mode"] = mode_name(d.kernel.mode);
        if (d.kernel.mode == KernelMode::single_smoothness) {
            e["rho"] = d.kernel.rho;
        } else {
            e["r"] = vec(d.kernel.r);
        }
        list.push_back(std::move(e));
    }
    j["draws"] = std::move(list);
    j["diagnostics"] = diagnostics_to_json(draws);
    return j;
}

std::shared_ptr<const PosteriorDraws> model_from_json(const Json& j) {
    try {
        if (j.value("format", "") != "bkmrcma-model") throw Error(ErrorCode::schema, "not a saved model");
        auto out = std::make_shared<PosteriorDraws>();
        out->data = std::make_shared<const Dataset>(dataset_from_json(j.at("data")));
        out->spec.include_mediator = j.at("spec").at("include_mediator").get<bool>();
        out->spec.modifiers = j.at("spec").at("modifiers").get<std::vector<std::string>>();
        out->spec.intercept = j.at("spec").at("intercept").get<bool>();
        out->kernel_x = assemble_kernel_inputs(*out->data, out->spec);
        out->design = assemble_design(*out->data, out->spec);
        out->kernel_names = kernel_input_names(*out->data, out->spec);
        out->beta_names = design_names(*out->data, out->spec);
        const Index dim = out->kernel_x.cols();
        for (const Json& e : j.at("draws")) {
            Draw d;
            d.beta = to_vec(e.at("beta"));
            d.sigma2 = e.at("sigma2").get<double>();
            d.lambda = e.at("lambda").get<double>();
            if (parse_mode(e.at("mode").get<std::string>()) == KernelMode::single_smoothness) {
                d.kernel = KernelState::smoothness(e.at("rho").get<double>(), dim);
            } else {
                d.kernel = KernelState::weights(to_vec(e.at("r")));
            }
            if (d.beta.size() != out->design.cols() || d.kernel.dim() != dim) {
                throw Error(ErrorCode::schema, "saved draw does not match the model dimensions");
            }
            out->draws.push_back(std::move(d));
        }
        const Json& diag = j.at("diagnostics");
        out->diagnostics.acceptance = diag.at("acceptance").get<std::map<std::string, double>>();
        out->diagnostics.final_step = diag.at("final_step").get<std::map<std::string, double>>();
        out->diagnostics.warnings = diag.at("warnings").get<std::vector<std::string>>();
        if (diag.contains("inclusion_probability")) {
            const auto& pip = diag.at("inclusion_probability");
            out->diagnostics.inclusion_probability.resize(static_cast<Index>(out->kernel_names.size()));
            for (std::size_t l = 0; l < out->kernel_names.size(); ++l) {
                out->diagnostics.inclusion_probability(static_cast<Index>(l)) =
                    pip.at(out->kernel_names[l]).get<double>();
            }
        }
        return out;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::schema, std::string("malformed model file: ") + e.what());
    }
}

Json diagnostics_to_json(const PosteriorDraws& draws) {
    const auto& d = draws.diagnostics;
    Json j;
    j["acceptance"] = d.acceptance;
    j["final_step"] = d.final_step;
    j["warnings"] = d.warnings;
    j["retained_draws"] = draws.draws.size();
    if (d.inclusion_probability.size() == static_cast<Index>(draws.kernel_names.size())) {
        Json pip = Json::object();
        for (std::size_t l = 0; l < draws.kernel_names.size(); ++l) {
            pip[draws.kernel_names[l]] = d.inclusion_probability(static_cast<Index>(l));
        }
        j["inclusion_probability"] = pip;
    }
    return j;
}

void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    out.close();
    if (out.fail()) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::schema, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void save_model(const std::filesystem::path& path, const PosteriorDraws& draws) {
    write_json(path, model_to_json(draws));
}

std::shared_ptr<const PosteriorDraws> load_model(const std::filesystem::path& path) {
    return model_from_json(read_json(path));
}

}  // namespace bkmr
