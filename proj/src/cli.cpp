#include "bkmr/cli.hpp"

#include "bkmr/errors.hpp"
#include "bkmr/mediation.hpp"
#include "bkmr/parametric.hpp"
#include "bkmr/simulation.hpp"
#include "bkmr/summary.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace bkmr {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// ingestion

double ColumnTransform::apply(double raw) const {
    double v = raw;
    if (log) {
        if (!(raw > 0)) throw Error(ErrorCode::input, "cannot log-transform nonpositive value in '" + column + "'");
        v = std::log(raw);
    }
    if (center) v -= mean;
    if (scale) v /= sd;
    return v;
}

double ColumnTransform::invert(double value) const {
    double v = value;
    if (scale) v *= sd;
    if (center) v += mean;
    if (log) v = std::exp(v);
    return v;
}

Json ColumnTransform::to_json() const {
    return {{"column", column}, {"log", log}, {"center", center}, {"scale", scale}, {"mean", mean}, {"sd", sd}};
}

void ColumnRoles::validate(const CsvTable& table) const {
    if (outcome.empty()) throw Error(ErrorCode::input, "an outcome column is required");
    if (exposures.empty()) throw Error(ErrorCode::input, "at least one exposure column is required");
    std::set<std::string> seen;
    auto claim = [&](const std::string& col, const char* role) {
        if (!table.has_column(col)) {
            throw Error(ErrorCode::schema, std::string(role) + " column '" + col + "' not found in the data");
        }
        if (!seen.insert(col).second) throw Error(ErrorCode::input, "column '" + col + "' is assigned more than one role");
    };
    claim(outcome, "outcome");
    for (const auto& c : exposures) claim(c, "exposure");
    if (!mediator.empty()) claim(mediator, "mediator");
    for (const auto& c : covariates) claim(c, "covariate");
    for (const auto& c : modifiers) claim(c, "modifier");
}

const ColumnTransform& LoadedData::transform(const std::string& column) const {
    for (const auto& t : transforms) {
        if (t.column == column) return t;
    }
    throw Error(ErrorCode::schema, "no column '" + column + "' in the loaded data");
}

namespace {

std::set<std::string> expand(const std::vector<std::string>& cols, const ColumnRoles& roles) {
    std::set<std::string> out;
    for (const auto& c : cols) {
        if (c == "exposures") {
            out.insert(roles.exposures.begin(), roles.exposures.end());
        } else {
            out.insert(c);
        }
    }
    return out;
}

std::vector<double> sorted_copy(const VectorXd& v) {
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end());
    return s;
}

}  // namespace

LoadedData load_dataset(const CsvTable& table, const ColumnRoles& roles, const TransformFlags& flags) {
    roles.validate(table);
    const auto logs = expand(flags.log, roles), centers = expand(flags.center, roles), scales = expand(flags.scale, roles);
    std::vector<std::string> all = {roles.outcome};
    all.insert(all.end(), roles.exposures.begin(), roles.exposures.end());
    if (!roles.mediator.empty()) all.push_back(roles.mediator);
    all.insert(all.end(), roles.covariates.begin(), roles.covariates.end());
    all.insert(all.end(), roles.modifiers.begin(), roles.modifiers.end());
    for (const auto* set : {&logs, &centers, &scales}) {
        for (const auto& c : *set) {
            if (std::find(all.begin(), all.end(), c) == all.end()) {
                throw Error(ErrorCode::input, "transform names column '" + c + "', which has no role");
            }
        }
    }
    if (table.rows.size() < 2) throw Error(ErrorCode::input, "need at least two data rows");

    LoadedData out;
    std::map<std::string, VectorXd> columns;
    for (const auto& name : all) {
        ColumnTransform t;
        t.column = name;
        t.log = logs.count(name) > 0;
        t.center = centers.count(name) > 0;
        t.scale = scales.count(name) > 0;
        std::vector<double> raw = table.numeric_column(name);
        VectorXd v(static_cast<Index>(raw.size()));
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (t.log && !(raw[i] > 0)) {
                throw Error(ErrorCode::input, "cannot log-transform nonpositive value in '" + name + "' row " +
                                                  std::to_string(i + 1));
            }
            v(static_cast<Index>(i)) = t.log ? std::log(raw[i]) : raw[i];
        }
        t.mean = v.mean();
        t.sd = std::sqrt((v.array() - t.mean).square().sum() / static_cast<double>(v.size() - 1));
        if (t.scale && !(t.sd > 0)) throw Error(ErrorCode::input, "cannot scale constant column '" + name + "'");
        if (t.center) v.array() -= t.mean;
        if (t.scale) v /= t.sd;
        columns[name] = std::move(v);
        out.transforms.push_back(t);
    }

    const Index n = static_cast<Index>(table.rows.size());
    auto block = [&](const std::vector<std::string>& names) {
        MatrixXd m(n, static_cast<Index>(names.size()));
        for (std::size_t k = 0; k < names.size(); ++k) m.col(static_cast<Index>(k)) = columns[names[k]];
        return m;
    };
    ColumnNames names;
    names.outcome = roles.outcome;
    names.exposures = roles.exposures;
    names.mediator = roles.mediator.empty() ? "m" : roles.mediator;
    names.covariates = roles.covariates;
    names.modifiers = roles.modifiers;
    std::optional<VectorXd> m;
    if (!roles.mediator.empty()) m = columns[roles.mediator];
    out.data = std::make_shared<const Dataset>(columns[roles.outcome], block(roles.exposures), block(roles.covariates),
                                               m, block(roles.modifiers), names);
    return out;
}

Json ResolvedContrast::to_json() const {
    Json j;
    j["z_star"] = std::vector<double>(z_star.data(), z_star.data() + z_star.size());
    j["z"] = std::vector<double>(z.data(), z.data() + z.size());
    j["m_values"] = m_values;
    j["m_values_raw"] = m_values_raw;
    j["modifier_values"] = modifier_values;
    return j;
}

ResolvedContrast resolve_contrast(const LoadedData& loaded, const ContrastInput& input) {
    const Dataset& d = *loaded.data;
    const Index L = d.num_exposures();
    const auto& names = d.names();
    ResolvedContrast rc;
    rc.z_star.resize(L);
    rc.z.resize(L);
    if (input.z_star_raw.empty() != input.z_raw.empty()) {
        throw Error(ErrorCode::input, "give both --z-star and --z, or neither");
    }
    if (!input.z_raw.empty()) {
        if (static_cast<Index>(input.z_star_raw.size()) != L || static_cast<Index>(input.z_raw.size()) != L) {
            throw Error(ErrorCode::input, "contrast values need one entry per exposure (" + std::to_string(L) + ")");
        }
        for (Index l = 0; l < L; ++l) {
            const auto& t = loaded.transform(names.exposures[static_cast<std::size_t>(l)]);
            rc.z_star(l) = t.apply(input.z_star_raw[static_cast<std::size_t>(l)]);
            rc.z(l) = t.apply(input.z_raw[static_cast<std::size_t>(l)]);
        }
    } else {
        for (double q : {input.q_star, input.q}) {
            if (!(q >= 0 && q <= 1)) throw Error(ErrorCode::input, "contrast quantiles must lie in [0, 1]");
        }
        for (Index l = 0; l < L; ++l) {
            const auto s = sorted_copy(d.z().col(l));
            rc.z_star(l) = quantile_sorted(s, input.q_star);
            rc.z(l) = quantile_sorted(s, input.q);
        }
    }

    if (!input.m_raw.empty() || !input.m_quantiles.empty()) {
        if (!d.has_mediator()) throw Error(ErrorCode::schema, "mediator levels need a mediator column");
        const auto& t = loaded.transform(names.mediator);
        for (double raw : input.m_raw) {
            rc.m_values.push_back(t.apply(raw));
            rc.m_values_raw.push_back(raw);
        }
        const auto s = sorted_copy(d.m());
        for (double q : input.m_quantiles) {
            if (!(q >= 0 && q <= 1)) throw Error(ErrorCode::input, "mediator quantiles must lie in [0, 1]");
            const double v = quantile_sorted(s, q);
            rc.m_values.push_back(v);
            rc.m_values_raw.push_back(t.invert(v));
        }
    }

    for (const auto& [name, raw] : input.modifiers_raw) {
        d.modifier_index(name);
        rc.modifier_values[name] = loaded.transform(name).apply(raw);
    }
    for (Index k = 0; k < d.num_modifiers(); ++k) {
        const auto& name = names.modifiers[static_cast<std::size_t>(k)];
        if (!rc.modifier_values.count(name)) rc.modifier_values[name] = d.modifiers().col(k).mean();
    }
    return rc;
}

// ---------------------------------------------------------------------------
// report

namespace {

struct ResultRow {
    std::string scenario, L, method, effect, m_value, statistic, value;
};

const std::vector<std::string> kResultHeader = {"scenario", "L", "method", "effect", "m_value", "statistic", "value"};

std::vector<ResultRow> read_results(const fs::path& path) {
    const CsvTable t = read_csv(path);
    std::vector<std::size_t> idx;
    for (const auto& h : kResultHeader) idx.push_back(t.column(h));
    std::vector<ResultRow> out;
    for (const auto& r : t.rows) {
        out.push_back({r[idx[0]], r[idx[1]], r[idx[2]], r[idx[3]], r[idx[4]], r[idx[5]], r[idx[6]]});
    }
    return out;
}

}  // namespace

ReportCounts write_report(const std::vector<fs::path>& inputs, const fs::path& out_dir) {
    if (inputs.empty()) throw Error(ErrorCode::input, "report needs at least one results file");
    fs::create_directories(out_dir);
    std::vector<ResultRow> rows;
    for (const auto& p : inputs) {
        auto part = read_results(p);
        rows.insert(rows.end(), part.begin(), part.end());
    }

    ReportCounts counts;
    CsvWriter merged(out_dir / "results_merged.csv");
    merged.row(kResultHeader);
    for (const auto& r : rows) merged.row({r.scenario, r.L, r.method, r.effect, r.m_value, r.statistic, r.value});
    merged.close();
    counts.merged_rows = rows.size();

    // One cell per (scenario, L, method, effect, m_value), in first-seen order.
    using Key = std::vector<std::string>;
    std::vector<Key> order;
    std::map<Key, std::map<std::string, std::string>> cells;
    for (const auto& r : rows) {
        Key key = {r.scenario, r.L, r.method, r.effect, r.m_value};
        if (!cells.count(key)) order.push_back(key);
        cells[key][r.statistic] = r.value;
    }
    auto stat = [](const std::map<std::string, std::string>& s, const std::string& name) {
        auto it = s.find(name);
        return it == s.end() ? std::string() : it->second;
    };

    CsvWriter eff_ci(out_dir / "fig_effects_ci.csv"), eff_rmse(out_dir / "fig_effects_rmse.csv");
    CsvWriter cde_ci(out_dir / "fig_cde_ci.csv"), cde_rmse(out_dir / "fig_cde_rmse.csv");
    eff_ci.row({"scenario", "L", "method", "effect", "median", "lower", "upper", "truth"});
    eff_rmse.row({"scenario", "L", "method", "effect", "rmse", "bias"});
    cde_ci.row({"scenario", "L", "method", "m_value", "median", "lower", "upper", "truth"});
    cde_rmse.row({"scenario", "L", "method", "m_value", "rmse", "bias"});
    for (const auto& key : order) {
        const auto& s = cells[key];
        if (key[3] == "CDE") {
            cde_ci.row({key[0], key[1], key[2], key[4], stat(s, "median"), stat(s, "lower"), stat(s, "upper"),
                        stat(s, "truth")});
            cde_rmse.row({key[0], key[1], key[2], key[4], stat(s, "rmse"), stat(s, "bias")});
            ++counts.cde_ci_rows;
            ++counts.cde_rmse_rows;
        } else {
            eff_ci.row({key[0], key[1], key[2], key[3], stat(s, "median"), stat(s, "lower"), stat(s, "upper"),
                        stat(s, "truth")});
            eff_rmse.row({key[0], key[1], key[2], key[3], stat(s, "rmse"), stat(s, "bias")});
            ++counts.effects_ci_rows;
            ++counts.effects_rmse_rows;
        }
    }
    eff_ci.close();
    eff_rmse.close();
    cde_ci.close();
    cde_rmse.close();
    return counts;
}

// ---------------------------------------------------------------------------
// command line

namespace {

struct GlobalOptions {
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out_dir = ".";
};

struct DataOptions {
    std::string path;
    ColumnRoles roles;
    TransformFlags transforms;

    void add(CLI::App* app, bool mediator_required) {
        app->add_option("--data", path, "CSV file with a header row")->required()->check(CLI::ExistingFile);
        app->add_option("--outcome", roles.outcome, "Outcome column")->required();
        app->add_option("--exposures", roles.exposures, "Exposure columns")->required()->delimiter(',');
        auto* m = app->add_option("--mediator", roles.mediator, "Mediator column");
        if (mediator_required) m->required();
        app->add_option("--covariates", roles.covariates, "Linear covariate columns")->delimiter(',');
        app->add_option("--modifiers", roles.modifiers, "Effect-modifier columns")->delimiter(',');
        app->add_option("--log", transforms.log, "Columns to log-transform ('exposures' for all)")->delimiter(',');
        app->add_option("--center", transforms.center, "Columns to center")->delimiter(',');
        app->add_option("--scale", transforms.scale, "Columns to scale to unit sd")->delimiter(',');
    }

    Json to_json() const {
        return {{"data", path},
                {"outcome", roles.outcome},
                {"exposures", roles.exposures},
                {"mediator", roles.mediator},
                {"covariates", roles.covariates},
                {"modifiers", roles.modifiers},
                {"log", transforms.log},
                {"center", transforms.center},
                {"scale", transforms.scale}};
    }
};

struct SamplerOptions {
    McmcConfig mcmc;
    PriorConfig priors;
    int burn_in = -1;
    std::string kernel_mode = "weights";
    bool no_adapt = false;

    void add(CLI::App* app) {
        app->add_option("--iterations", mcmc.iterations, "MCMC iterations")->capture_default_str();
        app->add_option("--burn-in", burn_in, "Burn-in iterations (default: half)");
        app->add_option("--thin", mcmc.thin, "Keep every k-th draw after burn-in")->capture_default_str();
        app->add_option("--kernel-mode", kernel_mode, "weights or smoothness")
            ->check(CLI::IsMember({"weights", "smoothness"}))
            ->capture_default_str();
        app->add_flag("--no-adapt", no_adapt, "Disable step-size adaptation during burn-in");
        app->add_option("--birth-sd", mcmc.birth_sd, "Half-normal scale for switched-on r")->capture_default_str();
        app->add_option("--a-sigma", priors.a_sigma, "Gamma shape for 1/sigma^2")->capture_default_str();
        app->add_option("--b-sigma", priors.b_sigma, "Gamma rate for 1/sigma^2")->capture_default_str();
        app->add_option("--lambda-mean", priors.mu_lambda, "Prior mean of lambda")->capture_default_str();
        app->add_option("--lambda-var", priors.var_lambda, "Prior variance of lambda")->capture_default_str();
        app->add_option("--rho-upper", priors.rho_upper, "Upper bound of the rho prior")->capture_default_str();
        app->add_option("--pi-inclusion", priors.pi_inclusion, "Prior inclusion probability")->capture_default_str();
        app->add_option("--slab-shape", priors.slab_shape, "Slab Gamma shape")->capture_default_str();
        app->add_option("--slab-rate", priors.slab_rate, "Slab Gamma rate")->capture_default_str();
    }

    McmcConfig resolved() const {
        McmcConfig c = mcmc;
        if (burn_in >= 0) c.burn_in = burn_in;
        c.kernel_mode = kernel_mode == "smoothness" ? KernelMode::single_smoothness : KernelMode::component_weights;
        c.adapt = !no_adapt;
        return c;
    }

    Json to_json() const {
        const McmcConfig c = resolved();
        return {{"iterations", c.iterations},
                {"burn_in", c.resolved_burn_in()},
                {"thin", c.thin},
                {"kernel_mode", kernel_mode},
                {"adapt", c.adapt},
                {"birth_sd", c.birth_sd},
                {"a_sigma", priors.a_sigma},
                {"b_sigma", priors.b_sigma},
                {"lambda_mean", priors.mu_lambda},
                {"lambda_var", priors.var_lambda},
                {"rho_upper", priors.rho_upper},
                {"pi_inclusion", priors.pi_inclusion},
                {"slab_shape", priors.slab_shape},
                {"slab_rate", priors.slab_rate}};
    }
};

struct ContrastOptions {
    ContrastInput input;
    std::vector<double> quantiles;
    std::vector<std::string> modifier_values;

    void add(CLI::App* app, bool quantile_default_m) {
        app->add_option("--z-star", input.z_star_raw, "Reference exposure values (raw scale)")->delimiter(',');
        app->add_option("--z", input.z_raw, "Index exposure values (raw scale)")->delimiter(',');
        app->add_option("--quantiles", quantiles, "Reference and index quantiles, e.g. 0.25,0.75")
            ->delimiter(',')
            ->expected(2);
        app->add_option("--m-values", input.m_raw, "Mediator levels for CDEs (raw scale)")->delimiter(',');
        app->add_option("--m-quantiles", input.m_quantiles, "Mediator levels for CDEs as quantiles")->delimiter(',');
        app->add_option("--modifier-values", modifier_values, "name=value (raw scale)")->delimiter(',');
        quantile_default_m_ = quantile_default_m;
    }

    ContrastInput resolved() const {
        ContrastInput in = input;
        if (quantiles.size() == 2) {
            in.q_star = quantiles[0];
            in.q = quantiles[1];
        }
        if (quantile_default_m_ && in.m_raw.empty() && in.m_quantiles.empty()) in.m_quantiles = {0.25, 0.5, 0.75};
        for (const auto& kv : modifier_values) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::input, "modifier value '" + kv + "' is not name=value");
            try {
                in.modifiers_raw[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
            } catch (const std::exception&) {
                throw Error(ErrorCode::input, "modifier value '" + kv + "' is not numeric");
            }
        }
        return in;
    }

    bool quantile_default_m_ = false;
};

struct EffectsOptions {
    std::vector<std::string> methods = {"bkmr-cma"};
    std::vector<std::string> kernel_modifiers;
    bool kernel_modifiers_set = false;
    int k_inner = 100;
    std::string surface_mode = "mean";
    bool no_mediator_noise = false;
    bool te_from_mediation = false;
    bool bootstrap = false;
    int bootstrap_resamples = 500;
    std::vector<std::string> extra_terms;
    std::string effect_scale = "model";
    std::string mediator_model, outcome_model, total_model;

    void add(CLI::App* app, bool full) {
        app->add_option("--methods", methods, "bkmr-cma, bkmr-cma-vs, linear, linear-noint, traditional")
            ->delimiter(',')
            ->check(CLI::IsMember({"bkmr-cma", "bkmr-cma-vs", "linear", "linear-noint", "traditional"}));
        app->add_option("--kernel-modifiers", kernel_modifiers, "Modifiers entering the kernels (default: all)")
            ->delimiter(',');
        app->add_option("--k-inner", k_inner, "Simulated mediators per draw")->capture_default_str();
        app->add_option("--surface-mode", surface_mode, "mean or draw")
            ->check(CLI::IsMember({"mean", "draw"}))
            ->capture_default_str();
        app->add_flag("--bootstrap", bootstrap, "Bootstrap intervals for the linear methods");
        app->add_option("--bootstrap-resamples", bootstrap_resamples, "Bootstrap resamples")->capture_default_str();
        app->add_option("--extra-terms", extra_terms, "Extra linear outcome terms, e.g. age,age^2,age*Mn")
            ->delimiter(',');
        app->add_option("--effect-scale", effect_scale, "model or raw (undo outcome scaling)")
            ->check(CLI::IsMember({"model", "raw"}))
            ->capture_default_str();
        app->add_option("--outcome-model", outcome_model, "Saved outcome model (from fit)")->check(CLI::ExistingFile);
        if (full) {
            app->add_flag("--no-mediator-noise", no_mediator_noise, "Drop residual noise from simulated mediators");
            app->add_flag("--te-from-mediation", te_from_mediation,
                          "Total effect from the mediator and outcome models instead of a separate fit");
            app->add_option("--mediator-model", mediator_model, "Saved mediator model")->check(CLI::ExistingFile);
            app->add_option("--total-model", total_model, "Saved total-effect model")->check(CLI::ExistingFile);
        }
    }

    Json to_json() const {
        return {{"methods", methods},
                {"kernel_modifiers", kernel_modifiers},
                {"k_inner", k_inner},
                {"surface_mode", surface_mode},
                {"mediator_noise", !no_mediator_noise},
                {"te_from_mediation", te_from_mediation},
                {"bootstrap", bootstrap},
                {"bootstrap_resamples", bootstrap_resamples},
                {"extra_terms", extra_terms},
                {"effect_scale", effect_scale},
                {"mediator_model", mediator_model},
                {"outcome_model", outcome_model},
                {"total_model", total_model}};
    }
};

void prepare_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::io, "cannot create output directory '" + dir.string() + "'");
}

Json manifest(const std::string& subcommand, const GlobalOptions& g, Json config, const std::vector<std::string>& outputs) {
    Json j;
    j["tool"] = "bkmrcma";
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["seed"] = g.seed;
    j["threads"] = omp_get_max_threads();
    j["config"] = std::move(config);
    j["outputs"] = outputs;
    return j;
}

Json transforms_json(const LoadedData& loaded) {
    Json arr = Json::array();
    for (const auto& t : loaded.transforms) arr.push_back(t.to_json());
    return arr;
}

double effect_multiplier(const LoadedData& loaded, const std::string& scale) {
    if (scale == "model") return 1.0;
    const auto& t = loaded.transform(loaded.data->names().outcome);
    if (t.log) throw Error(ErrorCode::input, "effects on a log-transformed outcome cannot be put back on the raw scale");
    return t.scale ? t.sd : 1.0;
}

// Stable per-purpose streams.
constexpr std::uint64_t kFitStream = 0x666974;
constexpr std::uint64_t kMediateStream = 0x6d6564;

enum class ModelRole { mediator = 0, outcome = 1, total = 2 };

std::shared_ptr<const PosteriorDraws> fit_role(const std::shared_ptr<const Dataset>& data, ModelRole role,
                                               const std::vector<std::string>& modifiers, const SamplerOptions& so,
                                               bool variable_selection, std::uint64_t seed, std::ostream& err) {
    ModelSpec spec;
    spec.modifiers = modifiers;
    std::shared_ptr<const Dataset> d = data;
    if (role == ModelRole::mediator) {
        d = std::make_shared<const Dataset>(data->without_mediator().with_outcome(data->m(), data->names().mediator));
    } else if (role == ModelRole::outcome) {
        spec.include_mediator = true;
    } else {
        d = std::make_shared<const Dataset>(data->without_mediator());
    }
    McmcConfig c = so.resolved();
    c.seed = seed;
    c.stream = kFitStream + static_cast<std::uint64_t>(role) + (variable_selection ? 16 : 0);
    c.variable_selection = variable_selection;
    auto draws = std::make_shared<const PosteriorDraws>(fit_bkmr(d, spec, so.priors, c));
    for (const auto& w : draws->diagnostics.warnings) err << "warning: " << w << '\n';
    return draws;
}

struct EffectTable {
    std::vector<std::vector<std::string>> rows;
    Json summary = Json::array();

    void add_samples(const std::string& method, const std::string& effect, const std::optional<double>& m_raw,
                     const std::vector<double>& values, double mult) {
        const std::string mv = m_raw ? format_double(*m_raw) : std::string();
        std::vector<double> scaled;
        for (std::size_t j = 0; j < values.size(); ++j) {
            scaled.push_back(values[j] * mult);
            rows.push_back({method, effect, mv, std::to_string(j), format_double(scaled.back())});
        }
        Json s;
        s["method"] = method;
        s["effect"] = effect;
        s["m_value"] = m_raw ? Json(*m_raw) : Json(nullptr);
        s["count"] = scaled.size();
        if (scaled.size() >= 2) {
            const auto e = summarize(scaled);
            s["mean"] = e.mean;
            s["median"] = e.median;
            s["lower"] = e.lower;
            s["upper"] = e.upper;
            s["sd"] = e.sd;
        } else {
            s["estimate"] = scaled.empty() ? Json(nullptr) : Json(scaled.front());
        }
        summary.push_back(std::move(s));
    }

    void write(const fs::path& path) const {
        CsvWriter out(path);
        out.row({"method", "effect", "m_value", "draw", "value"});
        for (const auto& r : rows) out.row(r);
        out.close();
    }
};

bool is_bkmr(const std::string& m) { return m == "bkmr-cma" || m == "bkmr-cma-vs"; }

void linear_method_effects(const std::string& method, const LoadedData& loaded, const ResolvedContrast& rc,
                           const EffectsOptions& eo, bool cde_only, double mult, std::uint64_t seed, EffectTable& table) {
    std::vector<ExtraTerm> extras;
    for (const auto& t : eo.extra_terms) extras.push_back(ExtraTerm::parse(t));
    const LinearMode mode = method == "linear" ? LinearMode::interaction : LinearMode::traditional;
    const Dataset& d = *loaded.data;
    std::vector<LinearEffects> results;
    if (eo.bootstrap) {
        auto b = bootstrap_linear_effects(d, mode, extras, rc.z, rc.z_star, std::nullopt, rc.m_values,
                                          eo.bootstrap_resamples, derive_seed(seed, kMediateStream + 100));
        results = std::move(b.resamples);
    } else {
        const auto fit = fit_linear_mediation(d, mode, extras);
        results.push_back(method == "traditional"
                              ? linear_effects(fit, rc.z, rc.z_star, std::nullopt, rc.m_values)
                              : counterfactual_linear_effects(fit, rc.z, rc.z_star, std::nullopt, rc.m_values));
    }
    auto column = [&](auto get) {
        std::vector<double> v;
        for (const auto& r : results) v.push_back(get(r));
        return v;
    };
    if (!cde_only) {
        table.add_samples(method, "TE", std::nullopt, column([](const LinearEffects& e) { return e.te; }), mult);
        table.add_samples(method, "NDE", std::nullopt, column([](const LinearEffects& e) { return e.nde; }), mult);
        table.add_samples(method, "NIE", std::nullopt, column([](const LinearEffects& e) { return e.nie; }), mult);
    }
    for (std::size_t i = 0; i < rc.m_values.size(); ++i) {
        table.add_samples(method, "CDE", rc.m_values_raw[i], column([&](const LinearEffects& e) { return e.cde[i]; }),
                          mult);
    }
}

int cmd_fit(const GlobalOptions& g, const DataOptions& dopt, const SamplerOptions& so, const std::string& model,
            bool vs, const std::vector<std::string>& kernel_mods, bool kernel_mods_set, std::ostream& out,
            std::ostream& err) {
    const fs::path dir = g.out_dir;
    prepare_out_dir(dir);
    const LoadedData loaded = load_dataset(read_csv(dopt.path), dopt.roles, dopt.transforms);
    std::string resolved_model = model.empty() ? (dopt.roles.mediator.empty() ? "total" : "outcome") : model;
    ModelRole role = resolved_model == "mediator" ? ModelRole::mediator
                     : resolved_model == "outcome" ? ModelRole::outcome
                                                   : ModelRole::total;
    if (role != ModelRole::total && !loaded.data->has_mediator()) {
        throw Error(ErrorCode::schema, "the " + resolved_model + " model needs a mediator column");
    }
    const auto mods = kernel_mods_set ? kernel_mods : dopt.roles.modifiers;
    const auto draws = fit_role(loaded.data, role, mods, so, vs, g.seed, err);

    write_trace_csv(dir / "trace.csv", *draws);
    save_model(dir / "model.json", *draws);
    Json diag = diagnostics_to_json(*draws);
    diag["model"] = resolved_model;
    write_json(dir / "diagnostics.json", diag);

    Json config = dopt.to_json();
    config["sampler"] = so.to_json();
    config["model"] = resolved_model;
    config["variable_selection"] = vs;
    config["kernel_modifiers"] = mods;
    Json man = manifest("fit", g, config, {"trace.csv", "model.json", "diagnostics.json", "manifest.json"});
    man["transforms"] = transforms_json(loaded);
    write_json(dir / "manifest.json", man);
    out << "fit: " << draws->size() << " retained draws written to " << dir.string() << '\n';
    return 0;
}

int cmd_effects(const std::string& name, const GlobalOptions& g, const DataOptions& dopt, const SamplerOptions& so,
                const ContrastOptions& co, const EffectsOptions& eo, std::ostream& out, std::ostream& err) {
    const bool cde_only = name == "cde";
    const fs::path dir = g.out_dir;
    prepare_out_dir(dir);
    const LoadedData loaded = load_dataset(read_csv(dopt.path), dopt.roles, dopt.transforms);
    if (!loaded.data->has_mediator()) throw Error(ErrorCode::schema, "mediation needs a mediator column");
    const ResolvedContrast rc = resolve_contrast(loaded, co.resolved());
    if (cde_only && rc.m_values.empty()) throw Error(ErrorCode::input, "cde needs mediator levels");
    const double mult = effect_multiplier(loaded, eo.effect_scale);
    const auto mods = eo.kernel_modifiers_set ? eo.kernel_modifiers : dopt.roles.modifiers;

    int bkmr_methods = 0;
    for (const auto& m : eo.methods) bkmr_methods += is_bkmr(m) ? 1 : 0;
    const bool saved = !eo.outcome_model.empty() || !eo.mediator_model.empty() || !eo.total_model.empty();
    if (saved && bkmr_methods != 1) throw Error(ErrorCode::input, "saved models need exactly one bkmr method");

    EffectTable table;
    Json extra = Json::object();
    std::vector<std::string> seen;
    for (std::size_t k = 0; k < eo.methods.size(); ++k) {
        const std::string& method = eo.methods[k];
        if (std::find(seen.begin(), seen.end(), method) != seen.end()) continue;
        seen.push_back(method);
        if (!is_bkmr(method)) {
            linear_method_effects(method, loaded, rc, eo, cde_only, mult, g.seed, table);
            continue;
        }
        const bool vs = method == "bkmr-cma-vs";
        auto get = [&](ModelRole role, const std::string& path) {
            return path.empty() ? fit_role(loaded.data, role, mods, so, vs, g.seed, err) : load_model(path);
        };
        ContrastSpec cs;
        cs.z_star = rc.z_star;
        cs.z = rc.z;
        cs.k_inner = eo.k_inner;
        cs.m_values = rc.m_values;
        cs.modifier_values = rc.modifier_values;
        MediationOptions mo;
        mo.surface_mode = eo.surface_mode == "draw" ? SurfaceMode::conditional_draw : SurfaceMode::conditional_mean;
        mo.mediator_noise = !eo.no_mediator_noise;
        mo.total_effect_from_mediation_models = eo.te_from_mediation;
        const std::uint64_t seed = derive_seed(g.seed, kMediateStream, vs ? 1 : 0);

        const PosteriorSurface outcome(get(ModelRole::outcome, eo.outcome_model));
        EffectSamples s;
        if (cde_only) {
            s = estimate_cde(outcome, cs, seed, mo);
        } else {
            const auto mediator_draws = get(ModelRole::mediator, eo.mediator_model);
            const PosteriorSurface mediator(mediator_draws);
            // With te_from_mediation the total surface is never evaluated.
            const PosteriorSurface total(eo.te_from_mediation && eo.total_model.empty()
                                             ? mediator_draws
                                             : get(ModelRole::total, eo.total_model));
            s = estimate_mediation(mediator, outcome, total, cs, seed, mo);
            table.add_samples(method, "TE", std::nullopt, s.te, mult);
            table.add_samples(method, "NDE", std::nullopt, s.nde, mult);
            table.add_samples(method, "NIE", std::nullopt, s.nie, mult);
        }
        for (std::size_t i = 0; i < s.cde.size(); ++i) table.add_samples(method, "CDE", rc.m_values_raw[i], s.cde[i], mult);
        for (const auto& w : s.warnings) err << "warning: " << w << '\n';
        extra[method] = {{"warnings", s.warnings}};
    }

    table.write(dir / "effects.csv");
    Json summary;
    summary["effects"] = table.summary;
    summary["contrast"] = rc.to_json();
    summary["effect_scale"] = eo.effect_scale;
    summary["assumptions"] = identification_assumptions();
    summary["methods"] = extra;
    write_json(dir / "summary.json", summary);

    Json config = dopt.to_json();
    config["sampler"] = so.to_json();
    config["effects"] = eo.to_json();
    config["contrast"] = co.resolved().z_raw.empty()
                             ? Json{{"quantiles", {co.resolved().q_star, co.resolved().q}}}
                             : Json{{"z_star", co.input.z_star_raw}, {"z", co.input.z_raw}};
    config["contrast"]["m_values"] = co.input.m_raw;
    config["contrast"]["m_quantiles"] = co.resolved().m_quantiles;
    config["contrast"]["modifier_values"] = co.modifier_values;
    Json man = manifest(name, g, config, {"effects.csv", "summary.json", "manifest.json"});
    man["transforms"] = transforms_json(loaded);
    write_json(dir / "manifest.json", man);
    out << name << ": " << table.rows.size() << " effect rows written to " << dir.string() << '\n';
    return 0;
}

struct SimulateOptions {
    int scenario = 1;
    int exposures = 3;
    bool desk = false;
    int replicates = -1;
    int sample_size = -1;
    long truth_size = -1;
    std::vector<std::string> methods = {"bkmr-cma", "bkmr-cma-vs", "linear", "traditional"};
    int k_inner = 100;
    bool per_replicate_quantiles = false;
    bool identity_sigma = false;
    std::string mediator_surface, outcome_surface;

    void add(CLI::App* app) {
        app->add_option("--scenario", scenario, "Scenario 1-4")->check(CLI::Range(1, 4))->capture_default_str();
        app->add_option("--num-exposures", exposures, "Number of exposures L")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_flag("--desk", desk, "Desk scale: 50 replicates of 200, truth 2e5, 2000 iterations");
        app->add_option("--replicates", replicates, "Replicated datasets");
        app->add_option("--sample-size", sample_size, "Rows per replicate");
        app->add_option("--truth-size", truth_size, "Truth population size");
        app->add_option("--methods", methods, "Methods to compare")
            ->delimiter(',')
            ->check(CLI::IsMember({"bkmr-cma", "bkmr-cma-vs", "linear", "linear-noint", "traditional"}));
        app->add_option("--k-inner", k_inner, "Simulated mediators per draw")->capture_default_str();
        app->add_flag("--per-replicate-quantiles", per_replicate_quantiles, "Contrast at each replicate's own quantiles");
        app->add_flag("--identity-sigma", identity_sigma, "Independent exposures");
        app->add_option("--mediator-surface", mediator_surface, "Override, e.g. h1_log(z1)");
        app->add_option("--outcome-surface", outcome_surface, "Override, e.g. h2_quad(z1,m)");
    }
};

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& so, const SamplerOptions& sampler, bool iterations_set,
                 std::ostream& out, std::ostream& err) {
    const fs::path dir = g.out_dir;
    prepare_out_dir(dir);
    ScenarioSpec spec = paper_scenario(so.scenario, so.exposures);
    if (so.identity_sigma) spec.sigma = build_sigma(so.exposures, SigmaSource::identity);
    if (!so.mediator_surface.empty()) spec.mediator_surface = SurfaceTerm::parse(so.mediator_surface);
    if (!so.outcome_surface.empty()) spec.outcome_surface = SurfaceTerm::parse(so.outcome_surface);
    spec.seed = g.seed;
    StudyConfig study;
    if (so.desk) {
        apply_desk_scale(spec);
        study = desk_study_config();
    }
    if (so.replicates > 0) spec.replicates = so.replicates;
    if (so.sample_size > 0) spec.sample_size = so.sample_size;
    if (so.truth_size > 0) spec.truth_size = so.truth_size;
    spec.per_replicate_quantiles = so.per_replicate_quantiles;
    study.methods.clear();
    for (const auto& m : so.methods) study.methods.push_back(parse_method(m));
    if (!so.desk || iterations_set) study.mcmc = sampler.resolved();
    study.priors = sampler.priors;
    study.k_inner = so.k_inner;
    spec.validate();

    const Truth truth = generate_truth(spec);
    const StudyResults res = run_study(spec, truth, study);
    for (const auto& f : res.failures) err << "warning: " << f << '\n';

    CsvWriter results(dir / "results.csv");
    results.row({"scenario", "L", "method", "effect", "m_value", "statistic", "value"});
    for (const auto& r : res.rows) {
        results.row({std::to_string(r.scenario), std::to_string(r.num_exposures), r.method, r.effect,
                     r.m_value ? format_double(*r.m_value) : std::string(), r.statistic, format_double(r.value)});
    }
    results.close();
    CsvWriter reps(dir / "replicates.csv");
    reps.row({"scenario", "L", "replicate", "method", "effect", "m_value", "estimate", "truth"});
    for (const auto& e : res.estimates) {
        reps.row({std::to_string(spec.id), std::to_string(spec.num_exposures), std::to_string(e.replicate),
                  method_name(e.method), e.effect, e.m_value ? format_double(*e.m_value) : std::string(),
                  format_double(e.estimate), format_double(e.truth)});
    }
    reps.close();

    const auto& o = truth.oracle;
    Json tj;
    tj["scenario"] = spec.id;
    tj["num_exposures"] = spec.num_exposures;
    tj["mediator_surface"] = spec.mediator_surface.to_string();
    tj["outcome_surface"] = spec.outcome_surface.to_string();
    tj["sigma_m"] = truth.population.sigma_m;
    tj["sigma_y"] = truth.population.sigma_y;
    tj["z_star"] = std::vector<double>(o.z_star.data(), o.z_star.data() + o.z_star.size());
    tj["z"] = std::vector<double>(o.z.data(), o.z.data() + o.z.size());
    tj["m_values"] = o.m_values;
    tj["nde"] = o.nde;
    tj["nie"] = o.nie;
    tj["te"] = o.te;
    tj["cde"] = o.cde;
    tj["oracle_draws"] = o.draws;
    write_json(dir / "truth.json", tj);

    Json config;
    config["scenario"] = spec.id;
    config["num_exposures"] = spec.num_exposures;
    config["replicates"] = spec.replicates;
    config["sample_size"] = spec.sample_size;
    config["truth_size"] = spec.truth_size;
    config["desk"] = so.desk;
    config["methods"] = so.methods;
    config["k_inner"] = so.k_inner;
    config["per_replicate_quantiles"] = so.per_replicate_quantiles;
    config["identity_sigma"] = so.identity_sigma;
    config["mediator_surface"] = spec.mediator_surface.to_string();
    config["outcome_surface"] = spec.outcome_surface.to_string();
    config["mcmc"] = {{"iterations", study.mcmc.iterations},
                      {"burn_in", study.mcmc.resolved_burn_in()},
                      {"thin", study.mcmc.thin}};
    Json man = manifest("simulate", g, config, {"results.csv", "replicates.csv", "truth.json", "manifest.json"});
    man["failures"] = res.failures;
    write_json(dir / "manifest.json", man);
    out << "simulate: " << res.rows.size() << " result rows written to " << dir.string() << '\n';
    return 0;
}

int cmd_report(const GlobalOptions& g, const std::vector<std::string>& inputs, std::ostream& out) {
    const fs::path dir = g.out_dir;
    prepare_out_dir(dir);
    std::vector<fs::path> paths(inputs.begin(), inputs.end());
    const auto counts = write_report(paths, dir);
    Json config;
    config["inputs"] = inputs;
    Json man = manifest("report", g, config,
                        {"results_merged.csv", "fig_effects_ci.csv", "fig_effects_rmse.csv", "fig_cde_ci.csv",
                         "fig_cde_rmse.csv", "manifest.json"});
    man["rows"] = {{"merged", counts.merged_rows},
                   {"effects_ci", counts.effects_ci_rows},
                   {"effects_rmse", counts.effects_rmse_rows},
                   {"cde_ci", counts.cde_ci_rows},
                   {"cde_rmse", counts.cde_rmse_rows}};
    write_json(dir / "manifest.json", man);
    out << "report: " << counts.merged_rows << " rows merged into " << dir.string() << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian kernel machine regression causal mediation analysis"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "TOML or INI file with option values");
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
    app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();

    DataOptions fit_data, med_data, cde_data;
    SamplerOptions fit_sampler, med_sampler, cde_sampler, sim_sampler;
    std::string fit_model;
    bool fit_vs = false;
    std::vector<std::string> fit_mods;

    auto* fit = app.add_subcommand("fit", "Fit one BKMR model and save its draws");
    fit_data.add(fit, false);
    fit_sampler.add(fit);
    fit->add_option("--model", fit_model, "outcome, mediator or total (default: outcome with a mediator, else total)")
        ->check(CLI::IsMember({"outcome", "mediator", "total"}));
    fit->add_flag("--variable-selection", fit_vs, "Spike-and-slab selection on the kernel weights");
    auto* fit_mods_opt = fit->add_option("--kernel-modifiers", fit_mods, "Modifiers entering the kernel")->delimiter(',');

    ContrastOptions med_contrast, cde_contrast;
    EffectsOptions med_effects, cde_effects;
    auto* mediate = app.add_subcommand("mediate", "Natural direct, indirect and total effects");
    med_data.add(mediate, true);
    med_sampler.add(mediate);
    med_contrast.add(mediate, false);
    med_effects.add(mediate, true);

    auto* cde = app.add_subcommand("cde", "Controlled direct effects at fixed mediator levels");
    cde_data.add(cde, true);
    cde_sampler.add(cde);
    cde_contrast.add(cde, true);
    cde_effects.add(cde, false);

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario against its truth oracle");
    sim.add(simulate);
    sim_sampler.add(simulate);

    std::vector<std::string> report_inputs;
    auto* report = app.add_subcommand("report", "Merge simulate results into per-figure tables");
    report->add_option("inputs", report_inputs, "results.csv files")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorCode::input);
    }

    try {
        if (g.threads > 0) omp_set_num_threads(g.threads);
        for (auto* sub : {mediate, cde}) {
            EffectsOptions& eo = sub == mediate ? med_effects : cde_effects;
            eo.kernel_modifiers_set = sub->count("--kernel-modifiers") > 0;
        }
        if (fit->parsed()) {
            return cmd_fit(g, fit_data, fit_sampler, fit_model, fit_vs, fit_mods, fit_mods_opt->count() > 0, out, err);
        }
        if (mediate->parsed()) return cmd_effects("mediate", g, med_data, med_sampler, med_contrast, med_effects, out, err);
        if (cde->parsed()) return cmd_effects("cde", g, cde_data, cde_sampler, cde_contrast, cde_effects, out, err);
        if (simulate->parsed()) {
            return cmd_simulate(g, sim, sim_sampler, simulate->count("--iterations") > 0, out, err);
        }
        if (report->parsed()) return cmd_report(g, report_inputs, out);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace bkmr
