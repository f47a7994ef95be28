#include "bkmr/simulation.hpp"

#include "bkmr/errors.hpp"
#include "bkmr/summary.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <sstream>

namespace bkmr {

namespace {

constexpr Index kBlockRows = 16384;
constexpr std::uint64_t kStreamZ = 11, kStreamM = 12, kStreamY = 13, kStreamOracle = 14, kStreamSample = 15,
                        kStreamFit = 16, kStreamMediate = 17;

double logistic4(double t) { return 4.0 / (1.0 + std::exp(-t)) - 2.0; }

double h1(SurfaceFn fn, double x) {
    switch (fn) {
        case SurfaceFn::h1_lin: return x;
        case SurfaceFn::h1_log: return logistic4(4.0 * x);
        case SurfaceFn::h1_quad: return 0.5 * x * x + 0.5 * x;
        default: break;
    }
    throw Error(ErrorCode::input, "not a one-input surface");
}

double h2(SurfaceFn fn, double x, double y) {
    switch (fn) {
        case SurfaceFn::h2_lin: return x + y + 0.5 * x * y;
        case SurfaceFn::h2_log: return logistic4(2.0 * (x + y) + x * y);
        case SurfaceFn::h2_quad: return 0.25 * (x * x + y * y) + 0.5 * x + 0.5 * y + 0.5 * x * y;
        default: break;
    }
    throw Error(ErrorCode::input, "not a two-input surface");
}

bool is_h1(SurfaceFn fn) { return fn == SurfaceFn::h1_lin || fn == SurfaceFn::h1_log || fn == SurfaceFn::h1_quad; }

}  // namespace

SurfaceFn parse_surface_fn(const std::string& name) {
    if (name == "h1_lin") return SurfaceFn::h1_lin;
    if (name == "h1_log") return SurfaceFn::h1_log;
    if (name == "h1_quad") return SurfaceFn::h1_quad;
    if (name == "h2_lin") return SurfaceFn::h2_lin;
    if (name == "h2_log") return SurfaceFn::h2_log;
    if (name == "h2_quad") return SurfaceFn::h2_quad;
    throw Error(ErrorCode::input, "unknown surface '" + name + "'");
}

std::string surface_fn_name(SurfaceFn fn) {
    switch (fn) {
        case SurfaceFn::h1_lin: return "h1_lin";
        case SurfaceFn::h1_log: return "h1_log";
        case SurfaceFn::h1_quad: return "h1_quad";
        case SurfaceFn::h2_lin: return "h2_lin";
        case SurfaceFn::h2_log: return "h2_log";
        case SurfaceFn::h2_quad: return "h2_quad";
    }
    return "?";
}

double surface(SurfaceFn fn, std::span<const double> inputs) {
    if (is_h1(fn)) {
        if (inputs.empty()) throw Error(ErrorCode::input, surface_fn_name(fn) + " needs at least one input");
        double v = 0.0;
        for (double x : inputs) v += h1(fn, x);
        return v;
    }
    if (inputs.size() != 2) throw Error(ErrorCode::input, surface_fn_name(fn) + " takes exactly two inputs");
    return h2(fn, inputs[0], inputs[1]);
}

double surface(const std::string& name, std::span<const double> inputs) {
    return surface(parse_surface_fn(name), inputs);
}

double surface_interaction_coefficient(SurfaceFn fn) {
    switch (fn) {
        case SurfaceFn::h2_lin:
        case SurfaceFn::h2_quad: return 0.5;
        case SurfaceFn::h2_log: return 1.0;  // inside the logistic
        default: return 0.0;
    }
}

double SurfaceTerm::operator()(const double* z, double m) const {
    double buf[8];
    const std::size_t k = inputs.size();
    if (k > 8) throw Error(ErrorCode::input, "surface terms take at most 8 inputs");
    for (std::size_t i = 0; i < k; ++i) buf[i] = inputs[i] == kMediatorInput ? m : z[inputs[i]];
    return surface(fn, std::span<const double>(buf, k));
}

SurfaceTerm SurfaceTerm::parse(const std::string& text) {
    const auto open = text.find('(');
    const auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw Error(ErrorCode::input, "cannot parse surface term '" + text + "'");
    }
    SurfaceTerm t;
    t.fn = parse_surface_fn(text.substr(0, open));
    std::stringstream args(text.substr(open + 1, close - open - 1));
    std::string tok;
    while (std::getline(args, tok, ',')) {
        tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
        if (tok == "m") {
            t.inputs.push_back(kMediatorInput);
        } else if (tok.size() > 1 && tok[0] == 'z') {
            const int idx = std::stoi(tok.substr(1));
            if (idx < 1) throw Error(ErrorCode::input, "exposure indices in surface terms are 1-based");
            t.inputs.push_back(idx - 1);
        } else {
            throw Error(ErrorCode::input, "unknown surface input '" + tok + "'");
        }
    }
    if (!is_h1(t.fn) && t.inputs.size() != 2) throw Error(ErrorCode::input, "two-input surface needs two inputs");
    if (t.inputs.empty()) throw Error(ErrorCode::input, "surface term needs inputs");
    return t;
}

std::string SurfaceTerm::to_string() const {
    std::string s = surface_fn_name(fn) + "(";
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (i) s += ",";
        s += inputs[i] == kMediatorInput ? std::string("m") : "z" + std::to_string(inputs[i] + 1);
    }
    return s + ")";
}

MatrixXd build_sigma(int num_exposures, SigmaSource source, const std::optional<MatrixXd>& leading_block) {
    if (num_exposures < 1) throw Error(ErrorCode::input, "need at least one exposure");
    const Index L = num_exposures;
    if (source == SigmaSource::identity) return MatrixXd::Identity(L, L);
    MatrixXd block(3, 3);
    if (leading_block) {
        block = *leading_block;
        if (block.rows() != block.cols()) throw Error(ErrorCode::input, "leading covariance block must be square");
    } else {
        block << 1.0, 0.34, 0.25,
                 0.34, 1.0, 0.29,
                 0.25, 0.29, 1.0;
    }
    MatrixXd sigma = MatrixXd::Constant(L, L, 0.3);
    sigma.diagonal().setOnes();
    const Index b = std::min<Index>(block.rows(), L);
    sigma.topLeftCorner(b, b) = block.topLeftCorner(b, b);
    if (!sigma.isApprox(sigma.transpose(), 0.0)) throw Error(ErrorCode::input, "covariance must be symmetric");
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::input, "covariance is not positive definite");
    return sigma;
}

void ScenarioSpec::validate() const {
    if (num_exposures < 1) throw Error(ErrorCode::input, "scenario needs exposures");
    if (sigma.rows() != num_exposures || sigma.cols() != num_exposures) {
        throw Error(ErrorCode::input, "covariance size differs from the number of exposures");
    }
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success || !sigma.isApprox(sigma.transpose())) {
        throw Error(ErrorCode::input, "scenario covariance must be symmetric positive definite");
    }
    for (const auto* term : {&mediator_surface, &outcome_surface}) {
        for (int k : term->inputs) {
            if (k >= num_exposures) throw Error(ErrorCode::input, "surface references a missing exposure");
        }
    }
    for (int k : mediator_surface.inputs) {
        if (k == SurfaceTerm::kMediatorInput) throw Error(ErrorCode::input, "mediator surface cannot use the mediator");
    }
    if (!(signal_fraction > 0 && signal_fraction < 1)) throw Error(ErrorCode::input, "signal fraction must lie in (0, 1)");
    if (truth_size < 100) throw Error(ErrorCode::input, "truth population is too small");
    if (sample_size < 10 || sample_size > truth_size) throw Error(ErrorCode::input, "invalid replicate size");
    if (replicates < 1) throw Error(ErrorCode::input, "need at least one replicate");
    const auto bytes = static_cast<double>(truth_size) * static_cast<double>(num_exposures + 2) * sizeof(double);
    if (bytes > static_cast<double>(max_truth_bytes)) {
        throw Error(ErrorCode::input, "truth population exceeds the configured memory limit");
    }
}

ScenarioSpec paper_scenario(int id, int num_exposures) {
    ScenarioSpec s;
    s.id = id;
    s.num_exposures = num_exposures;
    s.sigma = build_sigma(num_exposures);
    const int mn = 0, pb = 2, bl = SurfaceTerm::kMediatorInput;
    switch (id) {
        case 1:
            s.mediator_surface = {SurfaceFn::h1_lin, {mn}};
            s.outcome_surface = {SurfaceFn::h1_lin, {mn, bl}};
            break;
        case 2:
            s.mediator_surface = {SurfaceFn::h1_log, {mn}};
            s.outcome_surface = {SurfaceFn::h2_log, {mn, bl}};
            break;
        case 3:
            s.mediator_surface = {SurfaceFn::h1_quad, {mn}};
            s.outcome_surface = {SurfaceFn::h2_log, {mn, bl}};
            break;
        case 4:
            if (num_exposures < 3) throw Error(ErrorCode::input, "scenario 4 needs at least 3 exposures");
            s.mediator_surface = {SurfaceFn::h2_quad, {mn, pb}};
            s.outcome_surface = {SurfaceFn::h2_quad, {mn, bl}};
            break;
        default: throw Error(ErrorCode::input, "scenario id must be 1, 2, 3 or 4");
    }
    return s;
}

void apply_desk_scale(ScenarioSpec& spec) {
    spec.replicates = 50;
    spec.sample_size = 200;
    spec.truth_size = 200'000;
}

// ---------------------------------------------------------------------------

namespace {

struct BlockStats {
    double sum = 0.0;
    double sum_sq = 0.0;
};

double pooled_variance(const std::vector<BlockStats>& blocks, Index n) {
    double s = 0.0, ss = 0.0;
    for (const auto& b : blocks) {
        s += b.sum;
        ss += b.sum_sq;
    }
    const double mean = s / static_cast<double>(n);
    return std::max(ss / static_cast<double>(n) - mean * mean, 0.0);
}

template <class Body>
void for_each_block(Index rows, bool parallel, Body&& body) {
    const Index blocks = (rows + kBlockRows - 1) / kBlockRows;
#pragma omp parallel for schedule(static) if (parallel)
    for (Index b = 0; b < blocks; ++b) {
        const Index begin = b * kBlockRows;
        body(b, begin, std::min(rows, begin + kBlockRows));
    }
}

TruthPopulation population_impl(const ScenarioSpec& spec, bool parallel) {
    spec.validate();
    const Index n = spec.truth_size, L = spec.num_exposures;
    const Index blocks = (n + kBlockRows - 1) / kBlockRows;
    const MatrixXd chol = Eigen::LLT<MatrixXd>(spec.sigma).matrixL();

    TruthPopulation pop;
    pop.z.resize(n, L);
    pop.m.resize(n);
    pop.y.resize(n);
    VectorXd hm(n), hy(n);
    std::vector<BlockStats> stats(static_cast<std::size_t>(blocks));

    for_each_block(n, parallel, [&](Index b, Index begin, Index end) {
        Rng rng = make_rng(spec.seed, kStreamZ, static_cast<std::uint64_t>(b));
        VectorXd u(L), row(L);
        BlockStats st;
        for (Index i = begin; i < end; ++i) {
            for (Index l = 0; l < L; ++l) u(l) = std_normal(rng);
            row.noalias() = chol * u;
            pop.z.row(i) = row.transpose();
            hm(i) = spec.mediator_surface(row.data(), 0.0);
            st.sum += hm(i);
            st.sum_sq += hm(i) * hm(i);
        }
        stats[static_cast<std::size_t>(b)] = st;
    });
    const double frac = (1.0 - spec.signal_fraction) / spec.signal_fraction;
    pop.sigma_m = spec.sigma_m.value_or(std::sqrt(frac * pooled_variance(stats, n)));

    for_each_block(n, parallel, [&](Index b, Index begin, Index end) {
        Rng rng = make_rng(spec.seed, kStreamM, static_cast<std::uint64_t>(b));
        VectorXd row(L);
        BlockStats st;
        for (Index i = begin; i < end; ++i) {
            pop.m(i) = hm(i) + pop.sigma_m * std_normal(rng);
            row = pop.z.row(i).transpose();
            hy(i) = spec.outcome_surface(row.data(), pop.m(i));
            st.sum += hy(i);
            st.sum_sq += hy(i) * hy(i);
        }
        stats[static_cast<std::size_t>(b)] = st;
    });
    pop.sigma_y = spec.sigma_y.value_or(std::sqrt(frac * pooled_variance(stats, n)));

    for_each_block(n, parallel, [&](Index b, Index begin, Index end) {
        Rng rng = make_rng(spec.seed, kStreamY, static_cast<std::uint64_t>(b));
        for (Index i = begin; i < end; ++i) pop.y(i) = hy(i) + pop.sigma_y * std_normal(rng);
    });
    return pop;
}

}  // namespace

TruthPopulation generate_population(const ScenarioSpec& spec) { return population_impl(spec, true); }
TruthPopulation generate_population_serial(const ScenarioSpec& spec) { return population_impl(spec, false); }

TruthOracle oracle_effects(const ScenarioSpec& spec, double sigma_m, const VectorXd& z_star, const VectorXd& z,
                           const std::vector<double>& m_values, Index draws, std::uint64_t seed) {
    if (draws < 1) throw Error(ErrorCode::input, "oracle needs at least one draw");
    TruthOracle o;
    o.z_star = z_star;
    o.z = z;
    o.m_values = m_values;
    o.draws = draws;
    const double mu_star = spec.mediator_surface(z_star.data(), 0.0);
    const double mu = spec.mediator_surface(z.data(), 0.0);
    const auto& hy = spec.outcome_surface;

    const Index blocks = (draws + kBlockRows - 1) / kBlockRows;
    // nde, nie (shared draws) and the two independent TE arms
    std::vector<std::array<double, 4>> partial(static_cast<std::size_t>(blocks), {0, 0, 0, 0});
    for_each_block(draws, true, [&](Index b, Index begin, Index end) {
        Rng rng = make_rng(seed, kStreamOracle, static_cast<std::uint64_t>(b));
        auto& acc = partial[static_cast<std::size_t>(b)];
        for (Index i = begin; i < end; ++i) {
            const double e1 = std_normal(rng), e3 = std_normal(rng), e4 = std_normal(rng);
            const double y_z_mstar = hy(z.data(), mu_star + sigma_m * e1);
            const double y_zstar_mstar = hy(z_star.data(), mu_star + sigma_m * e1);
            const double y_z_mz = hy(z.data(), mu + sigma_m * e1);
            acc[0] += y_z_mstar - y_zstar_mstar;
            acc[1] += y_z_mz - y_z_mstar;
            acc[2] += hy(z.data(), mu + sigma_m * e3);
            acc[3] += hy(z_star.data(), mu_star + sigma_m * e4);
        }
    });
    std::array<double, 4> total{0, 0, 0, 0};
    for (const auto& p : partial) {
        for (std::size_t k = 0; k < 4; ++k) total[k] += p[k];
    }
    const double nd = static_cast<double>(draws);
    o.nde = total[0] / nd;
    o.nie = total[1] / nd;
    o.te = (total[2] - total[3]) / nd;
    for (double m : m_values) o.cde.push_back(hy(z.data(), m) - hy(z_star.data(), m));
    return o;
}

Truth generate_truth(const ScenarioSpec& spec) {
    Truth t;
    t.population = generate_population(spec);
    const Index L = spec.num_exposures;
    VectorXd z_star(L), z(L);
    for (Index l = 0; l < L; ++l) {
        std::vector<double> col(t.population.z.col(l).data(), t.population.z.col(l).data() + spec.truth_size);
        std::sort(col.begin(), col.end());
        z_star(l) = quantile_sorted(col, 0.25);
        z(l) = quantile_sorted(col, 0.75);
    }
    std::vector<double> m(t.population.m.data(), t.population.m.data() + spec.truth_size);
    std::sort(m.begin(), m.end());
    const std::vector<double> m_values = {quantile_sorted(m, 0.25), quantile_sorted(m, 0.5), quantile_sorted(m, 0.75)};
    t.oracle = oracle_effects(spec, t.population.sigma_m, z_star, z, m_values, spec.truth_size, spec.seed);
    return t;
}

// ---------------------------------------------------------------------------

std::string method_name(Method m) {
    switch (m) {
        case Method::bkmr_cma: return "bkmr-cma";
        case Method::bkmr_cma_vs: return "bkmr-cma-vs";
        case Method::linear: return "linear";
        case Method::linear_noint: return "linear-noint";
        case Method::traditional: return "traditional";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    for (Method m : {Method::bkmr_cma, Method::bkmr_cma_vs, Method::linear, Method::linear_noint, Method::traditional}) {
        if (method_name(m) == name) return m;
    }
    throw Error(ErrorCode::input, "unknown method '" + name + "'");
}

StudyConfig desk_study_config() {
    StudyConfig c;
    c.mcmc.iterations = 2000;
    c.mcmc.burn_in = 1000;
    return c;
}

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

MethodEstimate estimate_with_method(Method method, const Dataset& data, const VectorXd& z_star, const VectorXd& z,
                                    const std::vector<double>& m_values, const StudyConfig& config,
                                    std::uint64_t seed) {
    MethodEstimate est;
    if (method == Method::linear || method == Method::linear_noint || method == Method::traditional) {
        const auto mode = method == Method::linear ? LinearMode::interaction : LinearMode::traditional;
        const auto fit = fit_linear_mediation(data, mode);
        const auto e = method == Method::traditional
                           ? linear_effects(fit, z, z_star, std::nullopt, m_values)
                           : counterfactual_linear_effects(fit, z, z_star, std::nullopt, m_values);
        est.nde = e.nde;
        est.nie = e.nie;
        est.te = e.te;
        est.cde = e.cde;
        return est;
    }

    McmcConfig mcmc = config.mcmc;
    mcmc.variable_selection = method == Method::bkmr_cma_vs;
    auto shared = std::make_shared<const Dataset>(data);
    auto mediator_data = std::make_shared<const Dataset>(data.with_outcome(data.m(), data.names().mediator));

    ModelSpec med_spec, out_spec, te_spec;
    out_spec.include_mediator = true;

    auto fit_model = [&](std::shared_ptr<const Dataset> d, const ModelSpec& s, std::uint64_t which) {
        McmcConfig c = mcmc;
        c.seed = seed;
        c.stream = kStreamFit * 16 + which;
        return std::make_shared<const PosteriorDraws>(fit_bkmr(std::move(d), s, config.priors, c));
    };
    const PosteriorSurface med(fit_model(mediator_data, med_spec, 0));
    const PosteriorSurface out(fit_model(shared, out_spec, 1));
    const PosteriorSurface te(fit_model(shared, te_spec, 2));

    ContrastSpec contrast;
    contrast.z_star = z_star;
    contrast.z = z;
    contrast.k_inner = config.k_inner;
    contrast.m_values = m_values;
    MediationOptions opts;
    opts.parallel = config.parallel;
    const auto samples = estimate_mediation(med, out, te, contrast, derive_seed(seed, kStreamMediate), opts);
    est.nde = mean_of(samples.nde);
    est.nie = mean_of(samples.nie);
    est.te = mean_of(samples.te);
    for (const auto& c : samples.cde) est.cde.push_back(mean_of(c));
    return est;
}

std::vector<Index> sample_replicate_rows(Index population, Index n, std::uint64_t seed, int replicate) {
    if (n > population) throw Error(ErrorCode::input, "replicate larger than the population");
    Rng rng = make_rng(seed, kStreamSample, static_cast<std::uint64_t>(replicate));
    // Floyd's algorithm: n distinct indices in O(n).
    std::set<Index> chosen;
    for (Index j = population - n; j < population; ++j) {
        const Index t = std::uniform_int_distribution<Index>(0, j)(rng);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    return {chosen.begin(), chosen.end()};
}

StudyResults run_study(const ScenarioSpec& spec, const Truth& truth, const StudyConfig& config) {
    spec.validate();
    const auto& pop = truth.population;
    const auto& oracle = truth.oracle;
    const int reps = spec.replicates;
    const std::size_t nm = config.methods.size();
    const std::size_t ncde = oracle.m_values.size();

    struct Cell {
        bool ok = false;
        MethodEstimate est;
        TruthOracle truth;
        std::string error;
    };
    std::vector<Cell> cells(static_cast<std::size_t>(reps) * nm);

#pragma omp parallel for schedule(dynamic) if (config.parallel)
    for (int r = 0; r < reps; ++r) {
        const auto rows = sample_replicate_rows(spec.truth_size, spec.sample_size, spec.seed, r);
        const Index n = spec.sample_size, L = spec.num_exposures;
        VectorXd y(n), m(n);
        MatrixXd z(n, L);
        for (Index i = 0; i < n; ++i) {
            const Index src = rows[static_cast<std::size_t>(i)];
            y(i) = pop.y(src);
            m(i) = pop.m(src);
            z.row(i) = pop.z.row(src);
        }
        ColumnNames names;
        names.mediator = "m";
        const Dataset data(y, z, MatrixXd(), m, MatrixXd(), names);

        TruthOracle target = oracle;
        if (spec.per_replicate_quantiles) {
            VectorXd zs(L), zz(L);
            for (Index l = 0; l < L; ++l) {
                std::vector<double> col(z.col(l).data(), z.col(l).data() + n);
                std::sort(col.begin(), col.end());
                zs(l) = quantile_sorted(col, 0.25);
                zz(l) = quantile_sorted(col, 0.75);
            }
            std::vector<double> ms(m.data(), m.data() + n);
            std::sort(ms.begin(), ms.end());
            const std::vector<double> mv = {quantile_sorted(ms, 0.25), quantile_sorted(ms, 0.5), quantile_sorted(ms, 0.75)};
            target = oracle_effects(spec, pop.sigma_m, zs, zz, mv, std::min<Index>(spec.truth_size, 100'000),
                                    derive_seed(spec.seed, kStreamOracle, static_cast<std::uint64_t>(r) + 1));
        }

        for (std::size_t k = 0; k < nm; ++k) {
            Cell& cell = cells[static_cast<std::size_t>(r) * nm + k];
            cell.truth = target;
            try {
                const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(r) + 1,
                                                       static_cast<std::uint64_t>(config.methods[k]) + 1);
                StudyConfig inner = config;
                inner.parallel = false;
                cell.est = estimate_with_method(config.methods[k], data, target.z_star, target.z, target.m_values,
                                                inner, seed);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    }

    StudyResults res;
    res.m_values = oracle.m_values;
    for (int r = 0; r < reps; ++r) {
        for (std::size_t k = 0; k < nm; ++k) {
            const Cell& cell = cells[static_cast<std::size_t>(r) * nm + k];
            const Method method = config.methods[k];
            if (!cell.ok) {
                res.failures.push_back("replicate " + std::to_string(r) + " " + method_name(method) + ": " + cell.error);
                continue;
            }
            res.estimates.push_back({r, method, "TE", std::nullopt, cell.est.te, cell.truth.te});
            res.estimates.push_back({r, method, "NDE", std::nullopt, cell.est.nde, cell.truth.nde});
            res.estimates.push_back({r, method, "NIE", std::nullopt, cell.est.nie, cell.truth.nie});
            for (std::size_t i = 0; i < ncde; ++i) {
                res.estimates.push_back({r, method, "CDE", oracle.m_values[i], cell.est.cde[i], cell.truth.cde[i]});
            }
        }
    }

    auto aggregate = [&](Method method, const std::string& effect, std::optional<double> m_value, double truth_value) {
        std::vector<double> values;
        double sq = 0.0;
        for (const auto& e : res.estimates) {
            if (e.method != method || e.effect != effect || e.m_value != m_value) continue;
            values.push_back(e.estimate);
            sq += (e.estimate - e.truth) * (e.estimate - e.truth);
        }
        auto push = [&](const std::string& stat, double v) {
            res.rows.push_back({spec.id, spec.num_exposures, method_name(method), effect, m_value, stat, v});
        };
        push("truth", truth_value);
        push("n", static_cast<double>(values.size()));
        if (values.size() < 2) return;
        const auto s = summarize(values);
        push("median", s.median);
        push("lower", s.lower);
        push("upper", s.upper);
        push("mean", s.mean);
        push("sd", s.sd);
        push("bias", s.mean - truth_value);
        push("rmse", std::sqrt(sq / static_cast<double>(values.size())));
    };
    for (Method method : config.methods) {
        aggregate(method, "TE", std::nullopt, oracle.te);
        aggregate(method, "NDE", std::nullopt, oracle.nde);
        aggregate(method, "NIE", std::nullopt, oracle.nie);
        for (std::size_t i = 0; i < ncde; ++i) aggregate(method, "CDE", oracle.m_values[i], oracle.cde[i]);
    }
    return res;
}

double study_value(const StudyResults& results, Method method, const std::string& effect,
                   const std::string& statistic, std::optional<std::size_t> m_index) {
    std::optional<double> m_value;
    if (m_index) m_value = results.m_values.at(*m_index);
    for (const auto& row : results.rows) {
        if (row.method == method_name(method) && row.effect == effect && row.statistic == statistic &&
            row.m_value == m_value) {
            return row.value;
        }
    }
    throw Error(ErrorCode::input, "statistic not found: " + method_name(method) + " " + effect + " " + statistic);
}

}  // namespace bkmr
