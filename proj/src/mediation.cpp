#include "bkmr/mediation.hpp"

#include "bkmr/errors.hpp"

#include <algorithm>
#include <exception>

namespace bkmr {

namespace {

constexpr std::uint64_t kMediationStream = 0x6d656469;  // "medi"

std::size_t min_draws(std::initializer_list<const PosteriorSurface*> models) {
    std::size_t j = static_cast<std::size_t>(-1);
    for (const auto* m : models) j = std::min(j, static_cast<std::size_t>(m->size()));
    return j;
}

/// Kernel-input rows for a model: exposures, optional mediator value, modifiers.
class PointBuilder {
public:
    PointBuilder(const PosteriorSurface& model, const ContrastSpec& spec, const char* role)
        : include_mediator_(model.draws().spec.include_mediator), exposures_(model.draws().data->num_exposures()) {
        const auto& mods = model.draws().spec.modifiers;
        for (const auto& name : mods) {
            auto it = spec.modifier_values.find(name);
            if (it == spec.modifier_values.end()) {
                throw Error(ErrorCode::schema, std::string(role) + " model uses modifier '" + name +
                                                   "' but the contrast gives no fixing value for it");
            }
            modifiers_.push_back(it->second);
        }
        if (spec.z.size() != exposures_ || spec.z_star.size() != exposures_) {
            throw Error(ErrorCode::schema, std::string(role) + " model exposure count differs from the contrast");
        }
        if (spec.c_bar) {
            c_bar_ = *spec.c_bar;
        } else {
            c_bar_ = model.draws().data->covariate_means();
        }
    }

    Index dim() const { return exposures_ + (include_mediator_ ? 1 : 0) + static_cast<Index>(modifiers_.size()); }

    SurfaceQuery query(const VectorXd& z, std::span<const double> mediator, SurfaceMode mode) const {
        const Index rows = include_mediator_ ? static_cast<Index>(mediator.size()) : 1;
        SurfaceQuery q;
        q.points.resize(rows, dim());
        for (Index i = 0; i < rows; ++i) {
            q.points.row(i).head(exposures_) = z.transpose();
            Index col = exposures_;
            if (include_mediator_) q.points(i, col++) = mediator[static_cast<std::size_t>(i)];
            for (double v : modifiers_) q.points(i, col++) = v;
        }
        q.c_bar = c_bar_;
        q.mode = mode;
        return q;
    }

private:
    bool include_mediator_;
    Index exposures_;
    std::vector<double> modifiers_;
    VectorXd c_bar_;
};

void check_schema(const PosteriorSurface& med, const PosteriorSurface& out, const PosteriorSurface& te) {
    const auto& me = med.draws().data->names().exposures;
    if (out.draws().data->names().exposures != me || te.draws().data->names().exposures != me) {
        throw Error(ErrorCode::schema, "mediator, outcome and total-effect models use different exposures");
    }
    if (med.draws().spec.include_mediator) throw Error(ErrorCode::schema, "mediator model must not have the mediator in its kernel");
    if (te.draws().spec.include_mediator) throw Error(ErrorCode::schema, "total-effect model must not have the mediator in its kernel");
    if (!out.draws().spec.include_mediator) throw Error(ErrorCode::schema, "outcome model must have the mediator in its kernel");
}

void check_contrast(const ContrastSpec& spec) {
    if (spec.k_inner < 1) throw Error(ErrorCode::input, "k_inner must be >= 1");
    if (!spec.z.allFinite() || !spec.z_star.allFinite()) throw Error(ErrorCode::input, "non-finite contrast");
    if (spec.c_bar && !spec.c_bar->allFinite()) throw Error(ErrorCode::input, "non-finite c_bar");
    for (double m : spec.m_values) {
        if (!std::isfinite(m)) throw Error(ErrorCode::input, "non-finite mediator fixing value");
    }
}

double mean_of(const VectorXd& v) { return v.mean(); }

struct MediationPlan {
    const PosteriorSurface& med;
    const PosteriorSurface& out;
    const PosteriorSurface& te;
    PointBuilder med_points;
    PointBuilder out_points;
    PointBuilder te_points;
    const ContrastSpec& spec;
    MediationOptions options;
    std::uint64_t seed;
};

void mediation_draw(const MediationPlan& plan, Index j, EffectSamples& out) {
    const auto& spec = plan.spec;
    const auto mode = plan.options.surface_mode;
    Rng rng = make_rng(plan.seed, kMediationStream, static_cast<std::uint64_t>(j));
    const auto slot = static_cast<std::size_t>(j);

    auto simulate_mediator = [&](const VectorXd& z) {
        const double mean = plan.med.predict_mean_response(plan.med_points.query(z, {}, mode), j, &rng)(0);
        const double sd = plan.options.mediator_noise
                              ? std::sqrt(plan.med.draws().draws[slot].sigma2)
                              : 0.0;
        std::vector<double> m(static_cast<std::size_t>(spec.k_inner));
        for (auto& v : m) v = mean + sd * std_normal(rng);
        return m;
    };
    auto outcome_mean = [&](const VectorXd& z, std::span<const double> m) {
        return mean_of(plan.out.predict_mean_response(plan.out_points.query(z, m, mode), j, &rng));
    };

    const std::vector<double> m_star = simulate_mediator(spec.z_star);
    const double y_z_m_star = outcome_mean(spec.z, m_star);

    double y_z = 0.0, y_z_star = 0.0;
    if (plan.options.total_effect_from_mediation_models) {
        const std::vector<double> m_z = simulate_mediator(spec.z);
        y_z = outcome_mean(spec.z, m_z);
        y_z_star = outcome_mean(spec.z_star, m_star);
    } else {
        y_z = plan.te.predict_mean_response(plan.te_points.query(spec.z, {}, mode), j, &rng)(0);
        y_z_star = plan.te.predict_mean_response(plan.te_points.query(spec.z_star, {}, mode), j, &rng)(0);
    }
    out.nde[slot] = y_z_m_star - y_z_star;
    out.nie[slot] = y_z - y_z_m_star;
    out.te[slot] = y_z - y_z_star;

    for (std::size_t i = 0; i < spec.m_values.size(); ++i) {
        const double m = spec.m_values[i];
        const double a = plan.out.predict_mean_response(plan.out_points.query(spec.z, {&m, 1}, mode), j, &rng)(0);
        const double b = plan.out.predict_mean_response(plan.out_points.query(spec.z_star, {&m, 1}, mode), j, &rng)(0);
        out.cde[i][slot] = a - b;
    }
}

EffectSamples allocate(std::size_t draws, const ContrastSpec& spec, bool natural_effects) {
    EffectSamples s;
    if (natural_effects) {
        s.nde.assign(draws, 0.0);
        s.nie.assign(draws, 0.0);
        s.te.assign(draws, 0.0);
    }
    s.m_values = spec.m_values;
    s.cde.assign(spec.m_values.size(), std::vector<double>(draws, 0.0));
    return s;
}

template <class Body>
void for_each_draw(std::size_t draws, bool parallel, Body&& body) {
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::size_t j = 0; j < draws; ++j) {
        try {
            body(static_cast<Index>(j));
        } catch (...) {
#pragma omp critical(bkmr_mediation_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

EffectSamples run_mediation(const PosteriorSurface& med, const PosteriorSurface& out, const PosteriorSurface& te,
                            const ContrastSpec& spec, std::uint64_t seed, const MediationOptions& options,
                            bool parallel) {
    check_contrast(spec);
    check_schema(med, out, te);
    MediationPlan plan{med,
                       out,
                       te,
                       PointBuilder(med, spec, "mediator"),
                       PointBuilder(out, spec, "outcome"),
                       PointBuilder(te, spec, "total-effect"),
                       spec,
                       options,
                       seed};
    const std::size_t j = min_draws({&med, &out, &te});
    EffectSamples samples = allocate(j, spec, true);
    if (static_cast<std::size_t>(med.size()) != j || static_cast<std::size_t>(out.size()) != j ||
        static_cast<std::size_t>(te.size()) != j) {
        samples.warnings.push_back("models retain different numbers of draws; truncated to " + std::to_string(j));
    }
    for_each_draw(j, parallel, [&](Index d) { mediation_draw(plan, d, samples); });
    return samples;
}

}  // namespace

std::size_t EffectSamples::draws() const {
    if (!te.empty()) return te.size();
    if (!cde.empty()) return cde.front().size();
    return 0;
}

std::vector<EffectRow> summarize_effects(const EffectSamples& s) {
    std::vector<EffectRow> rows;
    if (!s.te.empty()) {
        rows.push_back({"TE", std::nullopt, summarize(s.te)});
        rows.push_back({"NDE", std::nullopt, summarize(s.nde)});
        rows.push_back({"NIE", std::nullopt, summarize(s.nie)});
    }
    for (std::size_t i = 0; i < s.cde.size(); ++i) rows.push_back({"CDE", s.m_values[i], summarize(s.cde[i])});
    return rows;
}

EffectSamples estimate_mediation(const PosteriorSurface& mediator, const PosteriorSurface& outcome,
                                 const PosteriorSurface& total, const ContrastSpec& spec, std::uint64_t seed,
                                 const MediationOptions& options) {
    return run_mediation(mediator, outcome, total, spec, seed, options, options.parallel);
}

EffectSamples estimate_mediation_serial(const PosteriorSurface& mediator, const PosteriorSurface& outcome,
                                        const PosteriorSurface& total, const ContrastSpec& spec,
                                        std::uint64_t seed, const MediationOptions& options) {
    return run_mediation(mediator, outcome, total, spec, seed, options, false);
}

EffectSamples estimate_cde(const PosteriorSurface& outcome, const ContrastSpec& spec, std::uint64_t seed,
                           const MediationOptions& options) {
    check_contrast(spec);
    if (!outcome.draws().spec.include_mediator) {
        throw Error(ErrorCode::schema, "controlled direct effects need the mediator among the outcome kernel inputs");
    }
    if (spec.m_values.empty()) throw Error(ErrorCode::input, "no mediator fixing values given");
    const PointBuilder points(outcome, spec, "outcome");
    const auto j = static_cast<std::size_t>(outcome.size());
    EffectSamples samples = allocate(j, spec, false);
    const auto mode = options.surface_mode;
    for_each_draw(j, options.parallel, [&](Index d) {
        Rng rng = make_rng(seed, kMediationStream + 1, static_cast<std::uint64_t>(d));
        for (std::size_t i = 0; i < spec.m_values.size(); ++i) {
            const double m = spec.m_values[i];
            const double a = outcome.predict_mean_response(points.query(spec.z, {&m, 1}, mode), d, &rng)(0);
            const double b = outcome.predict_mean_response(points.query(spec.z_star, {&m, 1}, mode), d, &rng)(0);
            samples.cde[i][static_cast<std::size_t>(d)] = a - b;
        }
    });
    return samples;
}

std::vector<std::string> identification_assumptions() {
    return {
        "no unmeasured exposure-outcome confounding given covariates",
        "no unmeasured mediator-outcome confounding given covariates and exposures",
        "no unmeasured exposure-mediator confounding given covariates",
        "no mediator-outcome confounder affected by the exposure",
    };
}

}  // namespace bkmr
