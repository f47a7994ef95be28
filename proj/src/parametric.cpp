#include "bkmr/parametric.hpp"

#include "bkmr/errors.hpp"
#include "bkmr/rng.hpp"

#include <algorithm>
#include <exception>

namespace bkmr {

std::string ExtraTerm::name() const {
    switch (kind) {
        case Kind::main: return a;
        case Kind::square: return a + "^2";
        case Kind::product: return a + "*" + b;
    }
    return a;
}

ExtraTerm ExtraTerm::parse(const std::string& text) {
    ExtraTerm t;
    if (auto pos = text.find('*'); pos != std::string::npos) {
        t.kind = Kind::product;
        t.a = text.substr(0, pos);
        t.b = text.substr(pos + 1);
    } else if (text.size() > 2 && text.ends_with("^2")) {
        t.kind = Kind::square;
        t.a = text.substr(0, text.size() - 2);
    } else {
        t.a = text;
    }
    if (t.a.empty() || (t.kind == Kind::product && t.b.empty())) {
        throw Error(ErrorCode::input, "cannot parse extra term '" + text + "'");
    }
    return t;
}

namespace {

std::optional<std::size_t> find_name(const std::vector<std::string>& names, const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin());
}

/// Looks a variable up among exposures first, then covariates (c then modifiers).
double variable_value(const std::vector<std::string>& exposure_names, const std::vector<std::string>& covariate_names,
                      const std::string& name, const VectorXd& z, const VectorXd& c) {
    if (auto i = find_name(exposure_names, name)) return z(static_cast<Index>(*i));
    if (auto i = find_name(covariate_names, name)) return c(static_cast<Index>(*i));
    throw Error(ErrorCode::schema, "extra term references unknown column '" + name + "'");
}

double term_value(const ExtraTerm& t, const std::vector<std::string>& en, const std::vector<std::string>& cn,
                  const VectorXd& z, const VectorXd& c) {
    const double a = variable_value(en, cn, t.a, z, c);
    switch (t.kind) {
        case ExtraTerm::Kind::main: return a;
        case ExtraTerm::Kind::square: return a * a;
        case ExtraTerm::Kind::product: return a * variable_value(en, cn, t.b, z, c);
    }
    return a;
}

struct OlsResult {
    VectorXd coef;
    VectorXd se;
    double residual_var = 0.0;
};

OlsResult ols(const MatrixXd& x, const VectorXd& y, const std::vector<std::string>& names) {
    const Index n = x.rows(), p = x.cols();
    if (n <= p) throw Error(ErrorCode::input, "need more observations than regressors for least squares");
    Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::string cols;
        for (Index k = qr.rank(); k < p; ++k) {
            if (!cols.empty()) cols += ", ";
            cols += names[static_cast<std::size_t>(qr.colsPermutation().indices()(k))];
        }
        throw Error(ErrorCode::singular_design, "design is rank deficient; offending columns: " + cols);
    }
    OlsResult r;
    r.coef = qr.solve(y);
    const VectorXd resid = y - x * r.coef;
    r.residual_var = resid.squaredNorm() / static_cast<double>(n - p);
    const MatrixXd xtx_inv = (x.transpose() * x).ldlt().solve(MatrixXd::Identity(p, p));
    r.se = (r.residual_var * xtx_inv.diagonal()).cwiseSqrt();
    return r;
}

VectorXd resolve_c_bar(const LinearMediationFit& fit, const std::optional<VectorXd>& c_bar) {
    const VectorXd& c = c_bar ? *c_bar : fit.covariate_means;
    if (c.size() != static_cast<Index>(fit.covariate_names.size())) {
        throw Error(ErrorCode::input, "c_bar length differs from the linear model's covariates");
    }
    return c;
}

void check_contrast(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star) {
    if (z.size() != fit.beta1.size() || z_star.size() != fit.beta1.size()) {
        throw Error(ErrorCode::input, "contrast length differs from the number of exposures");
    }
}

double extras_delta(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star, const VectorXd& c) {
    double d = 0.0;
    for (std::size_t e = 0; e < fit.extras.size(); ++e) {
        d += fit.extra_coef(static_cast<Index>(e)) *
             (term_value(fit.extras[e], fit.exposure_names, fit.covariate_names, z, c) -
              term_value(fit.extras[e], fit.exposure_names, fit.covariate_names, z_star, c));
    }
    return d;
}

}  // namespace

double LinearMediationFit::mediator_mean(const VectorXd& z, const VectorXd& c) const {
    return beta0 + beta1.dot(z) + (beta2.size() ? beta2.dot(c) : 0.0);
}

double LinearMediationFit::outcome_mean(const VectorXd& z, double m, const VectorXd& c) const {
    double v = theta0 + theta1.dot(z) + theta2 * m + theta3.dot(z) * m + (theta4.size() ? theta4.dot(c) : 0.0);
    for (std::size_t e = 0; e < extras.size(); ++e) {
        v += extra_coef(static_cast<Index>(e)) * term_value(extras[e], exposure_names, covariate_names, z, c);
    }
    return v;
}

LinearMediationFit fit_linear_mediation(const Dataset& data, LinearMode mode, const std::vector<ExtraTerm>& extras) {
    const VectorXd& m = data.m();
    const Index n = data.n(), L = data.num_exposures();
    const Index P = data.num_covariates() + data.num_modifiers();

    LinearMediationFit fit;
    fit.mode = mode;
    fit.exposure_names = data.names().exposures;
    fit.covariate_names = data.names().covariates;
    for (const auto& name : data.names().modifiers) fit.covariate_names.push_back(name);
    MatrixXd cov(n, P);
    cov << data.c(), data.modifiers();
    fit.covariate_means = P > 0 ? VectorXd(cov.colwise().mean().transpose()) : VectorXd(0);
    fit.extras = extras;

    // Mediator model: [1, Z, C]
    MatrixXd xm(n, 1 + L + P);
    xm.col(0).setOnes();
    xm.middleCols(1, L) = data.z();
    xm.rightCols(P) = cov;
    fit.mediator_terms = {"(Intercept)"};
    for (const auto& s : fit.exposure_names) fit.mediator_terms.push_back(s);
    for (const auto& s : fit.covariate_names) fit.mediator_terms.push_back(s);
    const OlsResult med = ols(xm, m, fit.mediator_terms);
    fit.beta0 = med.coef(0);
    fit.beta1 = med.coef.segment(1, L);
    fit.beta2 = med.coef.tail(P);
    fit.mediator_residual_var = med.residual_var;
    fit.mediator_coef = med.coef;
    fit.mediator_se = med.se;

    // Outcome model: [1, Z, M, (Z*M), C, extras]
    const bool inter = mode == LinearMode::interaction;
    const Index E = static_cast<Index>(extras.size());
    const Index width = 1 + L + 1 + (inter ? L : 0) + P + E;
    MatrixXd xy(n, width);
    Index col = 0;
    xy.col(col++).setOnes();
    xy.middleCols(col, L) = data.z();
    col += L;
    xy.col(col++) = m;
    if (inter) {
        xy.middleCols(col, L) = data.z().array().colwise() * m.array();
        col += L;
    }
    xy.middleCols(col, P) = cov;
    col += P;
    fit.outcome_terms = {"(Intercept)"};
    for (const auto& s : fit.exposure_names) fit.outcome_terms.push_back(s);
    fit.outcome_terms.push_back(data.names().mediator);
    if (inter) {
        for (const auto& s : fit.exposure_names) fit.outcome_terms.push_back(s + ":" + data.names().mediator);
    }
    for (const auto& s : fit.covariate_names) fit.outcome_terms.push_back(s);
    for (Index e = 0; e < E; ++e) {
        const auto& term = extras[static_cast<std::size_t>(e)];
        for (Index i = 0; i < n; ++i) {
            xy(i, col + e) = term_value(term, fit.exposure_names, fit.covariate_names, data.z().row(i).transpose(),
                                        cov.row(i).transpose());
        }
        fit.outcome_terms.push_back(term.name());
    }
    const OlsResult out = ols(xy, data.y(), fit.outcome_terms);
    col = 0;
    fit.theta0 = out.coef(col++);
    fit.theta1 = out.coef.segment(col, L);
    col += L;
    fit.theta2 = out.coef(col++);
    if (inter) {
        fit.theta3 = out.coef.segment(col, L);
        col += L;
    } else {
        fit.theta3 = VectorXd::Zero(L);
    }
    fit.theta4 = out.coef.segment(col, P);
    col += P;
    fit.extra_coef = out.coef.segment(col, E);
    fit.outcome_residual_var = out.residual_var;
    fit.outcome_coef = out.coef;
    fit.outcome_se = out.se;
    return fit;
}

double linear_nde(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star,
                  const std::optional<VectorXd>& c_bar) {
    check_contrast(fit, z, z_star);
    const VectorXd c = resolve_c_bar(fit, c_bar);
    const VectorXd delta = z - z_star;
    const double m_star = fit.mediator_mean(z_star, c);
    return fit.theta1.dot(delta) + fit.theta3.dot(delta) * m_star + extras_delta(fit, z, z_star, c);
}

double linear_nie(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star) {
    check_contrast(fit, z, z_star);
    return (fit.theta2 + fit.theta3.dot(z)) * fit.beta1.dot(z - z_star);
}

double linear_cde(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star, double m,
                  const std::optional<VectorXd>& c_bar) {
    check_contrast(fit, z, z_star);
    const VectorXd delta = z - z_star;
    double v = (fit.theta1 + fit.theta3 * m).dot(delta);
    if (!fit.extras.empty()) v += extras_delta(fit, z, z_star, resolve_c_bar(fit, c_bar));
    return v;
}

double linear_te(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star,
                 const std::optional<VectorXd>& c_bar) {
    check_contrast(fit, z, z_star);
    const VectorXd c = resolve_c_bar(fit, c_bar);
    return fit.outcome_mean(z, fit.mediator_mean(z, c), c) - fit.outcome_mean(z_star, fit.mediator_mean(z_star, c), c);
}

TraditionalEffects traditional_effects(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star) {
    if (fit.mode != LinearMode::traditional) {
        throw Error(ErrorCode::input, "traditional effects need a fit without exposure-mediator interactions");
    }
    check_contrast(fit, z, z_star);
    const VectorXd delta = z - z_star;
    TraditionalEffects e;
    e.nde = fit.theta1.dot(delta);
    e.nie = fit.theta2 * fit.beta1.dot(delta);
    return e;
}

LinearEffects counterfactual_linear_effects(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star,
                                            const std::optional<VectorXd>& c_bar, const std::vector<double>& m_values) {
    LinearEffects e;
    e.nde = linear_nde(fit, z, z_star, c_bar);
    e.nie = linear_nie(fit, z, z_star);
    e.te = e.nde + e.nie;
    for (double m : m_values) e.cde.push_back(linear_cde(fit, z, z_star, m, c_bar));
    return e;
}

LinearEffects linear_effects(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star,
                             const std::optional<VectorXd>& c_bar, const std::vector<double>& m_values) {
    if (fit.mode != LinearMode::traditional || !fit.extras.empty()) {
        return counterfactual_linear_effects(fit, z, z_star, c_bar, m_values);
    }
    LinearEffects e;
    const auto t = traditional_effects(fit, z, z_star);
    e.nde = t.nde;
    e.nie = t.nie;
    e.te = e.nde + e.nie;
    for (double m : m_values) e.cde.push_back(linear_cde(fit, z, z_star, m, c_bar));
    return e;
}

BootstrapResult bootstrap_linear_effects(const Dataset& data, LinearMode mode, const std::vector<ExtraTerm>& extras,
                                         const VectorXd& z, const VectorXd& z_star,
                                         const std::optional<VectorXd>& c_bar, const std::vector<double>& m_values,
                                         int resamples, std::uint64_t seed) {
    if (resamples < 1) throw Error(ErrorCode::input, "bootstrap needs at least one resample");
    std::vector<std::optional<LinearEffects>> slots(static_cast<std::size_t>(resamples));
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < resamples; ++b) {
        try {
            Rng rng = make_rng(seed, 0x626f6f74, static_cast<std::uint64_t>(b));
            std::uniform_int_distribution<Index> pick(0, data.n() - 1);
            std::vector<Index> rows(static_cast<std::size_t>(data.n()));
            for (auto& r : rows) r = pick(rng);
            const auto fit = fit_linear_mediation(data.subset(rows), mode, extras);
            slots[static_cast<std::size_t>(b)] = linear_effects(fit, z, z_star, c_bar, m_values);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::singular_design) {
#pragma omp critical(bkmr_bootstrap_error)
                if (!error) error = std::current_exception();
            }
        } catch (...) {
#pragma omp critical(bkmr_bootstrap_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    BootstrapResult out;
    for (auto& s : slots) {
        if (s) {
            out.resamples.push_back(std::move(*s));
        } else {
            ++out.failures;
        }
    }
    return out;
}

}  // namespace bkmr
