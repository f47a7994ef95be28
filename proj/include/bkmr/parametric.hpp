#pragma once

#include "bkmr/dataset.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bkmr {

enum class LinearMode { interaction, traditional };

/// Additional outcome-model regressor built from exposures, covariates or
/// modifiers (never the mediator): a copy of a column, its square, or the
/// product of two columns.
struct ExtraTerm {
    enum class Kind { main, square, product };
    Kind kind = Kind::main;
    std::string a;
    std::string b;

    std::string name() const;
    /// Parses "age", "age^2" or "age*Mn".
    static ExtraTerm parse(const std::string& text);
};

/// OLS fits of
///   E[M] = beta0 + beta1'Z + beta2'C
///   E[Y] = theta0 + theta1'Z + theta2 M + theta3'Z M + theta4'C + eta'extras
/// where C holds the dataset covariates followed by its modifiers. In
/// traditional mode the Z M terms are left out and theta3 is a zero vector,
/// so theta1/theta2/theta4 play the role of gamma1/gamma2/gamma3.
struct LinearMediationFit {
    LinearMode mode = LinearMode::interaction;
    std::vector<std::string> exposure_names;
    std::vector<std::string> covariate_names;
    VectorXd covariate_means;

    double beta0 = 0.0;
    VectorXd beta1;
    VectorXd beta2;
    double theta0 = 0.0;
    VectorXd theta1;
    double theta2 = 0.0;
    VectorXd theta3;
    VectorXd theta4;
    std::vector<ExtraTerm> extras;
    VectorXd extra_coef;

    double mediator_residual_var = 0.0;
    double outcome_residual_var = 0.0;
    std::vector<std::string> mediator_terms;
    std::vector<std::string> outcome_terms;
    VectorXd mediator_coef;  // design order, for reference
    VectorXd mediator_se;
    VectorXd outcome_coef;
    VectorXd outcome_se;

    /// E[M | z, c].
    double mediator_mean(const VectorXd& z, const VectorXd& c) const;
    /// E[Y | z, m, c].
    double outcome_mean(const VectorXd& z, double m, const VectorXd& c) const;
};

LinearMediationFit fit_linear_mediation(const Dataset& data, LinearMode mode,
                                        const std::vector<ExtraTerm>& extras = {});

/// theta1'(z - z*) + theta3'(z - z*) [beta0 + beta1'z* + beta2'c] (+ extra-term differences).
double linear_nde(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star,
                  const std::optional<VectorXd>& c_bar = std::nullopt);
/// (theta2 + theta3'z) beta1'(z - z*).
double linear_nie(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star);
/// (theta1 + theta3 m)'(z - z*) (+ extra-term differences).
double linear_cde(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star, double m,
                  const std::optional<VectorXd>& c_bar = std::nullopt);
/// E[Y_{z M_z}] - E[Y_{z* M_z*}] by composing the mediator model into the outcome model.
double linear_te(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star,
                 const std::optional<VectorXd>& c_bar = std::nullopt);

struct TraditionalEffects {
    double nde = 0.0;
    double nie = 0.0;
};

/// Product method: NDE = gamma1'(z - z*), NIE = gamma2 beta1'(z - z*). Needs a traditional-mode fit.
TraditionalEffects traditional_effects(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star);

struct LinearEffects {
    double nde = 0.0;
    double nie = 0.0;
    double te = 0.0;
    std::vector<double> cde;
};

/// Counterfactual formulas whatever the fit mode (the linear-noint method on a traditional fit).
LinearEffects counterfactual_linear_effects(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star,
                                            const std::optional<VectorXd>& c_bar, const std::vector<double>& m_values);
/// Product method for traditional fits without extra terms, counterfactual formulas otherwise.
LinearEffects linear_effects(const LinearMediationFit& fit, const VectorXd& z, const VectorXd& z_star,
                             const std::optional<VectorXd>& c_bar, const std::vector<double>& m_values);

struct BootstrapResult {
    std::vector<LinearEffects> resamples;
    long failures = 0;
};

/// Nonparametric bootstrap of the linear effects; resample b uses a generator
/// derived from (seed, b) and resamples run in parallel.
BootstrapResult bootstrap_linear_effects(const Dataset& data, LinearMode mode, const std::vector<ExtraTerm>& extras,
                                         const VectorXd& z, const VectorXd& z_star,
                                         const std::optional<VectorXd>& c_bar, const std::vector<double>& m_values,
                                         int resamples, std::uint64_t seed);

}  // namespace bkmr
