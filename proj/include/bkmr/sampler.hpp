#pragma once

#include "bkmr/dataset.hpp"
#include "bkmr/kernel.hpp"
#include "bkmr/rng.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bkmr {

/// Hyperparameters. sigma^-2 ~ Gamma(a_sigma, b_sigma) (shape/rate);
/// lambda ~ Gamma with the given mean and variance; rho ~ Unif(rho_lower, rho_upper);
/// r_l | delta_l ~ delta_l * Gamma(slab_shape, slab_rate) + (1 - delta_l) * point mass at 0;
/// delta_l ~ Bernoulli(pi_inclusion).
struct PriorConfig {
    double a_sigma = 0.001;
    double b_sigma = 0.001;
    double mu_lambda = 10.0;
    double var_lambda = 100.0;
    double rho_lower = 0.0;
    double rho_upper = 100.0;
    double pi_inclusion = 0.5;
    double slab_shape = 1.0;
    double slab_rate = 0.1;

    double lambda_shape() const { return mu_lambda * mu_lambda / var_lambda; }
    double lambda_rate() const { return mu_lambda / var_lambda; }
    void validate() const;
};

struct McmcConfig {
    int iterations = 10000;
    std::optional<int> burn_in;  // defaults to iterations / 2
    int thin = 1;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    double lambda_step = 0.3;  // sd of the log-lambda random walk
    double r_step = 0.2;       // sd of the log-r random walk
    double rho_step = 2.0;     // sd of the rho random walk
    double birth_sd = 1.0;     // half-normal scale for r when a component is switched on
    bool variable_selection = false;
    KernelMode kernel_mode = KernelMode::component_weights;
    bool adapt = true;
    double adapt_fraction = 0.5;  // share of burn-in spent adapting step sizes
    double target_acceptance = 0.35;

    // Test hooks.
    std::optional<double> fixed_lambda;
    bool prior_only = false;  // drop the likelihood from the lambda/kernel blocks

    int resolved_burn_in() const { return burn_in.value_or(iterations / 2); }
    int retained() const { return (iterations - resolved_burn_in()) / thin; }
    void validate() const;
};

/// Which columns enter the kernel (exposures, then the mediator, then the
/// named modifiers, in that order) and whether an intercept joins the linear
/// covariates.
struct ModelSpec {
    bool include_mediator = false;
    std::vector<std::string> modifiers;
    bool intercept = true;
};

MatrixXd assemble_kernel_inputs(const Dataset& data, const ModelSpec& spec);
MatrixXd assemble_design(const Dataset& data, const ModelSpec& spec);
std::vector<std::string> kernel_input_names(const Dataset& data, const ModelSpec& spec);
std::vector<std::string> design_names(const Dataset& data, const ModelSpec& spec);

struct Draw {
    VectorXd beta;
    double sigma2 = 1.0;
    double lambda = 1.0;
    KernelState kernel;
};

struct SamplerDiagnostics {
    std::map<std::string, double> acceptance;  // post-burn-in rate per MH block
    std::map<std::string, double> final_step;
    std::vector<std::string> warnings;
    VectorXd inclusion_probability;
};

/// Retained trace of one fitted model plus everything needed to predict from it.
struct PosteriorDraws {
    std::shared_ptr<const Dataset> data;
    ModelSpec spec;
    MatrixXd kernel_x;  // n x L'
    MatrixXd design;    // n x p (intercept first when present)
    std::vector<std::string> kernel_names;
    std::vector<std::string> beta_names;
    std::vector<Draw> draws;
    SamplerDiagnostics diagnostics;

    Index size() const { return static_cast<Index>(draws.size()); }
    /// Exposure names used by the kernel, in kernel order.
    std::vector<std::string> exposure_names() const;
};

/// Factorization of V = I + lambda K shared by the likelihood and the Gibbs steps.
struct CovarianceFactor {
    Eigen::LLT<MatrixXd> llt;
    double log_det = 0.0;
    bool identity = false;  // lambda == 0

    static CovarianceFactor compute(const MatrixXd& k, double lambda);
    /// Solves L w = v (whitening).
    VectorXd whiten(const VectorXd& v) const;
    MatrixXd whiten(const MatrixXd& v) const;
    VectorXd solve(const VectorXd& v) const;
};

/// log N(y; C beta, sigma2 (I + lambda K)).
double marginal_loglik(const Dataset& data, const ModelSpec& spec, const VectorXd& beta, double sigma2,
                       double lambda, const KernelState& state);
double marginal_loglik(const VectorXd& y, const MatrixXd& design, const VectorXd& beta, double sigma2,
                       const CovarianceFactor& factor);

/// Mutable chain state; kernel and factor always correspond to (lambda, kernel).
struct ChainState {
    VectorXd beta;
    double sigma2 = 1.0;
    double lambda = 10.0;
    KernelState kernel;
    MatrixXd k;
    CovarianceFactor factor;
};

struct MhResult {
    bool accepted = false;
    double accept_prob = 0.0;
};

/// Observed quantities that stay fixed during a chain.
struct ChainData {
    VectorXd y;
    MatrixXd design;
    MatrixXd kernel_x;
};

/// beta | rest ~ N((C'V^-1C)^-1 C'V^-1 y, sigma2 (C'V^-1C)^-1) under the flat prior.
VectorXd update_beta(const ChainData& data, const ChainState& state, Rng& rng);
/// sigma^-2 | rest ~ Gamma(a + n/2, b + Q/2), Q = (y - C beta)' V^-1 (y - C beta).
double update_sigma2(double quad_form, Index n, const PriorConfig& priors, Rng& rng);
/// Random walk on log(lambda) against its Gamma prior.
MhResult update_lambda(const ChainData& data, ChainState& state, const PriorConfig& priors, double step,
                       bool prior_only, Rng& rng);

struct KernelMove {
    std::string label;
    Index step_index = -1;  // r_l -> l, rho -> dim(); -1 when the move has no tunable step
    MhResult result;
};

struct KernelSteps {
    VectorXd r_step;  // one per kernel input
    double rho_step = 2.0;
    double birth_sd = 1.0;
};

/// One sweep over the kernel hyperparameters. Without variable selection every
/// r_l gets a log-scale random walk (or rho a plain one); with selection one
/// randomly chosen component is either switched (birth/death) or, if included,
/// moved by the random walk.
std::vector<KernelMove> update_kernel_state(const ChainData& data, ChainState& state, const PriorConfig& priors,
                                    const KernelSteps& steps, bool variable_selection, bool prior_only,
                                    Rng& rng);

PosteriorDraws fit_bkmr(std::shared_ptr<const Dataset> data, const ModelSpec& spec, const PriorConfig& priors,
                        const McmcConfig& mcmc);
PosteriorDraws fit_bkmr(const Dataset& data, const ModelSpec& spec, const PriorConfig& priors,
                        const McmcConfig& mcmc);

}  // namespace bkmr
