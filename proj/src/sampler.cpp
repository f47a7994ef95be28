#include "bkmr/sampler.hpp"

#include "bkmr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bkmr {

void PriorConfig::validate() const {
    if (!(a_sigma > 0 && b_sigma > 0 && mu_lambda > 0 && var_lambda > 0 && slab_shape > 0 && slab_rate > 0)) {
        throw Error(ErrorCode::input, "prior parameters must be strictly positive");
    }
    if (!(pi_inclusion > 0 && pi_inclusion < 1)) throw Error(ErrorCode::input, "pi_inclusion must lie in (0, 1)");
    if (!(rho_lower >= 0 && rho_upper > rho_lower)) throw Error(ErrorCode::input, "invalid rho bounds");
}

void McmcConfig::validate() const {
    if (iterations < 1) throw Error(ErrorCode::input, "iterations must be positive");
    const int burn = resolved_burn_in();
    if (burn < 0 || burn >= iterations) throw Error(ErrorCode::input, "burn_in must lie in [0, iterations)");
    if (thin < 1) throw Error(ErrorCode::input, "thin must be >= 1");
    if (retained() < 1) throw Error(ErrorCode::input, "configuration retains no draws");
    if (!(lambda_step > 0 && r_step > 0 && rho_step > 0 && birth_sd > 0)) {
        throw Error(ErrorCode::input, "proposal step sizes must be positive");
    }
    if (!(adapt_fraction >= 0 && adapt_fraction <= 1)) throw Error(ErrorCode::input, "adapt_fraction must lie in [0, 1]");
    if (!(target_acceptance > 0 && target_acceptance < 1)) {
        throw Error(ErrorCode::input, "target_acceptance must lie in (0, 1)");
    }
    if (fixed_lambda && !(*fixed_lambda >= 0)) throw Error(ErrorCode::input, "fixed lambda must be nonnegative");
}

MatrixXd assemble_kernel_inputs(const Dataset& data, const ModelSpec& spec) {
    const Index n = data.n();
    const Index cols = data.num_exposures() + (spec.include_mediator ? 1 : 0) +
                       static_cast<Index>(spec.modifiers.size());
    MatrixXd x(n, cols);
    Index col = 0;
    x.leftCols(data.num_exposures()) = data.z();
    col += data.num_exposures();
    if (spec.include_mediator) x.col(col++) = data.m();
    for (const auto& name : spec.modifiers) x.col(col++) = data.modifiers().col(data.modifier_index(name));
    return x;
}

MatrixXd assemble_design(const Dataset& data, const ModelSpec& spec) {
    const Index p = data.num_covariates() + (spec.intercept ? 1 : 0);
    MatrixXd c(data.n(), p);
    if (spec.intercept) c.col(0).setOnes();
    c.rightCols(data.num_covariates()) = data.c();
    return c;
}

std::vector<std::string> kernel_input_names(const Dataset& data, const ModelSpec& spec) {
    std::vector<std::string> names = data.names().exposures;
    if (spec.include_mediator) names.push_back(data.names().mediator);
    for (const auto& m : spec.modifiers) {
        data.modifier_index(m);
        names.push_back(m);
    }
    return names;
}

std::vector<std::string> design_names(const Dataset& data, const ModelSpec& spec) {
    std::vector<std::string> names;
    if (spec.intercept) names.emplace_back("(Intercept)");
    for (const auto& c : data.names().covariates) names.push_back(c);
    return names;
}

std::vector<std::string> PosteriorDraws::exposure_names() const {
    return data->names().exposures;
}

// ---------------------------------------------------------------------------

CovarianceFactor CovarianceFactor::compute(const MatrixXd& k, double lambda) {
    CovarianceFactor f;
    if (lambda == 0.0) {
        f.identity = true;
        return f;
    }
    MatrixXd v = lambda * k;
    v.diagonal().array() += 1.0;
    f.llt = cholesky_with_jitter(v).llt;
    f.log_det = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
    return f;
}

VectorXd CovarianceFactor::whiten(const VectorXd& v) const {
    if (identity) return v;
    return llt.matrixL().solve(v);
}

MatrixXd CovarianceFactor::whiten(const MatrixXd& v) const {
    if (identity) return v;
    return llt.matrixL().solve(v);
}

VectorXd CovarianceFactor::solve(const VectorXd& v) const {
    if (identity) return v;
    return llt.solve(v);
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

VectorXd residual(const VectorXd& y, const MatrixXd& design, const VectorXd& beta) {
    if (design.cols() == 0) return y;
    return y - design * beta;
}

double quad_form(const VectorXd& y, const MatrixXd& design, const VectorXd& beta, const CovarianceFactor& f) {
    return f.whiten(residual(y, design, beta)).squaredNorm();
}

double log_gamma_kernel(double x, double shape, double rate) {
    return (shape - 1.0) * std::log(x) - rate * x;
}

double log_gamma_pdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + log_gamma_kernel(x, shape, rate);
}

double log_half_normal_pdf(double x, double sd) {
    return std::log(2.0) - 0.5 * kLog2Pi - std::log(sd) - 0.5 * (x / sd) * (x / sd);
}

bool accept(double log_ratio, Rng& rng, MhResult& res) {
    res.accept_prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(std::min(log_ratio, 0.0))) : 0.0;
    if (log_ratio >= 0.0 && std::isfinite(log_ratio)) {
        res.accepted = true;
    } else {
        res.accepted = std::isfinite(log_ratio) && std::log(uniform01(rng)) < log_ratio;
    }
    return res.accepted;
}

struct Proposal {
    MatrixXd k;
    CovarianceFactor factor;
    double loglik = 0.0;
};

Proposal evaluate(const ChainData& data, const ChainState& state, const KernelState& kernel, bool prior_only) {
    Proposal p;
    if (prior_only) return p;
    p.k = kernel_matrix(data.kernel_x, kernel);
    p.factor = CovarianceFactor::compute(p.k, state.lambda);
    p.loglik = marginal_loglik(data.y, data.design, state.beta, state.sigma2, p.factor);
    return p;
}

double current_loglik(const ChainData& data, const ChainState& state, bool prior_only) {
    if (prior_only) return 0.0;
    return marginal_loglik(data.y, data.design, state.beta, state.sigma2, state.factor);
}

void commit(ChainState& state, KernelState kernel, Proposal&& p, bool prior_only) {
    state.kernel = std::move(kernel);
    if (!prior_only) {
        state.k = std::move(p.k);
        state.factor = std::move(p.factor);
    }
}

}  // namespace

double marginal_loglik(const VectorXd& y, const MatrixXd& design, const VectorXd& beta, double sigma2,
                       const CovarianceFactor& factor) {
    const double n = static_cast<double>(y.size());
    const double q = quad_form(y, design, beta, factor);
    return -0.5 * (n * (kLog2Pi + std::log(sigma2)) + factor.log_det + q / sigma2);
}

double marginal_loglik(const Dataset& data, const ModelSpec& spec, const VectorXd& beta, double sigma2,
                       double lambda, const KernelState& state) {
    if (!(sigma2 > 0) || !(lambda > 0)) throw Error(ErrorCode::input, "sigma2 and lambda must be positive");
    const MatrixXd design = assemble_design(data, spec);
    if (beta.size() != design.cols()) throw Error(ErrorCode::input, "beta length differs from design width");
    const MatrixXd x = assemble_kernel_inputs(data, spec);
    const auto factor = CovarianceFactor::compute(kernel_matrix(x, state), lambda);
    return marginal_loglik(data.y(), design, beta, sigma2, factor);
}

VectorXd update_beta(const ChainData& data, const ChainState& state, Rng& rng) {
    const Index p = data.design.cols();
    if (p == 0) return VectorXd(0);
    const MatrixXd wc = state.factor.whiten(data.design);
    const VectorXd wy = state.factor.whiten(data.y);
    const MatrixXd precision = wc.transpose() * wc;
    Eigen::LLT<MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::numerical, "covariate design is rank deficient");
    const VectorXd mean = llt.solve(wc.transpose() * wy);
    VectorXd xi(p);
    for (Index i = 0; i < p; ++i) xi(i) = std_normal(rng);
    return mean + std::sqrt(state.sigma2) * llt.matrixU().solve(xi);
}

double update_sigma2(double quad, Index n, const PriorConfig& priors, Rng& rng) {
    const double shape = priors.a_sigma + 0.5 * static_cast<double>(n);
    const double rate = priors.b_sigma + 0.5 * quad;
    return 1.0 / gamma_shape_rate(rng, shape, rate);
}

MhResult update_lambda(const ChainData& data, ChainState& state, const PriorConfig& priors, double step,
                       bool prior_only, Rng& rng) {
    MhResult res;
    const double proposed = state.lambda * std::exp(step * std::normal_distribution<double>(0.0, 1.0)(rng));
    if (!(proposed > 0) || !std::isfinite(proposed)) return res;
    const double shape = priors.lambda_shape();
    const double rate = priors.lambda_rate();
    double log_ratio = log_gamma_kernel(proposed, shape, rate) - log_gamma_kernel(state.lambda, shape, rate) +
                       std::log(proposed) - std::log(state.lambda);
    CovarianceFactor factor;
    if (!prior_only) {
        factor = CovarianceFactor::compute(state.k, proposed);
        log_ratio += marginal_loglik(data.y, data.design, state.beta, state.sigma2, factor) -
                     current_loglik(data, state, false);
    }
    if (accept(log_ratio, rng, res)) {
        state.lambda = proposed;
        if (!prior_only) state.factor = std::move(factor);
    }
    return res;
}

std::vector<KernelMove> update_kernel_state(const ChainData& data, ChainState& state, const PriorConfig& priors,
                                            const KernelSteps& steps, bool variable_selection, bool prior_only,
                                            Rng& rng) {
    std::vector<KernelMove> out;
    const Index dim = state.kernel.dim();

    if (state.kernel.mode == KernelMode::single_smoothness) {
        KernelMove mv{"rho", dim, {}};
        const double proposed = state.kernel.rho + steps.rho_step * std_normal(rng);
        if (proposed > priors.rho_lower && proposed < priors.rho_upper) {
            KernelState next = state.kernel;
            next.rho = proposed;
            Proposal p = evaluate(data, state, next, prior_only);
            const double log_ratio = p.loglik - current_loglik(data, state, prior_only);
            if (accept(log_ratio, rng, mv.result)) commit(state, std::move(next), std::move(p), prior_only);
        }
        out.push_back(std::move(mv));
        return out;
    }

    auto random_walk = [&](Index l) {
        KernelMove mv{"r_walk", l, {}};
        const double r = state.kernel.r(l);
        const double proposed = r * std::exp(steps.r_step(l) * std_normal(rng));
        if (!(proposed > 0) || !std::isfinite(proposed)) {
            out.push_back(std::move(mv));
            return;
        }
        KernelState next = state.kernel;
        next.r(l) = proposed;
        Proposal p = evaluate(data, state, next, prior_only);
        const double log_ratio = p.loglik - current_loglik(data, state, prior_only) +
                                 log_gamma_kernel(proposed, priors.slab_shape, priors.slab_rate) -
                                 log_gamma_kernel(r, priors.slab_shape, priors.slab_rate) + std::log(proposed) -
                                 std::log(r);
        if (accept(log_ratio, rng, mv.result)) commit(state, std::move(next), std::move(p), prior_only);
        out.push_back(std::move(mv));
    };

    if (!variable_selection) {
        for (Index l = 0; l < dim; ++l) random_walk(l);
        return out;
    }

    const double log_prior_odds = std::log(priors.pi_inclusion) - std::log1p(-priors.pi_inclusion);
    if (uniform01(rng) < 0.5) {
        const Index l = std::uniform_int_distribution<Index>(0, dim - 1)(rng);
        KernelMove mv{"r_switch", -1, {}};
        KernelState next = state.kernel;
        double log_ratio = 0.0;
        if (!state.kernel.delta[static_cast<std::size_t>(l)]) {
            const double r_new = std::abs(steps.birth_sd * std_normal(rng));
            if (!(r_new > 0)) {
                out.push_back(std::move(mv));
                return out;
            }
            next.r(l) = r_new;
            next.delta[static_cast<std::size_t>(l)] = true;
            log_ratio = log_prior_odds + log_gamma_pdf(r_new, priors.slab_shape, priors.slab_rate) -
                        log_half_normal_pdf(r_new, steps.birth_sd);
        } else {
            const double r_old = state.kernel.r(l);
            next.r(l) = 0.0;
            next.delta[static_cast<std::size_t>(l)] = false;
            log_ratio = -log_prior_odds - log_gamma_pdf(r_old, priors.slab_shape, priors.slab_rate) +
                        log_half_normal_pdf(r_old, steps.birth_sd);
        }
        Proposal p = evaluate(data, state, next, prior_only);
        log_ratio += p.loglik - current_loglik(data, state, prior_only);
        if (accept(log_ratio, rng, mv.result)) commit(state, std::move(next), std::move(p), prior_only);
        out.push_back(std::move(mv));
    } else {
        std::vector<Index> included;
        for (Index l = 0; l < dim; ++l) {
            if (state.kernel.delta[static_cast<std::size_t>(l)]) included.push_back(l);
        }
        if (!included.empty()) {
            const auto pick = std::uniform_int_distribution<std::size_t>(0, included.size() - 1)(rng);
            random_walk(included[pick]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct BlockTracker {
    double log_step = 0.0;
    long adapt_count = 0;
    long post_burn_total = 0;
    long post_burn_accepted = 0;
};

void track(BlockTracker& b, const MhResult& r, bool adapting, bool post_burn, double target) {
    if (adapting) {
        ++b.adapt_count;
        const double gain = std::pow(static_cast<double>(b.adapt_count), -0.6);
        b.log_step = std::clamp(b.log_step + gain * (r.accept_prob - target), std::log(1e-4), std::log(1e3));
    }
    if (post_burn) {
        ++b.post_burn_total;
        if (r.accepted) ++b.post_burn_accepted;
    }
}

}  // namespace

PosteriorDraws fit_bkmr(std::shared_ptr<const Dataset> data_ptr, const ModelSpec& spec, const PriorConfig& priors,
                        const McmcConfig& mcmc) {
    priors.validate();
    mcmc.validate();
    const Dataset& data = *data_ptr;

    PosteriorDraws result;
    result.data = data_ptr;
    result.spec = spec;
    result.kernel_x = assemble_kernel_inputs(data, spec);
    result.design = assemble_design(data, spec);
    result.kernel_names = kernel_input_names(data, spec);
    result.beta_names = design_names(data, spec);

    ChainData cd{data.y(), result.design, result.kernel_x};
    const Index n = data.n();
    const Index p = cd.design.cols();
    const Index dim = cd.kernel_x.cols();
    if (dim == 0) throw Error(ErrorCode::input, "model has no kernel inputs");

    Rng rng = make_rng(mcmc.seed, mcmc.stream);

    ChainState state;
    if (p > 0) {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(cd.design);
        if (qr.rank() < p) throw Error(ErrorCode::initialization, "covariate design is rank deficient");
        state.beta = qr.solve(cd.y);
    } else {
        state.beta = VectorXd(0);
    }
    const VectorXd resid = residual(cd.y, cd.design, state.beta);
    const double dof = static_cast<double>(std::max<Index>(n - p, 1));
    state.sigma2 = std::max(resid.squaredNorm() / dof, 1e-8);
    state.lambda = mcmc.fixed_lambda.value_or(10.0);
    if (mcmc.kernel_mode == KernelMode::single_smoothness) {
        state.kernel = KernelState::smoothness(
            std::uniform_real_distribution<double>(priors.rho_lower, priors.rho_upper)(rng), dim);
        if (!(state.kernel.rho > priors.rho_lower)) state.kernel.rho = 0.5 * (priors.rho_lower + priors.rho_upper);
    } else {
        VectorXd r(dim);
        for (Index l = 0; l < dim; ++l) r(l) = std::max(gamma_shape_rate(rng, priors.slab_shape, priors.slab_rate), 1e-6);
        state.kernel = KernelState::weights(std::move(r));
    }
    state.k = kernel_matrix(cd.kernel_x, state.kernel);
    state.factor = CovarianceFactor::compute(state.k, state.lambda);
    if (!std::isfinite(marginal_loglik(cd.y, cd.design, state.beta, state.sigma2, state.factor))) {
        throw Error(ErrorCode::initialization, "non-finite likelihood at the initial state");
    }

    const int burn = mcmc.resolved_burn_in();
    const int adapt_until = mcmc.adapt ? static_cast<int>(mcmc.adapt_fraction * burn) : 0;
    const bool sample_lambda = !mcmc.fixed_lambda.has_value();
    const bool sample_kernel = !(mcmc.fixed_lambda && *mcmc.fixed_lambda == 0.0);

    BlockTracker lambda_block;
    lambda_block.log_step = std::log(mcmc.lambda_step);
    std::vector<BlockTracker> r_blocks(static_cast<std::size_t>(dim));
    for (auto& b : r_blocks) b.log_step = std::log(mcmc.r_step);
    BlockTracker rho_block;
    rho_block.log_step = std::log(mcmc.rho_step);
    BlockTracker switch_block;

    KernelSteps steps;
    steps.r_step = VectorXd(dim);
    steps.birth_sd = mcmc.birth_sd;

    VectorXd inclusion = VectorXd::Zero(dim);
    result.draws.reserve(static_cast<std::size_t>(mcmc.retained()));

    for (int it = 0; it < mcmc.iterations; ++it) {
        const bool adapting = it < adapt_until;
        const bool post_burn = it >= burn;

        if (!mcmc.prior_only) {
            if (p > 0) state.beta = update_beta(cd, state, rng);
            state.sigma2 = update_sigma2(quad_form(cd.y, cd.design, state.beta, state.factor), n, priors, rng);
        }
        if (sample_lambda) {
            const MhResult r = update_lambda(cd, state, priors, std::exp(lambda_block.log_step), mcmc.prior_only, rng);
            track(lambda_block, r, adapting, post_burn, mcmc.target_acceptance);
        }
        if (sample_kernel) {
            for (Index l = 0; l < dim; ++l) steps.r_step(l) = std::exp(r_blocks[static_cast<std::size_t>(l)].log_step);
            steps.rho_step = std::exp(rho_block.log_step);
            const auto moves = update_kernel_state(cd, state, priors, steps, mcmc.variable_selection,
                                                   mcmc.prior_only, rng);
            for (const auto& mv : moves) {
                if (mv.label == "rho") {
                    track(rho_block, mv.result, adapting, post_burn, mcmc.target_acceptance);
                } else if (mv.label == "r_switch") {
                    track(switch_block, mv.result, false, post_burn, mcmc.target_acceptance);
                } else {
                    track(r_blocks[static_cast<std::size_t>(mv.step_index)], mv.result, adapting, post_burn,
                          mcmc.target_acceptance);
                }
            }
        }

        if (post_burn && (it - burn + 1) % mcmc.thin == 0) {
            result.draws.push_back(Draw{state.beta, state.sigma2, state.lambda, state.kernel});
            for (Index l = 0; l < dim; ++l) {
                if (state.kernel.delta[static_cast<std::size_t>(l)]) inclusion(l) += 1.0;
            }
        }
    }

    auto& diag = result.diagnostics;
    diag.inclusion_probability = inclusion / static_cast<double>(result.draws.size());
    auto report = [&](const std::string& name, const BlockTracker& b, bool has_step) {
        if (b.post_burn_total == 0) return;
        const double rate = static_cast<double>(b.post_burn_accepted) / static_cast<double>(b.post_burn_total);
        diag.acceptance[name] = rate;
        if (has_step) diag.final_step[name] = std::exp(b.log_step);
        if (b.post_burn_accepted == 0) diag.warnings.push_back("MH block '" + name + "' rejected every proposal after burn-in");
    };
    report("lambda", lambda_block, true);
    report("rho", rho_block, true);
    report("r_switch", switch_block, false);
    for (Index l = 0; l < dim; ++l) {
        report("r[" + result.kernel_names[static_cast<std::size_t>(l)] + "]", r_blocks[static_cast<std::size_t>(l)], true);
    }
    return result;
}

PosteriorDraws fit_bkmr(const Dataset& data, const ModelSpec& spec, const PriorConfig& priors,
                        const McmcConfig& mcmc) {
    return fit_bkmr(std::make_shared<const Dataset>(data), spec, priors, mcmc);
}

}  // namespace bkmr
